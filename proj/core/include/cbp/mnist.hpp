#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "cbp/rng.hpp"
#include "cbp/stream.hpp"

namespace cbp {

// A loaded image/label dataset. Pixels are stored as floats in [0,1]
// (raw byte / 255); one image is `width` consecutive values.
struct MnistData {
    std::size_t count = 0;
    std::size_t width = 0;
    std::vector<float> images;
    std::vector<std::uint8_t> labels;
};

// Parses big-endian IDX image/label file pairs (magics 0x00000803 and
// 0x00000801). Throws DataError on bad magic, truncation (naming the byte
// offset), or image/label count mismatch.
MnistData mnist_load(const std::string& image_path, const std::string& label_path);

struct MnistStreamConfig {
    long period = 60000;  // examples per pixel permutation
    std::uint64_t seed = 0;
};

// Online classification stream over a fixed dataset. Every `period` examples
// a fresh uniform pixel permutation and a fresh presentation order are drawn
// (including at the start); independently, the presentation order is
// reshuffled whenever a full pass over the dataset completes. Output pixel i
// is input pixel perm[i].
class MnistStream final : public SampleStream {
public:
    MnistStream(std::shared_ptr<const MnistData> data, const MnistStreamConfig& cfg);

    void next(Sample& out) override;
    std::size_t input_dim() const override { return data_->width; }
    std::size_t output_dim() const override { return n_classes_; }
    bool is_classification() const override { return true; }

    const std::vector<std::uint32_t>& permutation() const { return perm_; }
    const MnistData& data() const { return *data_; }

private:
    std::shared_ptr<const MnistData> data_;
    MnistStreamConfig cfg_;
    std::size_t n_classes_;
    Rng rng_perm_;
    Rng rng_order_;
    std::vector<std::uint32_t> perm_;
    std::vector<std::uint32_t> order_;
    long pos_in_period_ = 0;
    std::size_t pos_in_epoch_ = 0;
};

}  // namespace cbp
