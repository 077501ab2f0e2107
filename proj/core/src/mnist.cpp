#include "cbp/mnist.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "cbp/errors.hpp"

namespace cbp {

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::string hex32(std::uint32_t v) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "0x%08x", v);
    return buf;
}

class IdxReader {
public:
    IdxReader(const std::string& path) : path_(path), in_(path, std::ios::binary) {
        if (!in_) throw DataError(path + ": cannot open file");
    }

    std::uint32_t read_u32() {
        unsigned char b[4];
        read_bytes(b, 4);
        return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
               (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
    }

    void read_bytes(void* dst, std::size_t n) {
        in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in_.gcount()) != n)
            throw DataError(path_ + ": file truncated at byte " +
                            std::to_string(offset_ + static_cast<std::size_t>(in_.gcount())));
        offset_ += n;
    }

private:
    std::string path_;
    std::ifstream in_;
    std::size_t offset_ = 0;
};

}  // namespace

MnistData mnist_load(const std::string& image_path, const std::string& label_path) {
    MnistData data;

    IdxReader img(image_path);
    const std::uint32_t img_magic = img.read_u32();
    if (img_magic != kImageMagic)
        throw DataError(image_path + ": bad image magic " + hex32(img_magic));
    const std::uint32_t count = img.read_u32();
    const std::uint32_t rows = img.read_u32();
    const std::uint32_t cols = img.read_u32();
    data.count = count;
    data.width = static_cast<std::size_t>(rows) * cols;
    std::vector<unsigned char> raw(data.count * data.width);
    if (!raw.empty()) img.read_bytes(raw.data(), raw.size());
    data.images.resize(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i)
        data.images[i] = static_cast<float>(raw[i]) / 255.0f;

    IdxReader lab(label_path);
    const std::uint32_t lab_magic = lab.read_u32();
    if (lab_magic != kLabelMagic)
        throw DataError(label_path + ": bad label magic " + hex32(lab_magic));
    const std::uint32_t lab_count = lab.read_u32();
    if (lab_count != count)
        throw DataError(label_path + ": label count " + std::to_string(lab_count) +
                        " does not match image count " + std::to_string(count));
    data.labels.resize(lab_count);
    if (!data.labels.empty()) lab.read_bytes(data.labels.data(), data.labels.size());
    for (std::size_t i = 0; i < data.labels.size(); ++i)
        if (data.labels[i] > 9)
            throw DataError(label_path + ": label " + std::to_string(int(data.labels[i])) +
                            " out of range at index " + std::to_string(i));
    return data;
}

MnistStream::MnistStream(std::shared_ptr<const MnistData> data, const MnistStreamConfig& cfg)
    : data_(std::move(data)),
      cfg_(cfg),
      rng_perm_(make_rng(cfg.seed, RngStream::Perm)),
      rng_order_(make_rng(cfg.seed, RngStream::Order)) {
    if (!data_ || data_->count == 0) throw ConfigError("mnist stream: empty dataset");
    if (data_->images.size() != data_->count * data_->width ||
        data_->labels.size() != data_->count)
        throw ConfigError("mnist stream: inconsistent dataset shape");
    if (cfg.period < 1) throw ConfigError("mnist stream: period must be >= 1");
    n_classes_ =
        static_cast<std::size_t>(*std::max_element(data_->labels.begin(), data_->labels.end())) +
        1;
    perm_.resize(data_->width);
    order_.resize(data_->count);
    std::iota(perm_.begin(), perm_.end(), 0u);
    std::iota(order_.begin(), order_.end(), 0u);
}

void MnistStream::next(Sample& out) {
    if (pos_in_period_ == 0) {
        std::shuffle(perm_.begin(), perm_.end(), rng_perm_);
        std::shuffle(order_.begin(), order_.end(), rng_order_);
        pos_in_epoch_ = 0;
    } else if (pos_in_epoch_ == data_->count) {
        std::shuffle(order_.begin(), order_.end(), rng_order_);
        pos_in_epoch_ = 0;
    }

    const std::size_t k = order_[pos_in_epoch_];
    const float* src = data_->images.data() + k * data_->width;
    out.x.resize(data_->width);
    for (std::size_t i = 0; i < data_->width; ++i) out.x[i] = src[perm_[i]];
    out.label = data_->labels[k];
    out.target = 0.0;

    ++pos_in_epoch_;
    pos_in_period_ = (pos_in_period_ + 1) % cfg_.period;
}

}  // namespace cbp
