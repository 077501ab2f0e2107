#pragma once

#include <cstddef>
#include <vector>

namespace cbp {

// One online example. Regression problems fill `target`; classification
// problems fill `label`.
struct Sample {
    std::vector<double> x;
    double target = 0.0;
    int label = 0;
};

class SampleStream {
public:
    virtual ~SampleStream() = default;
    virtual void next(Sample& out) = 0;
    virtual std::size_t input_dim() const = 0;
    virtual std::size_t output_dim() const = 0;
    virtual bool is_classification() const = 0;
};

}  // namespace cbp
