#pragma once

#include <cstdint>
#include <vector>

#include "cbp/network.hpp"
#include "cbp/rng.hpp"
#include "cbp/stream.hpp"

namespace cbp {

struct BitFlipConfig {
    int m = 20;                // input bits
    int f = 15;                // flipping bits, the first f of them
    long flip_period = 10000;  // one flipping bit flips every this many steps
    double beta = 0.7;         // LTU threshold parameter of the target network
    int target_width = 100;    // hidden LTU units of the target network
    std::uint64_t seed = 0;
};

// Semi-stationary regression stream: the first f input bits are held constant
// except for one random flip every flip_period steps, the rest are i.i.d.
// U{0,1}, and the targets come from a frozen random LTU network over the m
// input bits plus a constant-1 bias bit.
class BitFlipEnv final : public SampleStream {
public:
    explicit BitFlipEnv(const BitFlipConfig& cfg);

    void next(Sample& out) override;
    std::size_t input_dim() const override { return static_cast<std::size_t>(cfg_.m); }
    std::size_t output_dim() const override { return 1; }
    bool is_classification() const override { return false; }

    const Network& target() const { return target_; }
    const std::vector<std::uint8_t>& flip_bits() const { return flip_bits_; }
    long step() const { return step_; }

private:
    BitFlipConfig cfg_;
    Network target_;
    std::vector<std::uint8_t> flip_bits_;
    long step_ = 0;
    Rng rng_flip_;
    Rng rng_noise_;
    std::vector<double> target_in_;  // [x .. 1]
    ForwardTrace target_trace_;
};

}  // namespace cbp
