#pragma once

#include "sickbench/dataset/schema.hpp"

namespace sickbench::dataset {

// Cuts windows [i*stride, i*stride + t) from the stream; the trailing partial
// window is discarded and fewer than `t` frames yield an empty list. The
// label comes from the final frame's FMS score when present.
std::vector<SensorWindow> window(const Stream& frames, std::size_t t = kWindowLength,
                                 std::size_t stride = kWindowLength);

// k near-equal shuffled partitions of [0, size); each partition serves as the
// test side of exactly one fold.
struct Fold {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};
std::vector<Fold> kfold_split(std::size_t size, std::size_t k, std::uint64_t seed);

}  // namespace sickbench::dataset
