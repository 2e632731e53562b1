#pragma once

#include <cstdint>

#include "sickbench/dataset/schema.hpp"
#include "sickbench/dataset/synth.hpp"

namespace sickbench::dataset {

// The bundled synthetic benchmark: per-class streams run through outlier
// repair and smoothing, cut into windows, shuffled into train/val/test, with
// normalization statistics fitted on the training split only. All windows
// are returned in normalized space.
struct Benchmark {
    FeatureSchema schema;
    ChannelStats stats;  // raw-space, fitted on the train split
    std::vector<SensorWindow> train;
    std::vector<SensorWindow> val;
    std::vector<SensorWindow> test;
};

struct BenchmarkOptions {
    std::size_t n_per_class = 500;
    double train_frac = 0.7;
    double val_frac = 0.15;
    double outlier_z = 3.0;
    double smoothing_alpha = 0.3;
    SynthParams synth;
};

Benchmark make_benchmark(std::uint64_t seed, const BenchmarkOptions& opt = {});

// Shuffled split of raw windows, before any normalization.
struct RawSplit {
    std::vector<SensorWindow> train;
    std::vector<SensorWindow> val;
    std::vector<SensorWindow> test;
};
RawSplit split_windows(std::vector<SensorWindow> windows, std::uint64_t seed, double train_frac,
                       double val_frac);

// Split + fit + normalize for an arbitrary labeled raw window set; the path
// make_benchmark takes after synthesis, reused by the CSV pipeline.
Benchmark split_and_normalize(std::vector<SensorWindow> windows, const FeatureSchema& schema,
                              std::uint64_t seed, double train_frac, double val_frac);

}  // namespace sickbench::dataset
