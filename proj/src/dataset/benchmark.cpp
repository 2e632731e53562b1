#include "sickbench/dataset/benchmark.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <stdexcept>

#include "sickbench/dataset/preprocess.hpp"
#include "sickbench/dataset/windowing.hpp"

namespace sickbench::dataset {

RawSplit split_windows(std::vector<SensorWindow> windows, std::uint64_t seed, double train_frac,
                       double val_frac) {
    if (windows.empty()) throw std::invalid_argument("benchmark: no windows");
    if (!(train_frac > 0.0 && val_frac >= 0.0 && train_frac + val_frac < 1.0))
        throw std::invalid_argument("benchmark: bad split fractions");

    std::vector<std::size_t> order(windows.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed ^ 0xb5297a4d3f84d5b1ULL);
    std::shuffle(order.begin(), order.end(), rng);

    const std::size_t n = windows.size();
    const std::size_t n_train = static_cast<std::size_t>(train_frac * static_cast<double>(n));
    const std::size_t n_val = static_cast<std::size_t>(val_frac * static_cast<double>(n));

    RawSplit s;
    for (std::size_t i = 0; i < n; ++i) {
        auto& w = windows[order[i]];
        if (i < n_train)
            s.train.push_back(std::move(w));
        else if (i < n_train + n_val)
            s.val.push_back(std::move(w));
        else
            s.test.push_back(std::move(w));
    }
    return s;
}

Benchmark split_and_normalize(std::vector<SensorWindow> windows, const FeatureSchema& schema,
                              std::uint64_t seed, double train_frac, double val_frac) {
    RawSplit s = split_windows(std::move(windows), seed, train_frac, val_frac);
    Benchmark b;
    b.schema = schema;
    b.train = std::move(s.train);
    b.val = std::move(s.val);
    b.test = std::move(s.test);
    b.stats = fit_stats_windows(b.train);
    for (auto* split : {&b.train, &b.val, &b.test})
        for (auto& w : *split) normalize_window(w.values, b.stats);
    return b;
}

Benchmark make_benchmark(std::uint64_t seed, const BenchmarkOptions& opt) {
    const FeatureSchema schema = FeatureSchema::default12();
    auto streams = synth_class_streams(opt.n_per_class, seed, schema, opt.synth);

    std::vector<SensorWindow> windows;
    windows.reserve(opt.n_per_class * 4);
    for (auto& stream : streams) {
        Stream cleaned = smooth(remove_outliers(stream, opt.outlier_z), opt.smoothing_alpha);
        auto cut = window(cleaned, kWindowLength, kWindowLength);
        for (auto& w : cut) windows.push_back(std::move(w));
    }
    return split_and_normalize(std::move(windows), schema, seed, opt.train_frac, opt.val_frac);
}

}  // namespace sickbench::dataset
