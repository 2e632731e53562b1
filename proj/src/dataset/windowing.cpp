#include "sickbench/dataset/windowing.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <stdexcept>

namespace sickbench::dataset {

std::vector<SensorWindow> window(const Stream& frames, std::size_t t, std::size_t stride) {
    if (stride < 1) throw std::invalid_argument("window stride must be >= 1");
    if (t < 1) throw std::invalid_argument("window length must be >= 1");
    std::vector<SensorWindow> out;
    if (frames.size() < t) return out;
    const std::size_t c = frames.front().values.size();
    const std::size_t count = (frames.size() - t) / stride + 1;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t start = i * stride;
        SensorWindow w;
        w.values = Array({t, c});
        for (std::size_t r = 0; r < t; ++r) {
            const auto& vals = frames[start + r].values;
            std::copy(vals.begin(), vals.end(), w.values.data.begin() + r * c);
        }
        const auto& last = frames[start + t - 1];
        if (last.fms) w.label = fms_to_severity(*last.fms);
        out.push_back(std::move(w));
    }
    return out;
}

std::vector<Fold> kfold_split(std::size_t size, std::size_t k, std::uint64_t seed) {
    if (k < 2) throw std::invalid_argument("kfold: k must be >= 2");
    if (k > size)
        throw std::invalid_argument("kfold: k = " + std::to_string(k) + " exceeds dataset size " +
                                    std::to_string(size));
    std::vector<std::size_t> order(size);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);

    // First (size % k) partitions get one extra element.
    std::vector<Fold> folds(k);
    const std::size_t base = size / k;
    const std::size_t extra = size % k;
    std::size_t pos = 0;
    std::vector<std::vector<std::size_t>> parts(k);
    for (std::size_t f = 0; f < k; ++f) {
        const std::size_t len = base + (f < extra ? 1 : 0);
        parts[f].assign(order.begin() + pos, order.begin() + pos + len);
        pos += len;
    }
    for (std::size_t f = 0; f < k; ++f) {
        folds[f].test = parts[f];
        for (std::size_t g = 0; g < k; ++g) {
            if (g == f) continue;
            folds[f].train.insert(folds[f].train.end(), parts[g].begin(), parts[g].end());
        }
    }
    return folds;
}

}  // namespace sickbench::dataset
