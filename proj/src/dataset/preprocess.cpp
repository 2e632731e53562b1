#include "sickbench/dataset/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sickbench::dataset {

namespace {

void mean_sigma(const std::vector<double>& xs, double& mean, double& sigma) {
    mean = 0.0;
    for (double v : xs) mean += v;
    mean /= static_cast<double>(xs.size());
    double var = 0.0;
    for (double v : xs) {
        const double d = v - mean;
        var += d * d;
    }
    sigma = std::sqrt(var / static_cast<double>(xs.size()));
}

}  // namespace

Stream remove_outliers(const Stream& frames, double z_threshold) {
    if (frames.size() < 2) return frames;
    const std::size_t n = frames.size();
    const std::size_t c = frames.front().values.size();
    Stream out = frames;

    std::vector<double> col(n);
    std::vector<char> is_outlier(n);
    for (std::size_t ch = 0; ch < c; ++ch) {
        for (std::size_t i = 0; i < n; ++i) col[i] = frames[i].values[ch];
        double mean, sigma;
        mean_sigma(col, mean, sigma);
        if (sigma == 0.0) continue;

        const double lo = mean - z_threshold * sigma;
        const double hi = mean + z_threshold * sigma;
        bool any = false;
        for (std::size_t i = 0; i < n; ++i) {
            is_outlier[i] = col[i] < lo || col[i] > hi;
            any |= is_outlier[i] != 0;
        }
        if (!any) continue;

        std::size_t i = 0;
        while (i < n) {
            if (!is_outlier[i]) {
                ++i;
                continue;
            }
            std::size_t j = i;
            while (j < n && is_outlier[j]) ++j;
            const bool has_left = i > 0;
            const bool has_right = j < n;
            if (has_left && has_right) {
                const double a = col[i - 1];
                const double b = col[j];
                const double span = static_cast<double>(j - (i - 1));
                for (std::size_t k = i; k < j; ++k)
                    out[k].values[ch] = a + (b - a) * static_cast<double>(k - (i - 1)) / span;
            } else {
                for (std::size_t k = i; k < j; ++k)
                    out[k].values[ch] = std::clamp(col[k], lo, hi);
            }
            i = j;
        }
    }
    return out;
}

Stream smooth(const Stream& frames, double alpha) {
    if (!(alpha > 0.0 && alpha <= 1.0))
        throw std::invalid_argument("smoothing alpha must be in (0,1], got " + std::to_string(alpha));
    if (frames.empty()) return frames;
    Stream out = frames;
    const std::size_t c = frames.front().values.size();
    for (std::size_t i = 1; i < frames.size(); ++i) {
        for (std::size_t ch = 0; ch < c; ++ch) {
            out[i].values[ch] = alpha * frames[i].values[ch] + (1.0 - alpha) * out[i - 1].values[ch];
        }
    }
    return out;
}

ChannelStats fit_stats(const Stream& frames) {
    if (frames.empty()) throw std::invalid_argument("fit_stats: empty stream");
    const std::size_t c = frames.front().values.size();
    ChannelStats s;
    s.mean.assign(c, 0.0);
    s.stddev.assign(c, 0.0);
    s.min.assign(c, frames.front().values[0]);
    s.max.assign(c, frames.front().values[0]);
    for (std::size_t ch = 0; ch < c; ++ch) {
        s.min[ch] = s.max[ch] = frames.front().values[ch];
    }
    for (const auto& f : frames) {
        for (std::size_t ch = 0; ch < c; ++ch) {
            const double v = f.values[ch];
            s.mean[ch] += v;
            s.min[ch] = std::min(s.min[ch], v);
            s.max[ch] = std::max(s.max[ch], v);
        }
    }
    const double n = static_cast<double>(frames.size());
    for (std::size_t ch = 0; ch < c; ++ch) s.mean[ch] /= n;
    for (const auto& f : frames) {
        for (std::size_t ch = 0; ch < c; ++ch) {
            const double d = f.values[ch] - s.mean[ch];
            s.stddev[ch] += d * d;
        }
    }
    for (std::size_t ch = 0; ch < c; ++ch) s.stddev[ch] = std::sqrt(s.stddev[ch] / n);
    return s;
}

ChannelStats fit_stats_windows(const std::vector<SensorWindow>& windows) {
    if (windows.empty()) throw std::invalid_argument("fit_stats_windows: empty set");
    Stream flat;
    const std::size_t c = windows.front().values.shape[1];
    for (const auto& w : windows) {
        const std::size_t t = w.values.shape[0];
        for (std::size_t i = 0; i < t; ++i) {
            SensorFrame f;
            f.values.assign(w.values.data.begin() + i * c, w.values.data.begin() + (i + 1) * c);
            flat.push_back(std::move(f));
        }
    }
    return fit_stats(flat);
}

Stream normalize(const Stream& frames, const ChannelStats& stats) {
    Stream out = frames;
    for (auto& f : out) {
        for (std::size_t ch = 0; ch < f.values.size(); ++ch) {
            const double sd = stats.stddev[ch];
            f.values[ch] = sd == 0.0 ? 0.0 : (f.values[ch] - stats.mean[ch]) / sd;
        }
    }
    return out;
}

void normalize_window(Array& window, const ChannelStats& stats) {
    const std::size_t t = window.shape[0];
    const std::size_t c = window.shape[1];
    for (std::size_t i = 0; i < t; ++i) {
        for (std::size_t ch = 0; ch < c; ++ch) {
            const double sd = stats.stddev[ch];
            double& v = window.data[i * c + ch];
            v = sd == 0.0 ? 0.0 : (v - stats.mean[ch]) / sd;
        }
    }
}

Array preprocess_window_for_model(const Array& raw_window, const ChannelStats& stats,
                                  double smoothing_alpha, double z_threshold) {
    if (raw_window.rank() != 2)
        throw std::invalid_argument("preprocess_window_for_model: window must be [T, C]");
    const std::size_t t = raw_window.shape[0];
    const std::size_t c = raw_window.shape[1];
    if (c != stats.channel_count())
        throw std::invalid_argument("preprocess_window_for_model: channel count mismatch");
    Array w = raw_window;
    for (std::size_t ch = 0; ch < c; ++ch) {
        const double sd = stats.stddev[ch];
        if (sd == 0.0) continue;
        const double lo = stats.mean[ch] - z_threshold * sd;
        const double hi = stats.mean[ch] + z_threshold * sd;
        for (std::size_t i = 0; i < t; ++i) {
            double& v = w.data[i * c + ch];
            v = std::clamp(v, lo, hi);
        }
    }
    for (std::size_t i = 1; i < t; ++i)
        for (std::size_t ch = 0; ch < c; ++ch)
            w.data[i * c + ch] =
                smoothing_alpha * w.data[i * c + ch] + (1.0 - smoothing_alpha) * w.data[(i - 1) * c + ch];
    normalize_window(w, stats);
    return w;
}

}  // namespace sickbench::dataset
