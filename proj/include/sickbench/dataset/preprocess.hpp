#pragma once

#include "sickbench/dataset/schema.hpp"

namespace sickbench::dataset {

// Replaces values more than z_threshold population standard deviations from
// the stream mean by linear interpolation between the nearest inliers
// (index-based). Runs at the stream edges are clamped to mean +- z*sigma.
// Stream length and ordering are preserved; constant channels pass through.
Stream remove_outliers(const Stream& frames, double z_threshold = 3.0);

// Exponential smoothing per channel: s_1 = x_1, s_t = a*x_t + (1-a)*s_{t-1}.
Stream smooth(const Stream& frames, double alpha = 0.3);

ChannelStats fit_stats(const Stream& frames);
ChannelStats fit_stats_windows(const std::vector<SensorWindow>& windows);

// (x - mean) / sigma per channel; channels with sigma == 0 map to 0.
Stream normalize(const Stream& frames, const ChannelStats& stats);
void normalize_window(Array& window, const ChannelStats& stats);

// Streaming variant used by the closed-loop paths: treats a single raw
// window as self-contained, clamps |z| > 3 against the model's training
// stats (no future lookahead), smooths within the window and normalizes.
Array preprocess_window_for_model(const Array& raw_window, const ChannelStats& stats,
                                  double smoothing_alpha = 0.3, double z_threshold = 3.0);

}  // namespace sickbench::dataset
