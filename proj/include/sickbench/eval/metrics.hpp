#pragma once

#include <array>
#include <vector>

#include "sickbench/dataset/schema.hpp"

namespace sickbench::eval {

using dataset::Severity;
using diffcore::Array;

// Four-class report. Per-class precision/recall/F1 are one-vs-rest with
// undefined ratios (zero denominators) reported as 0; macro averages are
// unweighted means over the four classes.
struct ClassificationReport {
    double accuracy = 0.0;
    std::array<double, 4> precision{};
    std::array<double, 4> recall{};
    std::array<double, 4> f1{};
    double macro_precision = 0.0;
    double macro_recall = 0.0;
    double macro_f1 = 0.0;
    std::array<std::array<std::size_t, 4>, 4> confusion{};  // [true][predicted]
    std::size_t total = 0;
};

ClassificationReport classification_report(const std::vector<Severity>& predicted,
                                           const std::vector<Severity>& labels);

// Mean per-pair Pearson correlation over flattened windows. Pairs where
// either window has zero variance are skipped and counted.
struct PccResult {
    double value = 0.0;
    std::size_t pairs_used = 0;
    std::size_t pairs_skipped = 0;
};

PccResult pcc(const std::vector<Array>& clean, const std::vector<Array>& adversarial);

}  // namespace sickbench::eval
