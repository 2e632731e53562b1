#include "sickbench/eval/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace sickbench::eval {

ClassificationReport classification_report(const std::vector<Severity>& predicted,
                                           const std::vector<Severity>& labels) {
    if (predicted.empty()) throw std::invalid_argument("classification_report: empty input");
    if (predicted.size() != labels.size())
        throw std::invalid_argument("classification_report: length mismatch");

    ClassificationReport r;
    r.total = predicted.size();
    std::size_t correct = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        const auto t = static_cast<std::size_t>(labels[i]);
        const auto p = static_cast<std::size_t>(predicted[i]);
        ++r.confusion[t][p];
        if (t == p) ++correct;
    }
    r.accuracy = static_cast<double>(correct) / static_cast<double>(r.total);

    for (std::size_t c = 0; c < 4; ++c) {
        std::size_t tp = r.confusion[c][c];
        std::size_t pred_c = 0, true_c = 0;
        for (std::size_t j = 0; j < 4; ++j) {
            pred_c += r.confusion[j][c];
            true_c += r.confusion[c][j];
        }
        r.precision[c] = pred_c == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(pred_c);
        r.recall[c] = true_c == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(true_c);
        const double denom = r.precision[c] + r.recall[c];
        r.f1[c] = denom == 0.0 ? 0.0 : 2.0 * r.precision[c] * r.recall[c] / denom;
        r.macro_precision += r.precision[c] / 4.0;
        r.macro_recall += r.recall[c] / 4.0;
        r.macro_f1 += r.f1[c] / 4.0;
    }
    return r;
}

PccResult pcc(const std::vector<Array>& clean, const std::vector<Array>& adversarial) {
    if (clean.size() != adversarial.size())
        throw std::invalid_argument("pcc: clean and adversarial sets differ in length");
    if (clean.empty()) throw std::invalid_argument("pcc: empty sets");

    PccResult out;
    double total = 0.0;
    for (std::size_t i = 0; i < clean.size(); ++i) {
        const Array& a = clean[i];
        const Array& b = adversarial[i];
        if (!a.same_shape(b)) throw std::invalid_argument("pcc: pair shape mismatch");
        const double n = static_cast<double>(a.numel());
        double ma = 0, mb = 0;
        for (std::size_t k = 0; k < a.numel(); ++k) {
            ma += a.data[k];
            mb += b.data[k];
        }
        ma /= n;
        mb /= n;
        double sab = 0, saa = 0, sbb = 0;
        for (std::size_t k = 0; k < a.numel(); ++k) {
            const double da = a.data[k] - ma;
            const double db = b.data[k] - mb;
            sab += da * db;
            saa += da * da;
            sbb += db * db;
        }
        if (saa == 0.0 || sbb == 0.0) {
            ++out.pairs_skipped;
            continue;
        }
        total += sab / std::sqrt(saa * sbb);
        ++out.pairs_used;
    }
    out.value = out.pairs_used == 0 ? 0.0 : total / static_cast<double>(out.pairs_used);
    return out;
}

}  // namespace sickbench::eval
