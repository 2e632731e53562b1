#pragma once

// Independent test oracles. Everything here recomputes expectations from
// first principles (central differences, direct formulas, brute-force
// counting) without touching the library's backward or metric paths.

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "sickbench/diffcore/array.hpp"

namespace oracle {

using sickbench::diffcore::Array;

// Central finite differences of a scalar-valued function.
inline Array finite_difference(const std::function<double(const Array&)>& f, Array x,
                               double step = 1e-4) {
    Array g(x.shape);
    for (std::size_t i = 0; i < x.numel(); ++i) {
        const double saved = x.data[i];
        x.data[i] = saved + step;
        const double fp = f(x);
        x.data[i] = saved - step;
        const double fm = f(x);
        x.data[i] = saved;
        g.data[i] = (fp - fm) / (2.0 * step);
    }
    return g;
}

// max_i |a_i - b_i| / max(1, |a_i|, |b_i|)
inline double max_rel_err(const Array& a, const Array& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) {
        const double denom = std::max({1.0, std::fabs(a.data[i]), std::fabs(b.data[i])});
        worst = std::max(worst, std::fabs(a.data[i] - b.data[i]) / denom);
    }
    return worst;
}

inline Array random_array(std::vector<std::size_t> shape, std::mt19937_64& rng,
                          double lo = -1.0, double hi = 1.0) {
    Array a(std::move(shape));
    std::uniform_real_distribution<double> dist(lo, hi);
    for (double& v : a.data) v = dist(rng);
    return a;
}

// Direct Pearson correlation of two equal-length vectors.
inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    return sxy / std::sqrt(sxx * syy);
}

}  // namespace oracle
