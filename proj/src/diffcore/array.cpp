#include "sickbench/diffcore/array.hpp"

#include <sstream>
#include <stdexcept>

namespace sickbench::diffcore {

std::size_t shape_numel(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

Array::Array(std::vector<std::size_t> s) : shape(std::move(s)), data(shape_numel(shape), 0.0) {}

Array::Array(std::vector<std::size_t> s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
    if (data.size() != shape_numel(shape)) {
        throw std::invalid_argument("Array: data length " + std::to_string(data.size()) +
                                    " does not match shape " + shape_str(shape));
    }
}

Array Array::full(std::vector<std::size_t> s, double v) {
    Array a(std::move(s));
    for (double& x : a.data) x = v;
    return a;
}

bool Array::all_finite() const {
    for (double x : data) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

std::string shape_str(const std::vector<std::size_t>& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

}  // namespace sickbench::diffcore
