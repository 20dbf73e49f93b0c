#include "lfm/image.hpp"

#include <algorithm>

namespace lfm {

MinMax min_max(const std::vector<double>& v) {
    if (v.empty()) throw NumericError("min_max: empty buffer");
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    return {*lo, *hi};
}

double sum(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
}

double mean(const std::vector<double>& v) {
    if (v.empty()) throw NumericError("mean: empty buffer");
    return sum(v) / static_cast<double>(v.size());
}

} // namespace lfm
