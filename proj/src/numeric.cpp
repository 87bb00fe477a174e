#include "rpo/numeric.hpp"

#include <algorithm>
#include <limits>

namespace rpo {

double log_sum_exp(std::span<const double> v) {
    double m = -std::numeric_limits<double>::infinity();
    for (double x : v) {
        m = std::max(m, x);
    }
    if (!std::isfinite(m)) {
        return m;
    }
    double acc = 0.0;
    for (double x : v) {
        acc += std::exp(x - m);
    }
    return m + std::log(acc);
}

void log_softmax_inplace(std::span<double> logits) {
    const double lse = log_sum_exp(logits);
    for (double& x : logits) {
        x -= lse;
    }
}

bool all_finite(std::span<const double> v) {
    for (double x : v) {
        if (!std::isfinite(x)) {
            return false;
        }
    }
    return true;
}

} // namespace rpo
