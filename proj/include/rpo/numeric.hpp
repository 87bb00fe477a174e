#pragma once

#include <cmath>
#include <span>
#include <vector>

namespace rpo {

// log(sum(exp(v))) with max-shift; safe for any finite input.
double log_sum_exp(std::span<const double> v);

// In-place logits -> log-probabilities. After the call exp-sum is 1 within
// a few ulps times the vector length.
void log_softmax_inplace(std::span<double> logits);

// Logistic function, stable for |z| up to ~700.
inline double sigmoid(double z) {
    if (z >= 0.0) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    const double e = std::exp(z);
    return e / (1.0 + e);
}

// log(1 + e^z) without overflow; softplus(-m) == -log(sigmoid(m)).
inline double softplus(double z) {
    return std::log1p(std::exp(-std::fabs(z))) + (z > 0.0 ? z : 0.0);
}

bool all_finite(std::span<const double> v);

} // namespace rpo
