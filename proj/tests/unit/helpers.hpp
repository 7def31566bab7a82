#pragma once
#include <cstdint>
#include <random>
#include <gsam/core.hpp>
#include <gsam/losses.hpp>

namespace gsam::testing {

inline Vector random_vector(std::mt19937_64& rng, Index n, double lo = -1.0, double hi = 1.0)
{
    std::uniform_real_distribution<double> u(lo, hi);
    Vector v(n);
    for (Index i = 0; i < n; ++i) v(i) = u(rng);
    return v;
}

/// Sorted distinct knots with random gaps in [0.2, 1.2].
inline Vector random_knots(std::mt19937_64& rng, Index m)
{
    std::uniform_real_distribution<double> gap(0.2, 1.2);
    Vector t(m);
    t(0) = 0.0;
    for (Index i = 1; i < m; ++i) t(i) = t(i - 1) + gap(rng);
    return t;
}

/// Multiplicities 1..3.
inline Vector random_weights(std::mt19937_64& rng, Index m)
{
    std::uniform_int_distribution<int> c(1, 3);
    Vector w(m);
    for (Index i = 0; i < m; ++i) w(i) = c(rng);
    return w;
}

/**
 * x ~ U(-2.5, 2.5); the first `signals` columns carry a step and a sinusoid.
 * Responses follow the loss: Gaussian noise, Bernoulli or Poisson draws.
 */
inline Dataset signal_data(Index n, Index p, std::uint64_t seed, LossKind loss = LossKind::gaussian, int signals = 2,
                           double scale = 1.0)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-2.5, 2.5);
    std::normal_distribution<double> e(0.0, 1.0);
    Matrix x(n, p);
    Vector y(n);
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < p; ++j) x(i, j) = u(rng);
        double s = 0.0;
        if (signals > 0) s += x(i, 0) > 0.0 ? 1.0 : -1.0;
        if (signals > 1 && p > 1) s += std::sin(2.0 * x(i, 1));
        s *= scale;
        switch (loss) {
            case LossKind::gaussian: y(i) = s + e(rng); break;
            case LossKind::bernoulli_logit: y(i) = std::bernoulli_distribution(1.0 / (1.0 + std::exp(-2.0 * s)))(rng); break;
            case LossKind::poisson_log: y(i) = std::poisson_distribution<int>(std::exp(0.5 * s))(rng); break;
        }
    }
    return Dataset::create(std::move(y), std::move(x));
}

} // namespace gsam::testing
