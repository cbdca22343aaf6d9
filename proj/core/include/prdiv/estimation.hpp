#pragma once

#include "prdiv/exact.hpp"

namespace prdiv {

// Likelihood-ratio estimator r(x) = grad g*(T(x)) built from an auxiliary
// generator g and a discriminator trained on g's dual.
struct RatioEstimator {
  GeneratorSpec auxiliary;
  ScalarField T;

  RatioEstimator(GeneratorSpec aux, ScalarField t);

  // raw ratio; may fall outside (0, inf) for a bad discriminator
  double ratio(const double* x) const { return auxiliary.f_conj_grad(T(x)); }
};

struct PrimalResult {
  double value = 0.0;
  long clamped = 0;  // nodes where the ratio hit the [1e-6, 1e6] clip
};

constexpr double kRatioClipLo = 1e-6;
constexpr double kRatioClipHi = 1e6;

// integral of q(x) f(r(x)) dx over the grid (deterministic quadrature path)
PrimalResult primal_estimate(const GeneratorSpec& target, const RatioEstimator& est,
                             const Density& q, const QuadratureGrid& grid);
PrimalResult primal_estimate(const GeneratorSpec& target, const RatioEstimator& est,
                             const Tabulation& tab);
// mean of f(r(x)) over fake samples (step 3 of the two-step algorithm)
PrimalResult primal_estimate_samples(const GeneratorSpec& target, const RatioEstimator& est,
                                     const std::vector<double>& fake_xs, int dim);

// E_Q[Breg_g(r(x), p/q)]. The Thm-4 identity against
// fdiv_exact(g) - dual_value(g, T) is enforced at 1e-7 on every call.
double bregman_gap(const GeneratorSpec& g, const ScalarField& T, const Density& p,
                   const Density& q, const QuadratureGrid& grid);
double bregman_gap(const GeneratorSpec& g, const ScalarField& T, const Tabulation& tab);

// Thm-5 bound sigma * sqrt(2 eps / mu) with sigma from the target and mu
// from the auxiliary, both on [m, M].
double error_bound(const GeneratorSpec& target, const GeneratorSpec& g, double eps, double m,
                   double M);

}  // namespace prdiv
