#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "prdiv/density.hpp"
#include "prdiv/generator.hpp"
#include "prdiv/grid.hpp"

namespace prdiv {

// Pointwise discriminator; argument is a node coordinate of the grid's
// dimension (atom index for discrete).
using ScalarField = std::function<double(const double*)>;

struct PRPoint {
  double lambda = 1.0;
  double alpha = 0.0;
  double beta = 0.0;
};

struct PRCurve {
  std::vector<PRPoint> points;
  // Throws if lambda is not strictly increasing, alpha/beta leave their
  // ranges, beta != alpha/lambda, or the monotonicity invariants fail.
  void validate() const;
};

// D_f(P || Q) = sum_x w * q * f(p/q); exact summation for discrete pairs.
double fdiv_exact(const GeneratorSpec& spec, const Density& p, const Density& q,
                  const QuadratureGrid& grid);
double fdiv_exact(const GeneratorSpec& spec, const Tabulation& tab);

// E_P[T] - E_Q[f*(T)]; a lower bound on fdiv_exact for any admissible T.
double dual_value(const GeneratorSpec& spec, const Density& p, const Density& q,
                  const ScalarField& T, const QuadratureGrid& grid);
double dual_value(const GeneratorSpec& spec, const Tabulation& tab, const ScalarField& T);

ScalarField optimal_discriminator(const GeneratorSpec& spec, const Density& p, const Density& q);

// alpha_lambda = integral of min(lambda p, q). The Thm-1 identity against
// min(1, lambda) - D_lambda^PR is recomputed on every call and enforced at
// 1e-8. lambda = +inf returns 1 analytically.
double alpha_lambda(const Density& p, const Density& q, PRLambda lambda,
                    const QuadratureGrid& grid);
double alpha_lambda(const Tabulation& tab, PRLambda lambda);

// lambda = tan(theta), theta uniform on (0, pi/2) exclusive.
PRCurve pr_curve(const Density& p, const Density& q, int n_points, const QuadratureGrid& grid);
PRCurve pr_curve(const Tabulation& tab, int n_points);

// Thm-2 reconstruction: integral over [m, M] of f''(1/l)/l^3 * D_l^PR,
// with m, M the grid extrema of q/p clipped to [1e-8, 1e8].
double decompose_fdiv(const GeneratorSpec& spec, const Density& p, const Density& q,
                      const QuadratureGrid& grid, int n_lambda);
double decompose_fdiv(const GeneratorSpec& spec, const Tabulation& tab, int n_lambda);

// (D_lambda(Q||P), lambda * D_{1/lambda}(P||Q)) — equal by Prop 1.
std::pair<double, double> reflection_check(const Density& p, const Density& q, PRLambda lambda,
                                           const QuadratureGrid& grid);

// (1/2) * integral of alpha_lambda^2 / lambda^2 dlambda on a tan(theta)
// grid. The restored 1/2 makes the P = Q area equal 1.
double auc(const Density& p, const Density& q, const QuadratureGrid& grid, int n_lambda);
double auc(const Tabulation& tab, int n_lambda);

// Independent polar-area route: integral of r(theta)^2 / 2 over theta with
// r = alpha_{tan theta} / sin(theta).
double auc_geometric(const Density& p, const Density& q, const QuadratureGrid& grid, int n_theta);
double auc_geometric(const Tabulation& tab, int n_theta);

namespace detail {
// test hook for the verification suite's injected-bug check
extern bool g_drop_auc_half_factor;
}  // namespace detail

}  // namespace prdiv
