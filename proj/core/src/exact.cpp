#include "prdiv/exact.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace prdiv {

namespace detail {
bool g_drop_auc_half_factor = false;
}

namespace {

constexpr double kHalfPi = 1.5707963267948966192313216916398;

[[noreturn]] void node_error(const Tabulation& tab, size_t i, const std::string& what) {
  std::ostringstream os;
  os << what << " at node " << i << " (";
  for (int a = 0; a < tab.dim; ++a) os << (a ? ", " : "") << tab.node(i)[a];
  os << ")";
  throw std::runtime_error(os.str());
}

// Contribution q * f(p/q) with the q -> 0 and p -> 0 limits taken
// analytically so discrete atoms with zero mass stay exact. Subnormal
// density values are underflow artifacts and are snapped to exact zero.
double cell_value(const GeneratorSpec& spec, const Tabulation& tab, size_t i) {
  double p = tab.p[i], q = tab.q[i];
  if (p < 0.0 || q < 0.0 || !std::isfinite(p) || !std::isfinite(q))
    node_error(tab, i, "invalid density value");
  if (p < std::numeric_limits<double>::min()) p = 0.0;
  if (q < std::numeric_limits<double>::min()) q = 0.0;
  if (q == 0.0) {
    if (p == 0.0) return 0.0;
    const double rec = spec.recession();
    if (std::isinf(rec)) node_error(tab, i, "infinite divergence (q = 0 < p)");
    return rec * p;
  }
  if (p == 0.0) {
    const double f0 = spec.f_at_zero();
    if (std::isinf(f0)) node_error(tab, i, "infinite divergence (p = 0 < q)");
    return q * f0;
  }
  const double u = p / q;
  if (u < 1e-300 || u > 1e300) node_error(tab, i, "density ratio overflow");
  return q * spec.f(u);
}

}  // namespace

double fdiv_exact(const GeneratorSpec& spec, const Tabulation& tab) {
  double acc = 0.0;
  for (size_t i = 0; i < tab.size(); ++i) acc += tab.w[i] * cell_value(spec, tab, i);
  if (tab.q_offgrid != 0.0) {
    const double f0 = spec.f_at_zero();
    if (std::isinf(f0) && std::fabs(tab.q_offgrid) > 1e-12)
      throw std::runtime_error("fdiv_exact: model mass outside the grid makes " + spec.name() +
                               " divergent");
    if (!std::isinf(f0)) acc += tab.q_offgrid * f0;
  }
  return acc;
}

double fdiv_exact(const GeneratorSpec& spec, const Density& p, const Density& q,
                  const QuadratureGrid& grid) {
  return fdiv_exact(spec, Tabulation::make(p, q, grid));
}

double dual_value(const GeneratorSpec& spec, const Tabulation& tab, const ScalarField& T) {
  const Interval dom = spec.conj_domain();
  double acc = 0.0;
  for (size_t i = 0; i < tab.size(); ++i) {
    const double t = T(tab.node(i));
    if (!dom.contains(t)) node_error(tab, i, "discriminator left dom(f*) (T=" + std::to_string(t) + ")");
    acc += tab.w[i] * (tab.p[i] * t - tab.q[i] * spec.f_conj(t));
  }
  return acc;
}

double dual_value(const GeneratorSpec& spec, const Density& p, const Density& q,
                  const ScalarField& T, const QuadratureGrid& grid) {
  return dual_value(spec, Tabulation::make(p, q, grid), T);
}

ScalarField optimal_discriminator(const GeneratorSpec& spec, const Density& p, const Density& q) {
  return [spec, p, q](const double* x) { return spec.optimal_T(p.density(x), q.density(x)); };
}

namespace {

double alpha_direct(const Tabulation& tab, double lambda) {
  double acc = 0.0;
  for (size_t i = 0; i < tab.size(); ++i)
    acc += tab.w[i] * std::min(lambda * tab.p[i], tab.q[i]);
  return acc;
}

}  // namespace

double alpha_lambda(const Tabulation& tab, PRLambda lambda) {
  if (lambda.is_infinite()) return 1.0;  // shared-support endpoint
  const double l = lambda.value;
  const double direct = alpha_direct(tab, l);
  const double via_div =
      std::min(1.0, l) - fdiv_exact(GeneratorSpec::builtin(GeneratorSpec::Kind::Pr, l), tab);
  if (std::fabs(direct - via_div) > 1e-8) {
    std::ostringstream os;
    os << "alpha_lambda: Thm-1 cross-check failed at lambda=" << l << " (direct=" << direct
       << ", via divergence=" << via_div << ")";
    throw std::runtime_error(os.str());
  }
  return std::min(direct, std::min(1.0, l));
}

double alpha_lambda(const Density& p, const Density& q, PRLambda lambda,
                    const QuadratureGrid& grid) {
  return alpha_lambda(Tabulation::make(p, q, grid), lambda);
}

void PRCurve::validate() const {
  for (size_t i = 0; i < points.size(); ++i) {
    const PRPoint& pt = points[i];
    if (!(pt.lambda > 0.0)) throw std::runtime_error("PRCurve: lambda must be positive");
    const double cap = std::min(1.0, pt.lambda);
    if (pt.alpha < 0.0 || pt.alpha > cap + 1e-12)
      throw std::runtime_error("PRCurve: alpha outside [0, min(1, lambda)]");
    if (std::isfinite(pt.lambda) && std::fabs(pt.beta - pt.alpha / pt.lambda) > 1e-12)
      throw std::runtime_error("PRCurve: beta != alpha / lambda");
    if (i > 0) {
      if (!(pt.lambda > points[i - 1].lambda))
        throw std::runtime_error("PRCurve: lambda not strictly increasing");
      if (pt.alpha < points[i - 1].alpha - 1e-12)
        throw std::runtime_error("PRCurve: alpha not nondecreasing in lambda");
      if (pt.beta > points[i - 1].beta + 1e-12)
        throw std::runtime_error("PRCurve: beta not nonincreasing in lambda");
    }
  }
}

PRCurve pr_curve(const Tabulation& tab, int n_points) {
  if (n_points < 3) throw std::invalid_argument("pr_curve: need at least 3 points");
  PRCurve curve;
  curve.points.resize(static_cast<size_t>(n_points));
  for (int i = 0; i < n_points; ++i) {
    const double theta = kHalfPi * (i + 1) / (n_points + 1);
    const double lambda = std::tan(theta);
    const double a = alpha_lambda(tab, PRLambda(lambda));
    curve.points[static_cast<size_t>(i)] = {lambda, a, a / lambda};
  }
  curve.validate();
  return curve;
}

PRCurve pr_curve(const Density& p, const Density& q, int n_points, const QuadratureGrid& grid) {
  return pr_curve(Tabulation::make(p, q, grid), n_points);
}

double decompose_fdiv(const GeneratorSpec& spec, const Tabulation& tab, int n_lambda) {
  if (n_lambda < 64) throw std::invalid_argument("decompose_fdiv: need n_lambda >= 64");
  if (!spec.has_second())
    throw std::runtime_error("decompose_fdiv: generator lacks a second derivative");
  // m, M = grid extrema of q/p, clipped
  double m = kInf, M = -kInf;
  for (size_t i = 0; i < tab.size(); ++i) {
    if (tab.p[i] <= 0.0 || tab.q[i] <= 0.0) continue;
    const double r = tab.q[i] / tab.p[i];
    m = std::min(m, r);
    M = std::max(M, r);
  }
  if (!std::isfinite(m) || !std::isfinite(M))
    throw std::runtime_error("decompose_fdiv: ratio bounds not finite");
  m = std::max(m, 1e-8);
  M = std::min(M, 1e8);
  // lambda = tan(theta), uniform theta on [atan(m), atan(M)]; the integrand
  // vanishes at both ends (D_lambda^PR = 0 for lambda outside [m, M]).
  const double th_lo = std::atan(m), th_hi = std::atan(M);
  const double h = (th_hi - th_lo) / (n_lambda - 1);
  double acc = 0.0;
  for (int i = 0; i < n_lambda; ++i) {
    const double theta = th_lo + h * i;
    const double lambda = std::tan(theta);
    const double sec = 1.0 / std::cos(theta);
    const double jac = sec * sec;
    const double d_pr = fdiv_exact(GeneratorSpec::builtin(GeneratorSpec::Kind::Pr, lambda), tab);
    const double g = weight_kernel(spec, PRLambda(lambda)) * d_pr * jac;
    acc += (i == 0 || i == n_lambda - 1) ? 0.5 * g : g;
  }
  return acc * h;
}

double decompose_fdiv(const GeneratorSpec& spec, const Density& p, const Density& q,
                      const QuadratureGrid& grid, int n_lambda) {
  return decompose_fdiv(spec, Tabulation::make(p, q, grid), n_lambda);
}

std::pair<double, double> reflection_check(const Density& p, const Density& q, PRLambda lambda,
                                           const QuadratureGrid& grid) {
  if (lambda.is_infinite()) throw std::domain_error("reflection_check: lambda must be finite");
  const double l = lambda.value;
  const double lhs =
      fdiv_exact(GeneratorSpec::builtin(GeneratorSpec::Kind::Pr, l), q, p, grid);
  const double rhs =
      l * fdiv_exact(GeneratorSpec::builtin(GeneratorSpec::Kind::Pr, 1.0 / l), p, q, grid);
  return {lhs, rhs};
}

namespace {

// Shared alpha sweep over a tan(theta) grid (endpoints exclusive).
struct AucNodes {
  std::vector<double> theta, lambda, alpha;
};

AucNodes auc_nodes(const Tabulation& tab, int n) {
  AucNodes a;
  a.theta.resize(static_cast<size_t>(n));
  a.lambda.resize(static_cast<size_t>(n));
  a.alpha.resize(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double theta = kHalfPi * (i + 1) / (n + 1);
    const double lambda = std::tan(theta);
    a.theta[static_cast<size_t>(i)] = theta;
    a.lambda[static_cast<size_t>(i)] = lambda;
    a.alpha[static_cast<size_t>(i)] = alpha_lambda(tab, PRLambda(lambda));
  }
  return a;
}

}  // namespace

double auc(const Tabulation& tab, int n_lambda) {
  if (n_lambda < 128) throw std::invalid_argument("auc: need n_lambda >= 128");
  const AucNodes nd = auc_nodes(tab, n_lambda);
  const size_t n = nd.lambda.size();
  // trapezoid in lambda over the interior nodes
  double acc = 0.0;
  auto integrand = [&](size_t i) {
    const double l = nd.lambda[i];
    return nd.alpha[i] * nd.alpha[i] / (l * l);
  };
  for (size_t i = 0; i + 1 < n; ++i)
    acc += 0.5 * (integrand(i) + integrand(i + 1)) * (nd.lambda[i + 1] - nd.lambda[i]);
  // head [0, l_0]: alpha ~ beta * lambda so the integrand ~ beta^2
  const double beta0 = nd.alpha[0] / nd.lambda[0];
  acc += beta0 * beta0 * nd.lambda[0];
  // tail [l_{n-1}, inf): alpha ~ const, integral alpha^2 / lambda
  acc += nd.alpha[n - 1] * nd.alpha[n - 1] / nd.lambda[n - 1];
  const double half = detail::g_drop_auc_half_factor ? 1.0 : 0.5;
  return half * acc;
}

double auc(const Density& p, const Density& q, const QuadratureGrid& grid, int n_lambda) {
  return auc(Tabulation::make(p, q, grid), n_lambda);
}

double auc_geometric(const Tabulation& tab, int n_theta) {
  if (n_theta < 128) throw std::invalid_argument("auc_geometric: need n_theta >= 128");
  const AucNodes nd = auc_nodes(tab, n_theta);
  const size_t n = nd.theta.size();
  // r^2 = alpha^2 + beta^2, the squared radius of the curve point
  auto r2 = [&](size_t i) {
    const double b = nd.alpha[i] / nd.lambda[i];
    return nd.alpha[i] * nd.alpha[i] + b * b;
  };
  const double h = nd.theta[1] - nd.theta[0];
  double acc = 0.0;
  for (size_t i = 0; i + 1 < n; ++i) acc += 0.25 * (r2(i) + r2(i + 1)) * h;
  acc += 0.5 * r2(0) * nd.theta[0];                      // edge [0, theta_0]
  acc += 0.5 * r2(n - 1) * (kHalfPi - nd.theta[n - 1]);  // edge [theta_last, pi/2]
  return acc;
}

double auc_geometric(const Density& p, const Density& q, const QuadratureGrid& grid, int n_theta) {
  return auc_geometric(Tabulation::make(p, q, grid), n_theta);
}

}  // namespace prdiv
