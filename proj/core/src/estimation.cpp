#include "prdiv/estimation.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace prdiv {

RatioEstimator::RatioEstimator(GeneratorSpec aux, ScalarField t)
    : auxiliary(std::move(aux)), T(std::move(t)) {
  if (!auxiliary.has_second())
    throw std::invalid_argument("RatioEstimator: auxiliary must be strictly convex (" +
                                auxiliary.name() + " is piecewise linear)");
}

namespace {

double clip_ratio(double r, long* clamped) {
  if (r < kRatioClipLo) {
    ++*clamped;
    return kRatioClipLo;
  }
  if (r > kRatioClipHi) {
    ++*clamped;
    return kRatioClipHi;
  }
  return r;
}

}  // namespace

PrimalResult primal_estimate(const GeneratorSpec& target, const RatioEstimator& est,
                             const Tabulation& tab) {
  PrimalResult res;
  for (size_t i = 0; i < tab.size(); ++i) {
    if (tab.q[i] == 0.0) continue;
    const double raw = est.ratio(tab.node(i));
    if (!(raw > 0.0)) {
      std::ostringstream os;
      os << "primal_estimate: ratio " << raw << " <= 0 at node " << i;
      throw std::runtime_error(os.str());
    }
    res.value += tab.w[i] * tab.q[i] * target.f(clip_ratio(raw, &res.clamped));
  }
  return res;
}

PrimalResult primal_estimate(const GeneratorSpec& target, const RatioEstimator& est,
                             const Density& q, const QuadratureGrid& grid) {
  return primal_estimate(target, est, Tabulation::make(q, q, grid));
}

PrimalResult primal_estimate_samples(const GeneratorSpec& target, const RatioEstimator& est,
                                     const std::vector<double>& fake_xs, int dim) {
  if (fake_xs.empty()) throw std::invalid_argument("primal_estimate_samples: empty batch");
  PrimalResult res;
  const size_t n = fake_xs.size() / static_cast<size_t>(dim);
  for (size_t i = 0; i < n; ++i) {
    const double raw = est.ratio(&fake_xs[i * static_cast<size_t>(dim)]);
    if (!(raw > 0.0))
      throw std::runtime_error("primal_estimate_samples: ratio <= 0 at sample " +
                               std::to_string(i));
    res.value += target.f(clip_ratio(raw, &res.clamped));
  }
  res.value /= static_cast<double>(n);
  return res;
}

double bregman_gap(const GeneratorSpec& g, const ScalarField& T, const Tabulation& tab) {
  if (!g.has_second())
    throw std::invalid_argument("bregman_gap: generator " + g.name() +
                                " is not strictly convex");
  // The gap is E_Q[Breg_g(u, r)] with u the true ratio and r the estimate.
  // (Breg_g(a, b) = Breg_{g*}(grad g(b), grad g(a)): the dual-side gap
  // Breg_{g*}(T, T*) lands the estimate in the second slot.)
  double gap = 0.0;
  for (size_t i = 0; i < tab.size(); ++i) {
    if (tab.q[i] == 0.0) continue;
    const double u = tab.p[i] / tab.q[i];
    const double t = T(tab.node(i));
    const double r = g.f_conj_grad(t);
    double breg;
    if (r > 0.0) {
      breg = g.f(u) - g.f(r) - g.f_prime(r) * (u - r);
    } else {
      // conjugate-side form; valid even when the estimate leaves (0, inf)
      const double t_star = g.f_prime(u);
      breg = g.f_conj(t) - g.f_conj(t_star) - u * (t - t_star);
    }
    gap += tab.w[i] * tab.q[i] * breg;
  }
  const double direct = fdiv_exact(g, tab) - dual_value(g, tab, T);
  if (std::fabs(gap - direct) > 1e-7) {
    std::ostringstream os;
    os << "bregman_gap: Thm-4 identity violated (gap=" << gap
       << ", fdiv - dual=" << direct << ")";
    throw std::runtime_error(os.str());
  }
  return gap;
}

double bregman_gap(const GeneratorSpec& g, const ScalarField& T, const Density& p,
                   const Density& q, const QuadratureGrid& grid) {
  return bregman_gap(g, T, Tabulation::make(p, q, grid));
}

double error_bound(const GeneratorSpec& target, const GeneratorSpec& g, double eps, double m,
                   double M) {
  if (eps < 0.0) throw std::invalid_argument("error_bound: eps must be nonnegative");
  const double mu = g.strong_convexity(m, M);
  if (!(mu > 0.0))
    throw std::invalid_argument("error_bound: auxiliary " + g.name() +
                                " is not strongly convex on the interval (mu = 0)");
  const double sigma = target.lipschitz(m, M);
  return sigma * std::sqrt(2.0 * eps / mu);
}

}  // namespace prdiv
