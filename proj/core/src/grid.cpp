#include "prdiv/grid.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace prdiv {

void axis_rule(QuadratureGrid::Rule rule, double lo, double hi, int n,
               std::vector<double>* nodes, std::vector<double>* weights) {
  if (n < 16) throw std::invalid_argument("QuadratureGrid: need at least 16 nodes per axis");
  if (!(lo < hi)) throw std::invalid_argument("QuadratureGrid: lo must be < hi");
  nodes->resize(static_cast<size_t>(n));
  weights->resize(static_cast<size_t>(n));
  if (rule == QuadratureGrid::Rule::Trapezoid) {
    const double h = (hi - lo) / (n - 1);
    for (int i = 0; i < n; ++i) {
      (*nodes)[static_cast<size_t>(i)] = lo + h * i;
      (*weights)[static_cast<size_t>(i)] = (i == 0 || i == n - 1) ? 0.5 * h : h;
    }
    return;
  }
  // Gauss-Legendre on [-1, 1] by Newton iteration, then mapped to [lo, hi].
  const double half = 0.5 * (hi - lo), mid = 0.5 * (hi + lo);
  const int m = (n + 1) / 2;
  for (int i = 0; i < m; ++i) {
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j + 1.0) * x * p1 - j * p2) / (j + 1.0);
      }
      pp = n * (x * p0 - p1) / (x * x - 1.0);
      const double dx = p0 / pp;
      x -= dx;
      if (std::fabs(dx) < 1e-15) break;
    }
    const double wgt = 2.0 / ((1.0 - x * x) * pp * pp);
    (*nodes)[static_cast<size_t>(i)] = mid - half * x;
    (*nodes)[static_cast<size_t>(n - 1 - i)] = mid + half * x;
    (*weights)[static_cast<size_t>(i)] = half * wgt;
    (*weights)[static_cast<size_t>(n - 1 - i)] = half * wgt;
  }
}

QuadratureGrid QuadratureGrid::for_density(const Density& p, int nodes) {
  return for_pair(p, p, nodes);
}

QuadratureGrid QuadratureGrid::for_pair(const Density& p, const Density& q, int nodes) {
  if (p.is_discrete() != q.is_discrete() || p.dim() != q.dim())
    throw std::invalid_argument("QuadratureGrid: mismatched density kinds");
  QuadratureGrid g;
  g.dim = p.dim();
  if (p.is_discrete()) {
    g.nodes_per_axis = 16;  // unused
    g.lo[0] = 0.0;
    g.hi[0] = 1.0;
    return g;
  }
  g.nodes_per_axis = nodes > 0 ? nodes : (g.dim == 1 ? 2048 : 512);
  for (int a = 0; a < g.dim; ++a) {
    double lp, hp, lq, hq;
    p.axis_extent(a, 10.0, &lp, &hp);
    q.axis_extent(a, 10.0, &lq, &hq);
    g.lo[a] = std::min(lp, lq);
    g.hi[a] = std::max(hp, hq);
  }
  return g;
}

void QuadratureGrid::validate_covers(const Density& d) const {
  if (d.is_discrete()) return;
  if (d.dim() != dim) throw std::invalid_argument("QuadratureGrid: dimension mismatch");
  for (int a = 0; a < dim; ++a) {
    double l, h;
    d.axis_extent(a, 8.0, &l, &h);
    if (lo[a] > l || hi[a] < h) {
      std::ostringstream os;
      os << "QuadratureGrid: axis " << a << " bounds [" << lo[a] << ", " << hi[a]
         << "] do not cover mean +/- 8 sigma [" << l << ", " << h << "]";
      throw std::invalid_argument(os.str());
    }
  }
}

std::string QuadratureGrid::describe() const {
  std::ostringstream os;
  os << (rule == Rule::Trapezoid ? "trapezoid" : "gauss_legendre") << " " << nodes_per_axis
     << "/axis";
  for (int a = 0; a < dim; ++a) os << " [" << lo[a] << ", " << hi[a] << "]";
  return os.str();
}

Tabulation Tabulation::make(const Density& pd, const Density& qd, const QuadratureGrid& grid) {
  if (pd.is_discrete() != qd.is_discrete())
    throw std::invalid_argument("Tabulation: mixed discrete/continuous pair");
  if (pd.is_discrete()) {
    if (pd.atom_count() != qd.atom_count())
      throw std::invalid_argument("Tabulation: discrete pair must share atom count");
    Tabulation t;
    t.dim = 1;
    t.discrete = true;
    const size_t n = pd.atom_count();
    t.w.assign(n, 1.0);
    t.p = pd.probs();
    t.q = qd.probs();
    t.xs.resize(n);
    for (size_t i = 0; i < n; ++i) t.xs[i] = static_cast<double>(i);
    return t;
  }
  if (pd.dim() != qd.dim()) throw std::invalid_argument("Tabulation: dimension mismatch");
  grid.validate_covers(qd);
  return make_with_model(pd, [&qd](const double* x) { return qd.density(x); }, grid);
}

}  // namespace prdiv
