#pragma once

#include <string>
#include <vector>

#include "prdiv/density.hpp"

namespace prdiv {

// Tensor-product quadrature grid. Bounds must cover mean +/- 8 sigma of
// every mixture component (checked at construction against the densities
// it is used with).
struct QuadratureGrid {
  enum class Rule { Trapezoid, GaussLegendre };

  int dim = 1;
  double lo[2] = {0.0, 0.0};
  double hi[2] = {0.0, 0.0};
  int nodes_per_axis = 2048;
  Rule rule = Rule::Trapezoid;

  // Default sizing: mean +/- 10 sigma, 2048 nodes in 1D, 512 per axis in 2D.
  static QuadratureGrid for_density(const Density& p, int nodes = 0);
  static QuadratureGrid for_pair(const Density& p, const Density& q, int nodes = 0);

  void validate_covers(const Density& d) const;
  std::string describe() const;
};

// One-shot evaluation of a density pair on a grid (or on discrete atoms).
// Every exact-engine operation reduces to weighted sums over this table,
// so a pair is tabulated once and reused across lambda sweeps.
struct Tabulation {
  int dim = 1;
  bool discrete = false;
  std::vector<double> w;   // quadrature weights (atom-wise 1 for discrete)
  std::vector<double> p;   // target density values
  std::vector<double> q;   // model density values
  std::vector<double> xs;  // node coordinates, flattened n*dim
  // Model mass lying outside the grid: nonzero when the model side is a
  // normalized density (a flow) whose tails escape the data grid. The
  // target is negligible there, so this mass contributes f(0+) per unit.
  double q_offgrid = 0.0;

  size_t size() const { return w.size(); }
  const double* node(size_t i) const { return &xs[i * static_cast<size_t>(dim)]; }

  static Tabulation make(const Density& p, const Density& q, const QuadratureGrid& grid);
  // Model side supplied as a callable density (e.g. a flow), target analytic.
  template <class F>
  static Tabulation make_with_model(const Density& p, F&& q_density, const QuadratureGrid& grid);
};

// Per-axis nodes and weights for a rule on [lo, hi].
void axis_rule(QuadratureGrid::Rule rule, double lo, double hi, int n,
               std::vector<double>* nodes, std::vector<double>* weights);

template <class F>
Tabulation Tabulation::make_with_model(const Density& pd, F&& q_density,
                                       const QuadratureGrid& grid) {
  grid.validate_covers(pd);
  Tabulation t;
  t.dim = grid.dim;
  std::vector<double> n0, w0, n1, w1;
  axis_rule(grid.rule, grid.lo[0], grid.hi[0], grid.nodes_per_axis, &n0, &w0);
  if (grid.dim == 1) {
    t.w = w0;
    t.xs = n0;
    t.p.resize(n0.size());
    t.q.resize(n0.size());
    for (size_t i = 0; i < n0.size(); ++i) {
      t.p[i] = pd.density(&n0[i]);
      t.q[i] = q_density(&n0[i]);
    }
  } else {
    axis_rule(grid.rule, grid.lo[1], grid.hi[1], grid.nodes_per_axis, &n1, &w1);
    const size_t n = n0.size() * n1.size();
    t.w.resize(n);
    t.xs.resize(2 * n);
    t.p.resize(n);
    t.q.resize(n);
    size_t k = 0;
    for (size_t i = 0; i < n0.size(); ++i) {
      for (size_t j = 0; j < n1.size(); ++j, ++k) {
        const double x[2] = {n0[i], n1[j]};
        t.w[k] = w0[i] * w1[j];
        t.xs[2 * k] = x[0];
        t.xs[2 * k + 1] = x[1];
        t.p[k] = pd.density(x);
        t.q[k] = q_density(x);
      }
    }
  }
  return t;
}

}  // namespace prdiv
