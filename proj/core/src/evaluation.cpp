#include "prdiv/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace prdiv {

void SampleSet::validate(int k) const {
  if (dim < 1) throw std::invalid_argument("SampleSet: dim must be >= 1");
  if (xs.size() % static_cast<size_t>(dim) != 0)
    throw std::invalid_argument("SampleSet: ragged sample matrix");
  if (size() < static_cast<size_t>(k) + 1)
    throw std::invalid_argument("SampleSet: need at least k+1 points");
  for (double v : xs)
    if (!std::isfinite(v)) throw std::invalid_argument("SampleSet: non-finite entry");
}

namespace {

double sq_dist(const double* a, const double* b, int d) {
  double acc = 0.0;
  for (int j = 0; j < d; ++j) {
    const double t = a[j] - b[j];
    acc += t * t;
  }
  return acc;
}

// squared distance from each point to its k-th nearest neighbor within the
// same set (self excluded)
std::vector<double> knn_radii_sq(const SampleSet& s, int k) {
  const size_t n = s.size();
  std::vector<double> radii(n);
  std::vector<double> dists;
  dists.reserve(n - 1);
  for (size_t i = 0; i < n; ++i) {
    dists.clear();
    for (size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      dists.push_back(sq_dist(s.point(i), s.point(j), s.dim));
    }
    std::nth_element(dists.begin(), dists.begin() + (k - 1), dists.end());
    radii[i] = dists[static_cast<size_t>(k - 1)];
    if (radii[i] == 0.0)
      throw std::invalid_argument("knn radius collapsed to 0 (duplicated points)");
  }
  return radii;
}

// fraction of probe points falling inside at least one reference ball
double manifold_fraction(const SampleSet& probe, const SampleSet& ref,
                         const std::vector<double>& ref_radii_sq) {
  size_t hits = 0;
  for (size_t i = 0; i < probe.size(); ++i) {
    for (size_t j = 0; j < ref.size(); ++j) {
      if (sq_dist(probe.point(i), ref.point(j), probe.dim) <= ref_radii_sq[j]) {
        ++hits;
        break;
      }
    }
  }
  return static_cast<double>(hits) / static_cast<double>(probe.size());
}

}  // namespace

std::pair<double, double> knn_precision_recall(const SampleSet& real, const SampleSet& fake,
                                               int k) {
  if (k < 1) throw std::invalid_argument("knn_precision_recall: k must be >= 1");
  real.validate(k);
  fake.validate(k);
  if (real.dim != fake.dim) throw std::invalid_argument("knn: dimension mismatch");
  const auto real_r = knn_radii_sq(real, k);
  const auto fake_r = knn_radii_sq(fake, k);
  const double precision = manifold_fraction(fake, real, real_r);
  const double recall = manifold_fraction(real, fake, fake_r);
  return {precision, recall};
}

std::pair<double, double> density_coverage(const SampleSet& real, const SampleSet& fake,
                                           int k) {
  if (k < 1) throw std::invalid_argument("density_coverage: k must be >= 1");
  real.validate(k);
  fake.validate(k);
  if (real.dim != fake.dim) throw std::invalid_argument("density_coverage: dimension mismatch");
  const auto real_r = knn_radii_sq(real, k);
  const size_t nr = real.size(), nf = fake.size();
  size_t ball_hits = 0;
  std::vector<char> covered(nr, 0);
  for (size_t j = 0; j < nf; ++j) {
    for (size_t i = 0; i < nr; ++i) {
      if (sq_dist(fake.point(j), real.point(i), real.dim) <= real_r[i]) {
        ++ball_hits;
        covered[i] = 1;
      }
    }
  }
  const double density =
      static_cast<double>(ball_hits) / (static_cast<double>(k) * static_cast<double>(nf));
  size_t ncov = 0;
  for (char c : covered) ncov += static_cast<size_t>(c);
  const double coverage = static_cast<double>(ncov) / static_cast<double>(nr);
  return {density, coverage};
}

Tabulation tabulate_flow(const CouplingFlow& flow, const Density& p,
                         const QuadratureGrid& grid) {
  if (grid.dim != flow.dim())
    throw std::invalid_argument("tabulate_flow: grid/flow dimension mismatch");
  grid.validate_covers(p);
  Tabulation t;
  t.dim = grid.dim;
  std::vector<double> n0, w0, n1, w1;
  axis_rule(grid.rule, grid.lo[0], grid.hi[0], grid.nodes_per_axis, &n0, &w0);
  if (grid.dim == 1) {
    t.xs = n0;
    t.w = w0;
  } else {
    axis_rule(grid.rule, grid.lo[1], grid.hi[1], grid.nodes_per_axis, &n1, &w1);
    const size_t n = n0.size() * n1.size();
    t.w.resize(n);
    t.xs.resize(2 * n);
    size_t k = 0;
    for (size_t i = 0; i < n0.size(); ++i) {
      for (size_t j = 0; j < n1.size(); ++j, ++k) {
        t.w[k] = w0[i] * w1[j];
        t.xs[2 * k] = n0[i];
        t.xs[2 * k + 1] = n1[j];
      }
    }
  }
  const size_t n = t.w.size();
  t.p.resize(n);
  t.q.resize(n);
  std::vector<double> lp(n);
  flow.log_prob_batch(t.xs.data(), lp.data(), n);
  double q_mass = 0.0;
  for (size_t i = 0; i < n; ++i) {
    t.p[i] = p.density(t.node(i));
    // below ~1e-290 the flow has no usable support at the node; snap to 0
    // so the divergences take their recession limit instead of tripping
    // the ratio-overflow guard
    t.q[i] = lp[i] < -667.0 ? 0.0 : std::exp(lp[i]);
    q_mass += t.w[i] * t.q[i];
  }
  // Flows are normalized by construction: the signed defect 1 - sum(w q)
  // is tail mass that escaped the grid (positive) or quadrature overcount
  // on sharp ridges (negative); both enter the divergences at f(0+).
  t.q_offgrid = 1.0 - q_mass;
  return t;
}

PRCurve exact_pr_curve_for_flow(const CouplingFlow& flow, const Density& p, int n_points,
                                const QuadratureGrid& grid) {
  return pr_curve(tabulate_flow(flow, p, grid), n_points);
}

namespace {

// eigenvalues of a symmetric d x d matrix by cyclic Jacobi rotations
std::vector<double> sym_eigenvalues(std::vector<double> a, int d) {
  for (int sweep = 0; sweep < 64; ++sweep) {
    double off = 0.0;
    for (int i = 0; i < d; ++i)
      for (int j = i + 1; j < d; ++j) off += a[static_cast<size_t>(i) * d + j] * a[static_cast<size_t>(i) * d + j];
    if (off < 1e-24) break;
    for (int p = 0; p < d; ++p) {
      for (int q = p + 1; q < d; ++q) {
        const double apq = a[static_cast<size_t>(p) * d + q];
        if (std::fabs(apq) < 1e-300) continue;
        const double app = a[static_cast<size_t>(p) * d + p];
        const double aqq = a[static_cast<size_t>(q) * d + q];
        const double phi = 0.5 * std::atan2(2.0 * apq, aqq - app);
        const double c = std::cos(phi), s = std::sin(phi);
        for (int k = 0; k < d; ++k) {
          const double akp = a[static_cast<size_t>(k) * d + p];
          const double akq = a[static_cast<size_t>(k) * d + q];
          a[static_cast<size_t>(k) * d + p] = c * akp - s * akq;
          a[static_cast<size_t>(k) * d + q] = s * akp + c * akq;
        }
        for (int k = 0; k < d; ++k) {
          const double apk = a[static_cast<size_t>(p) * d + k];
          const double aqk = a[static_cast<size_t>(q) * d + k];
          a[static_cast<size_t>(p) * d + k] = c * apk - s * aqk;
          a[static_cast<size_t>(q) * d + k] = s * apk + c * aqk;
        }
      }
    }
  }
  std::vector<double> ev(static_cast<size_t>(d));
  for (int i = 0; i < d; ++i) ev[static_cast<size_t>(i)] = a[static_cast<size_t>(i) * d + i];
  return ev;
}

// symmetric square root via eigen decomposition (Jacobi, with vectors)
std::vector<double> sym_sqrt(const std::vector<double>& m, int d) {
  std::vector<double> a = m;
  std::vector<double> v(static_cast<size_t>(d) * d, 0.0);
  for (int i = 0; i < d; ++i) v[static_cast<size_t>(i) * d + i] = 1.0;
  for (int sweep = 0; sweep < 64; ++sweep) {
    double off = 0.0;
    for (int i = 0; i < d; ++i)
      for (int j = i + 1; j < d; ++j) off += a[static_cast<size_t>(i) * d + j] * a[static_cast<size_t>(i) * d + j];
    if (off < 1e-26) break;
    for (int p = 0; p < d; ++p) {
      for (int q = p + 1; q < d; ++q) {
        const double apq = a[static_cast<size_t>(p) * d + q];
        if (std::fabs(apq) < 1e-300) continue;
        const double app = a[static_cast<size_t>(p) * d + p];
        const double aqq = a[static_cast<size_t>(q) * d + q];
        const double phi = 0.5 * std::atan2(2.0 * apq, aqq - app);
        const double c = std::cos(phi), s = std::sin(phi);
        for (int k = 0; k < d; ++k) {
          const double akp = a[static_cast<size_t>(k) * d + p];
          const double akq = a[static_cast<size_t>(k) * d + q];
          a[static_cast<size_t>(k) * d + p] = c * akp - s * akq;
          a[static_cast<size_t>(k) * d + q] = s * akp + c * akq;
          const double vkp = v[static_cast<size_t>(k) * d + p];
          const double vkq = v[static_cast<size_t>(k) * d + q];
          v[static_cast<size_t>(k) * d + p] = c * vkp - s * vkq;
          v[static_cast<size_t>(k) * d + q] = s * vkp + c * vkq;
        }
        for (int k = 0; k < d; ++k) {
          const double apk = a[static_cast<size_t>(p) * d + k];
          const double aqk = a[static_cast<size_t>(q) * d + k];
          a[static_cast<size_t>(p) * d + k] = c * apk - s * aqk;
          a[static_cast<size_t>(q) * d + k] = s * apk + c * aqk;
        }
      }
    }
  }
  std::vector<double> out(static_cast<size_t>(d) * d, 0.0);
  for (int i = 0; i < d; ++i) {
    const double root = std::sqrt(std::max(a[static_cast<size_t>(i) * d + i], 0.0));
    for (int r = 0; r < d; ++r)
      for (int c = 0; c < d; ++c)
        out[static_cast<size_t>(r) * d + c] +=
            v[static_cast<size_t>(r) * d + i] * root * v[static_cast<size_t>(c) * d + i];
  }
  return out;
}

void moments(const SampleSet& s, std::vector<double>* mean, std::vector<double>* cov) {
  const int d = s.dim;
  const size_t n = s.size();
  mean->assign(static_cast<size_t>(d), 0.0);
  cov->assign(static_cast<size_t>(d) * d, 0.0);
  for (size_t i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) (*mean)[static_cast<size_t>(j)] += s.point(i)[j];
  for (double& v : *mean) v /= static_cast<double>(n);
  for (size_t i = 0; i < n; ++i) {
    for (int r = 0; r < d; ++r) {
      const double dr = s.point(i)[r] - (*mean)[static_cast<size_t>(r)];
      for (int c = 0; c < d; ++c)
        (*cov)[static_cast<size_t>(r) * d + c] +=
            dr * (s.point(i)[c] - (*mean)[static_cast<size_t>(c)]);
    }
  }
  for (double& v : *cov) v /= static_cast<double>(n - 1);
}

}  // namespace

double frechet_raw(const SampleSet& a, const SampleSet& b, bool* ridged) {
  if (a.dim != b.dim) throw std::invalid_argument("frechet_raw: dimension mismatch");
  const int d = a.dim;
  if (a.size() < static_cast<size_t>(d) + 1 || b.size() < static_cast<size_t>(d) + 1)
    throw std::invalid_argument("frechet_raw: need at least d+1 points per set");
  std::vector<double> ma, ca, mb, cb;
  moments(a, &ma, &ca);
  moments(b, &mb, &cb);
  // canonical argument order makes the distance bitwise symmetric
  if (std::lexicographical_compare(mb.begin(), mb.end(), ma.begin(), ma.end()) ||
      (mb == ma && std::lexicographical_compare(cb.begin(), cb.end(), ca.begin(), ca.end()))) {
    std::swap(ma, mb);
    std::swap(ca, cb);
  }
  if (ridged) *ridged = false;
  for (auto* cv : {&ca, &cb}) {
    const auto ev = sym_eigenvalues(*cv, d);
    if (*std::min_element(ev.begin(), ev.end()) < 1e-12) {
      for (int i = 0; i < d; ++i) (*cv)[static_cast<size_t>(i) * d + i] += 1e-6;
      if (ridged) *ridged = true;
    }
  }
  double mean_term = 0.0;
  for (int j = 0; j < d; ++j) {
    const double t = ma[static_cast<size_t>(j)] - mb[static_cast<size_t>(j)];
    mean_term += t * t;
  }
  // tr(Ca + Cb - 2 (Ca Cb)^{1/2}) via sqrt(Ca) Cb sqrt(Ca)
  const auto sa = sym_sqrt(ca, d);
  std::vector<double> tmp(static_cast<size_t>(d) * d, 0.0), mid(static_cast<size_t>(d) * d, 0.0);
  for (int i = 0; i < d; ++i)
    for (int k = 0; k < d; ++k) {
      const double s = sa[static_cast<size_t>(i) * d + k];
      for (int j = 0; j < d; ++j) tmp[static_cast<size_t>(i) * d + j] += s * cb[static_cast<size_t>(k) * d + j];
    }
  for (int i = 0; i < d; ++i)
    for (int k = 0; k < d; ++k) {
      const double s = tmp[static_cast<size_t>(i) * d + k];
      for (int j = 0; j < d; ++j) mid[static_cast<size_t>(i) * d + j] += s * sa[static_cast<size_t>(k) * d + j];
    }
  const auto ev = sym_eigenvalues(mid, d);
  double tr_sqrt = 0.0;
  for (double e : ev) tr_sqrt += std::sqrt(std::max(e, 0.0));
  double tr = 0.0;
  for (int i = 0; i < d; ++i)
    tr += ca[static_cast<size_t>(i) * d + i] + cb[static_cast<size_t>(i) * d + i];
  return mean_term + tr - 2.0 * tr_sqrt;
}

ModeReport mode_report(const SampleSet& fake, const Density& target) {
  if (target.is_discrete())
    throw std::invalid_argument("mode_report: target must be a mixture density");
  const auto& comps = target.components();
  std::vector<Density> singles;
  singles.reserve(comps.size());
  for (const auto& c : comps) {
    singles.push_back(target.dim() == 1 ? Density::mixture1d({{1.0, c.mean, c.cov}})
                                        : Density::mixture2d({{1.0, c.mean, c.cov}}));
  }
  ModeReport rep;
  rep.counts.assign(comps.size(), 0);
  for (size_t i = 0; i < fake.size(); ++i) {
    const double* x = fake.point(i);
    double best = -kInf;
    size_t best_c = 0;
    for (size_t c = 0; c < comps.size(); ++c) {
      const double post = comps[c].weight * singles[c].density(x);
      if (post > best) {
        best = post;
        best_c = c;
      }
    }
    ++rep.counts[best_c];
  }
  for (size_t c = 0; c < comps.size(); ++c)
    if (rep.counts[c] == 0) rep.empty_modes.push_back(static_cast<int>(c));
  return rep;
}

}  // namespace prdiv
