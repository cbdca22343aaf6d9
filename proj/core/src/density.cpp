#include "prdiv/density.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace prdiv {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
}

Density Density::gaussian1d(double mean, double var) {
  Component c;
  c.weight = 1.0;
  c.mean = {mean, 0.0};
  c.cov = {var, 0.0, 0.0, 0.0};
  return mixture1d({c});
}

Density Density::mixture1d(std::vector<Component> comps) {
  Density d;
  d.kind_ = Kind::Mixture1D;
  d.comps_ = std::move(comps);
  d.finalize();
  return d;
}

Density Density::mixture2d(std::vector<Component> comps) {
  Density d;
  d.kind_ = Kind::Mixture2D;
  d.comps_ = std::move(comps);
  d.finalize();
  return d;
}

Density Density::discrete(std::vector<double> probs) {
  Density d;
  d.kind_ = Kind::Discrete;
  d.probs_ = std::move(probs);
  double sum = 0.0;
  for (double p : d.probs_) {
    if (p < 0.0) throw std::invalid_argument("Density: negative atom probability");
    sum += p;
  }
  if (std::fabs(sum - 1.0) > 1e-12)
    throw std::invalid_argument("Density: atom probabilities must sum to 1");
  d.cum_weight_.resize(d.probs_.size());
  double acc = 0.0;
  for (size_t i = 0; i < d.probs_.size(); ++i) {
    acc += d.probs_[i];
    d.cum_weight_[i] = acc;
  }
  return d;
}

void Density::finalize() {
  if (comps_.empty()) throw std::invalid_argument("Density: empty mixture");
  double wsum = 0.0;
  cache_.resize(comps_.size());
  cum_weight_.resize(comps_.size());
  for (size_t i = 0; i < comps_.size(); ++i) {
    const Component& c = comps_[i];
    if (c.weight < 0.0) throw std::invalid_argument("Density: negative mixture weight");
    wsum += c.weight;
    Cache& k = cache_[i];
    if (kind_ == Kind::Mixture1D) {
      const double v = c.cov[0];
      if (!(v > 0.0)) throw std::invalid_argument("Density: variance must be positive");
      k.inv[0] = 1.0 / v;
      k.chol[0] = std::sqrt(v);
      k.log_norm = -0.5 * std::log(kTwoPi * v);
    } else {
      const double a = c.cov[0], b = c.cov[1], b2 = c.cov[2], cc = c.cov[3];
      if (std::fabs(b - b2) > 1e-12) throw std::invalid_argument("Density: covariance not symmetric");
      const double det = a * cc - b * b;
      if (!(a > 0.0) || !(det > 0.0))
        throw std::invalid_argument("Density: covariance not positive definite");
      k.inv = {cc / det, -b / det, -b / det, a / det};
      const double l11 = std::sqrt(a);
      const double l21 = b / l11;
      const double l22 = std::sqrt(cc - l21 * l21);
      k.chol = {l11, 0.0, l21, l22};
      k.log_norm = -std::log(kTwoPi) - 0.5 * std::log(det);
    }
  }
  if (std::fabs(wsum - 1.0) > 1e-12)
    throw std::invalid_argument("Density: mixture weights must sum to 1");
  double acc = 0.0;
  for (size_t i = 0; i < comps_.size(); ++i) {
    acc += comps_[i].weight;
    cum_weight_[i] = acc;
  }
}

double Density::density(const double* x) const {
  if (kind_ == Kind::Discrete) {
    const auto idx = static_cast<long>(std::llround(x[0]));
    if (idx < 0 || static_cast<size_t>(idx) >= probs_.size())
      throw std::out_of_range("Density: atom index out of range");
    return probs_[static_cast<size_t>(idx)];
  }
  double acc = 0.0;
  if (kind_ == Kind::Mixture1D) {
    for (size_t i = 0; i < comps_.size(); ++i) {
      const double d = x[0] - comps_[i].mean[0];
      acc += comps_[i].weight * std::exp(cache_[i].log_norm - 0.5 * d * d * cache_[i].inv[0]);
    }
  } else {
    for (size_t i = 0; i < comps_.size(); ++i) {
      const double dx = x[0] - comps_[i].mean[0];
      const double dy = x[1] - comps_[i].mean[1];
      const auto& m = cache_[i].inv;
      const double quad = dx * (m[0] * dx + m[1] * dy) + dy * (m[2] * dx + m[3] * dy);
      acc += comps_[i].weight * std::exp(cache_[i].log_norm - 0.5 * quad);
    }
  }
  return acc;
}

std::vector<double> Density::sample(Rng& rng, size_t n) const {
  std::vector<double> out;
  if (kind_ == Kind::Discrete) {
    out.resize(n);
    for (size_t i = 0; i < n; ++i) {
      const double u = rng.uniform();
      size_t k = 0;
      while (k + 1 < cum_weight_.size() && u > cum_weight_[k]) ++k;
      out[i] = static_cast<double>(k);
    }
    return out;
  }
  const int d = dim();
  out.resize(n * static_cast<size_t>(d));
  for (size_t i = 0; i < n; ++i) {
    const double u = rng.uniform();
    size_t k = 0;
    while (k + 1 < cum_weight_.size() && u > cum_weight_[k]) ++k;
    const Component& c = comps_[k];
    const auto& L = cache_[k].chol;
    if (d == 1) {
      out[i] = c.mean[0] + L[0] * rng.gaussian();
    } else {
      const double z0 = rng.gaussian();
      const double z1 = rng.gaussian();
      out[2 * i] = c.mean[0] + L[0] * z0;
      out[2 * i + 1] = c.mean[1] + L[2] * z0 + L[3] * z1;
    }
  }
  return out;
}

void Density::axis_extent(int axis, double k_sigma, double* lo, double* hi) const {
  if (kind_ == Kind::Discrete) {
    *lo = 0.0;
    *hi = static_cast<double>(probs_.size()) - 1.0;
    return;
  }
  double l = std::numeric_limits<double>::infinity(), h = -l;
  for (size_t i = 0; i < comps_.size(); ++i) {
    const double m = comps_[i].mean[static_cast<size_t>(axis)];
    const double var = kind_ == Kind::Mixture1D ? comps_[i].cov[0]
                                                : comps_[i].cov[axis == 0 ? 0 : 3];
    const double s = std::sqrt(var);
    l = std::min(l, m - k_sigma * s);
    h = std::max(h, m + k_sigma * s);
  }
  *lo = l;
  *hi = h;
}

}  // namespace prdiv
