// Test-only closed forms and density builders. These oracles stay
// independent of the quadrature implementation they check.
#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "prdiv/density.hpp"
#include "prdiv/rng.hpp"

namespace testutil {

inline double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// KL(N(m1,v1) || N(m2,v2))
inline double kl_gauss(double m1, double v1, double m2, double v2) {
  return 0.5 * (std::log(v2 / v1) + (v1 + (m1 - m2) * (m1 - m2)) / v2 - 1.0);
}

// chi^2(N(m1,v) || N(m2,v)), equal variance
inline double chi2_gauss_equal_var(double m1, double m2, double v) {
  const double d = m1 - m2;
  return std::exp(d * d / v) - 1.0;
}

// integral |p - q| between equal-variance Gaussians
inline double tv_fdiv_gauss_equal_var(double m1, double m2, double v) {
  const double d = std::fabs(m1 - m2) / (2.0 * std::sqrt(v));
  return 2.0 * (2.0 * std_normal_cdf(d) - 1.0);
}

// D_1^PR = integral max(p - q, 0) = half the integral of |p - q|
inline double d1_gauss_equal_var(double m1, double m2, double v) {
  return 0.5 * tv_fdiv_gauss_equal_var(m1, m2, v);
}

// differential entropy of N(mean, s^2 I_d)
inline double gauss_entropy(int d, double s2) {
  return 0.5 * d * std::log(2.0 * M_PI * M_E * s2);
}

inline prdiv::Density ring8(double radius = 2.0, double sigma = 0.2) {
  std::vector<prdiv::Density::Component> comps;
  for (int i = 0; i < 8; ++i) {
    const double ang = 2.0 * M_PI * i / 8.0;
    comps.push_back({0.125,
                     {radius * std::cos(ang), radius * std::sin(ang)},
                     {sigma * sigma, 0.0, 0.0, sigma * sigma}});
  }
  return prdiv::Density::mixture2d(comps);
}

// seeded random mixtures with moderate separation and conditioning
inline prdiv::Density random_mixture_1d(prdiv::Rng& rng, int max_comps = 3) {
  const int k = 1 + static_cast<int>(rng.index(static_cast<size_t>(max_comps)));
  std::vector<prdiv::Density::Component> comps;
  double wsum = 0.0;
  for (int i = 0; i < k; ++i) {
    prdiv::Density::Component c;
    c.weight = rng.uniform(0.2, 1.0);
    wsum += c.weight;
    c.mean = {rng.uniform(-2.0, 2.0), 0.0};
    const double s = rng.uniform(0.5, 1.5);
    c.cov = {s * s, 0.0, 0.0, 0.0};
    comps.push_back(c);
  }
  for (auto& c : comps) c.weight /= wsum;
  comps.back().weight = 1.0;
  for (size_t i = 0; i + 1 < comps.size(); ++i) comps.back().weight -= comps[i].weight;
  return prdiv::Density::mixture1d(comps);
}

inline prdiv::Density random_mixture_2d(prdiv::Rng& rng, int max_comps = 3) {
  const int k = 1 + static_cast<int>(rng.index(static_cast<size_t>(max_comps)));
  std::vector<prdiv::Density::Component> comps;
  double wsum = 0.0;
  for (int i = 0; i < k; ++i) {
    prdiv::Density::Component c;
    c.weight = rng.uniform(0.2, 1.0);
    wsum += c.weight;
    c.mean = {rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0)};
    const double sx = rng.uniform(0.5, 1.3);
    const double sy = rng.uniform(0.5, 1.3);
    const double rho = rng.uniform(-0.4, 0.4);
    c.cov = {sx * sx, rho * sx * sy, rho * sx * sy, sy * sy};
    comps.push_back(c);
  }
  for (auto& c : comps) c.weight /= wsum;
  comps.back().weight = 1.0;
  for (size_t i = 0; i + 1 < comps.size(); ++i) comps.back().weight -= comps[i].weight;
  return prdiv::Density::mixture2d(comps);
}

// all length-n probability vectors with entries k/steps, k >= 1
inline std::vector<std::vector<double>> prob_grid(int n_atoms, int steps) {
  std::vector<std::vector<double>> out;
  std::vector<int> parts(static_cast<size_t>(n_atoms), 0);
  // compositions of `steps` into n_atoms positive parts
  std::function<void(int, int)> rec = [&](int idx, int left) {
    if (idx == n_atoms - 1) {
      if (left >= 1) {
        parts[static_cast<size_t>(idx)] = left;
        std::vector<double> probs(static_cast<size_t>(n_atoms));
        for (int i = 0; i < n_atoms; ++i)
          probs[static_cast<size_t>(i)] = static_cast<double>(parts[static_cast<size_t>(i)]) / steps;
        out.push_back(std::move(probs));
      }
      return;
    }
    for (int v = 1; v <= left - (n_atoms - 1 - idx); ++v) {
      parts[static_cast<size_t>(idx)] = v;
      rec(idx + 1, left - v);
    }
  };
  rec(0, steps);
  return out;
}

}  // namespace testutil
