#pragma once

#include <string>
#include <utility>
#include <vector>

#include "prdiv/density.hpp"
#include "prdiv/exact.hpp"
#include "prdiv/nn.hpp"

namespace prdiv {

struct SampleSet {
  int dim = 2;
  std::vector<double> xs;  // n x dim, row major
  std::string label;       // real | fake
  uint64_t seed = 0;

  size_t size() const { return xs.size() / static_cast<size_t>(dim); }
  const double* point(size_t i) const { return &xs[i * static_cast<size_t>(dim)]; }
  void validate(int k) const;  // finiteness, n >= k + 1
};

// k-NN manifold precision/recall. A fake point counts as precise when it
// falls inside some real point's k-NN ball; recall is symmetric.
std::pair<double, double> knn_precision_recall(const SampleSet& real, const SampleSet& fake,
                                               int k);

// Density rewards fake points covered by many real balls (can exceed 1);
// coverage is the fraction of real balls containing at least one fake.
std::pair<double, double> density_coverage(const SampleSet& real, const SampleSet& fake, int k);

// Exact PR curve with the flow's change-of-variables density as the model
// side (2D only). Shares all PRCurve invariants and the Thm-1 check.
PRCurve exact_pr_curve_for_flow(const CouplingFlow& flow, const Density& p, int n_points,
                                const QuadratureGrid& grid);
Tabulation tabulate_flow(const CouplingFlow& flow, const Density& p, const QuadratureGrid& grid);

// Frechet distance between Gaussian moment fits in raw data coordinates.
// ridged (optional) reports whether a singular covariance needed a ridge.
double frechet_raw(const SampleSet& a, const SampleSet& b, bool* ridged = nullptr);

struct ModeReport {
  std::vector<long> counts;      // fake points per mixture component
  std::vector<int> empty_modes;  // component indices with zero count
};
ModeReport mode_report(const SampleSet& fake, const Density& target);

}  // namespace prdiv
