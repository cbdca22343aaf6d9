#pragma once

#include <array>
#include <vector>

#include "prdiv/rng.hpp"

namespace prdiv {

// An analytically known distribution: Gaussian mixture in 1D/2D or a finite
// discrete distribution on dense atom indices. Supports pointwise density
// evaluation and seeded sampling.
class Density {
 public:
  enum class Kind { Mixture1D, Mixture2D, Discrete };

  struct Component {
    double weight = 1.0;
    std::array<double, 2> mean{0.0, 0.0};
    // 1D: cov[0] is the variance. 2D: row-major [a, b; b, c].
    std::array<double, 4> cov{1.0, 0.0, 0.0, 1.0};
  };

  static Density gaussian1d(double mean, double var);
  static Density mixture1d(std::vector<Component> comps);
  static Density mixture2d(std::vector<Component> comps);
  static Density discrete(std::vector<double> probs);

  Kind kind() const { return kind_; }
  bool is_discrete() const { return kind_ == Kind::Discrete; }
  int dim() const { return kind_ == Kind::Mixture2D ? 2 : 1; }
  const std::vector<Component>& components() const { return comps_; }
  const std::vector<double>& probs() const { return probs_; }
  size_t atom_count() const { return probs_.size(); }

  double density(const double* x) const;
  double density1(double x) const { return density(&x); }

  // n points, flattened n*dim (discrete: atom indices as doubles)
  std::vector<double> sample(Rng& rng, size_t n) const;

  // [mean - k*sigma, mean + k*sigma] union over components along an axis
  void axis_extent(int axis, double k_sigma, double* lo, double* hi) const;

 private:
  Kind kind_ = Kind::Mixture1D;
  std::vector<Component> comps_;
  std::vector<double> probs_;

  // per-component cached values
  struct Cache {
    double log_norm = 0.0;                       // -log((2pi)^{d/2} sqrt(det))
    std::array<double, 4> inv{1.0, 0.0, 0.0, 1.0};
    std::array<double, 4> chol{1.0, 0.0, 0.0, 1.0};  // lower triangular
  };
  std::vector<Cache> cache_;
  std::vector<double> cum_weight_;

  void finalize();
};

}  // namespace prdiv
