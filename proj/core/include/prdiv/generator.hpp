#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace prdiv {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Interval {
  double lo = -kInf;
  double hi = kInf;
  bool contains(double t) const { return t >= lo && t <= hi; }
  bool interior(double t) const { return t > lo && t < hi; }
};

// Output activations mapping an unconstrained real into dom(f*). Kept as a
// tagged value (not a closure) so the autodiff graph can differentiate them.
enum class ActivationKind {
  Identity,        // kl, chi2
  NegExp,          // rkl: v -> -exp(v)
  NegSoftplusNeg,  // gan: v -> -log(1 + exp(-v))
  HalfTanh,        // tv:  v -> tanh(v) / 2
  ScaledSigmoid,   // pr(lambda): v -> lambda * sigmoid(v)
  Zero,            // pr(+inf) sentinel
};

struct Activation {
  ActivationKind kind = ActivationKind::Identity;
  double scale = 1.0;  // lambda for ScaledSigmoid
  double shift = 0.0;  // affine_shift moves dom(f*) by c

  double operator()(double v) const;
  double deriv(double v) const;
};

// A convex generator f with its Fenchel conjugate and the handful of
// derived quantities the rest of the toolkit needs. Immutable; safe to
// share across threads. Built-ins: kl, rkl, chi2, gan, tv, pr(lambda),
// each optionally carrying an affine shift f(u) + c*(u-1).
class GeneratorSpec {
 public:
  enum class Kind { Kl, Rkl, Chi2, Gan, Tv, Pr };

  const std::string& name() const { return name_; }
  Kind kind() const { return kind_; }
  bool is_pr() const { return kind_ == Kind::Pr; }
  double pr_lambda() const { return lambda_; }
  double shift() const { return shift_; }

  double f(double u) const;          // domain error for u <= 0
  double f_prime(double u) const;    // subgradient selection at kinks
  double f_second(double u) const;   // unsupported for tv, pr
  bool has_second() const { return kind_ != Kind::Tv && kind_ != Kind::Pr; }

  Interval conj_domain() const { return conj_domain_; }
  double f_conj(double t) const;       // error outside conj_domain
  double f_conj_grad(double t) const;  // interior of conj_domain
  Activation activation() const { return activation_; }

  // inf of f'' on [m, M] (0 for tv, pr)
  double strong_convexity(double m, double M) const;
  // sup of |f'| on [m, M]
  double lipschitz(double m, double M) const;

  // Optimal dual discriminator value at a point with densities p, q > 0.
  double optimal_T(double p, double q) const;

  // lim_{u -> 0+} f(u); +inf where divergent (rkl)
  double f_at_zero() const;
  // recession lim_{u -> inf} f(u)/u; +inf for kl, chi2
  double recession() const;

  static GeneratorSpec builtin(Kind kind, double lambda = 0.0, double shift = 0.0);

 private:
  GeneratorSpec() = default;

  Kind kind_ = Kind::Kl;
  double lambda_ = 0.0;  // pr only; +inf sentinel allowed
  double shift_ = 0.0;
  std::string name_;
  Interval conj_domain_;
  Activation activation_;

  double base_f(double u) const;
  double base_f_prime(double u) const;
  // one-sided derivatives, used for sup|f'| on an interval
  double base_f_prime_right(double u) const;
  double base_f_prime_left(double u) const;
  double base_f_conj(double t) const;
  double base_f_conj_grad(double t) const;
};

struct PRLambda {
  double value = 1.0;
  explicit PRLambda(double v) : value(v) {
    if (!(v > 0.0)) throw std::domain_error("PRLambda: lambda must be positive");
  }
  bool is_infinite() const { return std::isinf(value); }
};

GeneratorSpec make_pr_generator(PRLambda lambda);
GeneratorSpec make_builtin(const std::string& name);
// Accepts "kl", "rkl", "chi2", "gan", "tv" and "pr:<lambda>".
GeneratorSpec parse_generator(const std::string& id);
GeneratorSpec affine_shift(const GeneratorSpec& spec, double c);
// Thm-2 kernel f''(1/lambda) / lambda^3; invariant under affine_shift.
double weight_kernel(const GeneratorSpec& spec, PRLambda lambda);

struct ConvexityConstants {
  double mu = 0.0;     // strong convexity on [m, M]
  double sigma = 0.0;  // Lipschitz constant on [m, M]
};
ConvexityConstants constants_on_interval(const GeneratorSpec& spec, double m, double M);

}  // namespace prdiv
