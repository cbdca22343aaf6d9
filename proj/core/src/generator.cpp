#include "prdiv/generator.hpp"

#include <charconv>
#include <cstdio>

namespace prdiv {

namespace {
const double kLog2x2 = 2.0 * std::log(2.0);

double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }
}  // namespace

double Activation::operator()(double v) const {
  double t = 0.0;
  switch (kind) {
    case ActivationKind::Identity: t = v; break;
    case ActivationKind::NegExp: t = -std::exp(v); break;
    case ActivationKind::NegSoftplusNeg: t = -std::log1p(std::exp(-v)); break;
    case ActivationKind::HalfTanh: t = 0.5 * std::tanh(v); break;
    case ActivationKind::ScaledSigmoid: t = scale * sigmoid(v); break;
    case ActivationKind::Zero: t = 0.0; break;
  }
  return t + shift;
}

double Activation::deriv(double v) const {
  switch (kind) {
    case ActivationKind::Identity: return 1.0;
    case ActivationKind::NegExp: return -std::exp(v);
    case ActivationKind::NegSoftplusNeg: return 1.0 / (1.0 + std::exp(v));
    case ActivationKind::HalfTanh: {
      const double th = std::tanh(v);
      return 0.5 * (1.0 - th * th);
    }
    case ActivationKind::ScaledSigmoid: {
      const double s = sigmoid(v);
      return scale * s * (1.0 - s);
    }
    case ActivationKind::Zero: return 0.0;
  }
  return 0.0;
}

double GeneratorSpec::base_f(double u) const {
  switch (kind_) {
    case Kind::Kl: return u == 0.0 ? 0.0 : u * std::log(u);
    case Kind::Rkl: return -std::log(u);
    case Kind::Chi2: return (u - 1.0) * (u - 1.0);
    case Kind::Gan:
      // +2log2 restores f(1) = 0; the divergence is 2*JS.
      return (u == 0.0 ? 0.0 : u * std::log(u)) - (u + 1.0) * std::log(u + 1.0) + kLog2x2;
    case Kind::Tv: return std::fabs(u - 1.0);
    case Kind::Pr:
      if (std::isinf(lambda_)) return 0.0;
      return std::max(lambda_ * u, 1.0) - std::max(lambda_, 1.0);
  }
  return 0.0;
}

double GeneratorSpec::base_f_prime(double u) const {
  switch (kind_) {
    case Kind::Kl: return 1.0 + std::log(u);
    case Kind::Rkl: return -1.0 / u;
    case Kind::Chi2: return 2.0 * (u - 1.0);
    case Kind::Gan: return -std::log1p(1.0 / u);  // log(u / (u + 1)), stable for large u
    case Kind::Tv:
      if (u > 1.0) return 1.0;
      if (u < 1.0) return -1.0;
      return 0.0;  // midpoint of the subdifferential [-1, 1]
    case Kind::Pr: {
      if (std::isinf(lambda_)) return 0.0;
      const double knee = 1.0 / lambda_;
      if (u > knee) return lambda_;
      if (u < knee) return 0.0;
      return 0.5 * lambda_;  // midpoint of the subdifferential [0, lambda]
    }
  }
  return 0.0;
}

double GeneratorSpec::base_f_prime_right(double u) const {
  if (kind_ == Kind::Tv) return u >= 1.0 ? 1.0 : -1.0;
  if (kind_ == Kind::Pr) {
    if (std::isinf(lambda_)) return 0.0;
    return u >= 1.0 / lambda_ ? lambda_ : 0.0;
  }
  return base_f_prime(u);
}

double GeneratorSpec::base_f_prime_left(double u) const {
  if (kind_ == Kind::Tv) return u <= 1.0 ? -1.0 : 1.0;
  if (kind_ == Kind::Pr) {
    if (std::isinf(lambda_)) return 0.0;
    return u <= 1.0 / lambda_ ? 0.0 : lambda_;
  }
  return base_f_prime(u);
}

double GeneratorSpec::f(double u) const {
  if (!(u > 0.0)) {
    // Surfaces quadrature-grid bugs early instead of emitting +/-inf.
    throw std::domain_error("GeneratorSpec(" + name_ + "): f evaluated at u <= 0 (u=" +
                            std::to_string(u) + ")");
  }
  return base_f(u) + shift_ * (u - 1.0);
}

double GeneratorSpec::f_prime(double u) const {
  if (!(u > 0.0)) throw std::domain_error("GeneratorSpec(" + name_ + "): f' at u <= 0");
  return base_f_prime(u) + shift_;
}

double GeneratorSpec::f_second(double u) const {
  if (!has_second())
    throw std::runtime_error("GeneratorSpec(" + name_ + "): f'' unsupported (piecewise linear)");
  if (!(u > 0.0)) throw std::domain_error("GeneratorSpec(" + name_ + "): f'' at u <= 0");
  switch (kind_) {
    case Kind::Kl: return 1.0 / u;
    case Kind::Rkl: return 1.0 / (u * u);
    case Kind::Chi2: return 2.0;
    case Kind::Gan: return 1.0 / (u * (u + 1.0));
    default: return 0.0;
  }
}

double GeneratorSpec::base_f_conj(double t) const {
  switch (kind_) {
    case Kind::Kl: return std::exp(t - 1.0);
    case Kind::Rkl: return -1.0 - std::log(-t);
    case Kind::Chi2: return t * t / 4.0 + t;
    case Kind::Gan: return -std::log(-std::expm1(t)) - kLog2x2;  // -log(1 - e^t), stable
    case Kind::Tv: return t;  // restricted to [-1/2, 1/2]
    case Kind::Pr:
      if (std::isinf(lambda_)) return 0.0;
      return lambda_ <= 1.0 ? t / lambda_ : t / lambda_ + lambda_ - 1.0;
  }
  return 0.0;
}

double GeneratorSpec::base_f_conj_grad(double t) const {
  switch (kind_) {
    case Kind::Kl: return std::exp(t - 1.0);
    case Kind::Rkl: return -1.0 / t;
    case Kind::Chi2: return t / 2.0 + 1.0;
    case Kind::Gan: return 1.0 / std::expm1(-t);  // e^t / (1 - e^t), stable
    case Kind::Tv: return 1.0;  // f* linear; sup attained at u = 1
    case Kind::Pr: return std::isinf(lambda_) ? 0.0 : 1.0 / lambda_;
  }
  return 0.0;
}

double GeneratorSpec::f_conj(double t) const {
  if (!conj_domain_.contains(t)) {
    throw std::domain_error("GeneratorSpec(" + name_ + "): t=" + std::to_string(t) +
                            " outside dom(f*)=[" + std::to_string(conj_domain_.lo) + ", " +
                            std::to_string(conj_domain_.hi) + "]");
  }
  // (f + c(u-1))*(t) = f*(t - c) + c
  return base_f_conj(t - shift_) + shift_;
}

double GeneratorSpec::f_conj_grad(double t) const {
  if (!conj_domain_.contains(t)) {
    throw std::domain_error("GeneratorSpec(" + name_ + "): grad f* at t=" + std::to_string(t) +
                            " outside dom(f*)");
  }
  return base_f_conj_grad(t - shift_);
}

double GeneratorSpec::strong_convexity(double m, double M) const {
  if (!(0.0 < m && m <= M) || std::isinf(M))
    throw std::invalid_argument("strong_convexity: need 0 < m <= M < inf");
  if (!has_second()) return 0.0;
  // f'' is nonincreasing for every smooth built-in, so the inf sits at M.
  return f_second(M);
}

double GeneratorSpec::lipschitz(double m, double M) const {
  if (!(0.0 < m && m <= M) || std::isinf(M))
    throw std::invalid_argument("lipschitz: need 0 < m <= M < inf");
  // f' is nondecreasing (convexity); sup|f'| is attained one-sided at an end.
  const double lo = base_f_prime_right(m) + shift_;
  const double hi = base_f_prime_left(M) + shift_;
  return std::max(std::fabs(lo), std::fabs(hi));
}

double GeneratorSpec::optimal_T(double p, double q) const {
  switch (kind_) {
    case Kind::Tv: {
      const double d = p - q;
      const double s = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
      return 0.5 * s + shift_;
    }
    case Kind::Pr: {
      if (std::isinf(lambda_)) return shift_;
      // boundary lambda*p == q included in the upper set
      return (lambda_ * p >= q ? lambda_ : 0.0) + shift_;
    }
    default: return base_f_prime(p / q) + shift_;
  }
}

double GeneratorSpec::f_at_zero() const {
  double v = 0.0;
  switch (kind_) {
    case Kind::Kl: v = 0.0; break;
    case Kind::Rkl: return kInf;
    case Kind::Chi2: v = 1.0; break;
    case Kind::Gan: v = kLog2x2; break;
    case Kind::Tv: v = 1.0; break;
    case Kind::Pr: v = std::isinf(lambda_) ? 0.0 : 1.0 - std::max(lambda_, 1.0); break;
  }
  return v - shift_;
}

double GeneratorSpec::recession() const {
  switch (kind_) {
    case Kind::Kl:
    case Kind::Chi2: return kInf;
    case Kind::Rkl:
    case Kind::Gan: return shift_;
    case Kind::Tv: return 1.0 + shift_;
    case Kind::Pr: return (std::isinf(lambda_) ? 0.0 : lambda_) + shift_;
  }
  return 0.0;
}

GeneratorSpec GeneratorSpec::builtin(Kind kind, double lambda, double shift) {
  GeneratorSpec s;
  s.kind_ = kind;
  s.lambda_ = lambda;
  s.shift_ = shift;
  switch (kind) {
    case Kind::Kl:
      s.name_ = "kl";
      s.conj_domain_ = {-kInf, kInf};
      s.activation_ = {ActivationKind::Identity, 1.0, shift};
      break;
    case Kind::Rkl:
      s.name_ = "rkl";
      s.conj_domain_ = {-kInf, 0.0};
      s.activation_ = {ActivationKind::NegExp, 1.0, shift};
      break;
    case Kind::Chi2:
      s.name_ = "chi2";
      s.conj_domain_ = {-kInf, kInf};
      s.activation_ = {ActivationKind::Identity, 1.0, shift};
      break;
    case Kind::Gan:
      s.name_ = "gan";
      s.conj_domain_ = {-kInf, 0.0};
      s.activation_ = {ActivationKind::NegSoftplusNeg, 1.0, shift};
      break;
    case Kind::Tv:
      s.name_ = "tv";
      s.conj_domain_ = {-0.5, 0.5};
      s.activation_ = {ActivationKind::HalfTanh, 1.0, shift};
      break;
    case Kind::Pr: {
      if (!(lambda > 0.0)) throw std::domain_error("pr generator: lambda must be positive");
      char buf[64];
      std::snprintf(buf, sizeof(buf), "pr:%g", lambda);
      s.name_ = buf;
      if (std::isinf(lambda)) {
        s.conj_domain_ = {0.0, 0.0};
        s.activation_ = {ActivationKind::Zero, 0.0, shift};
      } else {
        s.conj_domain_ = {0.0, lambda};
        s.activation_ = {ActivationKind::ScaledSigmoid, lambda, shift};
      }
      break;
    }
  }
  s.conj_domain_.lo += shift;
  s.conj_domain_.hi += shift;
  if (shift != 0.0) s.name_ += "(shift " + std::to_string(shift) + ")";
  return s;
}

GeneratorSpec make_pr_generator(PRLambda lambda) {
  return GeneratorSpec::builtin(GeneratorSpec::Kind::Pr, lambda.value);
}

GeneratorSpec make_builtin(const std::string& name) {
  if (name == "kl") return GeneratorSpec::builtin(GeneratorSpec::Kind::Kl);
  if (name == "rkl") return GeneratorSpec::builtin(GeneratorSpec::Kind::Rkl);
  if (name == "chi2") return GeneratorSpec::builtin(GeneratorSpec::Kind::Chi2);
  if (name == "gan") return GeneratorSpec::builtin(GeneratorSpec::Kind::Gan);
  if (name == "tv") return GeneratorSpec::builtin(GeneratorSpec::Kind::Tv);
  throw std::invalid_argument("make_builtin: unknown generator '" + name + "'");
}

GeneratorSpec parse_generator(const std::string& id) {
  if (id.rfind("pr:", 0) == 0) {
    const std::string arg = id.substr(3);
    if (arg == "inf") return GeneratorSpec::builtin(GeneratorSpec::Kind::Pr, kInf);
    double lambda = 0.0;
    auto [ptr, ec] = std::from_chars(arg.data(), arg.data() + arg.size(), lambda);
    if (ec != std::errc() || ptr != arg.data() + arg.size())
      throw std::invalid_argument("parse_generator: bad lambda in '" + id + "'");
    return make_pr_generator(PRLambda(lambda));
  }
  return make_builtin(id);
}

GeneratorSpec affine_shift(const GeneratorSpec& spec, double c) {
  if (c == 0.0) return spec;
  return GeneratorSpec::builtin(spec.kind(), spec.pr_lambda(), spec.shift() + c);
}

double weight_kernel(const GeneratorSpec& spec, PRLambda lambda) {
  if (lambda.is_infinite()) throw std::domain_error("weight_kernel: lambda must be finite");
  const double l = lambda.value;
  return spec.f_second(1.0 / l) / (l * l * l);
}

ConvexityConstants constants_on_interval(const GeneratorSpec& spec, double m, double M) {
  return {spec.strong_convexity(m, M), spec.lipschitz(m, M)};
}

}  // namespace prdiv
