#include <cmath>
#include <functional>

#include "doctest.h"
#include "oracles.hpp"
#include "prdiv/exact.hpp"
#include "prdiv/nn.hpp"

using namespace prdiv;
using namespace testutil;

namespace {

const Density kStd = Density::gaussian1d(0.0, 1.0);
const Density kShifted = Density::gaussian1d(1.0, 1.0);

QuadratureGrid default_grid() { return QuadratureGrid::for_pair(kStd, kShifted); }

}  // namespace

TEST_CASE("closed-form Gaussian oracles") {
  const auto grid = default_grid();
  CHECK(fdiv_exact(make_builtin("kl"), kStd, kStd, QuadratureGrid::for_density(kStd)) ==
        doctest::Approx(0.0).epsilon(1e-12));
  CHECK(fdiv_exact(make_builtin("kl"), kStd, kShifted, grid) ==
        doctest::Approx(0.5).epsilon(1e-6));
  CHECK(fdiv_exact(make_builtin("chi2"), kStd, kShifted, grid) ==
        doctest::Approx(std::exp(1.0) - 1.0).epsilon(1e-5));
  // same values under Gauss-Legendre
  QuadratureGrid gl = grid;
  gl.rule = QuadratureGrid::Rule::GaussLegendre;
  CHECK(fdiv_exact(make_builtin("kl"), kStd, kShifted, gl) == doctest::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("tv value and the D1 relation") {
  const auto grid = default_grid();
  const double tv = fdiv_exact(make_builtin("tv"), kStd, kShifted, grid);
  // |p - q| has a kink at the crossing; trapezoid converges at O(h^2) there
  CHECK(tv == doctest::Approx(tv_fdiv_gauss_equal_var(0.0, 1.0, 1.0)).epsilon(1e-5));
  const double d1 = fdiv_exact(make_pr_generator(PRLambda(1.0)), kStd, kShifted, grid);
  CHECK(2.0 * d1 == doctest::Approx(tv).epsilon(1e-9));
  CHECK(d1 == doctest::Approx(d1_gauss_equal_var(0.0, 1.0, 1.0)).epsilon(1e-4));
}

TEST_CASE("affine invariance of the divergence") {
  Rng rng(31);
  const Density p = random_mixture_1d(rng);
  const Density q = random_mixture_1d(rng);
  const auto grid = QuadratureGrid::for_pair(p, q);
  const Tabulation tab = Tabulation::make(p, q, grid);
  for (const char* name : {"kl", "rkl", "chi2", "gan"}) {
    const auto spec = make_builtin(name);
    const double base = fdiv_exact(spec, tab);
    for (double c : {-2.0, 1.0, 5.0}) {
      CAPTURE(name);
      CAPTURE(c);
      CHECK(fdiv_exact(affine_shift(spec, c), tab) == doctest::Approx(base).epsilon(1e-9));
    }
  }
}

TEST_CASE("Thm 1: alpha_lambda equals min(1,lambda) minus the pr divergence") {
  Rng rng(37);
  for (int pair = 0; pair < 5; ++pair) {
    const Density p = pair % 2 == 0 ? random_mixture_1d(rng) : random_mixture_2d(rng);
    const Density q = pair % 2 == 0 ? random_mixture_1d(rng) : random_mixture_2d(rng);
    const auto grid = QuadratureGrid::for_pair(p, q, pair % 2 == 0 ? 0 : 128);
    const Tabulation tab = Tabulation::make(p, q, grid);
    for (int i = 0; i < 32; ++i) {
      const double lambda = std::tan(1.5707963267948966 * (i + 1) / 33.0);
      const double a = alpha_lambda(tab, PRLambda(lambda));  // cross-check built in
      const double via =
          std::min(1.0, lambda) - fdiv_exact(make_pr_generator(PRLambda(lambda)), tab);
      CHECK(std::fabs(a - via) <= 1e-8);
    }
  }
}

TEST_CASE("alpha at identical and far-apart distributions") {
  const auto grid = QuadratureGrid::for_density(kStd);
  const Tabulation self = Tabulation::make(kStd, kStd, grid);
  CHECK(alpha_lambda(self, PRLambda(0.3)) == doctest::Approx(0.3).epsilon(1e-9));
  CHECK(alpha_lambda(self, PRLambda(7.0)) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(alpha_lambda(self, PRLambda(kInf)) == 1.0);

  const Density far = Density::gaussian1d(20.0, 1.0);
  const auto wide = QuadratureGrid::for_pair(kStd, far);
  CHECK(alpha_lambda(kStd, far, PRLambda(1.0), wide) < 1e-8);
}

TEST_CASE("dual value: constant critical discriminator gives zero") {
  const auto grid = default_grid();
  const Tabulation tab = Tabulation::make(kStd, kShifted, grid);
  for (const char* name : {"kl", "rkl", "chi2", "gan"}) {
    const auto spec = make_builtin(name);
    const double t1 = spec.f_prime(1.0);
    CAPTURE(name);
    CHECK(dual_value(spec, tab, [&](const double*) { return t1; }) ==
          doctest::Approx(0.0).epsilon(1e-9));
  }
}

TEST_CASE("duality attainment at the optimal discriminator") {
  Rng rng(41);
  const Density p = random_mixture_1d(rng);
  const Density q = random_mixture_1d(rng);
  const auto grid = QuadratureGrid::for_pair(p, q);
  const Tabulation tab = Tabulation::make(p, q, grid);
  std::vector<GeneratorSpec> specs;
  for (const char* n : {"kl", "rkl", "chi2", "gan"}) specs.push_back(make_builtin(n));
  for (double l : {0.1, 1.0, 10.0}) specs.push_back(make_pr_generator(PRLambda(l)));
  for (const auto& spec : specs) {
    CAPTURE(spec.name());
    const auto T = optimal_discriminator(spec, p, q);
    CHECK(dual_value(spec, tab, T) == doctest::Approx(fdiv_exact(spec, tab)).epsilon(1e-6));
  }
  // kl example: optimal dual equals the closed-form 0.5
  const Tabulation gtab = Tabulation::make(kStd, kShifted, default_grid());
  const auto klT = optimal_discriminator(make_builtin("kl"), kStd, kShifted);
  CHECK(dual_value(make_builtin("kl"), gtab, klT) == doctest::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("weak duality for random discriminators") {
  Rng rng(43);
  const Density p = random_mixture_1d(rng);
  const Density q = random_mixture_1d(rng);
  const auto grid = QuadratureGrid::for_pair(p, q);
  const Tabulation tab = Tabulation::make(p, q, grid);
  for (const char* name : {"kl", "chi2", "rkl", "gan"}) {
    const auto spec = make_builtin(name);
    const double exact = fdiv_exact(spec, tab);
    for (int it = 0; it < 25; ++it) {
      ParamStore store;
      Mlp net(&store, "T", {1, 16, 16, 1}, 0.01, spec.activation());
      store.init_fan_in(rng);
      const double dv =
          dual_value(spec, tab, [&](const double* x) { return net.eval1(x); });
      CAPTURE(name);
      CHECK(dv <= exact + 1e-6);
    }
  }
}

TEST_CASE("discrete brute force identities") {
  // every pair of 3-atom distributions on a 0.1 grid, exact to 1e-12
  const auto dists = prob_grid(3, 10);
  const QuadratureGrid dummy;  // unused for discrete pairs
  for (const auto& pp : dists) {
    for (const auto& qq : dists) {
      const Density p = Density::discrete(pp);
      const Density q = Density::discrete(qq);
      const Tabulation tab = Tabulation::make(p, q, dummy);
      for (double l : {0.25, 1.0, 3.0}) {
        const double a = alpha_lambda(tab, PRLambda(l));
        double direct = 0.0;
        for (size_t i = 0; i < pp.size(); ++i) direct += std::min(l * pp[i], qq[i]);
        REQUIRE(std::fabs(a - direct) < 1e-12);
        // reflection identity by exact summation
        const double lhs = fdiv_exact(make_pr_generator(PRLambda(l)), q, p, dummy);
        const double rhs =
            l * fdiv_exact(make_pr_generator(PRLambda(1.0 / l)), p, q, dummy);
        REQUIRE(std::fabs(lhs - rhs) < 1e-12);
      }
    }
  }
  // spec example: lambda=3, P=(.5,.5), Q=(.25,.75)
  const Density p = Density::discrete({0.5, 0.5});
  const Density q = Density::discrete({0.25, 0.75});
  const auto [lhs, rhs] = reflection_check(p, q, PRLambda(3.0), dummy);
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-15));
  CHECK(lhs == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("reflection identity for mixtures") {
  Rng rng(47);
  const Density p = random_mixture_1d(rng);
  const Density q = random_mixture_1d(rng);
  const auto grid = QuadratureGrid::for_pair(p, q);
  for (double l : {0.2, 1.0, 5.0}) {
    const auto [lhs, rhs] = reflection_check(p, q, PRLambda(l), grid);
    CAPTURE(l);
    CHECK(std::fabs(lhs - rhs) <= 1e-7);
  }
  // D1 symmetry: lambda = 1 swaps arguments freely
  const auto [l1, r1] = reflection_check(kStd, kShifted, PRLambda(1.0), default_grid());
  CHECK(l1 == doctest::Approx(r1).epsilon(1e-9));
  CHECK(l1 == doctest::Approx(d1_gauss_equal_var(0.0, 1.0, 1.0)).epsilon(1e-4));
}

TEST_CASE("pr curve invariants and shapes") {
  const auto grid = QuadratureGrid::for_density(kStd);
  const Tabulation self = Tabulation::make(kStd, kStd, grid);
  const PRCurve square = pr_curve(self, 33);
  for (const auto& pt : square.points) {
    CHECK(pt.alpha == doctest::Approx(std::min(1.0, pt.lambda)).epsilon(1e-9));
    CHECK(pt.beta == doctest::Approx(std::min(1.0, 1.0 / pt.lambda)).epsilon(1e-9));
  }

  // degenerate 3-point curve is monotone (validate() enforces it)
  CHECK(pr_curve(self, 3).points.size() == 3);
  CHECK_THROWS(pr_curve(self, 2));

  // mode-covering vs one-mode model against a bimodal target
  const Density target = Density::mixture1d(
      {{0.5, {-2.0, 0.0}, {0.25, 0, 0, 0}}, {0.5, {2.0, 0.0}, {0.25, 0, 0, 0}}});
  const Density covering = Density::gaussian1d(0.0, 2.25);
  const Density one_mode = Density::mixture1d({{1.0, {2.0, 0.0}, {0.25, 0, 0, 0}}});
  const auto g2 = QuadratureGrid::for_pair(target, covering);
  const Tabulation cov_tab = Tabulation::make(target, covering, g2);
  const Tabulation one_tab = Tabulation::make(target, one_mode, g2);
  const double hi_l = 20.0, lo_l = 0.05;
  CHECK(alpha_lambda(one_tab, PRLambda(hi_l)) > alpha_lambda(cov_tab, PRLambda(hi_l)));
  CHECK(alpha_lambda(cov_tab, PRLambda(lo_l)) > alpha_lambda(one_tab, PRLambda(lo_l)));
}

TEST_CASE("Thm 2 decomposition reconstructs the divergence") {
  const Density p = Density::gaussian1d(0.0, 1.0);
  const Density q = Density::gaussian1d(0.5, 1.0);
  const auto grid = QuadratureGrid::for_pair(p, q);
  const Tabulation tab = Tabulation::make(p, q, grid);
  for (const char* name : {"kl", "rkl", "chi2"}) {
    const auto spec = make_builtin(name);
    const double direct = fdiv_exact(spec, tab);
    const double integral = decompose_fdiv(spec, tab, 256);
    CAPTURE(name);
    CHECK(std::fabs(integral - direct) / std::max(direct, 1e-12) < 0.01);
  }
  // P = Q: integrand vanishes
  const Tabulation self = Tabulation::make(p, p, QuadratureGrid::for_density(p));
  CHECK(decompose_fdiv(make_builtin("chi2"), self, 64) == doctest::Approx(0.0).epsilon(1e-10));
  CHECK_THROWS(decompose_fdiv(make_builtin("tv"), tab, 64));
  CHECK_THROWS(decompose_fdiv(make_builtin("kl"), tab, 32));
}

TEST_CASE("auc equals the geometric polar area") {
  const auto grid = QuadratureGrid::for_density(kStd);
  const Tabulation self = Tabulation::make(kStd, kStd, grid);
  CHECK(auc(self, 256) == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(auc_geometric(self, 256) == doctest::Approx(1.0).epsilon(1e-3));

  const Density far = Density::gaussian1d(20.0, 1.0);
  const auto wide = QuadratureGrid::for_pair(kStd, far);
  const Tabulation far_tab = Tabulation::make(kStd, far, wide);
  CHECK(auc(far_tab, 256) < 1e-4);

  Rng rng(53);
  for (int it = 0; it < 4; ++it) {
    const Density p = random_mixture_1d(rng);
    const Density q = random_mixture_1d(rng);
    const Tabulation tab = Tabulation::make(p, q, QuadratureGrid::for_pair(p, q));
    const double a = auc(tab, 256);
    const double g = auc_geometric(tab, 256);
    CHECK(std::fabs(a - g) / std::max(g, 1e-12) < 0.005);
  }
}

TEST_CASE("grid and domain errors") {
  // coverage violation: grid too narrow for the pair
  QuadratureGrid narrow = QuadratureGrid::for_density(kStd);
  narrow.lo[0] = -2.0;
  narrow.hi[0] = 2.0;
  CHECK_THROWS_AS(Tabulation::make(kStd, kShifted, narrow), std::invalid_argument);
  CHECK_THROWS(axis_rule(QuadratureGrid::Rule::Trapezoid, 0.0, 1.0, 8, nullptr, nullptr));

  // discriminator outside dom(f*) reports the node
  const auto grid = default_grid();
  const Tabulation tab = Tabulation::make(kStd, kShifted, grid);
  CHECK_THROWS_WITH_AS(
      dual_value(make_builtin("rkl"), tab, [](const double*) { return 1.0; }),
      doctest::Contains("dom(f*)"), std::runtime_error);
}
