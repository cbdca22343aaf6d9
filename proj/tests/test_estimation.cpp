#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "prdiv/estimation.hpp"
#include "prdiv/nn.hpp"

using namespace prdiv;
using namespace testutil;

namespace {

const Density kP = Density::gaussian1d(0.0, 1.0);
const Density kQ = Density::gaussian1d(0.8, 1.2);

}  // namespace

TEST_CASE("ratio estimator rejects non-strictly-convex auxiliaries") {
  const ScalarField zero = [](const double*) { return 0.0; };
  CHECK_THROWS_AS(RatioEstimator(make_builtin("tv"), zero), std::invalid_argument);
  CHECK_THROWS_AS(RatioEstimator(make_pr_generator(PRLambda(1.0)), zero), std::invalid_argument);
}

TEST_CASE("primal estimate recovers the divergence at the optimal discriminator") {
  const auto grid = QuadratureGrid::for_pair(kP, kQ);
  const Tabulation tab = Tabulation::make(kP, kQ, grid);
  for (const char* aux_name : {"chi2", "kl"}) {
    const GeneratorSpec aux = make_builtin(aux_name);
    const RatioEstimator est(aux, optimal_discriminator(aux, kP, kQ));
    for (const char* target_name : {"kl", "chi2", "rkl"}) {
      const GeneratorSpec target = make_builtin(target_name);
      CAPTURE(aux_name);
      CAPTURE(target_name);
      // tail nodes where the true ratio leaves [1e-6, 1e6] clamp; their
      // q-weighted contribution is negligible
      const auto res = primal_estimate(target, est, tab);
      CHECK(res.value == doctest::Approx(fdiv_exact(target, tab)).epsilon(1e-6));
    }
    for (double l : {0.5, 1.0, 4.0}) {
      const GeneratorSpec target = make_pr_generator(PRLambda(l));
      const auto res = primal_estimate(target, est, tab);
      CHECK(res.value == doctest::Approx(fdiv_exact(target, tab)).epsilon(1e-6));
    }
  }
}

TEST_CASE("constant critical discriminator gives a zero primal estimate") {
  const auto grid = QuadratureGrid::for_pair(kP, kQ);
  const GeneratorSpec g = make_builtin("kl");
  const double t1 = g.f_prime(1.0);
  const RatioEstimator est(g, [t1](const double*) { return t1; });
  const auto res = primal_estimate(make_builtin("kl"), est, Tabulation::make(kP, kQ, grid));
  CHECK(res.value == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("two-atom hand computations") {
  const Density p = Density::discrete({0.5, 0.5});
  const Density q = Density::discrete({0.25, 0.75});
  const QuadratureGrid dummy;
  const Tabulation tab = Tabulation::make(p, q, dummy);
  const GeneratorSpec chi2 = make_builtin("chi2");

  // constant T = 0.4: r = 0.4/2 + 1 = 1.2 on both atoms
  const RatioEstimator est(chi2, [](const double*) { return 0.4; });
  const auto res = primal_estimate(chi2, est, tab);
  CHECK(res.value == doctest::Approx(0.04).epsilon(1e-15));
  // sample path: mean over fake draws equals the same plug-in value here
  const auto res_s = primal_estimate_samples(chi2, est, {0.0, 1.0, 1.0, 0.0}, 1);
  CHECK(res_s.value == doctest::Approx(0.04).epsilon(1e-15));

  // per-atom T = (0.1, 0.3): Breg gap = 481/1200, checked against
  // fdiv - dual inside bregman_gap
  const ScalarField t_atom = [](const double* x) { return x[0] < 0.5 ? 0.1 : 0.3; };
  const double gap = bregman_gap(chi2, t_atom, tab);
  CHECK(gap == doctest::Approx(481.0 / 1200.0).epsilon(1e-14));

  // optimal discriminator closes the gap
  CHECK(bregman_gap(chi2, optimal_discriminator(chi2, p, q), tab) ==
        doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("Thm 4 identity for discrete enumerations and mixtures") {
  // discrete: all 3-atom pairs on a 0.2 grid, both auxiliaries, a few T
  const auto dists = prob_grid(3, 5);
  const QuadratureGrid dummy;
  Rng rng(61);
  for (const char* gname : {"kl", "chi2"}) {
    const GeneratorSpec g = make_builtin(gname);
    for (const auto& pp : dists) {
      for (const auto& qq : dists) {
        const Tabulation tab =
            Tabulation::make(Density::discrete(pp), Density::discrete(qq), dummy);
        for (int rep = 0; rep < 3; ++rep) {
          double tv[3];
          for (double& t : tv)
            t = g.kind() == GeneratorSpec::Kind::Chi2 ? rng.uniform(-1.5, 3.0)
                                                      : rng.uniform(-2.0, 2.0);
          const ScalarField T = [&tv](const double* x) {
            return tv[static_cast<int>(x[0] + 0.5)];
          };
          // bregman_gap enforces the identity at 1e-7; re-check at 1e-12
          const double gap = bregman_gap(g, T, tab);
          const double direct = fdiv_exact(g, tab) - dual_value(g, tab, T);
          REQUIRE(std::fabs(gap - direct) < 1e-12);
          REQUIRE(gap >= -1e-15);
        }
      }
    }
  }
  // mixtures with random MLP discriminators
  const auto grid = QuadratureGrid::for_pair(kP, kQ);
  const Tabulation tab = Tabulation::make(kP, kQ, grid);
  for (const char* gname : {"kl", "chi2"}) {
    const GeneratorSpec g = make_builtin(gname);
    for (int rep = 0; rep < 10; ++rep) {
      ParamStore ps;
      Mlp net(&ps, "T", {1, 12, 1}, 0.01, g.activation());
      ps.init_fan_in(rng);
      const ScalarField T = [&net](const double* x) { return net.eval1(x); };
      const double gap = bregman_gap(g, T, tab);  // throws beyond 1e-7
      CHECK(gap >= 0.0);
    }
  }
}

TEST_CASE("bregman gap is non-increasing along dual ascent") {
  const auto grid = QuadratureGrid::for_pair(kP, kQ, 512);
  const Tabulation tab = Tabulation::make(kP, kQ, grid);
  const GeneratorSpec g = make_builtin("chi2");
  Rng rng(71);
  ParamStore ps;
  Mlp net(&ps, "T", {1, 16, 1}, 0.01, g.activation());
  ps.init_fan_in(rng);
  // deterministic full-quadrature ascent of the dual
  std::vector<double> wp(tab.size()), wq(tab.size());
  for (size_t i = 0; i < tab.size(); ++i) {
    wp[i] = tab.w[i] * tab.p[i];
    wq[i] = tab.w[i] * tab.q[i];
  }
  ad::Mat xs(static_cast<int>(tab.size()), 1);
  xs.a = tab.xs;
  Optimizer opt(Optimizer::Kind::Sgd, 0.1, ps.data().size());
  int drops = 0, total = 0;
  double prev = bregman_gap(g, [&](const double* x) { return net.eval1(x); }, tab);
  for (int step = 0; step < 200; ++step) {
    ad::Graph gr;
    const auto t = net.forward(gr, gr.input(xs), true);
    const auto dual =
        gr.sub(gr.weighted_sum(t, wp), gr.weighted_sum(gr.gen_conj(t, g), wq));
    gr.backward(gr.neg(dual));
    std::vector<double> grads(ps.data().size(), 0.0);
    for (size_t i = 0; i < ps.slices().size(); ++i) {
      const ad::Mat* gm = gr.bound_grad(&ps, static_cast<int>(i));
      if (gm) std::copy(gm->a.begin(), gm->a.end(),
                        grads.begin() + static_cast<long>(ps.slices()[i].offset));
    }
    opt.step(ps.data(), grads);
    const double cur = bregman_gap(g, [&](const double* x) { return net.eval1(x); }, tab);
    ++total;
    if (cur <= prev + 1e-12) ++drops;
    prev = cur;
  }
  CHECK(static_cast<double>(drops) / total >= 0.95);
  CHECK(prev < 0.05);  // close to optimal after 60 full-batch steps
}

TEST_CASE("error bound formula and empirical validation") {
  CHECK(error_bound(make_pr_generator(PRLambda(3.0)), make_builtin("chi2"), 0.01, 0.1, 10.0) ==
        doctest::Approx(0.3).epsilon(1e-12));
  CHECK(error_bound(make_builtin("kl"), make_builtin("chi2"), 0.0, 0.5, 2.0) == 0.0);
  CHECK_THROWS(error_bound(make_builtin("kl"), make_builtin("tv"), 0.01, 0.5, 2.0));
  CHECK_THROWS(error_bound(make_builtin("kl"), make_builtin("chi2"), -0.1, 0.5, 2.0));

  // 20 random discriminators: the measured dual gap bounds the primal error
  const auto grid = QuadratureGrid::for_pair(kP, kQ);
  const Tabulation tab = Tabulation::make(kP, kQ, grid);
  const GeneratorSpec g = make_builtin("chi2");
  const GeneratorSpec f = make_pr_generator(PRLambda(1.0));
  const double exact_g = fdiv_exact(g, tab);
  const double exact_f = fdiv_exact(f, tab);
  Rng rng(81);
  int violations = 0;
  for (int rep = 0; rep < 20; ++rep) {
    ParamStore ps;
    Mlp net(&ps, "T", {1, 12, 1}, 0.01, g.activation());
    ps.init_fan_in(rng);
    const ScalarField T = [&net](const double* x) { return net.eval1(x); };
    const RatioEstimator est(g, T);
    // realized ratio range: union of the estimate and the true ratio
    double m = kInf, M = -kInf;
    for (size_t i = 0; i < tab.size(); ++i) {
      const double r = est.ratio(tab.node(i));
      const double u = tab.p[i] / tab.q[i];
      m = std::min({m, r, u});
      M = std::max({M, r, u});
    }
    if (!(m > 0.0)) continue;  // bound needs a positive ratio field
    const double eps = exact_g - dual_value(g, tab, T);
    const double bound = error_bound(f, g, std::max(eps, 0.0), m, M);
    const double err = std::fabs(exact_f - primal_estimate(f, est, tab).value);
    if (err > bound + 1e-9) ++violations;
  }
  CHECK(violations == 0);
}
