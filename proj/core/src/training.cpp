#include "prdiv/training.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "json.hpp"

namespace prdiv {

void TrainConfig::validate() const {
  if (!(lr_T > 0.0) || !(lr_G > 0.0))
    throw std::invalid_argument("TrainConfig: learning rates must be positive");
  if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
  if (steps < 0 || warmup_steps < 0)
    throw std::invalid_argument("TrainConfig: steps must be nonnegative");
  if (disc_steps_per_gen < 1)
    throw std::invalid_argument("TrainConfig: disc_steps_per_gen must be >= 1");
  if (model_kind != "flow" && model_kind != "generator")
    throw std::invalid_argument("TrainConfig: model_kind must be flow or generator");
  if (model_kind != "flow" && gamma != 0.0)
    throw std::invalid_argument("TrainConfig: gamma must be 0 unless model_kind is flow");
  if (optimizer != "adam" && optimizer != "sgd")
    throw std::invalid_argument("TrainConfig: optimizer must be adam or sgd");
  const GeneratorSpec aux = parse_generator(auxiliary);
  if (!aux.has_second())
    throw std::invalid_argument("TrainConfig: auxiliary must be strictly convex, got " +
                                auxiliary);
  if (target != "auc") parse_generator(target);  // validates the id
  if (truncation != "none" && truncation != "hard" && truncation != "soft")
    throw std::invalid_argument("TrainConfig: unknown truncation " + truncation);
}

namespace {

nlohmann::json config_json(const TrainConfig& c) {
  nlohmann::json j;
  j["target"] = c.target;
  j["auxiliary"] = c.auxiliary;
  j["model_kind"] = c.model_kind;
  j["batch_size"] = c.batch_size;
  j["steps"] = c.steps;
  j["disc_steps_per_gen"] = c.disc_steps_per_gen;
  j["lr_T"] = c.lr_T;
  j["lr_G"] = c.lr_G;
  j["gamma"] = c.gamma;
  j["warmup_steps"] = c.warmup_steps;
  j["seed"] = c.seed;
  j["optimizer"] = c.optimizer;
  j["adam"] = {{"beta1", c.adam.beta1}, {"beta2", c.adam.beta2}, {"eps", c.adam.eps}};
  j["eval_every"] = c.eval_every;
  j["disc_hidden"] = c.disc_hidden;
  j["flow_hidden"] = c.flow_hidden;
  j["flow_steps"] = c.flow_steps;
  j["gen_hidden"] = c.gen_hidden;
  j["latent_dim"] = c.latent_dim;
  j["truncation"] = c.truncation;
  j["trunc_psi"] = c.trunc_psi;
  j["auc_points"] = c.auc_points;
  return j;
}

}  // namespace

TrainConfig train_config_from_json(const std::string& json_text) {
  const nlohmann::json j = nlohmann::json::parse(json_text);
  TrainConfig c;
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  get("target", c.target);
  get("auxiliary", c.auxiliary);
  get("model_kind", c.model_kind);
  get("batch_size", c.batch_size);
  get("steps", c.steps);
  get("disc_steps_per_gen", c.disc_steps_per_gen);
  get("lr_T", c.lr_T);
  get("lr_G", c.lr_G);
  get("gamma", c.gamma);
  get("warmup_steps", c.warmup_steps);
  get("seed", c.seed);
  get("optimizer", c.optimizer);
  if (j.contains("adam")) {
    c.adam.beta1 = j["adam"].value("beta1", c.adam.beta1);
    c.adam.beta2 = j["adam"].value("beta2", c.adam.beta2);
    c.adam.eps = j["adam"].value("eps", c.adam.eps);
  }
  get("eval_every", c.eval_every);
  get("disc_hidden", c.disc_hidden);
  get("flow_hidden", c.flow_hidden);
  get("flow_steps", c.flow_steps);
  get("gen_hidden", c.gen_hidden);
  get("latent_dim", c.latent_dim);
  get("truncation", c.truncation);
  get("trunc_psi", c.trunc_psi);
  get("auc_points", c.auc_points);
  c.validate();
  return c;
}

std::string train_config_to_json(const TrainConfig& cfg) { return config_json(cfg).dump(2); }

void ExperimentLog::to_csv(std::ostream& os, const std::string& config_hash) const {
  os << "# config_hash=" << config_hash << "\n";
  os << "step,loss_T,loss_G,clamped,alpha_hat,eval\n";
  char buf[512];
  for (const StepRecord& r : records) {
    if (r.has_eval) {
      std::snprintf(buf, sizeof(buf), "%ld,%.17g,%.17g,%ld,%.17g,%.17g\n", r.step, r.loss_T,
                    r.loss_G, r.clamped, r.alpha_hat, r.eval_value);
    } else {
      std::snprintf(buf, sizeof(buf), "%ld,%.17g,%.17g,%ld,%.17g,\n", r.step, r.loss_T, r.loss_G,
                    r.clamped, r.alpha_hat);
    }
    os << buf;
  }
  if (aborted) os << "# aborted: " << abort_reason << "\n";
}

std::vector<double> TrainedModel::sample(Rng& rng, size_t n) const {
  const std::vector<double> z = latent.sample(rng, n);
  std::vector<double> x(n * static_cast<size_t>(data_dim()));
  if (kind == "flow") {
    flow->forward_plain(z.data(), x.data(), n);
  } else {
    generator->forward_plain(z.data(), x.data(), n);
  }
  return x;
}

int TrainedModel::data_dim() const {
  return kind == "flow" ? flow->dim() : generator->out_width();
}

double TrainedModel::log_density(const double* x) const {
  if (kind != "flow") throw std::logic_error("TrainedModel: only flows expose a density");
  return flow->log_prob_plain(x);
}

TrainedModel TrainedModel::clone() const {
  TrainedModel out = *this;
  out.g_store = std::make_shared<ParamStore>(*g_store);
  out.t_store = std::make_shared<ParamStore>(*t_store);
  if (flow) {
    out.flow = std::make_shared<CouplingFlow>(*flow);
    out.flow->set_store(out.g_store.get());
  }
  if (generator) {
    out.generator = std::make_shared<Mlp>(*generator);
    out.generator->set_store(out.g_store.get());
  }
  out.discriminator = std::make_shared<Mlp>(*discriminator);
  out.discriminator->set_store(out.t_store.get());
  return out;
}

TrainedModel init_model(const TrainConfig& cfg, int data_dim) {
  cfg.validate();
  TrainedModel m;
  m.kind = cfg.model_kind;
  m.g_store = std::make_shared<ParamStore>();
  m.t_store = std::make_shared<ParamStore>();

  std::vector<int> disc_widths;
  disc_widths.push_back(data_dim);
  for (int h : cfg.disc_hidden) disc_widths.push_back(h);
  disc_widths.push_back(1);
  m.discriminator = std::make_shared<Mlp>(m.t_store.get(), "T", disc_widths);

  m.latent.trunc = cfg.truncation == "hard"   ? LatentSampler::Trunc::Hard
                   : cfg.truncation == "soft" ? LatentSampler::Trunc::Soft
                                              : LatentSampler::Trunc::None;
  m.latent.psi = cfg.trunc_psi;

  const uint64_t init_seed = derive_seed(cfg.seed, "init");
  Rng init_rng(init_seed);
  if (cfg.model_kind == "flow") {
    m.flow = std::make_shared<CouplingFlow>(m.g_store.get(), data_dim, cfg.flow_steps,
                                            cfg.flow_hidden);
    m.latent.dim = data_dim;
    m.g_store->init_fan_in(init_rng);
    m.flow->identity_init();
  } else {
    std::vector<int> gen_widths;
    gen_widths.push_back(cfg.latent_dim);
    for (int h : cfg.gen_hidden) gen_widths.push_back(h);
    gen_widths.push_back(data_dim);
    m.generator = std::make_shared<Mlp>(m.g_store.get(), "G", gen_widths);
    m.latent.dim = cfg.latent_dim;
    m.g_store->init_fan_in(init_rng);
  }
  m.t_store->init_fan_in(init_rng);
  m.g_store->init_seed = init_seed;
  m.t_store->init_seed = init_seed;
  return m;
}

namespace {

using Id = ad::Graph::Id;

enum class Mode { TwoStep, Naive, Mle, Auc };

struct Trainer {
  const TrainConfig& cfg;
  const Density& p;
  Mode mode;
  TrainedModel model;
  GeneratorSpec target;
  GeneratorSpec aux;
  Rng data_rng;
  Rng latent_rng;
  Optimizer opt_T;
  Optimizer opt_G;
  ExperimentLog log;
  int dim;
  long consecutive_bad = 0;
  std::vector<double> eval_batch;  // fixed real batch for eval snapshots

  Trainer(const TrainConfig& c, const Density& dens, Mode md, TrainedModel m)
      : cfg(c),
        p(dens),
        mode(md),
        model(std::move(m)),
        target(c.target == "auc" ? parse_generator("pr:1") : parse_generator(c.target)),
        aux(parse_generator(c.auxiliary)),
        data_rng(derive_seed(c.seed, "data")),
        latent_rng(derive_seed(c.seed, "latent")),
        opt_T(c.optimizer == "adam" ? Optimizer::Kind::Adam : Optimizer::Kind::Sgd, c.lr_T,
              model.t_store->data().size(), c.adam),
        opt_G(c.optimizer == "adam" ? Optimizer::Kind::Adam : Optimizer::Kind::Sgd, c.lr_G,
              model.g_store->data().size(), c.adam),
        dim(model.data_dim()) {
    // dual activation: the naive baseline constrains T to dom(f*_lambda),
    // the auxiliary route to dom(g*)
    model.discriminator->set_out_activation(mode == Mode::Naive ? target.activation()
                                                                : aux.activation());
    if (c.eval_every > 0) eval_batch = p.sample(data_rng, static_cast<size_t>(c.batch_size));
  }

  std::vector<double> collect_grads(ad::Graph& g, const ParamStore& store) {
    std::vector<double> out(store.data().size(), 0.0);
    for (size_t i = 0; i < store.slices().size(); ++i) {
      const ad::Mat* gm = g.bound_grad(&store, static_cast<int>(i));
      if (!gm) continue;
      const auto& s = store.slices()[i];
      std::copy(gm->a.begin(), gm->a.end(), out.begin() + static_cast<long>(s.offset));
    }
    // global-norm clip: the chi2 dual is unbounded while the players are
    // separable and the early ratio field is wild; clipping keeps both
    // optimizers inside their stable step range without touching the
    // objective near equilibrium
    double norm2 = 0.0;
    for (double v : out) norm2 += v * v;
    const double norm = std::sqrt(norm2);
    constexpr double kMaxGradNorm = 5.0;
    if (norm > kMaxGradNorm) {
      const double s = kMaxGradNorm / norm;
      for (double& v : out) v *= s;
    }
    return out;
  }

  Id fake_batch_graph(ad::Graph& g, bool train_gen) {
    const std::vector<double> z =
        model.latent.sample(latent_rng, static_cast<size_t>(cfg.batch_size));
    const Id zi = g.input(cfg.batch_size, model.latent.dim, z.data(), false, "z");
    if (model.kind == "flow") return model.flow->forward(g, zi, nullptr, train_gen);
    return model.generator->forward(g, zi, train_gen);
  }

  // one ascent step on the empirical dual of `spec`; returns the dual value
  double discriminator_step(const GeneratorSpec& spec) {
    const std::vector<double> x_real = p.sample(data_rng, static_cast<size_t>(cfg.batch_size));
    ad::Graph g;
    const Id xr = g.input(cfg.batch_size, dim, x_real.data(), false, "x_real");
    const Id xf = fake_batch_graph(g, false);
    const Id t_real = model.discriminator->forward(g, xr, true);
    const Id t_fake = model.discriminator->forward(g, xf, true);
    const Id dual =
        g.sub(g.mean_all(t_real), g.mean_all(g.gen_conj(t_fake, spec)));
    const Id loss = g.neg(dual);
    g.backward(loss);
    const auto grads = collect_grads(g, *model.t_store);
    opt_T.step(model.t_store->data(), grads);
    return g.scalar(dual);
  }

  struct GStep {
    double loss_G = 0.0;
    double alpha_hat = 0.0;
    long clamped = 0;
  };

  GStep generator_step() {
    ad::Graph g;
    GStep out;
    Id loss = -1;
    // Descending the primal estimate with the ratio field frozen transports
    // fake mass along -f'(r) grad r. For targets whose generator increases
    // on the bulk (pr, kl, chi2, tv: recession > 0) that is down-ratio,
    // away from the data, and a mean-fit against the exact auxiliary
    // discriminator diverges; those targets step the other way along the
    // same gradient. Decreasing generators (rkl, gan: recession <= 0)
    // already move up-ratio under descent and keep the printed direction.
    // The logged loss_G keeps the primal-estimate reading either way.
    bool flip_primal_sign = false;
    switch (mode) {
      case Mode::TwoStep:
      case Mode::Auc: {
        const Id xf = fake_batch_graph(g, true);
        const Id t = model.discriminator->forward(g, xf, false);
        const Id r_raw = g.gen_conj_grad(t, aux);
        for (double v : g.val(r_raw).a)
          if (v < kRatioClipLo || v > kRatioClipHi) ++out.clamped;
        const Id r = g.clamp(r_raw, kRatioClipLo, kRatioClipHi);
        flip_primal_sign = mode == Mode::Auc || target.recession() > 0.0;
        if (mode == Mode::TwoStep) {
          const Id primal = g.mean_all(g.gen_f(r, target));
          out.loss_G = g.scalar(primal);
          if (target.is_pr())
            out.alpha_hat = std::min(1.0, target.pr_lambda()) - out.loss_G;
          loss = primal;
        } else {
          // -(1/2) sum alpha_hat^2 / lambda^2 dlambda on a tan(theta) grid
          const int K = cfg.auc_points;
          Id total = -1;
          double auc_val = 0.0;
          for (int j = 0; j < K; ++j) {
            const double theta = 1.5707963267948966 * (j + 1) / (K + 1);
            const double lam = std::tan(theta);
            const double th_lo = 1.5707963267948966 * (j + 0.5) / (K + 1);
            const double th_hi = 1.5707963267948966 * (j + 1.5) / (K + 1);
            const double dlam = std::tan(th_hi) - std::tan(th_lo);
            const GeneratorSpec f_lam = make_pr_generator(PRLambda(lam));
            const Id primal_j = g.mean_all(g.gen_f(r, f_lam));
            const Id a_j = g.add_const(g.neg(primal_j), std::min(1.0, lam));
            const Id term = g.scale(g.square(a_j), dlam / (lam * lam));
            total = total < 0 ? term : g.add(total, term);
            auc_val += 0.5 * g.scalar(term);
          }
          loss = g.neg(g.scale(total, 0.5));
          out.loss_G = -auc_val;  // the descended objective
          out.alpha_hat = 0.0;
        }
        break;
      }
      case Mode::Naive: {
        const Id xf = fake_batch_graph(g, true);
        const Id t = model.discriminator->forward(g, xf, false);
        loss = g.neg(g.mean_all(g.gen_conj(t, target)));
        out.loss_G = g.scalar(loss);
        break;
      }
      case Mode::Mle: {
        const std::vector<double> x_real =
            p.sample(data_rng, static_cast<size_t>(cfg.batch_size));
        const Id xr = g.input(cfg.batch_size, dim, x_real.data(), false, "x_real");
        loss = g.neg(g.mean_all(model.flow->log_prob(g, xr, true)));
        out.loss_G = g.scalar(loss);
        break;
      }
    }
    if (flip_primal_sign) loss = g.neg(loss);
    // Eq.-5 stabilizer: flows carry a gamma-weighted likelihood term
    if (mode != Mode::Mle && model.kind == "flow" && cfg.gamma > 0.0) {
      const std::vector<double> x_real =
          p.sample(data_rng, static_cast<size_t>(cfg.batch_size));
      const Id xr = g.input(cfg.batch_size, dim, x_real.data(), false, "x_real");
      const Id nll = g.neg(g.mean_all(model.flow->log_prob(g, xr, true)));
      loss = g.add(loss, g.scale(nll, cfg.gamma));
    }
    g.backward(loss);
    const auto grads = collect_grads(g, *model.g_store);
    opt_G.step(model.g_store->data(), grads);
    return out;
  }

  double eval_snapshot() {
    if (model.kind != "flow") return 0.0;
    std::vector<double> lp(eval_batch.size() / static_cast<size_t>(dim));
    model.flow->log_prob_batch(eval_batch.data(), lp.data(), lp.size());
    double acc = 0.0;
    for (double v : lp) acc += v;
    return acc / static_cast<double>(lp.size());
  }

  void run(long warmup, long steps) {
    long step = 0;
    for (; step < warmup; ++step) {
      StepRecord rec;
      rec.step = step;
      if (!one_warmup(rec)) break;
      finish_record(rec, step);
    }
    for (long s = 0; s < steps; ++s, ++step) {
      StepRecord rec;
      rec.step = step;
      if (!one_step(rec)) break;
      finish_record(rec, step);
    }
    model.g_store->step = step;
    model.t_store->step = step;
  }

  bool one_warmup(StepRecord& rec) {
    try {
      rec.loss_T = discriminator_step(mode == Mode::Naive ? target : aux);
      consecutive_bad = 0;
      return true;
    } catch (const std::runtime_error& e) {
      return handle_bad(e.what());
    }
  }

  bool one_step(StepRecord& rec) {
    try {
      if (mode != Mode::Mle) {
        for (int d = 0; d < cfg.disc_steps_per_gen; ++d)
          rec.loss_T = discriminator_step(mode == Mode::Naive ? target : aux);
      }
      const GStep gs = generator_step();
      rec.loss_G = gs.loss_G;
      rec.alpha_hat = gs.alpha_hat;
      rec.clamped = gs.clamped;
      if (mode == Mode::TwoStep && target.is_pr()) {
        const double cap = std::min(1.0, target.pr_lambda());
        if (rec.alpha_hat < -0.05 || rec.alpha_hat > cap + 0.05) ++log.alpha_range_violations;
      }
      consecutive_bad = 0;
      return true;
    } catch (const std::runtime_error& e) {
      return handle_bad(e.what());
    }
  }

  bool handle_bad(const std::string& what) {
    // skip the update, keep the last good parameters; abort after 100
    if (++consecutive_bad >= 100) {
      log.aborted = true;
      log.abort_reason = what;
      return false;
    }
    return true;
  }

  void finish_record(StepRecord& rec, long step) {
    if (cfg.eval_every > 0 && (step + 1) % cfg.eval_every == 0) {
      rec.has_eval = true;
      rec.eval_value = eval_snapshot();
    }
    log.records.push_back(rec);
  }
};

TrainResult run_training(const TrainConfig& cfg, const Density& p, Mode mode,
                         const TrainedModel* base) {
  cfg.validate();
  if (mode == Mode::Mle && cfg.model_kind != "flow")
    throw std::invalid_argument("train_mle: model_kind must be flow");
  if (mode == Mode::Naive && cfg.target.rfind("pr:", 0) != 0)
    throw std::invalid_argument("train_naive: target must be a pr generator");
  TrainedModel m = base ? base->clone() : init_model(cfg, p.dim());
  Trainer tr(cfg, p, mode, std::move(m));
  tr.run(cfg.warmup_steps, cfg.steps);
  return {std::move(tr.model), std::move(tr.log)};
}

}  // namespace

TrainResult train_two_step(const TrainConfig& cfg, const Density& p) {
  return run_training(cfg, p, Mode::TwoStep, nullptr);
}

TrainResult train_naive(const TrainConfig& cfg, const Density& p) {
  return run_training(cfg, p, Mode::Naive, nullptr);
}

TrainResult train_mle(const TrainConfig& cfg, const Density& p) {
  return run_training(cfg, p, Mode::Mle, nullptr);
}

TrainResult fine_tune(const TrainedModel& base, const TrainConfig& cfg, const Density& p) {
  if (cfg.warmup_steps <= 0)
    throw std::invalid_argument("fine_tune: warmup_steps must be positive");
  return run_training(cfg, p, Mode::TwoStep, &base);
}

TrainResult train_auc(const TrainConfig& cfg, const Density& p) {
  return run_training(cfg, p, Mode::Auc, nullptr);
}

}  // namespace prdiv
