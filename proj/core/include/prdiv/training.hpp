#pragma once

#include <memory>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "prdiv/density.hpp"
#include "prdiv/estimation.hpp"
#include "prdiv/nn.hpp"

namespace prdiv {

// A JSON config file fully determines a run; identical config + seed
// replays to a bit-identical log and checkpoint.
struct TrainConfig {
  std::string target = "pr:1";      // generator id, or "auc"
  std::string auxiliary = "chi2";   // strictly convex: chi2 | kl
  std::string model_kind = "flow";  // flow | generator
  int batch_size = 256;
  long steps = 20000;
  int disc_steps_per_gen = 1;
  double lr_T = 1e-4;
  double lr_G = 2e-5;
  double gamma = 0.1;  // log-likelihood weight; must be 0 unless flow
  long warmup_steps = 0;
  uint64_t seed = 0;
  std::string optimizer = "adam";  // adam | sgd
  AdamConfig adam{};
  long eval_every = 0;

  // desk-scale architecture
  std::vector<int> disc_hidden = {128, 64};
  std::vector<int> flow_hidden = {64, 64};
  int flow_steps = 6;
  std::vector<int> gen_hidden = {64, 64};
  int latent_dim = 2;
  std::string truncation = "none";  // none | hard | soft
  double trunc_psi = 1.0;
  int auc_points = 8;  // lambda grid size for target == "auc"

  void validate() const;
};

TrainConfig train_config_from_json(const std::string& json_text);
std::string train_config_to_json(const TrainConfig& cfg);

struct StepRecord {
  long step = 0;
  double loss_T = 0.0;
  double loss_G = 0.0;
  long clamped = 0;
  double alpha_hat = 0.0;  // min(1,lambda) - primal estimate, pr targets only
  bool has_eval = false;
  double eval_value = 0.0;  // mean model log-likelihood on the eval batch
};

struct ExperimentLog {
  std::vector<StepRecord> records;
  long alpha_range_violations = 0;
  bool aborted = false;
  std::string abort_reason;

  // full-precision CSV; header plus a comment line carrying the config hash
  void to_csv(std::ostream& os, const std::string& config_hash) const;
};

// Trained parameterized sampler; flow models also expose an exact density.
struct TrainedModel {
  std::string kind;  // flow | generator
  std::shared_ptr<ParamStore> g_store;
  std::shared_ptr<ParamStore> t_store;
  std::shared_ptr<CouplingFlow> flow;
  std::shared_ptr<Mlp> generator;
  std::shared_ptr<Mlp> discriminator;
  LatentSampler latent;

  std::vector<double> sample(Rng& rng, size_t n) const;
  int data_dim() const;
  double log_density(const double* x) const;  // flow only
  TrainedModel clone() const;
};

using TrainResult = std::pair<TrainedModel, ExperimentLog>;

// Builds a fresh model pair (G per config.model_kind, T with the auxiliary
// activation) with fan-in init and identity-initialized coupling layers.
TrainedModel init_model(const TrainConfig& cfg, int data_dim);

// Two-step auxiliary algorithm: T ascends the empirical dual of g; G steps
// on the empirical primal of the target, plus gamma * NLL for flows.
TrainResult train_two_step(const TrainConfig& cfg, const Density& p);
// f-GAN baseline: both players on the dual of the target f_lambda.
TrainResult train_naive(const TrainConfig& cfg, const Density& p);
// Maximum likelihood for flows.
TrainResult train_mle(const TrainConfig& cfg, const Density& p);
// Discriminator-only warm-up for warmup_steps, then two-step training.
TrainResult fine_tune(const TrainedModel& base, const TrainConfig& cfg, const Density& p);
// G descends a discretized -(1/2) sum alpha_hat^2 / lambda^2 dlambda.
TrainResult train_auc(const TrainConfig& cfg, const Density& p);

}  // namespace prdiv
