#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "prdiv/autodiff.hpp"
#include "prdiv/rng.hpp"

namespace prdiv {

// Flat parameter vector with named (rows x cols) slices. The parameter
// count is fixed once the owning model is built; updates are single-owner.
class ParamStore {
 public:
  struct Slice {
    std::string name;
    size_t offset = 0;
    int rows = 0;
    int cols = 0;
    size_t count() const { return static_cast<size_t>(rows) * cols; }
  };

  int add_slice(const std::string& name, int rows, int cols);
  const std::vector<Slice>& slices() const { return slices_; }
  const Slice& slice(int idx) const { return slices_[static_cast<size_t>(idx)]; }
  int find(const std::string& name) const;

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }
  double* slice_data(int idx) { return data_.data() + slices_[static_cast<size_t>(idx)].offset; }
  const double* slice_data(int idx) const {
    return data_.data() + slices_[static_cast<size_t>(idx)].offset;
  }

  // fan-in scaled uniform init; final layers of flow subnets are re-zeroed
  void init_fan_in(Rng& rng);
  void zero_slice(int idx);
  void assert_finite() const;

  uint64_t init_seed = 0;
  long step = 0;

 private:
  std::vector<Slice> slices_;
  std::vector<double> data_;
};

// checkpoint: flat little-endian doubles + JSON sidecar (shapes, seed, step)
void save_checkpoint(const ParamStore& store, const std::string& bin_path,
                     const std::string& json_path, const std::string& model_kind);
void load_checkpoint(ParamStore& store, const std::string& bin_path,
                     const std::string& json_path);

// Multi-layer perceptron with leaky-rectifier hidden units and an optional
// generator output activation mapping into dom(f*).
class Mlp {
 public:
  Mlp() = default;
  Mlp(ParamStore* store, const std::string& prefix, std::vector<int> widths,
      double leaky_slope = 0.01, std::optional<Activation> out_act = std::nullopt);

  ad::Graph::Id forward(ad::Graph& g, ad::Graph::Id x, bool train_params = true) const;
  // fast non-graph batch evaluation, x: n x in, y: n x out
  void forward_plain(const double* x, double* y, size_t n) const;
  double eval1(const double* x) const;  // single point, output width 1

  int in_width() const { return widths_.front(); }
  int out_width() const { return widths_.back(); }
  const std::vector<int>& widths() const { return widths_; }
  void set_out_activation(std::optional<Activation> act) { out_act_ = act; }
  const std::optional<Activation>& out_activation() const { return out_act_; }
  ParamStore* store() const { return store_; }
  // rebind to a cloned store with the identical slice layout
  void set_store(ParamStore* store) { store_ = store; }
  int final_weight_slice() const { return w_slices_.back(); }
  int final_bias_slice() const { return b_slices_.back(); }

 private:
  ParamStore* store_ = nullptr;
  std::vector<int> widths_;
  double leaky_slope_ = 0.01;
  std::optional<Activation> out_act_;
  std::vector<int> w_slices_, b_slices_;
};

// Invertible affine coupling flow on R^d with a standard normal base.
// Masks alternate parity per step; scale and shift come from separate
// subnetworks fed the masked input. Zero-initialized final layers make the
// initial flow the identity.
class CouplingFlow {
 public:
  CouplingFlow() = default;
  CouplingFlow(ParamStore* store, int dim, int n_steps, std::vector<int> subnet_hidden,
               double s_cap = 3.0);

  int dim() const { return dim_; }
  int steps() const { return n_steps_; }

  // zero the subnet output layers so the flow starts as the identity map
  void identity_init();
  void set_store(ParamStore* store);

  // z -> x; logdet accumulates log|det Jac forward| per sample (n x 1)
  ad::Graph::Id forward(ad::Graph& g, ad::Graph::Id z, ad::Graph::Id* logdet = nullptr,
                        bool train_params = true) const;
  // log p(x) via the inverse pass and the change of variables, (n x 1)
  ad::Graph::Id log_prob(ad::Graph& g, ad::Graph::Id x, bool train_params = true) const;

  void forward_plain(const double* z, double* x, size_t n) const;
  void inverse_plain(const double* x, double* z, size_t n, double* logdet_inv) const;
  double log_prob_plain(const double* x) const;
  void log_prob_batch(const double* x, double* out, size_t n) const;

 private:
  ParamStore* store_ = nullptr;
  int dim_ = 2;
  int n_steps_ = 6;
  double s_cap_ = 3.0;
  std::vector<Mlp> s_nets_, t_nets_;

  std::vector<double> mask(int step) const;  // 1 = kept coordinate
};

// Latent prior with optional truncation: hard(psi) resamples until every
// coordinate satisfies |z_i| <= psi; soft(psi) scales the deviation.
struct LatentSampler {
  enum class Trunc { None, Hard, Soft };
  int dim = 2;
  Trunc trunc = Trunc::None;
  double psi = 1.0;

  std::vector<double> sample(Rng& rng, size_t n) const;
};

// Gradient of a scalar graph w.r.t. every slice of `params`, flattened in
// store order. Matches central finite differences to 1e-4 relative.
std::vector<double> grad(const std::function<ad::Graph::Id(ad::Graph&)>& build_loss,
                         ParamStore& params);

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Optimizer {
 public:
  enum class Kind { Sgd, Adam };
  Optimizer(Kind kind, double lr, size_t n_params, AdamConfig adam = {});
  void step(std::vector<double>& params, const std::vector<double>& grads);

 private:
  Kind kind_;
  double lr_;
  AdamConfig adam_;
  long t_ = 0;
  std::vector<double> m_, v_;
};

}  // namespace prdiv
