#include "prdiv/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace prdiv {

int ParamStore::add_slice(const std::string& name, int rows, int cols) {
  Slice s;
  s.name = name;
  s.offset = data_.size();
  s.rows = rows;
  s.cols = cols;
  slices_.push_back(s);
  data_.resize(data_.size() + s.count(), 0.0);
  return static_cast<int>(slices_.size() - 1);
}

int ParamStore::find(const std::string& name) const {
  for (size_t i = 0; i < slices_.size(); ++i)
    if (slices_[i].name == name) return static_cast<int>(i);
  throw std::invalid_argument("ParamStore: no slice named " + name);
}

void ParamStore::init_fan_in(Rng& rng) {
  for (const Slice& s : slices_) {
    double* d = data_.data() + s.offset;
    if (s.name.find(".b") != std::string::npos) {
      for (size_t i = 0; i < s.count(); ++i) d[i] = 0.0;
    } else {
      const double a = std::sqrt(1.0 / s.rows);
      for (size_t i = 0; i < s.count(); ++i) d[i] = rng.uniform(-a, a);
    }
  }
}

void ParamStore::zero_slice(int idx) {
  const Slice& s = slices_[static_cast<size_t>(idx)];
  std::fill_n(data_.data() + s.offset, s.count(), 0.0);
}

void ParamStore::assert_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) throw std::runtime_error("ParamStore: non-finite parameter");
  }
}

void save_checkpoint(const ParamStore& store, const std::string& bin_path,
                     const std::string& json_path, const std::string& model_kind) {
  {
    std::ofstream f(bin_path, std::ios::binary);
    if (!f) throw std::runtime_error("save_checkpoint: cannot open " + bin_path);
    f.write(reinterpret_cast<const char*>(store.data().data()),
            static_cast<std::streamsize>(store.data().size() * sizeof(double)));
  }
  nlohmann::json j;
  j["model_kind"] = model_kind;
  j["seed"] = store.init_seed;
  j["step"] = store.step;
  j["param_count"] = store.data().size();
  j["slices"] = nlohmann::json::array();
  for (const auto& s : store.slices())
    j["slices"].push_back({{"name", s.name}, {"rows", s.rows}, {"cols", s.cols},
                           {"offset", s.offset}});
  std::ofstream f(json_path);
  if (!f) throw std::runtime_error("save_checkpoint: cannot open " + json_path);
  f << j.dump(2) << "\n";
}

void load_checkpoint(ParamStore& store, const std::string& bin_path,
                     const std::string& json_path) {
  std::ifstream jf(json_path);
  if (!jf) throw std::runtime_error("load_checkpoint: cannot open " + json_path);
  nlohmann::json j;
  jf >> j;
  if (j["param_count"].get<size_t>() != store.data().size())
    throw std::runtime_error("load_checkpoint: parameter count mismatch");
  const auto& js = j["slices"];
  if (js.size() != store.slices().size())
    throw std::runtime_error("load_checkpoint: slice layout mismatch");
  for (size_t i = 0; i < js.size(); ++i) {
    const auto& s = store.slices()[i];
    if (js[i]["rows"].get<int>() != s.rows || js[i]["cols"].get<int>() != s.cols)
      throw std::runtime_error("load_checkpoint: shape mismatch for slice " + s.name);
  }
  store.init_seed = j["seed"].get<uint64_t>();
  store.step = j["step"].get<long>();
  std::ifstream f(bin_path, std::ios::binary);
  if (!f) throw std::runtime_error("load_checkpoint: cannot open " + bin_path);
  f.read(reinterpret_cast<char*>(store.data().data()),
         static_cast<std::streamsize>(store.data().size() * sizeof(double)));
  if (f.gcount() != static_cast<std::streamsize>(store.data().size() * sizeof(double)))
    throw std::runtime_error("load_checkpoint: truncated parameter file");
}

Mlp::Mlp(ParamStore* store, const std::string& prefix, std::vector<int> widths,
         double leaky_slope, std::optional<Activation> out_act)
    : store_(store), widths_(std::move(widths)), leaky_slope_(leaky_slope),
      out_act_(out_act) {
  if (widths_.size() < 2) throw std::invalid_argument("Mlp: need at least one layer");
  for (size_t i = 0; i + 1 < widths_.size(); ++i) {
    char name[128];
    std::snprintf(name, sizeof(name), "%s.W%zu", prefix.c_str(), i);
    w_slices_.push_back(store_->add_slice(name, widths_[i], widths_[i + 1]));
    std::snprintf(name, sizeof(name), "%s.b%zu", prefix.c_str(), i);
    b_slices_.push_back(store_->add_slice(name, 1, widths_[i + 1]));
  }
}

ad::Graph::Id Mlp::forward(ad::Graph& g, ad::Graph::Id x, bool train_params) const {
  ad::Graph::Id h = x;
  for (size_t i = 0; i < w_slices_.size(); ++i) {
    const auto& ws = store_->slice(w_slices_[i]);
    const auto& bs = store_->slice(b_slices_[i]);
    const auto W = g.bound_input(store_, w_slices_[i], ws.rows, ws.cols,
                                 store_->slice_data(w_slices_[i]), train_params);
    const auto b = g.bound_input(store_, b_slices_[i], bs.rows, bs.cols,
                                 store_->slice_data(b_slices_[i]), train_params);
    h = g.add_rowvec(g.matmul(h, W), b);
    if (i + 1 < w_slices_.size()) h = g.leaky_relu(h, leaky_slope_);
  }
  if (out_act_) h = g.apply_activation(h, *out_act_);
  return h;
}

void Mlp::forward_plain(const double* x, double* y, size_t n) const {
  const size_t max_w = static_cast<size_t>(*std::max_element(widths_.begin(), widths_.end()));
  std::vector<double> buf_a(n * max_w), buf_b(n * max_w);
  const double* cur = x;
  double* out = buf_a.data();
  double* nxt = buf_b.data();
  int cur_w = widths_[0];
  for (size_t l = 0; l < w_slices_.size(); ++l) {
    const int ow = widths_[l + 1];
    const double* W = store_->slice_data(w_slices_[l]);
    const double* b = store_->slice_data(b_slices_[l]);
    for (size_t i = 0; i < n; ++i) {
      const double* xi = cur + i * static_cast<size_t>(cur_w);
      double* yi = out + i * static_cast<size_t>(ow);
      for (int j = 0; j < ow; ++j) yi[j] = b[j];
      for (int k = 0; k < cur_w; ++k) {
        const double v = xi[k];
        const double* wrow = W + static_cast<size_t>(k) * ow;
        for (int j = 0; j < ow; ++j) yi[j] += v * wrow[j];
      }
      if (l + 1 < w_slices_.size()) {
        for (int j = 0; j < ow; ++j) yi[j] = yi[j] > 0.0 ? yi[j] : leaky_slope_ * yi[j];
      }
    }
    cur = out;
    cur_w = ow;
    std::swap(out, nxt);
  }
  const size_t total = n * static_cast<size_t>(widths_.back());
  const double* res = cur;
  if (out_act_) {
    for (size_t i = 0; i < total; ++i) y[i] = (*out_act_)(res[i]);
  } else {
    std::copy(res, res + total, y);
  }
}

double Mlp::eval1(const double* x) const {
  double y = 0.0;
  if (out_width() != 1) throw std::logic_error("Mlp::eval1 requires output width 1");
  forward_plain(x, &y, 1);
  return y;
}

CouplingFlow::CouplingFlow(ParamStore* store, int dim, int n_steps,
                           std::vector<int> subnet_hidden, double s_cap)
    : store_(store), dim_(dim), n_steps_(n_steps), s_cap_(s_cap) {
  std::vector<int> widths;
  widths.push_back(dim);
  for (int h : subnet_hidden) widths.push_back(h);
  widths.push_back(dim);
  for (int k = 0; k < n_steps; ++k) {
    s_nets_.emplace_back(store, "flow.s" + std::to_string(k), widths);
    t_nets_.emplace_back(store, "flow.t" + std::to_string(k), widths);
  }
}

void CouplingFlow::identity_init() {
  for (auto* nets : {&s_nets_, &t_nets_}) {
    for (Mlp& net : *nets) {
      store_->zero_slice(net.final_weight_slice());
      store_->zero_slice(net.final_bias_slice());
    }
  }
}

void CouplingFlow::set_store(ParamStore* store) {
  store_ = store;
  for (Mlp& net : s_nets_) net.set_store(store);
  for (Mlp& net : t_nets_) net.set_store(store);
}

std::vector<double> CouplingFlow::mask(int step) const {
  std::vector<double> m(static_cast<size_t>(dim_), 0.0);
  for (int j = 0; j < dim_; ++j)
    if ((j + step) % 2 == 0) m[static_cast<size_t>(j)] = 1.0;
  return m;
}

ad::Graph::Id CouplingFlow::forward(ad::Graph& g, ad::Graph::Id z, ad::Graph::Id* logdet,
                                    bool train_params) const {
  ad::Graph::Id cur = z;
  ad::Graph::Id ld = -1;
  for (int k = 0; k < n_steps_; ++k) {
    auto m = mask(k);
    std::vector<double> inv(m.size());
    for (size_t j = 0; j < m.size(); ++j) inv[j] = 1.0 - m[j];
    const auto h = g.colmask(cur, m);
    const auto sraw = s_nets_[static_cast<size_t>(k)].forward(g, h, train_params);
    const auto s = g.scale(g.tanh_(g.scale(sraw, 1.0 / s_cap_)), s_cap_);
    const auto t = t_nets_[static_cast<size_t>(k)].forward(g, h, train_params);
    const auto moved = g.add(g.mul(cur, g.exp_(s)), t);
    cur = g.add(h, g.colmask(moved, inv));
    const auto ld_k = g.row_sum(g.colmask(s, inv));
    ld = ld < 0 ? ld_k : g.add(ld, ld_k);
  }
  if (logdet) *logdet = ld;
  return cur;
}

ad::Graph::Id CouplingFlow::log_prob(ad::Graph& g, ad::Graph::Id x, bool train_params) const {
  ad::Graph::Id cur = x;
  ad::Graph::Id ld = -1;  // log|det Jac of inverse|
  for (int k = n_steps_ - 1; k >= 0; --k) {
    auto m = mask(k);
    std::vector<double> inv(m.size());
    for (size_t j = 0; j < m.size(); ++j) inv[j] = 1.0 - m[j];
    const auto h = g.colmask(cur, m);
    const auto sraw = s_nets_[static_cast<size_t>(k)].forward(g, h, train_params);
    const auto s = g.scale(g.tanh_(g.scale(sraw, 1.0 / s_cap_)), s_cap_);
    const auto t = t_nets_[static_cast<size_t>(k)].forward(g, h, train_params);
    const auto back = g.mul(g.sub(cur, t), g.exp_(g.neg(s)));
    cur = g.add(h, g.colmask(back, inv));
    const auto ld_k = g.row_sum(g.colmask(s, inv));
    ld = ld < 0 ? g.neg(ld_k) : g.sub(ld, ld_k);
  }
  // standard normal prior
  const double c = -0.5 * dim_ * std::log(2.0 * M_PI);
  auto lp = g.add_const(g.scale(g.row_sum(g.square(cur)), -0.5), c);
  return ld < 0 ? lp : g.add(lp, ld);
}

void CouplingFlow::forward_plain(const double* z, double* x, size_t n) const {
  const size_t d = static_cast<size_t>(dim_);
  std::vector<double> cur(z, z + n * d), h(n * d), s(n * d), t(n * d);
  for (int k = 0; k < n_steps_; ++k) {
    const auto m = mask(k);
    for (size_t i = 0; i < n; ++i)
      for (size_t j = 0; j < d; ++j) h[i * d + j] = cur[i * d + j] * m[j];
    s_nets_[static_cast<size_t>(k)].forward_plain(h.data(), s.data(), n);
    t_nets_[static_cast<size_t>(k)].forward_plain(h.data(), t.data(), n);
    for (size_t i = 0; i < n; ++i) {
      for (size_t j = 0; j < d; ++j) {
        if (m[j] != 0.0) continue;
        const double sc = s_cap_ * std::tanh(s[i * d + j] / s_cap_);
        cur[i * d + j] = cur[i * d + j] * std::exp(sc) + t[i * d + j];
      }
    }
  }
  std::copy(cur.begin(), cur.end(), x);
}

void CouplingFlow::inverse_plain(const double* x, double* z, size_t n,
                                 double* logdet_inv) const {
  const size_t d = static_cast<size_t>(dim_);
  std::vector<double> cur(x, x + n * d), h(n * d), s(n * d), t(n * d);
  if (logdet_inv) std::fill_n(logdet_inv, n, 0.0);
  for (int k = n_steps_ - 1; k >= 0; --k) {
    const auto m = mask(k);
    for (size_t i = 0; i < n; ++i)
      for (size_t j = 0; j < d; ++j) h[i * d + j] = cur[i * d + j] * m[j];
    s_nets_[static_cast<size_t>(k)].forward_plain(h.data(), s.data(), n);
    t_nets_[static_cast<size_t>(k)].forward_plain(h.data(), t.data(), n);
    for (size_t i = 0; i < n; ++i) {
      for (size_t j = 0; j < d; ++j) {
        if (m[j] != 0.0) continue;
        const double sc = s_cap_ * std::tanh(s[i * d + j] / s_cap_);
        cur[i * d + j] = (cur[i * d + j] - t[i * d + j]) * std::exp(-sc);
        if (logdet_inv) logdet_inv[i] -= sc;
      }
    }
  }
  std::copy(cur.begin(), cur.end(), z);
}

double CouplingFlow::log_prob_plain(const double* x) const {
  double out = 0.0;
  log_prob_batch(x, &out, 1);
  return out;
}

void CouplingFlow::log_prob_batch(const double* x, double* out, size_t n) const {
  const size_t d = static_cast<size_t>(dim_);
  std::vector<double> z(n * d), ld(n);
  inverse_plain(x, z.data(), n, ld.data());
  const double c = -0.5 * dim_ * std::log(2.0 * M_PI);
  for (size_t i = 0; i < n; ++i) {
    double q = 0.0;
    for (size_t j = 0; j < d; ++j) q += z[i * d + j] * z[i * d + j];
    out[i] = c - 0.5 * q + ld[i];
  }
}

std::vector<double> LatentSampler::sample(Rng& rng, size_t n) const {
  std::vector<double> out(n * static_cast<size_t>(dim));
  switch (trunc) {
    case Trunc::None:
      for (double& v : out) v = rng.gaussian();
      break;
    case Trunc::Soft:
      for (double& v : out) v = psi * rng.gaussian();
      break;
    case Trunc::Hard: {
      const double one_axis = std::erf(psi / std::sqrt(2.0));
      const double accept = std::pow(one_axis, dim);
      if (accept < 1e-4)
        throw std::invalid_argument("LatentSampler: hard truncation acceptance < 1e-4 (psi too small)");
      for (size_t i = 0; i < n; ++i) {
        double* zi = &out[i * static_cast<size_t>(dim)];
        bool ok = false;
        while (!ok) {
          ok = true;
          for (int j = 0; j < dim; ++j) {
            zi[j] = rng.gaussian();
            if (std::fabs(zi[j]) > psi) ok = false;
          }
        }
      }
      break;
    }
  }
  return out;
}

std::vector<double> grad(const std::function<ad::Graph::Id(ad::Graph&)>& build_loss,
                         ParamStore& params) {
  ad::Graph g;
  const auto root = build_loss(g);
  g.backward(root);
  std::vector<double> out(params.data().size(), 0.0);
  for (size_t i = 0; i < params.slices().size(); ++i) {
    const auto& s = params.slices()[i];
    const ad::Mat* gm = g.bound_grad(&params, static_cast<int>(i));
    if (!gm) continue;
    std::copy(gm->a.begin(), gm->a.end(), out.begin() + static_cast<long>(s.offset));
  }
  return out;
}

Optimizer::Optimizer(Kind kind, double lr, size_t n_params, AdamConfig adam)
    : kind_(kind), lr_(lr), adam_(adam) {
  if (!(lr > 0.0)) throw std::invalid_argument("Optimizer: learning rate must be positive");
  if (kind_ == Kind::Adam) {
    m_.assign(n_params, 0.0);
    v_.assign(n_params, 0.0);
  }
}

void Optimizer::step(std::vector<double>& params, const std::vector<double>& grads) {
  if (params.size() != grads.size()) throw std::invalid_argument("Optimizer: size mismatch");
  if (kind_ == Kind::Sgd) {
    for (size_t i = 0; i < params.size(); ++i) params[i] -= lr_ * grads[i];
    return;
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(adam_.beta1, t_);
  const double bc2 = 1.0 - std::pow(adam_.beta2, t_);
  for (size_t i = 0; i < params.size(); ++i) {
    m_[i] = adam_.beta1 * m_[i] + (1.0 - adam_.beta1) * grads[i];
    v_[i] = adam_.beta2 * v_[i] + (1.0 - adam_.beta2) * grads[i] * grads[i];
    params[i] -= lr_ * (m_[i] / bc1) / (std::sqrt(v_[i] / bc2) + adam_.eps);
  }
}

}  // namespace prdiv
