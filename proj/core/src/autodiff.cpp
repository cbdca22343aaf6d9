#include "prdiv/autodiff.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace prdiv::ad {

namespace {

void matmul_acc(const Mat& A, const Mat& B, Mat& C) {
  // C += A * B, ikj order
  for (int i = 0; i < A.rows; ++i) {
    const double* arow = &A.a[static_cast<size_t>(i) * A.cols];
    double* crow = &C.a[static_cast<size_t>(i) * C.cols];
    for (int k = 0; k < A.cols; ++k) {
      const double aik = arow[k];
      if (aik == 0.0) continue;
      const double* brow = &B.a[static_cast<size_t>(k) * B.cols];
      for (int j = 0; j < B.cols; ++j) crow[j] += aik * brow[j];
    }
  }
}

void matmul_at_b(const Mat& A, const Mat& B, Mat& C) {
  // C += A^T * B with A (n,k), B (n,m), C (k,m)
  for (int i = 0; i < A.rows; ++i) {
    const double* arow = &A.a[static_cast<size_t>(i) * A.cols];
    const double* brow = &B.a[static_cast<size_t>(i) * B.cols];
    for (int k = 0; k < A.cols; ++k) {
      const double aik = arow[k];
      if (aik == 0.0) continue;
      double* crow = &C.a[static_cast<size_t>(k) * C.cols];
      for (int j = 0; j < B.cols; ++j) crow[j] += aik * brow[j];
    }
  }
}

void matmul_a_bt(const Mat& A, const Mat& B, Mat& C) {
  // C += A * B^T with A (n,m), B (k,m), C (n,k)
  for (int i = 0; i < A.rows; ++i) {
    const double* arow = &A.a[static_cast<size_t>(i) * A.cols];
    double* crow = &C.a[static_cast<size_t>(i) * C.cols];
    for (int k = 0; k < B.rows; ++k) {
      const double* brow = &B.a[static_cast<size_t>(k) * B.cols];
      double acc = 0.0;
      for (int j = 0; j < A.cols; ++j) acc += arow[j] * brow[j];
      crow[k] += acc;
    }
  }
}

}  // namespace

Graph::Id Graph::push(Node n) {
  nodes_.push_back(std::move(n));
  const Id id = static_cast<Id>(nodes_.size() - 1);
  check_finite(id);
  return id;
}

void Graph::trace_error(Id id, const std::string& what) const {
  std::ostringstream os;
  os << "autodiff: " << what << " in op trace:";
  Id cur = id;
  for (int depth = 0; depth < 6 && cur >= 0; ++depth) {
    const Node& n = nodes_[static_cast<size_t>(cur)];
    os << " #" << cur << ":" << n.tag;
    cur = n.a;
  }
  throw std::runtime_error(os.str());
}

void Graph::check_finite(Id id) const {
  const Node& n = nodes_[static_cast<size_t>(id)];
  for (double v : n.val.a) {
    if (!std::isfinite(v)) trace_error(id, "non-finite value");
  }
}

Graph::Id Graph::input(const Mat& m, bool needs_grad, const char* tag) {
  Node n;
  n.op = Op::Input;
  n.tag = tag;
  n.val = m;
  n.needs_grad = needs_grad;
  return push(std::move(n));
}

Graph::Id Graph::input(int rows, int cols, const double* data, bool needs_grad,
                       const char* tag) {
  Mat m(rows, cols);
  m.a.assign(data, data + m.size());
  return input(m, needs_grad, tag);
}

Graph::Id Graph::bound_input(const void* key, int sub, int rows, int cols, const double* data,
                             bool needs_grad, const char* tag) {
  for (const auto& [k, s, id] : bindings_) {
    if (k == key && s == sub) return id;
  }
  const Id id = input(rows, cols, data, needs_grad, tag);
  bindings_.emplace_back(key, sub, id);
  return id;
}

const Mat* Graph::bound_grad(const void* key, int sub) const {
  for (const auto& [k, s, id] : bindings_) {
    if (k == key && s == sub) {
      const Mat& g = nodes_[static_cast<size_t>(id)].grad;
      return g.size() ? &g : nullptr;
    }
  }
  return nullptr;
}

Graph::Id Graph::binary(Op op, Id x, Id y, const char* tag) {
  const Node& nx = nodes_[static_cast<size_t>(x)];
  const Node& ny = nodes_[static_cast<size_t>(y)];
  if (nx.val.rows != ny.val.rows || nx.val.cols != ny.val.cols)
    trace_error(x, std::string("shape mismatch in ") + tag);
  Node n;
  n.op = op;
  n.tag = tag;
  n.a = x;
  n.b = y;
  n.needs_grad = nx.needs_grad || ny.needs_grad;
  n.val = Mat(nx.val.rows, nx.val.cols);
  for (size_t i = 0; i < n.val.size(); ++i) {
    switch (op) {
      case Op::Add: n.val.a[i] = nx.val.a[i] + ny.val.a[i]; break;
      case Op::Sub: n.val.a[i] = nx.val.a[i] - ny.val.a[i]; break;
      case Op::Mul: n.val.a[i] = nx.val.a[i] * ny.val.a[i]; break;
      default: break;
    }
  }
  return push(std::move(n));
}

Graph::Id Graph::add(Id x, Id y) { return binary(Op::Add, x, y, "add"); }
Graph::Id Graph::sub(Id x, Id y) { return binary(Op::Sub, x, y, "sub"); }
Graph::Id Graph::mul(Id x, Id y) { return binary(Op::Mul, x, y, "mul"); }

Graph::Id Graph::unary(Op op, Id x, const char* tag, double c0, double c1) {
  const Node& nx = nodes_[static_cast<size_t>(x)];
  Node n;
  n.op = op;
  n.tag = tag;
  n.a = x;
  n.c0 = c0;
  n.c1 = c1;
  n.needs_grad = nx.needs_grad;
  n.val = Mat(nx.val.rows, nx.val.cols);
  for (size_t i = 0; i < n.val.size(); ++i) {
    const double v = nx.val.a[i];
    double r = 0.0;
    switch (op) {
      case Op::Scale: r = c0 * v; break;
      case Op::AddConst: r = v + c0; break;
      case Op::LeakyRelu: r = v > 0.0 ? v : c0 * v; break;
      case Op::Tanh: r = std::tanh(v); break;
      case Op::Sigmoid: r = 1.0 / (1.0 + std::exp(-v)); break;
      case Op::Exp: r = std::exp(v); break;
      case Op::Log: r = std::log(v); break;
      case Op::Square: r = v * v; break;
      case Op::Clamp: r = v < c0 ? c0 : (v > c1 ? c1 : v); break;
      default: break;
    }
    n.val.a[i] = r;
  }
  return push(std::move(n));
}

Graph::Id Graph::scale(Id x, double c) { return unary(Op::Scale, x, "scale", c); }
Graph::Id Graph::add_const(Id x, double c) { return unary(Op::AddConst, x, "add_const", c); }
Graph::Id Graph::leaky_relu(Id x, double slope) { return unary(Op::LeakyRelu, x, "leaky_relu", slope); }
Graph::Id Graph::tanh_(Id x) { return unary(Op::Tanh, x, "tanh"); }
Graph::Id Graph::sigmoid_(Id x) { return unary(Op::Sigmoid, x, "sigmoid"); }
Graph::Id Graph::exp_(Id x) { return unary(Op::Exp, x, "exp"); }
Graph::Id Graph::log_(Id x) { return unary(Op::Log, x, "log"); }
Graph::Id Graph::square(Id x) { return unary(Op::Square, x, "square"); }
Graph::Id Graph::clamp(Id x, double lo, double hi) { return unary(Op::Clamp, x, "clamp", lo, hi); }

Graph::Id Graph::matmul(Id x, Id w) {
  const Node& nx = nodes_[static_cast<size_t>(x)];
  const Node& nw = nodes_[static_cast<size_t>(w)];
  if (nx.val.cols != nw.val.rows) trace_error(x, "matmul inner dimension mismatch");
  Node n;
  n.op = Op::Matmul;
  n.tag = "matmul";
  n.a = x;
  n.b = w;
  n.needs_grad = nx.needs_grad || nw.needs_grad;
  n.val = Mat(nx.val.rows, nw.val.cols);
  matmul_acc(nx.val, nw.val, n.val);
  return push(std::move(n));
}

Graph::Id Graph::add_rowvec(Id x, Id b) {
  const Node& nx = nodes_[static_cast<size_t>(x)];
  const Node& nb = nodes_[static_cast<size_t>(b)];
  if (nb.val.rows != 1 || nb.val.cols != nx.val.cols)
    trace_error(x, "add_rowvec shape mismatch");
  Node n;
  n.op = Op::AddRowvec;
  n.tag = "add_rowvec";
  n.a = x;
  n.b = b;
  n.needs_grad = nx.needs_grad || nb.needs_grad;
  n.val = Mat(nx.val.rows, nx.val.cols);
  for (int i = 0; i < n.val.rows; ++i)
    for (int j = 0; j < n.val.cols; ++j) n.val.at(i, j) = nx.val.at(i, j) + nb.val.at(0, j);
  return push(std::move(n));
}

Graph::Id Graph::colmask(Id x, std::vector<double> mask) {
  const Node& nx = nodes_[static_cast<size_t>(x)];
  if (static_cast<int>(mask.size()) != nx.val.cols) trace_error(x, "colmask length mismatch");
  Node n;
  n.op = Op::Colmask;
  n.tag = "colmask";
  n.a = x;
  n.mask = std::move(mask);
  n.needs_grad = nx.needs_grad;
  n.val = Mat(nx.val.rows, nx.val.cols);
  for (int i = 0; i < n.val.rows; ++i)
    for (int j = 0; j < n.val.cols; ++j) n.val.at(i, j) = nx.val.at(i, j) * n.mask[static_cast<size_t>(j)];
  return push(std::move(n));
}

Graph::Id Graph::row_sum(Id x) {
  const Node& nx = nodes_[static_cast<size_t>(x)];
  Node n;
  n.op = Op::RowSum;
  n.tag = "row_sum";
  n.a = x;
  n.needs_grad = nx.needs_grad;
  n.val = Mat(nx.val.rows, 1);
  for (int i = 0; i < nx.val.rows; ++i) {
    double acc = 0.0;
    for (int j = 0; j < nx.val.cols; ++j) acc += nx.val.at(i, j);
    n.val.at(i, 0) = acc;
  }
  return push(std::move(n));
}

Graph::Id Graph::sum_all(Id x) {
  const Node& nx = nodes_[static_cast<size_t>(x)];
  Node n;
  n.op = Op::SumAll;
  n.tag = "sum_all";
  n.a = x;
  n.needs_grad = nx.needs_grad;
  n.val = Mat(1, 1);
  double acc = 0.0;
  for (double v : nx.val.a) acc += v;
  n.val.a[0] = acc;
  return push(std::move(n));
}

Graph::Id Graph::weighted_sum(Id x, std::vector<double> w) {
  const Node& nx = nodes_[static_cast<size_t>(x)];
  if (w.size() != nx.val.size()) trace_error(x, "weighted_sum length mismatch");
  Node n;
  n.op = Op::WeightedSum;
  n.tag = "weighted_sum";
  n.a = x;
  n.mask = std::move(w);
  n.needs_grad = nx.needs_grad;
  n.val = Mat(1, 1);
  double acc = 0.0;
  for (size_t i = 0; i < nx.val.size(); ++i) acc += n.mask[i] * nx.val.a[i];
  n.val.a[0] = acc;
  return push(std::move(n));
}

Graph::Id Graph::mean_all(Id x) {
  const Node& nx = nodes_[static_cast<size_t>(x)];
  Node n;
  n.op = Op::MeanAll;
  n.tag = "mean_all";
  n.a = x;
  n.needs_grad = nx.needs_grad;
  n.val = Mat(1, 1);
  double acc = 0.0;
  for (double v : nx.val.a) acc += v;
  n.val.a[0] = acc / static_cast<double>(nx.val.size());
  return push(std::move(n));
}

Graph::Id Graph::apply_activation(Id x, const Activation& act) {
  const Node& nx = nodes_[static_cast<size_t>(x)];
  Node n;
  n.op = Op::Activation;
  n.tag = "activation";
  n.a = x;
  n.act = act;
  n.needs_grad = nx.needs_grad;
  n.val = Mat(nx.val.rows, nx.val.cols);
  for (size_t i = 0; i < n.val.size(); ++i) n.val.a[i] = act(nx.val.a[i]);
  return push(std::move(n));
}

Graph::Id Graph::gen_f(Id u, const GeneratorSpec& spec) {
  const Node& nx = nodes_[static_cast<size_t>(u)];
  Node n;
  n.op = Op::GenF;
  n.tag = "gen_f";
  n.a = u;
  specs_.push_back(spec);
  n.spec_idx = static_cast<int>(specs_.size() - 1);
  n.needs_grad = nx.needs_grad;
  n.val = Mat(nx.val.rows, nx.val.cols);
  for (size_t i = 0; i < n.val.size(); ++i) n.val.a[i] = spec.f(nx.val.a[i]);
  return push(std::move(n));
}

Graph::Id Graph::gen_conj(Id t, const GeneratorSpec& spec) {
  const Node& nx = nodes_[static_cast<size_t>(t)];
  Node n;
  n.op = Op::GenConj;
  n.tag = "gen_conj";
  n.a = t;
  specs_.push_back(spec);
  n.spec_idx = static_cast<int>(specs_.size() - 1);
  n.needs_grad = nx.needs_grad;
  n.val = Mat(nx.val.rows, nx.val.cols);
  for (size_t i = 0; i < n.val.size(); ++i) n.val.a[i] = spec.f_conj(nx.val.a[i]);
  return push(std::move(n));
}

Graph::Id Graph::gen_conj_grad(Id t, const GeneratorSpec& spec) {
  const Node& nx = nodes_[static_cast<size_t>(t)];
  Node n;
  n.op = Op::GenConjGrad;
  n.tag = "gen_conj_grad";
  n.a = t;
  specs_.push_back(spec);
  n.spec_idx = static_cast<int>(specs_.size() - 1);
  n.needs_grad = nx.needs_grad;
  n.val = Mat(nx.val.rows, nx.val.cols);
  for (size_t i = 0; i < n.val.size(); ++i) n.val.a[i] = spec.f_conj_grad(nx.val.a[i]);
  return push(std::move(n));
}

double Graph::scalar(Id x) const {
  const Mat& m = val(x);
  if (m.rows != 1 || m.cols != 1) throw std::runtime_error("autodiff: scalar() on non-scalar");
  return m.a[0];
}

namespace {

// derivative of grad f* (the conjugate's curvature), elementwise
double conj_grad_deriv(const GeneratorSpec& spec, double t_shifted) {
  using K = GeneratorSpec::Kind;
  switch (spec.kind()) {
    case K::Kl: return std::exp(t_shifted - 1.0);
    case K::Chi2: return 0.5;
    case K::Rkl: return 1.0 / (t_shifted * t_shifted);
    case K::Gan: {
      const double d = -std::expm1(t_shifted);  // 1 - e^t
      return (1.0 + std::expm1(t_shifted)) / (d * d);
    }
    case K::Tv:
    case K::Pr: return 0.0;
  }
  return 0.0;
}

}  // namespace

void Graph::backprop_node(Id id) {
  Node& n = nodes_[static_cast<size_t>(id)];
  if (!n.needs_grad || n.op == Op::Input) return;
  auto& g = n.grad;
  auto parent_grad = [&](Id pid) -> Mat& {
    Node& p = nodes_[static_cast<size_t>(pid)];
    if (p.grad.size() == 0) p.grad = Mat(p.val.rows, p.val.cols);
    return p.grad;
  };
  const Node& na = nodes_[static_cast<size_t>(n.a)];
  const bool agrad = na.needs_grad;
  switch (n.op) {
    case Op::Add: {
      if (agrad) {
        Mat& ga = parent_grad(n.a);
        for (size_t i = 0; i < g.size(); ++i) ga.a[i] += g.a[i];
      }
      if (nodes_[static_cast<size_t>(n.b)].needs_grad) {
        Mat& gb = parent_grad(n.b);
        for (size_t i = 0; i < g.size(); ++i) gb.a[i] += g.a[i];
      }
      break;
    }
    case Op::Sub: {
      if (agrad) {
        Mat& ga = parent_grad(n.a);
        for (size_t i = 0; i < g.size(); ++i) ga.a[i] += g.a[i];
      }
      if (nodes_[static_cast<size_t>(n.b)].needs_grad) {
        Mat& gb = parent_grad(n.b);
        for (size_t i = 0; i < g.size(); ++i) gb.a[i] -= g.a[i];
      }
      break;
    }
    case Op::Mul: {
      const Node& nb = nodes_[static_cast<size_t>(n.b)];
      if (agrad) {
        Mat& ga = parent_grad(n.a);
        for (size_t i = 0; i < g.size(); ++i) ga.a[i] += g.a[i] * nb.val.a[i];
      }
      if (nb.needs_grad) {
        Mat& gb = parent_grad(n.b);
        for (size_t i = 0; i < g.size(); ++i) gb.a[i] += g.a[i] * na.val.a[i];
      }
      break;
    }
    case Op::Scale: {
      if (agrad) {
        Mat& ga = parent_grad(n.a);
        for (size_t i = 0; i < g.size(); ++i) ga.a[i] += n.c0 * g.a[i];
      }
      break;
    }
    case Op::AddConst: {
      if (agrad) {
        Mat& ga = parent_grad(n.a);
        for (size_t i = 0; i < g.size(); ++i) ga.a[i] += g.a[i];
      }
      break;
    }
    case Op::Matmul: {
      const Node& nb = nodes_[static_cast<size_t>(n.b)];
      if (agrad) matmul_a_bt(g, nb.val, parent_grad(n.a));
      if (nb.needs_grad) matmul_at_b(na.val, g, parent_grad(n.b));
      break;
    }
    case Op::AddRowvec: {
      if (agrad) {
        Mat& ga = parent_grad(n.a);
        for (size_t i = 0; i < g.size(); ++i) ga.a[i] += g.a[i];
      }
      const Node& nb = nodes_[static_cast<size_t>(n.b)];
      if (nb.needs_grad) {
        Mat& gb = parent_grad(n.b);
        for (int i = 0; i < g.rows; ++i)
          for (int j = 0; j < g.cols; ++j) gb.at(0, j) += g.at(i, j);
      }
      break;
    }
    case Op::LeakyRelu: {
      if (agrad) {
        Mat& ga = parent_grad(n.a);
        for (size_t i = 0; i < g.size(); ++i)
          ga.a[i] += g.a[i] * (na.val.a[i] > 0.0 ? 1.0 : n.c0);
      }
      break;
    }
    case Op::Tanh: {
      if (agrad) {
        Mat& ga = parent_grad(n.a);
        for (size_t i = 0; i < g.size(); ++i) ga.a[i] += g.a[i] * (1.0 - n.val.a[i] * n.val.a[i]);
      }
      break;
    }
    case Op::Sigmoid: {
      if (agrad) {
        Mat& ga = parent_grad(n.a);
        for (size_t i = 0; i < g.size(); ++i)
          ga.a[i] += g.a[i] * n.val.a[i] * (1.0 - n.val.a[i]);
      }
      break;
    }
    case Op::Exp: {
      if (agrad) {
        Mat& ga = parent_grad(n.a);
        for (size_t i = 0; i < g.size(); ++i) ga.a[i] += g.a[i] * n.val.a[i];
      }
      break;
    }
    case Op::Log: {
      if (agrad) {
        Mat& ga = parent_grad(n.a);
        for (size_t i = 0; i < g.size(); ++i) ga.a[i] += g.a[i] / na.val.a[i];
      }
      break;
    }
    case Op::Square: {
      if (agrad) {
        Mat& ga = parent_grad(n.a);
        for (size_t i = 0; i < g.size(); ++i) ga.a[i] += g.a[i] * 2.0 * na.val.a[i];
      }
      break;
    }
    case Op::Clamp: {
      if (agrad) {
        Mat& ga = parent_grad(n.a);
        for (size_t i = 0; i < g.size(); ++i) {
          const double v = na.val.a[i];
          if (v >= n.c0 && v <= n.c1) ga.a[i] += g.a[i];
        }
      }
      break;
    }
    case Op::Colmask: {
      if (agrad) {
        Mat& ga = parent_grad(n.a);
        for (int i = 0; i < g.rows; ++i)
          for (int j = 0; j < g.cols; ++j)
            ga.at(i, j) += g.at(i, j) * n.mask[static_cast<size_t>(j)];
      }
      break;
    }
    case Op::RowSum: {
      if (agrad) {
        Mat& ga = parent_grad(n.a);
        for (int i = 0; i < ga.rows; ++i)
          for (int j = 0; j < ga.cols; ++j) ga.at(i, j) += g.at(i, 0);
      }
      break;
    }
    case Op::SumAll: {
      if (agrad) {
        Mat& ga = parent_grad(n.a);
        for (size_t i = 0; i < ga.size(); ++i) ga.a[i] += g.a[0];
      }
      break;
    }
    case Op::MeanAll: {
      if (agrad) {
        Mat& ga = parent_grad(n.a);
        const double s = g.a[0] / static_cast<double>(ga.size());
        for (size_t i = 0; i < ga.size(); ++i) ga.a[i] += s;
      }
      break;
    }
    case Op::WeightedSum: {
      if (agrad) {
        Mat& ga = parent_grad(n.a);
        for (size_t i = 0; i < ga.size(); ++i) ga.a[i] += g.a[0] * n.mask[i];
      }
      break;
    }
    case Op::Activation: {
      if (agrad) {
        Mat& ga = parent_grad(n.a);
        for (size_t i = 0; i < g.size(); ++i) ga.a[i] += g.a[i] * n.act.deriv(na.val.a[i]);
      }
      break;
    }
    case Op::GenF: {
      if (agrad) {
        const GeneratorSpec& spec = specs_[static_cast<size_t>(n.spec_idx)];
        Mat& ga = parent_grad(n.a);
        for (size_t i = 0; i < g.size(); ++i) ga.a[i] += g.a[i] * spec.f_prime(na.val.a[i]);
      }
      break;
    }
    case Op::GenConj: {
      if (agrad) {
        const GeneratorSpec& spec = specs_[static_cast<size_t>(n.spec_idx)];
        Mat& ga = parent_grad(n.a);
        for (size_t i = 0; i < g.size(); ++i) ga.a[i] += g.a[i] * spec.f_conj_grad(na.val.a[i]);
      }
      break;
    }
    case Op::GenConjGrad: {
      if (agrad) {
        const GeneratorSpec& spec = specs_[static_cast<size_t>(n.spec_idx)];
        Mat& ga = parent_grad(n.a);
        for (size_t i = 0; i < g.size(); ++i)
          ga.a[i] += g.a[i] * conj_grad_deriv(spec, na.val.a[i] - spec.shift());
      }
      break;
    }
    case Op::Input: break;
  }
}

void Graph::backward(Id root) {
  Node& r = nodes_[static_cast<size_t>(root)];
  if (r.val.rows != 1 || r.val.cols != 1)
    throw std::runtime_error("autodiff: backward root must be scalar");
  r.grad = Mat(1, 1);
  r.grad.a[0] = 1.0;
  for (Id id = root; id >= 0; --id) {
    Node& n = nodes_[static_cast<size_t>(id)];
    if (n.grad.size() == 0) continue;
    for (double v : n.grad.a) {
      if (!std::isfinite(v)) trace_error(id, "non-finite gradient");
    }
    backprop_node(id);
  }
}

}  // namespace prdiv::ad
