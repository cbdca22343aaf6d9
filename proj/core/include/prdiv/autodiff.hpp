#pragma once

#include <cstdint>
#include <string>
#include <tuple>
#include <vector>

#include "prdiv/generator.hpp"

namespace prdiv::ad {

// Row-major batch x feature matrix.
struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<double> a;

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c, 0.0) {}
  double& at(int r, int c) { return a[static_cast<size_t>(r) * cols + c]; }
  double at(int r, int c) const { return a[static_cast<size_t>(r) * cols + c]; }
  size_t size() const { return a.size(); }
};

// Define-by-run reverse-mode tape over matrices. Supports exactly the
// primitives the losses need: affine layers, leaky-rectifier / tanh /
// sigmoid / exp / log, elementwise arithmetic, reductions, column masks,
// and the generator-family elementwise maps (f, f*, grad f*, activations).
class Graph {
 public:
  using Id = int32_t;

  Id input(const Mat& m, bool needs_grad = false, const char* tag = "input");
  Id input(int rows, int cols, const double* data, bool needs_grad = false,
           const char* tag = "input");

  // Leaf bound to an external key (e.g. a parameter slice). Re-binding the
  // same (key, sub) returns the existing node so gradients accumulate.
  Id bound_input(const void* key, int sub, int rows, int cols, const double* data,
                 bool needs_grad, const char* tag = "param");
  // Gradient of a bound leaf after backward(); nullptr if never bound or
  // never reached by the backward pass.
  const Mat* bound_grad(const void* key, int sub) const;

  Id add(Id x, Id y);
  Id sub(Id x, Id y);
  Id mul(Id x, Id y);
  Id scale(Id x, double c);
  Id add_const(Id x, double c);
  Id neg(Id x) { return scale(x, -1.0); }

  Id matmul(Id x, Id w);        // (n,k) x (k,m)
  Id add_rowvec(Id x, Id b);    // b is (1,m), broadcast over rows

  Id leaky_relu(Id x, double slope);
  Id tanh_(Id x);
  Id sigmoid_(Id x);
  Id exp_(Id x);
  Id log_(Id x);
  Id square(Id x);
  Id clamp(Id x, double lo, double hi);  // zero gradient outside [lo, hi]

  Id colmask(Id x, std::vector<double> mask);  // scale column j by mask[j]

  Id row_sum(Id x);   // (n,d) -> (n,1)
  Id sum_all(Id x);   // -> (1,1)
  Id mean_all(Id x);  // -> (1,1)
  Id weighted_sum(Id x, std::vector<double> w);  // sum_i w[i] x[i] -> (1,1)

  Id apply_activation(Id x, const Activation& act);
  Id gen_f(Id u, const GeneratorSpec& spec);          // f(u), subgradient at kinks
  Id gen_conj(Id t, const GeneratorSpec& spec);       // f*(t)
  Id gen_conj_grad(Id t, const GeneratorSpec& spec);  // grad f*(t)

  double scalar(Id x) const;
  const Mat& val(Id x) const { return nodes_[static_cast<size_t>(x)].val; }
  const Mat& grad_of(Id x) const { return nodes_[static_cast<size_t>(x)].grad; }

  // Root must be 1x1. Throws std::runtime_error with an op trace if a
  // non-finite value appears anywhere in the graph.
  void backward(Id root);

  size_t node_count() const { return nodes_.size(); }

 private:
  enum class Op {
    Input, Add, Sub, Mul, Scale, AddConst, Matmul, AddRowvec, LeakyRelu, Tanh,
    Sigmoid, Exp, Log, Square, Clamp, Colmask, RowSum, SumAll, MeanAll,
    WeightedSum, Activation, GenF, GenConj, GenConjGrad,
  };

  struct Node {
    Op op = Op::Input;
    const char* tag = "";
    Id a = -1, b = -1;
    double c0 = 0.0, c1 = 0.0;
    std::vector<double> mask;
    prdiv::Activation act;
    int spec_idx = -1;
    Mat val;
    Mat grad;
    bool needs_grad = false;
  };

  std::vector<Node> nodes_;
  std::vector<GeneratorSpec> specs_;  // stable storage for GenF/GenConj nodes
  std::vector<std::tuple<const void*, int, Id>> bindings_;

  Id push(Node n);
  void check_finite(Id id) const;
  [[noreturn]] void trace_error(Id id, const std::string& what) const;
  Id unary(Op op, Id x, const char* tag, double c0 = 0.0, double c1 = 0.0);
  Id binary(Op op, Id x, Id y, const char* tag);
  void backprop_node(Id id);
};

}  // namespace prdiv::ad
