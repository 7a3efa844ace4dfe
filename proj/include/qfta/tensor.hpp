#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "qfta/errors.hpp"

namespace qfta {

// Dense float64 tensor, rank 0 (scalar), 1, or 2, row-major.
struct Tensor {
  std::vector<int64_t> shape;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::vector<int64_t> s, std::vector<double> d)
      : shape(std::move(s)), data(std::move(d)) {}

  static Tensor scalar(double v) { return Tensor({}, {v}); }
  static Tensor zeros(std::vector<int64_t> s);
  static Tensor vec(std::vector<double> d) {
    const int64_t n = static_cast<int64_t>(d.size());
    return Tensor({n}, std::move(d));
  }
  static Tensor matrix(int64_t r, int64_t c, std::vector<double> d);

  int rank() const { return static_cast<int>(shape.size()); }
  int64_t numel() const;
  int64_t rows() const { return shape.at(0); }
  int64_t cols() const { return shape.at(1); }
  bool empty() const { return data.empty(); }

  double& at(int64_t i) { return data[i]; }
  double at(int64_t i) const { return data[i]; }
  double& at(int64_t i, int64_t j) { return data[i * cols() + j]; }
  double at(int64_t i, int64_t j) const { return data[i * cols() + j]; }

  bool all_finite() const;
  std::string shape_str() const;
};

// Handle to a node on a Tape.
struct Var {
  int32_t id = -1;
  bool valid() const { return id >= 0; }
};

// Reverse-mode tape. Nodes are recorded in creation order; the backward pass
// walks them in strict reverse creation order exactly once. One tape per
// attack instance; tapes are not shared and Vars from one tape must not be
// passed to another.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Leaves. Inputs participate in grad(); constants never do. Stochastic
  // draws enter as constants (their randomness is frozen outside the tape).
  Var input(Tensor t);
  Var constant(Tensor t);
  Var constant_scalar(double v) { return constant(Tensor::scalar(v)); }

  const Tensor& value(Var v) const { return node(v.id).value; }
  double scalar_value(Var v) const;
  size_t size() const { return nodes_.size(); }
  bool requires_grad(Var v) const { return node(v.id).requires_grad; }

  // --- elementwise / scalar ---
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);  // same shape
  Var div(Var a, Var b);  // same shape, elementwise
  Var neg(Var a);
  Var add_scalar(Var a, double c);
  Var mul_scalar(Var a, double c);
  Var mul_scalar_var(Var a, Var s);  // tensor times scalar Var
  Var pow(Var a, double p);
  Var abs(Var a);
  Var log(Var a);
  Var exp(Var a);
  Var sqrt(Var a);
  Var relu(Var a);
  Var sigmoid(Var a);
  Var maximum(Var a, double c);  // elementwise max with a constant
  Var mask_mul(Var a, Tensor mask);  // elementwise multiply by constant mask

  // --- linear algebra ---
  Var matmul(Var a, Var b);     // (m x k)(k x n); b may be rank-1 (k)
  Var matmul_nt(Var a, Var b);  // a * b^T, b is (n x k)
  Var transpose(Var a);
  Var dot(Var a, Var b);     // rank-1, -> scalar
  Var l2_norm(Var a);        // -> scalar
  Var conv1d_full(Var x, Var h);
  Var conv1d_same(Var x, Var h);    // centered (linear-phase compensation)
  Var conv1d_causal(Var x, Var h);  // first n samples of the full result

  // --- reductions ---
  Var sum(Var a);
  Var mean(Var a);
  Var sum_axis0(Var a);   // (r x c) -> (c)
  Var mean_axis0(Var a);  // (r x c) -> (c)
  Var max_all(Var a);     // -> scalar; ties route grad to the lowest index
  Var max_axis(Var a, int axis);  // (r x c) -> (c) for axis 0, (r) for axis 1
  Var softmax(Var a);             // rank-1
  Var logsumexp(Var a);           // rank-1 -> scalar

  // --- indexing / restructuring ---
  Var gather(Var a, std::vector<int64_t> idx);  // rank-1 -> rank-1
  Var index(Var a, int64_t i);                  // rank-1 -> scalar
  Var slice(Var a, int64_t begin, int64_t end);
  Var concat(Var a, Var b);  // rank-1 ++ rank-1
  Var frames(Var x, int64_t frame_len, int64_t hop);  // rank-1 -> (T x len)

  // --- broadcasting over rows of a matrix ---
  Var mul_rows(Var m, Var v);  // row t scaled elementwise by v (len = cols)
  Var add_rows(Var m, Var v);
  Var sub_rows(Var m, Var v);

  // --- linear interpolation resampling ---
  // out[i] = lerp of a at fractional position pos[i] (clamped to range).
  Var interp1d(Var a, std::vector<double> pos);
  // rows of the output sampled at fractional row positions of the input.
  Var row_interp(Var m, std::vector<double> pos);

  // Backpropagates from a scalar output; resets all previous gradients.
  void backward(Var out);
  // Gradient of the last backward() w.r.t. v (zeros if v is off the path).
  Tensor grad_of(Var v) const;
  // Convenience: backward(out) then grad_of(wrt).
  Tensor grad(Var out, Var wrt);

 private:
  struct Node {
    Tensor value;
    std::vector<int32_t> parents;
    std::function<void(Tape&, int32_t)> backprop;  // null for leaves
    bool requires_grad = false;
  };

  std::vector<Node> nodes_;
  std::vector<Tensor> grads_;

  const Node& node(int32_t id) const;
  Node& node(int32_t id);
  Var record(Tensor value, std::vector<int32_t> parents,
             std::function<void(Tape&, int32_t)> backprop);
  Tensor& grad_buf(int32_t id);
  bool any_requires_grad(const std::vector<int32_t>& ids) const;

  Var unary_map(Var a, const char* op_name,
                const std::function<double(double)>& f,
                const std::function<double(double, double)>& dfdx);
};

}  // namespace qfta
