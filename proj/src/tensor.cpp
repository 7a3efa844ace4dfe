#include "qfta/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "qfta/kernels.hpp"

namespace qfta {

namespace {

std::string shape_to_str(const std::vector<int64_t>& s) {
  if (s.empty()) return "[]";
  std::string out;
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(s[i]);
  }
  return out;
}

[[noreturn]] void shape_fail(const char* op, const Tensor& a) {
  throw ShapeError(std::string(op) + ": bad operand shape " + a.shape_str());
}

[[noreturn]] void shape_fail2(const char* op, const Tensor& a,
                              const Tensor& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + a.shape_str() +
                   " vs " + b.shape_str());
}

}  // namespace

Tensor Tensor::zeros(std::vector<int64_t> s) {
  int64_t n = 1;
  for (int64_t d : s) n *= d;
  return Tensor(std::move(s), std::vector<double>(static_cast<size_t>(n)));
}

Tensor Tensor::matrix(int64_t r, int64_t c, std::vector<double> d) {
  if (static_cast<int64_t>(d.size()) != r * c)
    throw ShapeError("Tensor::matrix: data length " +
                     std::to_string(d.size()) + " != " + std::to_string(r) +
                     "x" + std::to_string(c));
  return Tensor({r, c}, std::move(d));
}

int64_t Tensor::numel() const {
  int64_t n = 1;
  for (int64_t d : shape) n *= d;
  return n;
}

bool Tensor::all_finite() const {
  for (double v : data)
    if (!std::isfinite(v)) return false;
  return true;
}

std::string Tensor::shape_str() const { return shape_to_str(shape); }

// ---------------------------------------------------------------------------
// Tape plumbing

const Tape::Node& Tape::node(int32_t id) const { return nodes_.at(id); }
Tape::Node& Tape::node(int32_t id) { return nodes_.at(id); }

Var Tape::record(Tensor value, std::vector<int32_t> parents,
                 std::function<void(Tape&, int32_t)> backprop) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = any_requires_grad(parents);
  n.parents = std::move(parents);
  if (n.requires_grad) n.backprop = std::move(backprop);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int32_t>(nodes_.size() - 1)};
}

bool Tape::any_requires_grad(const std::vector<int32_t>& ids) const {
  for (int32_t id : ids)
    if (node(id).requires_grad) return true;
  return false;
}

Var Tape::input(Tensor t) {
  Node n;
  n.value = std::move(t);
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  return Var{static_cast<int32_t>(nodes_.size() - 1)};
}

Var Tape::constant(Tensor t) {
  Node n;
  n.value = std::move(t);
  n.requires_grad = false;
  nodes_.push_back(std::move(n));
  return Var{static_cast<int32_t>(nodes_.size() - 1)};
}

double Tape::scalar_value(Var v) const {
  const Tensor& t = value(v);
  if (t.numel() != 1)
    throw ContractError("scalar_value: tensor has shape " + t.shape_str());
  return t.data[0];
}

Tensor& Tape::grad_buf(int32_t id) {
  Tensor& g = grads_[id];
  if (g.empty() && node(id).value.numel() > 0) {
    g = Tensor::zeros(node(id).value.shape);
  }
  return g;
}

void Tape::backward(Var out) {
  const Tensor& o = value(out);
  if (o.numel() != 1)
    throw ContractError("backward: output must be scalar, got shape " +
                        o.shape_str());
  grads_.assign(nodes_.size(), Tensor{});
  grad_buf(out.id).data[0] = 1.0;
  for (int32_t id = out.id; id >= 0; --id) {
    Node& n = node(id);
    if (!n.requires_grad || !n.backprop) continue;
    if (grads_[id].empty()) continue;  // not on the path from out
    n.backprop(*this, id);
  }
}

Tensor Tape::grad_of(Var v) const {
  if (v.id < 0 || static_cast<size_t>(v.id) >= grads_.size() ||
      grads_[v.id].empty())
    return Tensor::zeros(value(v).shape);
  return grads_[v.id];
}

Tensor Tape::grad(Var out, Var wrt) {
  backward(out);
  return grad_of(wrt);
}

// ---------------------------------------------------------------------------
// Elementwise ops

Var Tape::unary_map(Var a, const char* op_name,
                    const std::function<double(double)>& f,
                    const std::function<double(double, double)>& dfdx) {
  const Tensor& av = value(a);
  Tensor out = Tensor::zeros(av.shape);
  for (size_t i = 0; i < av.data.size(); ++i) out.data[i] = f(av.data[i]);
  (void)op_name;
  return record(std::move(out), {a.id},
                [aid = a.id, dfdx](Tape& t, int32_t self) {
                  const Tensor& g = t.grads_[self];
                  const Tensor& x = t.node(aid).value;
                  const Tensor& y = t.node(self).value;
                  Tensor& ga = t.grad_buf(aid);
                  for (size_t i = 0; i < g.data.size(); ++i)
                    ga.data[i] += g.data[i] * dfdx(x.data[i], y.data[i]);
                });
}

Var Tape::add(Var a, Var b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  if (av.shape != bv.shape) shape_fail2("add", av, bv);
  Tensor out = av;
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += bv.data[i];
  return record(std::move(out), {a.id, b.id},
                [aid = a.id, bid = b.id](Tape& t, int32_t self) {
                  const Tensor& g = t.grads_[self];
                  if (t.node(aid).requires_grad) {
                    Tensor& ga = t.grad_buf(aid);
                    for (size_t i = 0; i < g.data.size(); ++i)
                      ga.data[i] += g.data[i];
                  }
                  if (t.node(bid).requires_grad) {
                    Tensor& gb = t.grad_buf(bid);
                    for (size_t i = 0; i < g.data.size(); ++i)
                      gb.data[i] += g.data[i];
                  }
                });
}

Var Tape::sub(Var a, Var b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  if (av.shape != bv.shape) shape_fail2("sub", av, bv);
  Tensor out = av;
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] -= bv.data[i];
  return record(std::move(out), {a.id, b.id},
                [aid = a.id, bid = b.id](Tape& t, int32_t self) {
                  const Tensor& g = t.grads_[self];
                  if (t.node(aid).requires_grad) {
                    Tensor& ga = t.grad_buf(aid);
                    for (size_t i = 0; i < g.data.size(); ++i)
                      ga.data[i] += g.data[i];
                  }
                  if (t.node(bid).requires_grad) {
                    Tensor& gb = t.grad_buf(bid);
                    for (size_t i = 0; i < g.data.size(); ++i)
                      gb.data[i] -= g.data[i];
                  }
                });
}

Var Tape::mul(Var a, Var b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  if (av.shape != bv.shape) shape_fail2("mul", av, bv);
  Tensor out = av;
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] *= bv.data[i];
  return record(std::move(out), {a.id, b.id},
                [aid = a.id, bid = b.id](Tape& t, int32_t self) {
                  const Tensor& g = t.grads_[self];
                  const Tensor& av2 = t.node(aid).value;
                  const Tensor& bv2 = t.node(bid).value;
                  if (t.node(aid).requires_grad) {
                    Tensor& ga = t.grad_buf(aid);
                    for (size_t i = 0; i < g.data.size(); ++i)
                      ga.data[i] += g.data[i] * bv2.data[i];
                  }
                  if (t.node(bid).requires_grad) {
                    Tensor& gb = t.grad_buf(bid);
                    for (size_t i = 0; i < g.data.size(); ++i)
                      gb.data[i] += g.data[i] * av2.data[i];
                  }
                });
}

Var Tape::div(Var a, Var b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  if (av.shape != bv.shape) shape_fail2("div", av, bv);
  Tensor out = av;
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] /= bv.data[i];
  return record(std::move(out), {a.id, b.id},
                [aid = a.id, bid = b.id](Tape& t, int32_t self) {
                  const Tensor& g = t.grads_[self];
                  const Tensor& av2 = t.node(aid).value;
                  const Tensor& bv2 = t.node(bid).value;
                  if (t.node(aid).requires_grad) {
                    Tensor& ga = t.grad_buf(aid);
                    for (size_t i = 0; i < g.data.size(); ++i)
                      ga.data[i] += g.data[i] / bv2.data[i];
                  }
                  if (t.node(bid).requires_grad) {
                    Tensor& gb = t.grad_buf(bid);
                    for (size_t i = 0; i < g.data.size(); ++i)
                      gb.data[i] -= g.data[i] * av2.data[i] /
                                    (bv2.data[i] * bv2.data[i]);
                  }
                });
}

Var Tape::neg(Var a) { return mul_scalar(a, -1.0); }

Var Tape::add_scalar(Var a, double c) {
  return unary_map(
      a, "add_scalar", [c](double x) { return x + c; },
      [](double, double) { return 1.0; });
}

Var Tape::mul_scalar(Var a, double c) {
  return unary_map(
      a, "mul_scalar", [c](double x) { return x * c; },
      [c](double, double) { return c; });
}

Var Tape::mul_scalar_var(Var a, Var s) {
  const Tensor& sv = value(s);
  if (sv.numel() != 1) shape_fail("mul_scalar_var", sv);
  const double sc = sv.data[0];
  const Tensor& av = value(a);
  Tensor out = av;
  for (double& v : out.data) v *= sc;
  return record(std::move(out), {a.id, s.id},
                [aid = a.id, sid = s.id](Tape& t, int32_t self) {
                  const Tensor& g = t.grads_[self];
                  const Tensor& av2 = t.node(aid).value;
                  const double sc2 = t.node(sid).value.data[0];
                  if (t.node(aid).requires_grad) {
                    Tensor& ga = t.grad_buf(aid);
                    for (size_t i = 0; i < g.data.size(); ++i)
                      ga.data[i] += g.data[i] * sc2;
                  }
                  if (t.node(sid).requires_grad) {
                    Tensor& gs = t.grad_buf(sid);
                    double acc = 0.0;
                    for (size_t i = 0; i < g.data.size(); ++i)
                      acc += g.data[i] * av2.data[i];
                    gs.data[0] += acc;
                  }
                });
}

Var Tape::pow(Var a, double p) {
  for (double v : value(a).data) {
    if (v < 0.0 && p != std::floor(p))
      throw DomainError("pow: negative base " + std::to_string(v) +
                        " with non-integer exponent");
  }
  return unary_map(
      a, "pow", [p](double x) { return std::pow(x, p); },
      [p](double x, double) { return p * std::pow(x, p - 1.0); });
}

Var Tape::abs(Var a) {
  return unary_map(
      a, "abs", [](double x) { return std::abs(x); },
      [](double x, double) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); });
}

Var Tape::log(Var a) {
  for (double v : value(a).data)
    if (v <= 0.0)
      throw DomainError("log: non-positive value " + std::to_string(v));
  return unary_map(
      a, "log", [](double x) { return std::log(x); },
      [](double x, double) { return 1.0 / x; });
}

Var Tape::exp(Var a) {
  return unary_map(
      a, "exp", [](double x) { return std::exp(x); },
      [](double, double y) { return y; });
}

Var Tape::sqrt(Var a) {
  for (double v : value(a).data)
    if (v < 0.0)
      throw DomainError("sqrt: negative value " + std::to_string(v));
  return unary_map(
      a, "sqrt", [](double x) { return std::sqrt(x); },
      [](double, double y) { return y > 0 ? 0.5 / y : 0.0; });
}

Var Tape::relu(Var a) {
  return unary_map(
      a, "relu", [](double x) { return x > 0 ? x : 0.0; },
      [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

Var Tape::sigmoid(Var a) {
  return unary_map(
      a, "sigmoid",
      [](double x) {
        return x >= 0 ? 1.0 / (1.0 + std::exp(-x))
                      : std::exp(x) / (1.0 + std::exp(x));
      },
      [](double, double y) { return y * (1.0 - y); });
}

Var Tape::maximum(Var a, double c) {
  return unary_map(
      a, "maximum", [c](double x) { return x > c ? x : c; },
      [c](double x, double) { return x > c ? 1.0 : 0.0; });
}

Var Tape::mask_mul(Var a, Tensor mask) {
  const Tensor& av = value(a);
  if (av.shape != mask.shape) shape_fail2("mask_mul", av, mask);
  Var m = constant(std::move(mask));
  return mul(a, m);
}

// ---------------------------------------------------------------------------
// Linear algebra

Var Tape::matmul(Var a, Var b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  if (av.rank() != 2 || (bv.rank() != 2 && bv.rank() != 1))
    shape_fail2("matmul", av, bv);
  const bool vec_rhs = bv.rank() == 1;
  const int64_t m = av.rows(), k = av.cols();
  const int64_t bk = vec_rhs ? bv.shape[0] : bv.rows();
  const int64_t n = vec_rhs ? 1 : bv.cols();
  if (k != bk) shape_fail2("matmul", av, bv);
  Tensor out = vec_rhs ? Tensor::zeros({m}) : Tensor::zeros({m, n});
  kernels::matmul(av.data.data(), bv.data.data(), out.data.data(), m, k, n);
  return record(
      std::move(out), {a.id, b.id},
      [aid = a.id, bid = b.id, m, k, n](Tape& t, int32_t self) {
        const Tensor& g = t.grads_[self];
        const Tensor& av2 = t.node(aid).value;
        const Tensor& bv2 = t.node(bid).value;
        if (t.node(aid).requires_grad) {
          // dA += G * B^T : (m x n)(n x k)^T-form
          kernels::matmul_nt_acc(g.data.data(), bv2.data.data(),
                                 t.grad_buf(aid).data.data(), m, n, k);
        }
        if (t.node(bid).requires_grad) {
          // dB += A^T * G
          kernels::matmul_tn_acc(av2.data.data(), g.data.data(),
                                 t.grad_buf(bid).data.data(), m, k, n);
        }
      });
}

Var Tape::matmul_nt(Var a, Var b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  if (av.rank() != 2 || bv.rank() != 2 || av.cols() != bv.cols())
    shape_fail2("matmul_nt", av, bv);
  const int64_t m = av.rows(), k = av.cols(), n = bv.rows();
  Tensor out = Tensor::zeros({m, n});
  kernels::matmul_nt_acc(av.data.data(), bv.data.data(), out.data.data(), m, k,
                         n);
  return record(
      std::move(out), {a.id, b.id},
      [aid = a.id, bid = b.id, m, k, n](Tape& t, int32_t self) {
        const Tensor& g = t.grads_[self];
        const Tensor& av2 = t.node(aid).value;
        const Tensor& bv2 = t.node(bid).value;
        if (t.node(aid).requires_grad) {
          // dA += G * B : (m x n)(n x k)
          kernels::matmul_nn_acc(g.data.data(), bv2.data.data(),
                                 t.grad_buf(aid).data.data(), m, n, k);
        }
        if (t.node(bid).requires_grad) {
          // dB += G^T * A : (n x m)(m x k)
          kernels::matmul_tn_acc(g.data.data(), av2.data.data(),
                                 t.grad_buf(bid).data.data(), m, n, k);
        }
      });
}

Var Tape::transpose(Var a) {
  const Tensor& av = value(a);
  if (av.rank() != 2) shape_fail("transpose", av);
  const int64_t r = av.rows(), c = av.cols();
  Tensor out = Tensor::zeros({c, r});
  for (int64_t i = 0; i < r; ++i)
    for (int64_t j = 0; j < c; ++j) out.at(j, i) = av.at(i, j);
  return record(std::move(out), {a.id},
                [aid = a.id, r, c](Tape& t, int32_t self) {
                  const Tensor& g = t.grads_[self];
                  Tensor& ga = t.grad_buf(aid);
                  for (int64_t i = 0; i < r; ++i)
                    for (int64_t j = 0; j < c; ++j)
                      ga.at(i, j) += g.at(j, i);
                });
}

Var Tape::dot(Var a, Var b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  if (av.rank() != 1 || av.shape != bv.shape) shape_fail2("dot", av, bv);
  double acc = 0.0;
  for (size_t i = 0; i < av.data.size(); ++i) acc += av.data[i] * bv.data[i];
  return record(Tensor::scalar(acc), {a.id, b.id},
                [aid = a.id, bid = b.id](Tape& t, int32_t self) {
                  const double g = t.grads_[self].data[0];
                  const Tensor& av2 = t.node(aid).value;
                  const Tensor& bv2 = t.node(bid).value;
                  if (t.node(aid).requires_grad) {
                    Tensor& ga = t.grad_buf(aid);
                    for (size_t i = 0; i < av2.data.size(); ++i)
                      ga.data[i] += g * bv2.data[i];
                  }
                  if (t.node(bid).requires_grad) {
                    Tensor& gb = t.grad_buf(bid);
                    for (size_t i = 0; i < av2.data.size(); ++i)
                      gb.data[i] += g * av2.data[i];
                  }
                });
}

Var Tape::l2_norm(Var a) {
  const Tensor& av = value(a);
  double acc = 0.0;
  for (double v : av.data) acc += v * v;
  const double nrm = std::sqrt(acc);
  return record(Tensor::scalar(nrm), {a.id},
                [aid = a.id](Tape& t, int32_t self) {
                  const double g = t.grads_[self].data[0];
                  const double nrm2 = t.node(self).value.data[0];
                  if (nrm2 == 0.0) return;  // subgradient 0 at the origin
                  const Tensor& av2 = t.node(aid).value;
                  Tensor& ga = t.grad_buf(aid);
                  for (size_t i = 0; i < av2.data.size(); ++i)
                    ga.data[i] += g * av2.data[i] / nrm2;
                });
}

Var Tape::conv1d_full(Var x, Var h) {
  const Tensor& xv = value(x);
  const Tensor& hv = value(h);
  if (xv.rank() != 1 || hv.rank() != 1) shape_fail2("conv1d_full", xv, hv);
  const int64_t n = xv.shape[0], m = hv.shape[0];
  Tensor out = Tensor::zeros({n + m - 1});
  kernels::conv1d_full(xv.data.data(), n, hv.data.data(), m, out.data.data());
  return record(
      std::move(out), {x.id, h.id},
      [xid = x.id, hid = h.id, n, m](Tape& t, int32_t self) {
        const Tensor& g = t.grads_[self];
        const Tensor& xv2 = t.node(xid).value;
        const Tensor& hv2 = t.node(hid).value;
        if (t.node(xid).requires_grad)
          kernels::conv1d_adjoint_x_acc(g.data.data(), n + m - 1, 0,
                                        hv2.data.data(), m,
                                        t.grad_buf(xid).data.data(), n);
        if (t.node(hid).requires_grad)
          kernels::conv1d_adjoint_x_acc(g.data.data(), n + m - 1, 0,
                                        xv2.data.data(), n,
                                        t.grad_buf(hid).data.data(), m);
      });
}

Var Tape::conv1d_causal(Var x, Var h) {
  const Tensor& xv = value(x);
  const Tensor& hv = value(h);
  if (xv.rank() != 1 || hv.rank() != 1) shape_fail2("conv1d_causal", xv, hv);
  const int64_t n = xv.shape[0], m = hv.shape[0];
  Tensor out = Tensor::zeros({n});
  kernels::conv1d_causal(xv.data.data(), n, hv.data.data(), m,
                         out.data.data());
  return record(
      std::move(out), {x.id, h.id},
      [xid = x.id, hid = h.id, n, m](Tape& t, int32_t self) {
        const Tensor& g = t.grads_[self];
        const Tensor& xv2 = t.node(xid).value;
        const Tensor& hv2 = t.node(hid).value;
        if (t.node(xid).requires_grad)
          kernels::conv1d_adjoint_x_acc(g.data.data(), n, 0, hv2.data.data(),
                                        m, t.grad_buf(xid).data.data(), n);
        if (t.node(hid).requires_grad)
          kernels::conv1d_adjoint_x_acc(g.data.data(), n, 0, xv2.data.data(),
                                        n, t.grad_buf(hid).data.data(), m);
      });
}

Var Tape::conv1d_same(Var x, Var h) {
  const Tensor& xv = value(x);
  const Tensor& hv = value(h);
  if (xv.rank() != 1 || hv.rank() != 1) shape_fail2("conv1d_same", xv, hv);
  const int64_t n = xv.shape[0], m = hv.shape[0];
  const int64_t off = (m - 1) / 2;
  Tensor out = Tensor::zeros({n});
  kernels::conv1d_same(xv.data.data(), n, hv.data.data(), m, out.data.data());
  return record(
      std::move(out), {x.id, h.id},
      [xid = x.id, hid = h.id, n, m, off](Tape& t, int32_t self) {
        const Tensor& g = t.grads_[self];
        const Tensor& xv2 = t.node(xid).value;
        const Tensor& hv2 = t.node(hid).value;
        if (t.node(xid).requires_grad)
          kernels::conv1d_adjoint_x_acc(g.data.data(), n, off,
                                        hv2.data.data(), m,
                                        t.grad_buf(xid).data.data(), n);
        if (t.node(hid).requires_grad)
          kernels::conv1d_adjoint_x_acc(g.data.data(), n, off,
                                        xv2.data.data(), n,
                                        t.grad_buf(hid).data.data(), m);
      });
}

// ---------------------------------------------------------------------------
// Reductions

Var Tape::sum(Var a) {
  const Tensor& av = value(a);
  double acc = 0.0;
  for (double v : av.data) acc += v;
  return record(Tensor::scalar(acc), {a.id},
                [aid = a.id](Tape& t, int32_t self) {
                  const double g = t.grads_[self].data[0];
                  Tensor& ga = t.grad_buf(aid);
                  for (double& v : ga.data) v += g;
                });
}

Var Tape::mean(Var a) {
  const int64_t n = value(a).numel();
  return mul_scalar(sum(a), 1.0 / static_cast<double>(n));
}

Var Tape::sum_axis0(Var a) {
  const Tensor& av = value(a);
  if (av.rank() != 2) shape_fail("sum_axis0", av);
  const int64_t r = av.rows(), c = av.cols();
  Tensor out = Tensor::zeros({c});
  for (int64_t i = 0; i < r; ++i)
    for (int64_t j = 0; j < c; ++j) out.data[j] += av.at(i, j);
  return record(std::move(out), {a.id},
                [aid = a.id, r, c](Tape& t, int32_t self) {
                  const Tensor& g = t.grads_[self];
                  Tensor& ga = t.grad_buf(aid);
                  for (int64_t i = 0; i < r; ++i)
                    for (int64_t j = 0; j < c; ++j)
                      ga.at(i, j) += g.data[j];
                });
}

Var Tape::mean_axis0(Var a) {
  const int64_t r = value(a).rows();
  return mul_scalar(sum_axis0(a), 1.0 / static_cast<double>(r));
}

Var Tape::max_all(Var a) {
  const Tensor& av = value(a);
  if (av.data.empty()) shape_fail("max_all", av);
  size_t arg = 0;
  for (size_t i = 1; i < av.data.size(); ++i)
    if (av.data[i] > av.data[arg]) arg = i;
  return record(Tensor::scalar(av.data[arg]), {a.id},
                [aid = a.id, arg](Tape& t, int32_t self) {
                  t.grad_buf(aid).data[arg] += t.grads_[self].data[0];
                });
}

Var Tape::max_axis(Var a, int axis) {
  const Tensor& av = value(a);
  if (av.rank() != 2 || (axis != 0 && axis != 1)) shape_fail("max_axis", av);
  const int64_t r = av.rows(), c = av.cols();
  const int64_t out_n = axis == 0 ? c : r;
  Tensor out = Tensor::zeros({out_n});
  std::vector<int64_t> args(static_cast<size_t>(out_n), 0);
  for (int64_t o = 0; o < out_n; ++o) {
    const int64_t inner = axis == 0 ? r : c;
    double best = axis == 0 ? av.at(0, o) : av.at(o, 0);
    int64_t besti = 0;
    for (int64_t i = 1; i < inner; ++i) {
      const double v = axis == 0 ? av.at(i, o) : av.at(o, i);
      if (v > best) {
        best = v;
        besti = i;
      }
    }
    out.data[o] = best;
    args[o] = besti;
  }
  return record(std::move(out), {a.id},
                [aid = a.id, axis, args](Tape& t, int32_t self) {
                  const Tensor& g = t.grads_[self];
                  Tensor& ga = t.grad_buf(aid);
                  for (size_t o = 0; o < args.size(); ++o) {
                    if (axis == 0)
                      ga.at(args[o], static_cast<int64_t>(o)) += g.data[o];
                    else
                      ga.at(static_cast<int64_t>(o), args[o]) += g.data[o];
                  }
                });
}

Var Tape::softmax(Var a) {
  const Tensor& av = value(a);
  if (av.rank() != 1) shape_fail("softmax", av);
  double mx = av.data[0];
  for (double v : av.data) mx = std::max(mx, v);
  Tensor out = Tensor::zeros(av.shape);
  double denom = 0.0;
  for (size_t i = 0; i < av.data.size(); ++i) {
    out.data[i] = std::exp(av.data[i] - mx);
    denom += out.data[i];
  }
  for (double& v : out.data) v /= denom;
  return record(std::move(out), {a.id},
                [aid = a.id](Tape& t, int32_t self) {
                  const Tensor& g = t.grads_[self];
                  const Tensor& y = t.node(self).value;
                  Tensor& ga = t.grad_buf(aid);
                  double gy = 0.0;
                  for (size_t i = 0; i < g.data.size(); ++i)
                    gy += g.data[i] * y.data[i];
                  for (size_t i = 0; i < g.data.size(); ++i)
                    ga.data[i] += y.data[i] * (g.data[i] - gy);
                });
}

Var Tape::logsumexp(Var a) {
  const Tensor& av = value(a);
  if (av.rank() != 1) shape_fail("logsumexp", av);
  double mx = av.data[0];
  for (double v : av.data) mx = std::max(mx, v);
  double acc = 0.0;
  for (double v : av.data) acc += std::exp(v - mx);
  return record(Tensor::scalar(mx + std::log(acc)), {a.id},
                [aid = a.id](Tape& t, int32_t self) {
                  const double g = t.grads_[self].data[0];
                  const double lse = t.node(self).value.data[0];
                  const Tensor& x = t.node(aid).value;
                  Tensor& ga = t.grad_buf(aid);
                  for (size_t i = 0; i < x.data.size(); ++i)
                    ga.data[i] += g * std::exp(x.data[i] - lse);
                });
}

// ---------------------------------------------------------------------------
// Indexing / restructuring

Var Tape::gather(Var a, std::vector<int64_t> idx) {
  const Tensor& av = value(a);
  if (av.rank() != 1) shape_fail("gather", av);
  const int64_t n = av.shape[0];
  Tensor out = Tensor::zeros({static_cast<int64_t>(idx.size())});
  for (size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || idx[i] >= n)
      throw ShapeError("gather: index " + std::to_string(idx[i]) +
                       " out of range for length " + std::to_string(n));
    out.data[i] = av.data[idx[i]];
  }
  return record(std::move(out), {a.id},
                [aid = a.id, idx = std::move(idx)](Tape& t, int32_t self) {
                  const Tensor& g = t.grads_[self];
                  Tensor& ga = t.grad_buf(aid);
                  for (size_t i = 0; i < idx.size(); ++i)
                    ga.data[idx[i]] += g.data[i];
                });
}

Var Tape::index(Var a, int64_t i) {
  const Tensor& av = value(a);
  if (av.rank() != 1) shape_fail("index", av);
  if (i < 0 || i >= av.shape[0])
    throw ShapeError("index: " + std::to_string(i) +
                     " out of range for length " + std::to_string(av.shape[0]));
  return record(Tensor::scalar(av.data[i]), {a.id},
                [aid = a.id, i](Tape& t, int32_t self) {
                  t.grad_buf(aid).data[i] += t.grads_[self].data[0];
                });
}

Var Tape::slice(Var a, int64_t begin, int64_t end) {
  const Tensor& av = value(a);
  if (av.rank() != 1) shape_fail("slice", av);
  if (begin < 0 || end > av.shape[0] || begin > end)
    throw ShapeError("slice: [" + std::to_string(begin) + ", " +
                     std::to_string(end) + ") out of range for length " +
                     std::to_string(av.shape[0]));
  Tensor out = Tensor::zeros({end - begin});
  std::copy(av.data.begin() + begin, av.data.begin() + end, out.data.begin());
  return record(std::move(out), {a.id},
                [aid = a.id, begin](Tape& t, int32_t self) {
                  const Tensor& g = t.grads_[self];
                  Tensor& ga = t.grad_buf(aid);
                  for (size_t i = 0; i < g.data.size(); ++i)
                    ga.data[begin + i] += g.data[i];
                });
}

Var Tape::concat(Var a, Var b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  if (av.rank() != 1 || bv.rank() != 1) shape_fail2("concat", av, bv);
  Tensor out = Tensor::zeros({av.shape[0] + bv.shape[0]});
  std::copy(av.data.begin(), av.data.end(), out.data.begin());
  std::copy(bv.data.begin(), bv.data.end(),
            out.data.begin() + av.shape[0]);
  return record(std::move(out), {a.id, b.id},
                [aid = a.id, bid = b.id, na = av.shape[0]](Tape& t,
                                                           int32_t self) {
                  const Tensor& g = t.grads_[self];
                  if (t.node(aid).requires_grad) {
                    Tensor& ga = t.grad_buf(aid);
                    for (int64_t i = 0; i < na; ++i) ga.data[i] += g.data[i];
                  }
                  if (t.node(bid).requires_grad) {
                    Tensor& gb = t.grad_buf(bid);
                    for (size_t i = na; i < g.data.size(); ++i)
                      gb.data[i - na] += g.data[i];
                  }
                });
}

Var Tape::frames(Var x, int64_t frame_len, int64_t hop) {
  const Tensor& xv = value(x);
  if (xv.rank() != 1) shape_fail("frames", xv);
  const int64_t n = xv.shape[0];
  if (n < frame_len)
    throw ShapeError("frames: input length " + std::to_string(n) +
                     " shorter than frame length " + std::to_string(frame_len));
  const int64_t t_count = 1 + (n - frame_len) / hop;
  Tensor out = Tensor::zeros({t_count, frame_len});
  for (int64_t ti = 0; ti < t_count; ++ti)
    std::copy(xv.data.begin() + ti * hop,
              xv.data.begin() + ti * hop + frame_len,
              out.data.begin() + ti * frame_len);
  return record(std::move(out), {x.id},
                [xid = x.id, t_count, frame_len, hop](Tape& t, int32_t self) {
                  const Tensor& g = t.grads_[self];
                  Tensor& gx = t.grad_buf(xid);
                  for (int64_t ti = 0; ti < t_count; ++ti)
                    for (int64_t j = 0; j < frame_len; ++j)
                      gx.data[ti * hop + j] += g.at(ti, j);
                });
}

// ---------------------------------------------------------------------------
// Row broadcasting

Var Tape::mul_rows(Var m, Var v) {
  const Tensor& mv = value(m);
  const Tensor& vv = value(v);
  if (mv.rank() != 2 || vv.rank() != 1 || vv.shape[0] != mv.cols())
    shape_fail2("mul_rows", mv, vv);
  const int64_t r = mv.rows(), c = mv.cols();
  Tensor out = mv;
  for (int64_t i = 0; i < r; ++i)
    for (int64_t j = 0; j < c; ++j) out.at(i, j) *= vv.data[j];
  return record(std::move(out), {m.id, v.id},
                [mid = m.id, vid = v.id, r, c](Tape& t, int32_t self) {
                  const Tensor& g = t.grads_[self];
                  const Tensor& mv2 = t.node(mid).value;
                  const Tensor& vv2 = t.node(vid).value;
                  if (t.node(mid).requires_grad) {
                    Tensor& gm = t.grad_buf(mid);
                    for (int64_t i = 0; i < r; ++i)
                      for (int64_t j = 0; j < c; ++j)
                        gm.at(i, j) += g.at(i, j) * vv2.data[j];
                  }
                  if (t.node(vid).requires_grad) {
                    Tensor& gv = t.grad_buf(vid);
                    for (int64_t i = 0; i < r; ++i)
                      for (int64_t j = 0; j < c; ++j)
                        gv.data[j] += g.at(i, j) * mv2.at(i, j);
                  }
                });
}

Var Tape::add_rows(Var m, Var v) {
  const Tensor& mv = value(m);
  const Tensor& vv = value(v);
  if (mv.rank() != 2 || vv.rank() != 1 || vv.shape[0] != mv.cols())
    shape_fail2("add_rows", mv, vv);
  const int64_t r = mv.rows(), c = mv.cols();
  Tensor out = mv;
  for (int64_t i = 0; i < r; ++i)
    for (int64_t j = 0; j < c; ++j) out.at(i, j) += vv.data[j];
  return record(std::move(out), {m.id, v.id},
                [mid = m.id, vid = v.id, r, c](Tape& t, int32_t self) {
                  const Tensor& g = t.grads_[self];
                  if (t.node(mid).requires_grad) {
                    Tensor& gm = t.grad_buf(mid);
                    for (size_t i = 0; i < g.data.size(); ++i)
                      gm.data[i] += g.data[i];
                  }
                  if (t.node(vid).requires_grad) {
                    Tensor& gv = t.grad_buf(vid);
                    for (int64_t i = 0; i < r; ++i)
                      for (int64_t j = 0; j < c; ++j)
                        gv.data[j] += g.at(i, j);
                  }
                });
}

Var Tape::sub_rows(Var m, Var v) { return add_rows(m, neg(v)); }

// ---------------------------------------------------------------------------
// Linear interpolation resampling

Var Tape::interp1d(Var a, std::vector<double> pos) {
  const Tensor& av = value(a);
  if (av.rank() != 1) shape_fail("interp1d", av);
  const int64_t n = av.shape[0];
  const int64_t out_n = static_cast<int64_t>(pos.size());
  Tensor out = Tensor::zeros({out_n});
  std::vector<int64_t> lo(pos.size());
  std::vector<double> w(pos.size());
  for (size_t i = 0; i < pos.size(); ++i) {
    double p = std::min(std::max(pos[i], 0.0), static_cast<double>(n - 1));
    int64_t l = static_cast<int64_t>(std::floor(p));
    if (l >= n - 1) l = n - 2 >= 0 ? n - 2 : 0;
    const double wi = n > 1 ? p - static_cast<double>(l) : 0.0;
    lo[i] = l;
    w[i] = wi;
    const int64_t hi = std::min(l + 1, n - 1);
    out.data[i] = (1.0 - wi) * av.data[l] + wi * av.data[hi];
  }
  return record(std::move(out), {a.id},
                [aid = a.id, lo = std::move(lo), w = std::move(w),
                 n](Tape& t, int32_t self) {
                  const Tensor& g = t.grads_[self];
                  Tensor& ga = t.grad_buf(aid);
                  for (size_t i = 0; i < lo.size(); ++i) {
                    const int64_t hi = std::min(lo[i] + 1, n - 1);
                    ga.data[lo[i]] += g.data[i] * (1.0 - w[i]);
                    ga.data[hi] += g.data[i] * w[i];
                  }
                });
}

Var Tape::row_interp(Var m, std::vector<double> pos) {
  const Tensor& mv = value(m);
  if (mv.rank() != 2) shape_fail("row_interp", mv);
  const int64_t r = mv.rows(), c = mv.cols();
  const int64_t out_r = static_cast<int64_t>(pos.size());
  Tensor out = Tensor::zeros({out_r, c});
  std::vector<int64_t> lo(pos.size());
  std::vector<double> w(pos.size());
  for (size_t i = 0; i < pos.size(); ++i) {
    double p = std::min(std::max(pos[i], 0.0), static_cast<double>(r - 1));
    int64_t l = static_cast<int64_t>(std::floor(p));
    if (l >= r - 1) l = r - 2 >= 0 ? r - 2 : 0;
    const double wi = r > 1 ? p - static_cast<double>(l) : 0.0;
    lo[i] = l;
    w[i] = wi;
    const int64_t hi = std::min(l + 1, r - 1);
    for (int64_t j = 0; j < c; ++j)
      out.at(static_cast<int64_t>(i), j) =
          (1.0 - wi) * mv.at(l, j) + wi * mv.at(hi, j);
  }
  return record(std::move(out), {m.id},
                [mid = m.id, lo = std::move(lo), w = std::move(w), r,
                 c](Tape& t, int32_t self) {
                  const Tensor& g = t.grads_[self];
                  Tensor& gm = t.grad_buf(mid);
                  for (size_t i = 0; i < lo.size(); ++i) {
                    const int64_t hi = std::min(lo[i] + 1, r - 1);
                    for (int64_t j = 0; j < c; ++j) {
                      const double gij = g.at(static_cast<int64_t>(i), j);
                      gm.at(lo[i], j) += gij * (1.0 - w[i]);
                      gm.at(hi, j) += gij * w[i];
                    }
                  }
                });
}

}  // namespace qfta
