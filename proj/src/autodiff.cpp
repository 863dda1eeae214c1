#include "rsbeam/autodiff.hpp"

#include <cmath>

namespace rsbeam::ad {
namespace {

void check_same_tape(Var a, Var b) {
  if (a.tape != b.tape)
    throw GraphError("operands live on different tapes");
}

bool is_scalar(const Matrix& m) { return m.rows() == 1 && m.cols() == 1; }

}  // namespace

Var Tape::add_node(Matrix value, std::vector<int> inputs,
                   std::function<void(Tape&, int)> backward,
                   bool requires_grad, const char* op) {
  if (!value.allFinite())
    throw GraphError(std::string("non-finite forward value in op '") + op +
                     "' (node " + std::to_string(nodes_.size()) + ")");
  Node n;
  n.value = std::move(value);
  n.inputs = std::move(inputs);
  n.backward = std::move(backward);
  n.requires_grad = requires_grad;
  n.op = op;
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Matrix& Tape::grad_ref(int idx) {
  Node& n = nodes_[idx];
  if (n.grad.size() == 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

Matrix Tape::grad(Var v) const {
  const Node& n = nodes_[v.idx];
  if (n.grad.size() == 0) return Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::backward(Var loss) {
  if (loss.tape != this) throw GraphError("loss lives on another tape");
  const Node& l = nodes_[loss.idx];
  if (!is_scalar(l.value)) throw GraphError("backward: loss must be scalar");
  for (Node& n : nodes_) n.grad.resize(0, 0);
  grad_ref(loss.idx)(0, 0) = 1.0;
  for (int i = loss.idx; i >= 0; --i) {
    Node& n = nodes_[i];
    if (!n.backward || !n.requires_grad || n.grad.size() == 0) continue;
    n.backward(*this, i);
  }
}

namespace {

// accumulate g into node idx, reducing over a broadcast if needed
void accum(Tape& t, int idx, const Matrix& g) {
  if (!t.needs_grad(idx)) return;
  Matrix& dst = t.grad_ref(idx);
  if (is_scalar(dst) && !is_scalar(g))
    dst(0, 0) += g.sum();
  else
    dst += g;
}

bool any_grad(Tape* t, std::initializer_list<Var> vars) {
  for (Var v : vars)
    if (t->needs_grad(v.idx)) return true;
  return false;
}

Matrix broadcast_value(const Matrix& a, const Matrix& b) {
  // elementwise combine shapes: equal, or one side scalar
  if (a.rows() == b.rows() && a.cols() == b.cols()) return a;
  if (is_scalar(a)) return Matrix::Constant(b.rows(), b.cols(), a(0, 0));
  if (is_scalar(b)) return a;
  throw GraphError("shape mismatch in elementwise op");
}

}  // namespace

Var add(Var a, Var b) {
  check_same_tape(a, b);
  Tape& t = *a.tape;
  const Matrix av = broadcast_value(t.value(a), t.value(b));
  const Matrix bv = broadcast_value(t.value(b), t.value(a));
  return t.add_node(
      av + bv, {a.idx, b.idx},
      [a = a.idx, b = b.idx](Tape& t, int self) {
        const Matrix& g = t.grad_ref(self);
        accum(t, a, g);
        accum(t, b, g);
      },
      any_grad(a.tape, {a, b}), "add");
}

Var sub(Var a, Var b) {
  check_same_tape(a, b);
  Tape& t = *a.tape;
  const Matrix av = broadcast_value(t.value(a), t.value(b));
  const Matrix bv = broadcast_value(t.value(b), t.value(a));
  return t.add_node(
      av - bv, {a.idx, b.idx},
      [a = a.idx, b = b.idx](Tape& t, int self) {
        const Matrix& g = t.grad_ref(self);
        accum(t, a, g);
        accum(t, b, -g);
      },
      any_grad(a.tape, {a, b}), "sub");
}

Var mul(Var a, Var b) {
  check_same_tape(a, b);
  Tape& t = *a.tape;
  const Matrix av = broadcast_value(t.value(a), t.value(b));
  const Matrix bv = broadcast_value(t.value(b), t.value(a));
  return t.add_node(
      av.cwiseProduct(bv), {a.idx, b.idx},
      [a = a.idx, b = b.idx](Tape& t, int self) {
        const Matrix& g = t.grad_ref(self);
        const Matrix av = broadcast_value(t.val(a), t.val(b));
        const Matrix bv = broadcast_value(t.val(b), t.val(a));
        accum(t, a, g.cwiseProduct(bv));
        accum(t, b, g.cwiseProduct(av));
      },
      any_grad(a.tape, {a, b}), "mul");
}

Var neg(Var a) {
  Tape& t = *a.tape;
  return t.add_node(
      -t.value(a), {a.idx},
      [a = a.idx](Tape& t, int self) { accum(t, a, -t.grad_ref(self)); },
      t.needs_grad(a.idx), "neg");
}

Var matmul(Var a, Var b) {
  check_same_tape(a, b);
  Tape& t = *a.tape;
  if (t.value(a).cols() != t.value(b).rows())
    throw GraphError("matmul: inner dimensions disagree");
  return t.add_node(
      t.value(a) * t.value(b), {a.idx, b.idx},
      [a = a.idx, b = b.idx](Tape& t, int self) {
        const Matrix& g = t.grad_ref(self);
        if (t.needs_grad(a)) t.grad_ref(a) += g * t.val(b).transpose();
        if (t.needs_grad(b)) t.grad_ref(b) += t.val(a).transpose() * g;
      },
      any_grad(a.tape, {a, b}), "matmul");
}

Var affine(Var w, Var x, Var b) { return add(matmul(w, x), b); }

Var sum(Var a) {
  Tape& t = *a.tape;
  return t.add_node(
      Matrix::Constant(1, 1, t.value(a).sum()), {a.idx},
      [a = a.idx](Tape& t, int self) {
        if (!t.needs_grad(a)) return;
        t.grad_ref(a).array() += t.grad_ref(self)(0, 0);
      },
      t.needs_grad(a.idx), "sum");
}

Var mean(Var a) {
  Tape& t = *a.tape;
  const double n = static_cast<double>(t.value(a).size());
  return t.add_node(
      Matrix::Constant(1, 1, t.value(a).sum() / n), {a.idx},
      [a = a.idx, n](Tape& t, int self) {
        if (!t.needs_grad(a)) return;
        t.grad_ref(a).array() += t.grad_ref(self)(0, 0) / n;
      },
      t.needs_grad(a.idx), "mean");
}

Var relu(Var a) {
  Tape& t = *a.tape;
  return t.add_node(
      t.value(a).cwiseMax(0.0), {a.idx},
      [a = a.idx](Tape& t, int self) {
        if (!t.needs_grad(a)) return;
        const Matrix mask =
            (t.val(a).array() > 0.0).cast<double>().matrix();
        t.grad_ref(a) += t.grad_ref(self).cwiseProduct(mask);
      },
      t.needs_grad(a.idx), "relu");
}

Var sigmoid(Var a) {
  Tape& t = *a.tape;
  const Matrix s =
      (1.0 / (1.0 + (-t.value(a).array()).exp())).matrix();
  return t.add_node(
      s, {a.idx},
      [a = a.idx](Tape& t, int self) {
        if (!t.needs_grad(a)) return;
        const auto& s = t.val(self).array();
        t.grad_ref(a).array() +=
            t.grad_ref(self).array() * s * (1.0 - s);
      },
      t.needs_grad(a.idx), "sigmoid");
}

Var sqrt_v(Var a) {
  Tape& t = *a.tape;
  return t.add_node(
      t.value(a).cwiseSqrt(), {a.idx},
      [a = a.idx](Tape& t, int self) {
        if (!t.needs_grad(a)) return;
        t.grad_ref(a).array() +=
            t.grad_ref(self).array() / (2.0 * t.val(self).array());
      },
      t.needs_grad(a.idx), "sqrt");
}

Var log2_1p(Var a) {
  Tape& t = *a.tape;
  const Matrix v = (t.value(a).array().log1p() / std::log(2.0)).matrix();
  return t.add_node(
      v, {a.idx},
      [a = a.idx](Tape& t, int self) {
        if (!t.needs_grad(a)) return;
        t.grad_ref(a).array() += t.grad_ref(self).array() /
                                 ((1.0 + t.val(a).array()) * std::log(2.0));
      },
      t.needs_grad(a.idx), "log2_1p");
}

Var reciprocal(Var a) {
  Tape& t = *a.tape;
  return t.add_node(
      t.value(a).cwiseInverse(), {a.idx},
      [a = a.idx](Tape& t, int self) {
        if (!t.needs_grad(a)) return;
        const auto& y = t.val(self).array();
        t.grad_ref(a).array() -= t.grad_ref(self).array() * y * y;
      },
      t.needs_grad(a.idx), "reciprocal");
}

Var abs_v(Var a) {
  Tape& t = *a.tape;
  return t.add_node(
      t.value(a).cwiseAbs(), {a.idx},
      [a = a.idx](Tape& t, int self) {
        if (!t.needs_grad(a)) return;
        const Matrix sign = t.val(a).array().sign().matrix();
        t.grad_ref(a) += t.grad_ref(self).cwiseProduct(sign);
      },
      t.needs_grad(a.idx), "abs");
}

Var min_over_index(Var a) {
  Tape& t = *a.tape;
  const Matrix& v = t.value(a);
  int arg = 0;
  for (int i = 1; i < v.size(); ++i)
    if (v(i) < v(arg)) arg = i;  // strict: ties keep the lowest index
  return t.add_node(
      Matrix::Constant(1, 1, v(arg)), {a.idx},
      [a = a.idx, arg](Tape& t, int self) {
        if (!t.needs_grad(a)) return;
        t.grad_ref(a)(arg) += t.grad_ref(self)(0, 0);
      },
      t.needs_grad(a.idx), "min");
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw GraphError("concat_rows: empty input");
  Tape& t = *parts.front().tape;
  int total = 0;
  const int cols = static_cast<int>(t.value(parts.front()).cols());
  for (Var p : parts) {
    if (t.value(p).cols() != cols)
      throw GraphError("concat_rows: column mismatch");
    total += static_cast<int>(t.value(p).rows());
  }
  Matrix v(total, cols);
  std::vector<int> idx;
  std::vector<int> offsets;
  int at = 0;
  bool rg = false;
  for (Var p : parts) {
    v.middleRows(at, t.value(p).rows()) = t.value(p);
    idx.push_back(p.idx);
    offsets.push_back(at);
    at += static_cast<int>(t.value(p).rows());
    rg = rg || t.needs_grad(p.idx);
  }
  return t.add_node(
      std::move(v), idx,
      [idx, offsets](Tape& t, int self) {
        const Matrix& g = t.grad_ref(self);
        for (std::size_t i = 0; i < idx.size(); ++i) {
          if (!t.needs_grad(idx[i])) continue;
          t.grad_ref(idx[i]) +=
              g.middleRows(offsets[i], t.val(idx[i]).rows());
        }
      },
      rg, "concat");
}

Var rows(Var a, int start, int count) {
  Tape& t = *a.tape;
  if (start < 0 || start + count > t.value(a).rows())
    throw GraphError("rows: range out of bounds");
  return t.add_node(
      t.value(a).middleRows(start, count), {a.idx},
      [a = a.idx, start, count](Tape& t, int self) {
        if (!t.needs_grad(a)) return;
        t.grad_ref(a).middleRows(start, count) += t.grad_ref(self);
      },
      t.needs_grad(a.idx), "rows");
}

Var reshape(Var a, int r, int c) {
  Tape& t = *a.tape;
  if (t.value(a).size() != static_cast<Eigen::Index>(r) * c)
    throw GraphError("reshape: element count mismatch");
  Matrix v = t.value(a).reshaped(r, c);
  return t.add_node(
      std::move(v), {a.idx},
      [a = a.idx](Tape& t, int self) {
        if (!t.needs_grad(a)) return;
        t.grad_ref(a) +=
            t.grad_ref(self).reshaped(t.val(a).rows(), t.val(a).cols());
      },
      t.needs_grad(a.idx), "reshape");
}

Var scale(Var s, Var m) {
  check_same_tape(s, m);
  Tape& t = *s.tape;
  if (!is_scalar(t.value(s))) throw GraphError("scale: s must be 1x1");
  return t.add_node(
      t.value(s)(0, 0) * t.value(m), {s.idx, m.idx},
      [s = s.idx, m = m.idx](Tape& t, int self) {
        const Matrix& g = t.grad_ref(self);
        if (t.needs_grad(s))
          t.grad_ref(s)(0, 0) += g.cwiseProduct(t.val(m)).sum();
        if (t.needs_grad(m)) t.grad_ref(m) += t.val(s)(0, 0) * g;
      },
      any_grad(s.tape, {s, m}), "scale");
}

Var herm_solve_stacked(Var a_re, Var a_im, Var b_re, Var b_im) {
  Tape& t = *a_re.tape;
  const int n = static_cast<int>(t.value(a_re).rows());
  if (t.value(a_re).cols() != n || t.value(a_im).rows() != n ||
      t.value(a_im).cols() != n || t.value(b_re).rows() != n ||
      t.value(b_im).rows() != n || t.value(b_re).cols() != 1 ||
      t.value(b_im).cols() != 1)
    throw GraphError("herm_solve: shape mismatch");

  Matrix block(2 * n, 2 * n);
  block.topLeftCorner(n, n) = t.value(a_re);
  block.bottomRightCorner(n, n) = t.value(a_re);
  block.topRightCorner(n, n) = -t.value(a_im);
  block.bottomLeftCorner(n, n) = t.value(a_im);
  Eigen::VectorXd rhs(2 * n);
  rhs << t.value(b_re), t.value(b_im);

  auto llt = std::make_shared<Eigen::LLT<Matrix>>(block);
  if (llt->info() != Eigen::Success)
    throw GraphError("herm_solve: matrix not positive definite");
  Matrix x = llt->solve(rhs);

  return t.add_node(
      std::move(x),
      {a_re.idx, a_im.idx, b_re.idx, b_im.idx},
      [ar = a_re.idx, ai = a_im.idx, br = b_re.idx, bi = b_im.idx, llt,
       n](Tape& t, int self) {
        // x = B^{-1} y with B symmetric:  gy = B^{-1} gx,  gB = -gy x^T
        const Matrix gy = llt->solve(t.grad_ref(self));
        const Matrix& x = t.val(self);
        if (t.needs_grad(br)) t.grad_ref(br) += gy.topRows(n);
        if (t.needs_grad(bi)) t.grad_ref(bi) += gy.bottomRows(n);
        if (t.needs_grad(ar) || t.needs_grad(ai)) {
          const Matrix gb = -gy * x.transpose();
          if (t.needs_grad(ar))
            t.grad_ref(ar) +=
                gb.topLeftCorner(n, n) + gb.bottomRightCorner(n, n);
          if (t.needs_grad(ai))
            t.grad_ref(ai) +=
                gb.bottomLeftCorner(n, n) - gb.topRightCorner(n, n);
        }
      },
      any_grad(a_re.tape, {a_re, a_im, b_re, b_im}), "herm_solve");
}

Var detach(Var a) {
  Tape& t = *a.tape;
  return t.constant(t.value(a));
}

CVar cadd(CVar a, CVar b) { return {add(a.re, b.re), add(a.im, b.im)}; }
CVar csub(CVar a, CVar b) { return {sub(a.re, b.re), sub(a.im, b.im)}; }

CVar cmatmul(CVar a, CVar b) {
  return {sub(matmul(a.re, b.re), matmul(a.im, b.im)),
          add(matmul(a.re, b.im), matmul(a.im, b.re))};
}

CVar cscale(Var s, CVar a) { return {scale(s, a.re), scale(s, a.im)}; }

Var cabs2(CVar a) { return add(mul(a.re, a.re), mul(a.im, a.im)); }

CVar cconj(CVar a) { return {a.re, neg(a.im)}; }

CVar herm_solve(CVar a, CVar b) {
  Tape& t = *a.re.tape;
  const int n = static_cast<int>(t.value(a.re).rows());
  Var stacked = herm_solve_stacked(a.re, a.im, b.re, b.im);
  return {rows(stacked, 0, n), rows(stacked, n, n)};
}

void adam_step(std::vector<Matrix>& params, const std::vector<Matrix>& grads,
               AdamState& state, const AdamConfig& cfg) {
  if (params.size() != grads.size())
    throw GraphError("adam_step: parameter/gradient count mismatch");
  if (state.m.empty()) {
    for (const Matrix& p : params) {
      state.m.push_back(Matrix::Zero(p.rows(), p.cols()));
      state.v.push_back(Matrix::Zero(p.rows(), p.cols()));
    }
  }
  state.step += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * grads[i];
    state.v[i] = cfg.beta2 * state.v[i] +
                 (1.0 - cfg.beta2) * grads[i].cwiseProduct(grads[i]);
    params[i].array() -=
        cfg.lr * (state.m[i].array() / bc1) /
        ((state.v[i].array() / bc2).sqrt() + cfg.eps);
  }
}

std::vector<Matrix> gradient(Tape& tape, Var loss,
                             const std::vector<Var>& params) {
  tape.backward(loss);
  std::vector<Matrix> out;
  out.reserve(params.size());
  for (Var p : params) out.push_back(tape.grad(p));
  return out;
}

}  // namespace rsbeam::ad
