// Minimal reverse-mode differentiation over real matrices.  Complex
// quantities are carried as (real, imaginary) pairs; Hermitian solves go
// through an equivalent symmetric positive-definite real block system.
#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace rsbeam::ad {

using Matrix = Eigen::MatrixXd;

class Tape;

/// Handle to a node on a tape.
struct Var {
  Tape* tape = nullptr;
  int idx = -1;
};

class GraphError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Tape {
 public:
  struct Node {
    Matrix value;
    Matrix grad;  // empty until touched by backward
    std::vector<int> inputs;
    std::function<void(Tape&, int)> backward;  // null for leaves
    bool requires_grad = false;
    const char* op = "leaf";
  };

  Var constant(Matrix value) { return add_node(std::move(value), {}, nullptr, false, "const"); }
  Var param(Matrix value) { return add_node(std::move(value), {}, nullptr, true, "param"); }

  Var add_node(Matrix value, std::vector<int> inputs,
               std::function<void(Tape&, int)> backward, bool requires_grad,
               const char* op);

  const Matrix& value(Var v) const { return nodes_[v.idx].value; }
  /// Gradient of the last backward() loss w.r.t. v; zeros if unreached.
  Matrix grad(Var v) const;

  /// Reverse sweep from a scalar loss node.
  void backward(Var loss);

  Matrix& grad_ref(int idx);
  const Matrix& val(int idx) const { return nodes_[idx].value; }
  bool needs_grad(int idx) const { return nodes_[idx].requires_grad; }
  std::size_t size() const { return nodes_.size(); }

 private:
  std::vector<Node> nodes_;
};

// ---- primitives ------------------------------------------------------

Var add(Var a, Var b);        // same shape, or one side 1x1 (broadcast)
Var sub(Var a, Var b);
Var mul(Var a, Var b);        // elementwise, same broadcast rule
Var neg(Var a);
Var matmul(Var a, Var b);
Var affine(Var w, Var x, Var b);  // W x + b
Var sum(Var a);               // 1x1
Var mean(Var a);              // 1x1
Var relu(Var a);
Var sigmoid(Var a);
Var sqrt_v(Var a);            // elementwise, input must be > 0
Var log2_1p(Var a);           // log2(1 + x), x > -1
Var reciprocal(Var a);
Var abs_v(Var a);             // subgradient sign(x), 0 at 0
Var min_over_index(Var a);    // scalar; gradient to the lowest argmin
Var concat_rows(const std::vector<Var>& parts);
Var rows(Var a, int start, int count);
Var reshape(Var a, int rows, int cols);
Var scale(Var s, Var m);      // scalar s times matrix m

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator-(Var a) { return neg(a); }

/// x = A^{-1} b for Hermitian positive-definite A = Ar + i Ai and
/// b = br + i bi, returned as the stacked real vector [Re(x); Im(x)].
/// The backward rule is the adjoint solve; A^{-1} is never formed.
Var herm_solve_stacked(Var a_re, Var a_im, Var b_re, Var b_im);

/// Detached copy: same value, no gradient flow.
Var detach(Var a);

// ---- complex pair convenience ---------------------------------------

struct CVar {
  Var re, im;
};

CVar cadd(CVar a, CVar b);
CVar csub(CVar a, CVar b);
CVar cmatmul(CVar a, CVar b);  // four real matmuls
CVar cscale(Var s, CVar a);    // real scalar times complex matrix
Var cabs2(CVar a);             // elementwise |z|^2
CVar cconj(CVar a);
CVar herm_solve(CVar a, CVar b);

// ---- parameter collections and Adam ---------------------------------

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<Matrix> m;
  std::vector<Matrix> v;
  long step = 0;
};

/// Standard bias-corrected Adam update, in place over a flat parameter
/// list. State is sized lazily on first use.
void adam_step(std::vector<Matrix>& params, const std::vector<Matrix>& grads,
               AdamState& state, const AdamConfig& cfg);

/// Gradients of a scalar loss for each parameter node; zero matrices for
/// parameters the loss does not reach.
std::vector<Matrix> gradient(Tape& tape, Var loss,
                             const std::vector<Var>& params);

}  // namespace rsbeam::ad
