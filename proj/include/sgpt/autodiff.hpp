#pragma once

// Reverse-mode differentiation over dense matrices. A Tape records the
// forward computation as a list of nodes in creation order (which is a
// topological order); backward() walks it once in reverse.

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sgpt/dense.hpp"
#include "sgpt/error.hpp"
#include "sgpt/sparse.hpp"

namespace sgpt::ad {

struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
  bool trainable = true;

  Parameter() = default;
  Parameter(std::string n, Matrix v, bool train = true)
      : name(std::move(n)), value(std::move(v)), grad(value.rows(), value.cols()), trainable(train) {}

  void zero_grad() {
    ensure_grad_shape();
    grad.fill(0.0);
  }
  void ensure_grad_shape() {
    if (!grad.same_shape(value)) grad = Matrix(value.rows(), value.cols());
  }
};

struct Var {
  std::size_t id = std::numeric_limits<std::size_t>::max();
};

// Norms below this are clamped in cosine similarity so zero rows give cos = 0.
inline constexpr double kNormFloor = 1e-12;

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix v) { return push(std::move(v), false, nullptr); }

  // Non-owning constant; `v` must outlive the tape.
  Var constant_ref(const Matrix& v) {
    Node n;
    n.ref = &v;
    nodes_.push_back(std::move(n));
    return {nodes_.size() - 1};
  }

  // Leaf bound to a parameter. Gradients reach p.grad only when p is trainable.
  Var param(Parameter& p) {
    Node n;
    n.ref = &p.value;
    n.requires_grad = p.trainable;
    n.param = &p;
    nodes_.push_back(std::move(n));
    return {nodes_.size() - 1};
  }

  const Matrix& value(Var v) const { return val(v.id); }
  double scalar(Var v) const {
    const Matrix& m = val(v.id);
    if (m.size() != 1) throw ShapeError("scalar: value is " + shape_str(m));
    return m.data()[0];
  }
  // Gradient of the last backward() target w.r.t. v (zeros if none reached it).
  Matrix grad(Var v) const {
    const Node& n = nodes_.at(v.id);
    if (n.grad.same_shape(val(v.id))) return n.grad;
    return Matrix(val(v.id).rows(), val(v.id).cols());
  }
  bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }
  std::size_t size() const noexcept { return nodes_.size(); }

  // ---- primitives --------------------------------------------------------

  Var matmul(Var a, Var b) {
    const Matrix& A = val(a.id);
    const Matrix& B = val(b.id);
    Matrix C = dense::matmul(A, B);
    return push(std::move(C), rg(a) || rg(b), [a, b](Tape& t, std::size_t self) {
      const Matrix& dC = t.nodes_[self].grad;
      if (t.rg(a)) dense::matmul_a_bt_acc(dC, t.val(b.id), t.grad_buf(a.id));
      if (t.rg(b)) dense::matmul_at_b_acc(t.val(a.id), dC, t.grad_buf(b.id));
    });
  }

  // s * x for a constant sparse s that must outlive the tape.
  Var spmm(const SparseRealMatrix& s, Var x) {
    Matrix Y = sgpt::spmm(s, val(x.id));
    const SparseRealMatrix* sp = &s;
    return push(std::move(Y), rg(x), [sp, x](Tape& t, std::size_t self) {
      const Matrix& dY = t.nodes_[self].grad;
      Matrix& dX = t.grad_buf(x.id);
      const std::size_t d = dY.cols();
      const auto& rp = sp->row_ptr();
      const auto& ci = sp->col_idx();
      const auto& vals = sp->values();
      for (std::size_t i = 0; i < sp->rows(); ++i) {
        const double* dyi = dY.data() + i * d;
        for (std::size_t p = rp[i]; p < rp[i + 1]; ++p) {
          double* dxr = dX.data() + static_cast<std::size_t>(ci[p]) * d;
          const double v = vals[p];
          for (std::size_t j = 0; j < d; ++j) dxr[j] += v * dyi[j];
        }
      }
    });
  }

  Var add(Var a, Var b) {
    Matrix C = val(a.id);
    dense::add_inplace(C, val(b.id));
    return push(std::move(C), rg(a) || rg(b), [a, b](Tape& t, std::size_t self) {
      const Matrix& dC = t.nodes_[self].grad;
      if (t.rg(a)) dense::add_inplace(t.grad_buf(a.id), dC);
      if (t.rg(b)) dense::add_inplace(t.grad_buf(b.id), dC);
    });
  }

  Var scale(Var a, double c) {
    Matrix C = val(a.id);
    for (double& x : C.storage()) x *= c;
    return push(std::move(C), rg(a), [a, c](Tape& t, std::size_t self) {
      dense::axpy(c, t.nodes_[self].grad, t.grad_buf(a.id));
    });
  }

  Var concat_cols(std::span<const Var> parts) {
    if (parts.empty()) throw ShapeError("concat_cols: no inputs");
    const std::size_t n = val(parts[0].id).rows();
    std::size_t width = 0;
    bool any = false;
    for (Var p : parts) {
      if (val(p.id).rows() != n) throw ShapeError("concat_cols: row count mismatch");
      width += val(p.id).cols();
      any = any || rg(p);
    }
    Matrix C(n, width);
    std::size_t off = 0;
    for (Var p : parts) {
      const Matrix& P = val(p.id);
      for (std::size_t i = 0; i < n; ++i)
        std::copy(P.row(i).begin(), P.row(i).end(), C.row(i).begin() + static_cast<std::ptrdiff_t>(off));
      off += P.cols();
    }
    std::vector<Var> ps(parts.begin(), parts.end());
    return push(std::move(C), any, [ps](Tape& t, std::size_t self) {
      const Matrix& dC = t.nodes_[self].grad;
      std::size_t off = 0;
      for (Var p : ps) {
        const std::size_t w = t.val(p.id).cols();
        if (t.rg(p)) {
          Matrix& dP = t.grad_buf(p.id);
          for (std::size_t i = 0; i < dC.rows(); ++i)
            for (std::size_t j = 0; j < w; ++j) dP(i, j) += dC(i, off + j);
        }
        off += w;
      }
    });
  }

  Var relu(Var a) {
    Matrix C = val(a.id);
    for (double& x : C.storage()) x = x > 0.0 ? x : 0.0;
    return push(std::move(C), rg(a), [a](Tape& t, std::size_t self) {
      const Matrix& dC = t.nodes_[self].grad;
      const Matrix& A = t.val(a.id);
      Matrix& dA = t.grad_buf(a.id);
      for (std::size_t i = 0; i < A.size(); ++i)
        if (A.data()[i] > 0.0) dA.data()[i] += dC.data()[i];
    });
  }

  // Per-column normalization across rows with batch statistics, then
  // y = gamma * xhat + beta. gamma and beta are 1 x d.
  Var batchnorm_rows(Var x, Var gamma, Var beta, double eps = 1e-5) {
    const Matrix& X = val(x.id);
    const Matrix& G = val(gamma.id);
    const Matrix& B = val(beta.id);
    const std::size_t n = X.rows(), d = X.cols();
    if (n == 0) throw PreconditionError("batchnorm_rows: empty batch");
    if (G.rows() != 1 || G.cols() != d || !B.same_shape(G))
      throw ShapeError("batchnorm_rows: affine parameters must be 1x" + std::to_string(d));
    Matrix xhat(n, d);
    std::vector<double> inv_std(d);
    for (std::size_t j = 0; j < d; ++j) {
      double mean = 0.0;
      for (std::size_t i = 0; i < n; ++i) mean += X(i, j);
      mean /= static_cast<double>(n);
      double var = 0.0;
      for (std::size_t i = 0; i < n; ++i) var += (X(i, j) - mean) * (X(i, j) - mean);
      var /= static_cast<double>(n);
      inv_std[j] = 1.0 / std::sqrt(var + eps);
      for (std::size_t i = 0; i < n; ++i) xhat(i, j) = (X(i, j) - mean) * inv_std[j];
    }
    Matrix Y(n, d);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j) Y(i, j) = G(0, j) * xhat(i, j) + B(0, j);
    return push(std::move(Y), rg(x) || rg(gamma) || rg(beta),
                [x, gamma, beta, xhat = std::move(xhat), inv_std = std::move(inv_std)](
                    Tape& t, std::size_t self) {
                  const Matrix& dY = t.nodes_[self].grad;
                  const Matrix& G = t.val(gamma.id);
                  const std::size_t n = dY.rows(), d = dY.cols();
                  std::vector<double> sum_dy(d, 0.0), sum_dy_xhat(d, 0.0);
                  for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = 0; j < d; ++j) {
                      sum_dy[j] += dY(i, j);
                      sum_dy_xhat[j] += dY(i, j) * xhat(i, j);
                    }
                  if (t.rg(gamma)) {
                    Matrix& dG = t.grad_buf(gamma.id);
                    for (std::size_t j = 0; j < d; ++j) dG(0, j) += sum_dy_xhat[j];
                  }
                  if (t.rg(beta)) {
                    Matrix& dB = t.grad_buf(beta.id);
                    for (std::size_t j = 0; j < d; ++j) dB(0, j) += sum_dy[j];
                  }
                  if (t.rg(x)) {
                    Matrix& dX = t.grad_buf(x.id);
                    const double nn = static_cast<double>(n);
                    for (std::size_t i = 0; i < n; ++i)
                      for (std::size_t j = 0; j < d; ++j)
                        dX(i, j) += G(0, j) * inv_std[j] / nn *
                                    (nn * dY(i, j) - sum_dy[j] - xhat(i, j) * sum_dy_xhat[j]);
                  }
                });
  }

  // Row-wise cosine similarity of paired rows; n x 1.
  Var cosine_similarity_rows(Var a, Var b) {
    const Matrix& A = val(a.id);
    const Matrix& B = val(b.id);
    dense::require_same_shape(A, B, "cosine_similarity_rows");
    const std::size_t n = A.rows(), d = A.cols();
    Matrix C(n, 1);
    std::vector<double> na(n), nb(n);
    for (std::size_t i = 0; i < n; ++i) {
      double dot = 0, sa = 0, sb = 0;
      for (std::size_t j = 0; j < d; ++j) {
        dot += A(i, j) * B(i, j);
        sa += A(i, j) * A(i, j);
        sb += B(i, j) * B(i, j);
      }
      na[i] = std::max(std::sqrt(sa), kNormFloor);
      nb[i] = std::max(std::sqrt(sb), kNormFloor);
      C(i, 0) = dot / (na[i] * nb[i]);
    }
    return push(std::move(C), rg(a) || rg(b),
                [a, b, na = std::move(na), nb = std::move(nb)](Tape& t, std::size_t self) {
                  const Matrix& dC = t.nodes_[self].grad;
                  const Matrix& C = t.val(self);
                  const Matrix& A = t.val(a.id);
                  const Matrix& B = t.val(b.id);
                  const std::size_t n = A.rows(), d = A.cols();
                  for (std::size_t i = 0; i < n; ++i) {
                    const double g = dC(i, 0), c = C(i, 0);
                    if (t.rg(a)) {
                      Matrix& dA = t.grad_buf(a.id);
                      for (std::size_t j = 0; j < d; ++j)
                        dA(i, j) += g * (B(i, j) / (na[i] * nb[i]) - c * A(i, j) / (na[i] * na[i]));
                    }
                    if (t.rg(b)) {
                      Matrix& dB = t.grad_buf(b.id);
                      for (std::size_t j = 0; j < d; ++j)
                        dB(i, j) += g * (A(i, j) / (na[i] * nb[i]) - c * B(i, j) / (nb[i] * nb[i]));
                    }
                  }
                });
  }

  // All-pairs cosine similarity between rows of a (n x d) and b (m x d); n x m.
  Var cosine_matrix(Var a, Var b) {
    const Matrix& A = val(a.id);
    const Matrix& B = val(b.id);
    if (A.cols() != B.cols())
      throw ShapeError("cosine_matrix: width mismatch " + shape_str(A) + " vs " + shape_str(B));
    Matrix An = normalized_rows(A), Bn = normalized_rows(B);
    Matrix C(A.rows(), B.rows());
    dense::matmul_a_bt_acc(An, Bn, C);
    std::vector<double> na = row_norms(A), nb = row_norms(B);
    return push(std::move(C), rg(a) || rg(b),
                [a, b, An = std::move(An), Bn = std::move(Bn), na = std::move(na),
                 nb = std::move(nb)](Tape& t, std::size_t self) {
                  const Matrix& dC = t.nodes_[self].grad;
                  if (t.rg(a)) {
                    Matrix dAn(An.rows(), An.cols());
                    dense::matmul_acc(dC, Bn, dAn);
                    unnormalize_grad(An, na, dAn, t.grad_buf(a.id));
                  }
                  if (t.rg(b)) {
                    Matrix dBn(Bn.rows(), Bn.cols());
                    dense::matmul_at_b_acc(dC, An, dBn);
                    unnormalize_grad(Bn, nb, dBn, t.grad_buf(b.id));
                  }
                });
  }

  Var softmax_rows(Var a) {
    Matrix S = val(a.id);
    for (std::size_t i = 0; i < S.rows(); ++i) softmax_inplace(S.row(i));
    return push(std::move(S), rg(a), [a](Tape& t, std::size_t self) {
      const Matrix& dS = t.nodes_[self].grad;
      const Matrix& S = t.val(self);
      Matrix& dA = t.grad_buf(a.id);
      for (std::size_t i = 0; i < S.rows(); ++i) {
        double dot = 0.0;
        for (std::size_t j = 0; j < S.cols(); ++j) dot += dS(i, j) * S(i, j);
        for (std::size_t j = 0; j < S.cols(); ++j) dA(i, j) += S(i, j) * (dS(i, j) - dot);
      }
    });
  }

  // Mean over rows of -log softmax(logits_i)[target_i]; 1 x 1.
  Var softmax_cross_entropy(Var logits, std::span<const int> targets) {
    const Matrix& L = val(logits.id);
    if (targets.size() != L.rows())
      throw ShapeError("softmax_cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                       std::to_string(L.rows()) + " rows");
    if (L.rows() == 0) throw PreconditionError("softmax_cross_entropy: empty batch");
    Matrix P = L;
    double loss = 0.0;
    for (std::size_t i = 0; i < L.rows(); ++i) {
      const int y = targets[i];
      if (y < 0 || static_cast<std::size_t>(y) >= L.cols())
        throw PreconditionError("softmax_cross_entropy: target out of range");
      const auto row = L.row(i);
      double mx = -std::numeric_limits<double>::infinity();
      for (double v : row) mx = std::max(mx, v);
      double z = 0.0;
      for (double v : row) z += std::exp(v - mx);
      loss += std::log(z) + mx - row[static_cast<std::size_t>(y)];
      softmax_inplace(P.row(i));
    }
    const double n = static_cast<double>(L.rows());
    Matrix out(1, 1, loss / n);
    std::vector<int> ys(targets.begin(), targets.end());
    return push(std::move(out), rg(logits),
                [logits, P = std::move(P), ys = std::move(ys), n](Tape& t, std::size_t self) {
                  const double g = t.nodes_[self].grad(0, 0);
                  Matrix& dL = t.grad_buf(logits.id);
                  for (std::size_t i = 0; i < P.rows(); ++i)
                    for (std::size_t j = 0; j < P.cols(); ++j) {
                      const double onehot = static_cast<std::size_t>(ys[i]) == j ? 1.0 : 0.0;
                      dL(i, j) += g * (P(i, j) - onehot) / n;
                    }
                });
  }

  // sum_i w(0,i) * hs[i]; w is 1 x k.
  Var row_weighted_sum(std::span<const Var> hs, Var w) {
    const Matrix& W = val(w.id);
    if (hs.empty() || W.rows() != 1 || W.cols() != hs.size())
      throw ShapeError("row_weighted_sum: weight vector must be 1x" + std::to_string(hs.size()));
    const Matrix& H0 = val(hs[0].id);
    Matrix out(H0.rows(), H0.cols());
    bool any = rg(w);
    for (std::size_t i = 0; i < hs.size(); ++i) {
      dense::axpy(W(0, i), val(hs[i].id), out);
      any = any || rg(hs[i]);
    }
    std::vector<Var> parts(hs.begin(), hs.end());
    return push(std::move(out), any, [parts, w](Tape& t, std::size_t self) {
      const Matrix& dY = t.nodes_[self].grad;
      const Matrix& W = t.val(w.id);
      for (std::size_t i = 0; i < parts.size(); ++i) {
        if (t.rg(parts[i])) dense::axpy(W(0, i), dY, t.grad_buf(parts[i].id));
        if (t.rg(w)) {
          const Matrix& H = t.val(parts[i].id);
          double s = 0.0;
          for (std::size_t e = 0; e < H.size(); ++e) s += H.data()[e] * dY.data()[e];
          t.grad_buf(w.id)(0, i) += s;
        }
      }
    });
  }

  Var gather_rows(Var a, std::span<const Index> rows) {
    const Matrix& A = val(a.id);
    Matrix out(rows.size(), A.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (rows[r] >= A.rows()) throw PreconditionError("gather_rows: row index out of range");
      std::copy(A.row(rows[r]).begin(), A.row(rows[r]).end(), out.row(r).begin());
    }
    std::vector<Index> idx(rows.begin(), rows.end());
    return push(std::move(out), rg(a), [a, idx = std::move(idx)](Tape& t, std::size_t self) {
      const Matrix& dY = t.nodes_[self].grad;
      Matrix& dA = t.grad_buf(a.id);
      for (std::size_t r = 0; r < idx.size(); ++r)
        for (std::size_t j = 0; j < dY.cols(); ++j) dA(idx[r], j) += dY(r, j);
    });
  }

  // sum(a ⊙ r) for a constant r; 1 x 1. Used to reduce matrix outputs in checks.
  Var dot_const(Var a, Matrix r) {
    const Matrix& A = val(a.id);
    dense::require_same_shape(A, r, "dot_const");
    double s = 0.0;
    for (std::size_t i = 0; i < A.size(); ++i) s += A.data()[i] * r.data()[i];
    return push(Matrix(1, 1, s), rg(a), [a, r = std::move(r)](Tape& t, std::size_t self) {
      dense::axpy(t.nodes_[self].grad(0, 0), r, t.grad_buf(a.id));
    });
  }

  // ---- backward ----------------------------------------------------------

  void backward(Var loss) {
    const Matrix& L = val(loss.id);
    if (L.size() != 1) throw ShapeError("backward: target must be 1x1, got " + shape_str(L));
    if (!std::isfinite(L.data()[0])) throw NumericError("backward: non-finite loss");
    for (auto& n : nodes_) n.grad = Matrix();
    if (!nodes_[loss.id].requires_grad) return;
    grad_buf(loss.id)(0, 0) = 1.0;
    for (std::size_t i = loss.id + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.requires_grad || n.grad.empty()) continue;
      if (n.backward) n.backward(*this, i);
      if (n.param && n.param->trainable) {
        n.param->ensure_grad_shape();
        dense::add_inplace(n.param->grad, n.grad);
      }
    }
  }

 private:
  struct Node {
    Matrix value;
    const Matrix* ref = nullptr;
    Matrix grad;
    bool requires_grad = false;
    Parameter* param = nullptr;
    std::function<void(Tape&, std::size_t)> backward;
  };

  const Matrix& val(std::size_t id) const {
    const Node& n = nodes_.at(id);
    return n.ref ? *n.ref : n.value;
  }
  bool rg(Var v) const { return nodes_[v.id].requires_grad; }

  Matrix& grad_buf(std::size_t id) {
    Node& n = nodes_[id];
    if (n.grad.empty()) {
      const Matrix& v = val(id);
      n.grad = Matrix(v.rows(), v.cols());
    }
    return n.grad;
  }

  Var push(Matrix v, bool requires_grad, std::function<void(Tape&, std::size_t)> bw) {
    Node n;
    n.value = std::move(v);
    n.requires_grad = requires_grad;
    if (requires_grad) n.backward = std::move(bw);
    nodes_.push_back(std::move(n));
    return {nodes_.size() - 1};
  }

  static void softmax_inplace(std::span<double> row) {
    double mx = -std::numeric_limits<double>::infinity();
    for (double v : row) mx = std::max(mx, v);
    double z = 0.0;
    for (double& v : row) {
      v = std::exp(v - mx);
      z += v;
    }
    for (double& v : row) v /= z;
  }

  static std::vector<double> row_norms(const Matrix& m) {
    std::vector<double> out(m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i) {
      double s = 0.0;
      for (double v : m.row(i)) s += v * v;
      out[i] = std::max(std::sqrt(s), kNormFloor);
    }
    return out;
  }

  static Matrix normalized_rows(const Matrix& m) {
    Matrix out = m;
    const auto norms = row_norms(m);
    for (std::size_t i = 0; i < m.rows(); ++i)
      for (double& v : out.row(i)) v /= norms[i];
    return out;
  }

  // Given d(loss)/d(normalized row), accumulate d(loss)/d(raw row).
  static void unnormalize_grad(const Matrix& normalized, const std::vector<double>& norms,
                               const Matrix& d_normalized, Matrix& d_raw) {
    for (std::size_t i = 0; i < normalized.rows(); ++i) {
      double proj = 0.0;
      for (std::size_t j = 0; j < normalized.cols(); ++j)
        proj += normalized(i, j) * d_normalized(i, j);
      for (std::size_t j = 0; j < normalized.cols(); ++j)
        d_raw(i, j) += (d_normalized(i, j) - normalized(i, j) * proj) / norms[i];
    }
  }

  std::vector<Node> nodes_;
};

// ---------------------------------------------------------------------------

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

// Compares backward() gradients of a scalar function against central finite
// differences, elementwise over every trainable parameter.
inline GradCheckResult grad_check(const std::function<Var(Tape&)>& f,
                                  std::span<Parameter* const> params, double eps = 1e-5) {
  if (!(eps > 0.0)) throw PreconditionError("grad_check: eps must be > 0");
  for (Parameter* p : params) p->zero_grad();
  {
    Tape tape;
    const Var loss = f(tape);
    if (!std::isfinite(tape.scalar(loss))) throw NumericError("grad_check: non-finite loss");
    tape.backward(loss);
  }
  auto eval = [&] {
    Tape tape;
    const double v = tape.scalar(f(tape));
    if (!std::isfinite(v)) throw NumericError("grad_check: non-finite loss at perturbed point");
    return v;
  };
  GradCheckResult res;
  for (Parameter* p : params) {
    if (!p->trainable) continue;
    const Matrix analytic = p->grad;
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      double& x = p->value.data()[i];
      const double saved = x;
      x = saved + eps;
      const double fp = eval();
      x = saved - eps;
      const double fm = eval();
      x = saved;
      const double numeric = (fp - fm) / (2.0 * eps);
      const double a = analytic.data()[i];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      const double rel = std::abs(a - numeric) / denom;
      if (rel > res.max_rel_error || res.worst_param.empty()) {
        res.max_rel_error = rel;
        res.worst_param = p->name;
        res.worst_index = i;
        res.analytic = a;
        res.numeric = numeric;
      }
    }
  }
  return res;
}

// ---------------------------------------------------------------------------

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam. Moment state is kept per registered parameter.
class Adam {
 public:
  Adam(std::vector<Parameter*> params, AdamOptions opt = {}) : params_(std::move(params)), opt_(opt) {
    for (Parameter* p : params_) {
      m_.emplace_back(p->value.rows(), p->value.cols());
      v_.emplace_back(p->value.rows(), p->value.cols());
    }
  }

  void step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(t_));
    for (std::size_t k = 0; k < params_.size(); ++k) {
      Parameter& p = *params_[k];
      if (!p.trainable) continue;
      dense::require_same_shape(p.value, p.grad, "adam_step");
      double* x = p.value.data();
      const double* g = p.grad.data();
      double* m = m_[k].data();
      double* v = v_[k].data();
      for (std::size_t i = 0; i < p.value.size(); ++i) {
        m[i] = opt_.beta1 * m[i] + (1.0 - opt_.beta1) * g[i];
        v[i] = opt_.beta2 * v[i] + (1.0 - opt_.beta2) * g[i] * g[i];
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        x[i] -= opt_.lr * mhat / (std::sqrt(vhat) + opt_.eps);
      }
    }
  }

  void zero_grad() {
    for (Parameter* p : params_) p->zero_grad();
  }

  std::size_t steps() const noexcept { return t_; }
  const AdamOptions& options() const noexcept { return opt_; }

 private:
  std::vector<Parameter*> params_;
  AdamOptions opt_;
  std::vector<Matrix> m_, v_;
  std::size_t t_ = 0;
};

}  // namespace sgpt::ad
