#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "t2sg/numeric/matrix.hpp"
#include "t2sg/numeric/rng.hpp"

namespace t2sg::num {

// Trainable tensor: value plus accumulated gradient of the same shape.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;

  Parameter() = default;
  Parameter(std::string n, Matrix v)
      : name(std::move(n)), value(std::move(v)), grad(value.rows(), value.cols()) {}

  void zero_grad() {
    for (std::size_t i = 0; i < grad.size(); ++i) grad.data()[i] = 0.0;
  }
};

struct Value {
  std::size_t id = static_cast<std::size_t>(-1);
};

inline double stable_sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + exp(t)) without overflow
inline double softplus(double t) { return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t)); }

// Record of a single forward sweep. Ops append nodes in execution order;
// backward() replays them in exact reverse order, accumulating into
// Parameter.grad for every leaf. One tape per forward; single-threaded.
class Tape {
 public:
  static constexpr double kLayerNormEps = 1e-6;

  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    const char* op = "";
    Parameter* param = nullptr;  // set on leaves only
    std::function<void(Tape&, std::size_t)> back;
  };

  Value constant(Matrix m, const char* tag = "const") {
    return push(std::move(m), false, tag, nullptr, {});
  }

  Value leaf(Parameter& p) {
    Value v = push(p.value, true, "leaf", &p, {});
    nodes_[v.id].back = [](Tape& t, std::size_t self) {
      Node& n = t.nodes_[self];
      for (std::size_t i = 0; i < n.grad.size(); ++i) n.param->grad.data()[i] += n.grad.data()[i];
    };
    return v;
  }

  const Matrix& value(Value v) const { return nodes_[v.id].value; }
  const Matrix& grad(Value v) const { return nodes_[v.id].grad; }

  double scalar(Value v) const {
    const Matrix& m = value(v);
    if (m.rows() != 1 || m.cols() != 1) throw dim_error("scalar: node is not 1x1");
    return m(0, 0);
  }

  std::size_t size() const { return nodes_.size(); }

  // Smallest |input| seen by any relu on this tape; finite-difference checks
  // use it to stay away from the kink.
  double min_abs_relu_input() const { return min_abs_relu_input_; }

  // Name and index of the first node whose value contains a non-finite entry.
  std::string first_nonfinite() const {
    for (std::size_t i = 0; i < nodes_.size(); ++i)
      if (!nodes_[i].value.all_finite())
        return std::string(nodes_[i].op) + "@" + std::to_string(i);
    return {};
  }

  void clear() {
    nodes_.clear();
    backward_done_ = false;
    min_abs_relu_input_ = std::numeric_limits<double>::infinity();
  }

  void backward(Value loss) {
    if (backward_done_)
      throw std::logic_error("Tape::backward: already swept; build a fresh tape");
    backward_done_ = true;
    const Matrix& lv = value(loss);
    if (lv.rows() != 1 || lv.cols() != 1) throw dim_error("backward: loss must be 1x1");
    for (Node& n : nodes_) n.grad = Matrix(n.value.rows(), n.value.cols());
    nodes_[loss.id].grad(0, 0) = 1.0;
    for (std::size_t i = nodes_.size(); i-- > 0;) {
      Node& n = nodes_[i];
      if (n.requires_grad && n.back) n.back(*this, i);
    }
  }

  // ----- primitive ops -----

  Value matmul(Value a, Value b) {
    const Matrix &A = value(a), &B = value(b);
    Matrix c = num::matmul(A, B);
    Value out = push(std::move(c), needs(a) || needs(b), "matmul", nullptr, {a, b});
    nodes_[out.id].back = [a, b](Tape& t, std::size_t self) {
      const Matrix& g = t.nodes_[self].grad;
      if (t.needs(a)) mm_nt_acc(g, t.value(b), t.nodes_[a.id].grad);
      if (t.needs(b)) mm_tn_acc(t.value(a), g, t.nodes_[b.id].grad);
    };
    return out;
  }

  // a * b^T
  Value matmul_nt(Value a, Value b) {
    Matrix c = num::matmul_nt(value(a), value(b));
    Value out = push(std::move(c), needs(a) || needs(b), "matmul_nt", nullptr, {a, b});
    nodes_[out.id].back = [a, b](Tape& t, std::size_t self) {
      const Matrix& g = t.nodes_[self].grad;
      if (t.needs(a)) mm_nn_acc(g, t.value(b), t.nodes_[a.id].grad);
      if (t.needs(b)) mm_tn_acc(g, t.value(a), t.nodes_[b.id].grad);
    };
    return out;
  }

  Value add(Value a, Value b) {
    Matrix c = num::add(value(a), value(b));
    Value out = push(std::move(c), needs(a) || needs(b), "add", nullptr, {a, b});
    nodes_[out.id].back = [a, b](Tape& t, std::size_t self) {
      const Matrix& g = t.nodes_[self].grad;
      t.accumulate(a, g, 1.0);
      t.accumulate(b, g, 1.0);
    };
    return out;
  }

  Value sub(Value a, Value b) {
    Matrix c = num::sub(value(a), value(b));
    Value out = push(std::move(c), needs(a) || needs(b), "sub", nullptr, {a, b});
    nodes_[out.id].back = [a, b](Tape& t, std::size_t self) {
      const Matrix& g = t.nodes_[self].grad;
      t.accumulate(a, g, 1.0);
      t.accumulate(b, g, -1.0);
    };
    return out;
  }

  Value scale(Value a, double s) {
    Matrix c = num::scale(value(a), s);
    Value out = push(std::move(c), needs(a), "scale", nullptr, {a});
    nodes_[out.id].back = [a, s](Tape& t, std::size_t self) {
      t.accumulate(a, t.nodes_[self].grad, s);
    };
    return out;
  }

  Value hadamard(Value a, Value b) {
    Matrix c = num::hadamard(value(a), value(b));
    Value out = push(std::move(c), needs(a) || needs(b), "hadamard", nullptr, {a, b});
    nodes_[out.id].back = [a, b](Tape& t, std::size_t self) {
      const Matrix& g = t.nodes_[self].grad;
      if (t.needs(a)) {
        Matrix da = num::hadamard(g, t.value(b));
        t.accumulate(a, da, 1.0);
      }
      if (t.needs(b)) {
        Matrix db = num::hadamard(g, t.value(a));
        t.accumulate(b, db, 1.0);
      }
    };
    return out;
  }

  // broadcast a 1 x n bias row over every row of x
  Value add_row(Value x, Value bias) {
    const Matrix &X = value(x), &B = value(bias);
    if (B.rows() != 1 || B.cols() != X.cols()) throw dim_error("add_row: bias must be 1 x cols");
    Matrix c = X;
    for (std::size_t i = 0; i < X.rows(); ++i)
      for (std::size_t j = 0; j < X.cols(); ++j) c(i, j) += B(0, j);
    Value out = push(std::move(c), needs(x) || needs(bias), "add_row", nullptr, {x, bias});
    nodes_[out.id].back = [x, bias](Tape& t, std::size_t self) {
      const Matrix& g = t.nodes_[self].grad;
      t.accumulate(x, g, 1.0);
      if (t.needs(bias)) {
        Matrix& gb = t.nodes_[bias.id].grad;
        for (std::size_t i = 0; i < g.rows(); ++i)
          for (std::size_t j = 0; j < g.cols(); ++j) gb(0, j) += g(i, j);
      }
    };
    return out;
  }

  Value relu(Value a) {
    const Matrix& A = value(a);
    Matrix c(A.rows(), A.cols());
    for (std::size_t i = 0; i < A.size(); ++i) {
      const double v = A.data()[i];
      min_abs_relu_input_ = std::min(min_abs_relu_input_, std::abs(v));
      c.data()[i] = v > 0.0 ? v : 0.0;
    }
    Value out = push(std::move(c), needs(a), "relu", nullptr, {a});
    nodes_[out.id].back = [a](Tape& t, std::size_t self) {
      if (!t.needs(a)) return;
      const Matrix& g = t.nodes_[self].grad;
      const Matrix& in = t.value(a);
      Matrix& ga = t.nodes_[a.id].grad;
      for (std::size_t i = 0; i < g.size(); ++i)
        if (in.data()[i] > 0.0) ga.data()[i] += g.data()[i];
    };
    return out;
  }

  Value sigmoid(Value a) {
    const Matrix& A = value(a);
    Matrix c(A.rows(), A.cols());
    for (std::size_t i = 0; i < A.size(); ++i) c.data()[i] = stable_sigmoid(A.data()[i]);
    Value out = push(std::move(c), needs(a), "sigmoid", nullptr, {a});
    nodes_[out.id].back = [a](Tape& t, std::size_t self) {
      if (!t.needs(a)) return;
      const Matrix& g = t.nodes_[self].grad;
      const Matrix& y = t.nodes_[self].value;
      Matrix& ga = t.nodes_[a.id].grad;
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double s = y.data()[i];
        ga.data()[i] += g.data()[i] * s * (1.0 - s);
      }
    };
    return out;
  }

  Value row_softmax(Value a) {
    Matrix c = row_softmax_value(value(a));
    Value out = push(std::move(c), needs(a), "row_softmax", nullptr, {a});
    nodes_[out.id].back = [a](Tape& t, std::size_t self) {
      if (!t.needs(a)) return;
      const Matrix& g = t.nodes_[self].grad;
      const Matrix& y = t.nodes_[self].value;
      Matrix& ga = t.nodes_[a.id].grad;
      for (std::size_t i = 0; i < y.rows(); ++i) {
        const double* yi = y.row(i);
        const double* gi = g.row(i);
        double dot = 0.0;
        for (std::size_t j = 0; j < y.cols(); ++j) dot += gi[j] * yi[j];
        double* gai = ga.row(i);
        for (std::size_t j = 0; j < y.cols(); ++j) gai[j] += yi[j] * (gi[j] - dot);
      }
    };
    return out;
  }

  // Per-row standardization (biased variance, epsilon-stabilized) followed by
  // an affine with 1 x cols gain and bias. Zero-variance rows normalize to 0.
  Value layer_norm(Value x, Value gain, Value bias) {
    const Matrix& X = value(x);
    const Matrix& G = value(gain);
    const Matrix& B = value(bias);
    if (G.rows() != 1 || G.cols() != X.cols() || B.rows() != 1 || B.cols() != X.cols())
      throw dim_error("layer_norm: gain/bias must be 1 x cols");
    const std::size_t n = X.cols();
    Matrix xhat(X.rows(), n);
    Matrix inv(X.rows(), 1);
    Matrix out(X.rows(), n);
    for (std::size_t i = 0; i < X.rows(); ++i) {
      const double* xi = X.row(i);
      double mu = 0.0;
      for (std::size_t j = 0; j < n; ++j) mu += xi[j];
      mu /= static_cast<double>(n);
      double var = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double d = xi[j] - mu;
        var += d * d;
      }
      var /= static_cast<double>(n);
      const double iv = 1.0 / std::sqrt(var + kLayerNormEps);
      inv(i, 0) = iv;
      for (std::size_t j = 0; j < n; ++j) {
        xhat(i, j) = (xi[j] - mu) * iv;
        out(i, j) = xhat(i, j) * G(0, j) + B(0, j);
      }
    }
    Value o = push(std::move(out), needs(x) || needs(gain) || needs(bias), "layer_norm", nullptr,
                   {x, gain, bias});
    nodes_[o.id].back = [x, gain, bias, xhat = std::move(xhat),
                         inv = std::move(inv)](Tape& t, std::size_t self) {
      const Matrix& g = t.nodes_[self].grad;
      const Matrix& G = t.value(gain);
      const std::size_t n = g.cols();
      if (t.needs(gain)) {
        Matrix& gg = t.nodes_[gain.id].grad;
        for (std::size_t i = 0; i < g.rows(); ++i)
          for (std::size_t j = 0; j < n; ++j) gg(0, j) += g(i, j) * xhat(i, j);
      }
      if (t.needs(bias)) {
        Matrix& gb = t.nodes_[bias.id].grad;
        for (std::size_t i = 0; i < g.rows(); ++i)
          for (std::size_t j = 0; j < n; ++j) gb(0, j) += g(i, j);
      }
      if (t.needs(x)) {
        Matrix& gx = t.nodes_[x.id].grad;
        for (std::size_t i = 0; i < g.rows(); ++i) {
          double mean_h = 0.0, mean_hx = 0.0;
          for (std::size_t j = 0; j < n; ++j) {
            const double h = g(i, j) * G(0, j);
            mean_h += h;
            mean_hx += h * xhat(i, j);
          }
          mean_h /= static_cast<double>(n);
          mean_hx /= static_cast<double>(n);
          const double iv = inv(i, 0);
          for (std::size_t j = 0; j < n; ++j) {
            const double h = g(i, j) * G(0, j);
            gx(i, j) += iv * (h - mean_h - xhat(i, j) * mean_hx);
          }
        }
      }
    };
    return o;
  }

  // rows (s*N + e) of the output hold [xs_row(s) | xe_row(e)] for every ordered pair
  Value pair_concat(Value xs, Value xe) {
    const Matrix &S = value(xs), &E = value(xe);
    if (S.rows() != E.rows()) throw dim_error("pair_concat: row counts differ");
    const std::size_t N = S.rows(), ds = S.cols(), de = E.cols();
    Matrix c(N * N, ds + de);
    for (std::size_t s = 0; s < N; ++s)
      for (std::size_t e = 0; e < N; ++e) {
        double* r = c.row(s * N + e);
        const double* sr = S.row(s);
        const double* er = E.row(e);
        for (std::size_t j = 0; j < ds; ++j) r[j] = sr[j];
        for (std::size_t j = 0; j < de; ++j) r[ds + j] = er[j];
      }
    Value out = push(std::move(c), needs(xs) || needs(xe), "pair_concat", nullptr, {xs, xe});
    nodes_[out.id].back = [xs, xe, N, ds, de](Tape& t, std::size_t self) {
      const Matrix& g = t.nodes_[self].grad;
      for (std::size_t s = 0; s < N; ++s)
        for (std::size_t e = 0; e < N; ++e) {
          const double* r = g.row(s * N + e);
          if (t.needs(xs)) {
            double* gs = t.nodes_[xs.id].grad.row(s);
            for (std::size_t j = 0; j < ds; ++j) gs[j] += r[j];
          }
          if (t.needs(xe)) {
            double* ge = t.nodes_[xe.id].grad.row(e);
            for (std::size_t j = 0; j < de; ++j) ge[j] += r[ds + j];
          }
        }
    };
    return out;
  }

  Value reshape(Value a, std::size_t rows, std::size_t cols) {
    const Matrix& A = value(a);
    if (rows * cols != A.size()) throw dim_error("reshape: element count mismatch");
    Matrix c(rows, cols);
    std::copy(A.data(), A.data() + A.size(), c.data());
    Value out = push(std::move(c), needs(a), "reshape", nullptr, {a});
    nodes_[out.id].back = [a](Tape& t, std::size_t self) {
      if (!t.needs(a)) return;
      const Matrix& g = t.nodes_[self].grad;
      Matrix& ga = t.nodes_[a.id].grad;
      for (std::size_t i = 0; i < g.size(); ++i) ga.data()[i] += g.data()[i];
    };
    return out;
  }

  Value zero_diagonal(Value a) {
    const Matrix& A = value(a);
    if (A.rows() != A.cols()) throw dim_error("zero_diagonal: square input required");
    Matrix c = A;
    for (std::size_t i = 0; i < A.rows(); ++i) c(i, i) = 0.0;
    Value out = push(std::move(c), needs(a), "zero_diagonal", nullptr, {a});
    nodes_[out.id].back = [a](Tape& t, std::size_t self) {
      if (!t.needs(a)) return;
      const Matrix& g = t.nodes_[self].grad;
      Matrix& ga = t.nodes_[a.id].grad;
      for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = 0; j < g.cols(); ++j)
          if (i != j) ga(i, j) += g(i, j);
    };
    return out;
  }

  Value sum_all(Value a) {
    const Matrix& A = value(a);
    double s = 0.0;
    for (std::size_t i = 0; i < A.size(); ++i) s += A.data()[i];
    Matrix c(1, 1, s);
    Value out = push(std::move(c), needs(a), "sum_all", nullptr, {a});
    nodes_[out.id].back = [a](Tape& t, std::size_t self) {
      if (!t.needs(a)) return;
      const double g = t.nodes_[self].grad(0, 0);
      Matrix& ga = t.nodes_[a.id].grad;
      for (std::size_t i = 0; i < ga.size(); ++i) ga.data()[i] += g;
    };
    return out;
  }

  // mean absolute difference over all elements
  Value l1_loss(Value pred, const Matrix& target) {
    const Matrix& P = value(pred);
    check_same_shape(P, target, "l1_loss");
    double s = 0.0;
    for (std::size_t i = 0; i < P.size(); ++i) s += std::abs(P.data()[i] - target.data()[i]);
    const double inv_n = P.size() ? 1.0 / static_cast<double>(P.size()) : 0.0;
    Matrix c(1, 1, s * inv_n);
    Value out = push(std::move(c), needs(pred), "l1_loss", nullptr, {pred});
    nodes_[out.id].back = [pred, target, inv_n](Tape& t, std::size_t self) {
      if (!t.needs(pred)) return;
      const double g = t.nodes_[self].grad(0, 0) * inv_n;
      const Matrix& P = t.value(pred);
      Matrix& gp = t.nodes_[pred.id].grad;
      for (std::size_t i = 0; i < P.size(); ++i) {
        const double d = P.data()[i] - target.data()[i];
        if (d > 0.0)
          gp.data()[i] += g;
        else if (d < 0.0)
          gp.data()[i] -= g;
      }
    };
    return out;
  }

  // mean absolute difference over rows selected by row_mask (N x 1 of {0,1});
  // zero when no row is selected
  Value masked_row_l1(Value pred, const Matrix& target, const Matrix& row_mask) {
    const Matrix& P = value(pred);
    check_same_shape(P, target, "masked_row_l1");
    if (row_mask.rows() != P.rows() || row_mask.cols() != 1)
      throw dim_error("masked_row_l1: row_mask must be rows x 1");
    double s = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < P.rows(); ++i) {
      if (row_mask(i, 0) == 0.0) continue;
      ++count;
      for (std::size_t j = 0; j < P.cols(); ++j) s += std::abs(P(i, j) - target(i, j));
    }
    const double inv_n =
        count ? 1.0 / static_cast<double>(count * P.cols()) : 0.0;
    Matrix c(1, 1, s * inv_n);
    Value out = push(std::move(c), needs(pred), "masked_row_l1", nullptr, {pred});
    nodes_[out.id].back = [pred, target, row_mask, inv_n](Tape& t, std::size_t self) {
      if (!t.needs(pred) || inv_n == 0.0) return;
      const double g = t.nodes_[self].grad(0, 0) * inv_n;
      const Matrix& P = t.value(pred);
      Matrix& gp = t.nodes_[pred.id].grad;
      for (std::size_t i = 0; i < P.rows(); ++i) {
        if (row_mask(i, 0) == 0.0) continue;
        for (std::size_t j = 0; j < P.cols(); ++j) {
          const double d = P(i, j) - target(i, j);
          if (d > 0.0)
            gp(i, j) += g;
          else if (d < 0.0)
            gp(i, j) -= g;
        }
      }
    };
    return out;
  }

  // mean over all elements of -alpha_t (1-p_t)^gamma log p_t with p = sigmoid(logit)
  Value sigmoid_focal_loss(Value logits, const Matrix& targets, double alpha, double gamma) {
    const Matrix& Z = value(logits);
    check_same_shape(Z, targets, "sigmoid_focal_loss");
    const double inv_n = Z.size() ? 1.0 / static_cast<double>(Z.size()) : 0.0;
    double s = 0.0;
    for (std::size_t i = 0; i < Z.size(); ++i) {
      const double z = Z.data()[i];
      const double p = stable_sigmoid(z);
      const double log_p = -softplus(-z);
      const double log_1mp = -softplus(z);
      if (targets.data()[i] != 0.0)
        s += -alpha * std::pow(1.0 - p, gamma) * log_p;
      else
        s += -(1.0 - alpha) * std::pow(p, gamma) * log_1mp;
    }
    Matrix c(1, 1, s * inv_n);
    Value out = push(std::move(c), needs(logits), "sigmoid_focal_loss", nullptr, {logits});
    nodes_[out.id].back = [logits, targets, alpha, gamma, inv_n](Tape& t, std::size_t self) {
      if (!t.needs(logits)) return;
      const double g = t.nodes_[self].grad(0, 0) * inv_n;
      const Matrix& Z = t.value(logits);
      Matrix& gz = t.nodes_[logits.id].grad;
      for (std::size_t i = 0; i < Z.size(); ++i) {
        const double z = Z.data()[i];
        const double p = stable_sigmoid(z);
        const double log_p = -softplus(-z);
        const double log_1mp = -softplus(z);
        double d;
        if (targets.data()[i] != 0.0)
          d = alpha * std::pow(1.0 - p, gamma) * (gamma * p * log_p - (1.0 - p));
        else
          d = -(1.0 - alpha) * std::pow(p, gamma) * (gamma * (1.0 - p) * log_1mp - p);
        gz.data()[i] += g * d;
      }
    };
    return out;
  }

  // Focal loss on values already in probability space. Inputs are clamped to
  // [lo, hi] first (clamped entries get zero gradient); the mean runs over
  // mask-selected elements and the loss is 0 when the mask is empty.
  Value focal_prob_masked(Value probs, const Matrix& targets, const Matrix& mask, double alpha,
                          double gamma, double lo = 1e-6, double hi = 1.0 - 1e-6) {
    const Matrix& P = value(probs);
    check_same_shape(P, targets, "focal_prob_masked");
    check_same_shape(P, mask, "focal_prob_masked mask");
    double s = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < P.size(); ++i) {
      if (mask.data()[i] == 0.0) continue;
      ++count;
      const double q = std::clamp(P.data()[i], lo, hi);
      if (targets.data()[i] != 0.0)
        s += -alpha * std::pow(1.0 - q, gamma) * std::log(q);
      else
        s += -(1.0 - alpha) * std::pow(q, gamma) * std::log(1.0 - q);
    }
    const double inv_n = count ? 1.0 / static_cast<double>(count) : 0.0;
    Matrix c(1, 1, s * inv_n);
    Value out = push(std::move(c), needs(probs), "focal_prob_masked", nullptr, {probs});
    nodes_[out.id].back = [probs, targets, mask, alpha, gamma, lo, hi, inv_n](Tape& t,
                                                                              std::size_t self) {
      if (!t.needs(probs) || inv_n == 0.0) return;
      const double g = t.nodes_[self].grad(0, 0) * inv_n;
      const Matrix& P = t.value(probs);
      Matrix& gp = t.nodes_[probs.id].grad;
      for (std::size_t i = 0; i < P.size(); ++i) {
        if (mask.data()[i] == 0.0) continue;
        const double p = P.data()[i];
        if (p <= lo || p >= hi) continue;  // clamp region: no gradient
        double d;
        if (targets.data()[i] != 0.0)
          d = -alpha * (-gamma * std::pow(1.0 - p, gamma - 1.0) * std::log(p) +
                        std::pow(1.0 - p, gamma) / p);
        else
          d = -(1.0 - alpha) * (gamma * std::pow(p, gamma - 1.0) * std::log(1.0 - p) -
                                std::pow(p, gamma) / (1.0 - p));
        gp.data()[i] += g * d;
      }
    };
    return out;
  }

 private:
  bool needs(Value v) const { return nodes_[v.id].requires_grad; }

  void accumulate(Value v, const Matrix& g, double s) {
    if (!needs(v)) return;
    Matrix& dst = nodes_[v.id].grad;
    for (std::size_t i = 0; i < dst.size(); ++i) dst.data()[i] += s * g.data()[i];
  }

  Value push(Matrix m, bool requires_grad, const char* op, Parameter* param,
             std::initializer_list<Value> parents) {
    (void)parents;
    Node n;
    n.value = std::move(m);
    n.requires_grad = requires_grad;
    n.op = op;
    n.param = param;
    nodes_.push_back(std::move(n));
    return Value{nodes_.size() - 1};
  }

  std::vector<Node> nodes_;
  bool backward_done_ = false;
  double min_abs_relu_input_ = std::numeric_limits<double>::infinity();
};

// Affine layer parameters, the building block for FFNs and MLP heads.
struct Dense {
  Parameter w;
  Parameter b;
};

inline Dense make_dense(Rng& rng, std::size_t in, std::size_t out, const std::string& name) {
  const double s = std::sqrt(6.0 / static_cast<double>(in + out));
  return Dense{Parameter(name + ".w", rng.uniform_matrix(in, out, -s, s)),
               Parameter(name + ".b", Matrix(1, out))};
}

enum class Activation { kRelu, kNone };

// affine-activation chain; the final layer is always left linear
inline Value mlp_forward(Tape& t, Value x, const std::vector<Dense*>& layers,
                         Activation act = Activation::kRelu) {
  Value h = x;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    h = t.add_row(t.matmul(h, t.leaf(layers[i]->w)), t.leaf(layers[i]->b));
    if (i + 1 < layers.size() && act == Activation::kRelu) h = t.relu(h);
  }
  return h;
}

}  // namespace t2sg::num
