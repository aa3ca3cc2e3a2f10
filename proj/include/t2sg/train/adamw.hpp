#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "t2sg/errors.hpp"
#include "t2sg/numeric/tape.hpp"

namespace t2sg::train {

using num::Matrix;
using num::Parameter;

struct OptimConfig {
  double lr = 2e-4;
  double lr_min = 1e-6;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
  std::size_t total_steps = 0;  // cosine annealing horizon; 0 = constant lr
};

// AdamW with decoupled weight decay and a cosine-annealed learning rate.
class AdamW {
 public:
  AdamW(std::vector<Parameter*> params, OptimConfig cfg)
      : params_(std::move(params)), cfg_(cfg) {
    for (Parameter* p : params_) {
      m_.emplace_back(p->value.rows(), p->value.cols());
      v_.emplace_back(p->value.rows(), p->value.cols());
    }
  }

  double current_lr() const {
    if (cfg_.total_steps == 0) return cfg_.lr;
    const double t = std::min(static_cast<double>(step_),
                              static_cast<double>(cfg_.total_steps));
    const double cosine =
        0.5 * (1.0 + std::cos(3.14159265358979323846 * t / static_cast<double>(cfg_.total_steps)));
    return cfg_.lr_min + (cfg_.lr - cfg_.lr_min) * cosine;
  }

  // Applies one update from the accumulated gradients (scaled by grad_scale,
  // e.g. 1/batch for gradient accumulation), zeroes them, bumps the step.
  void step(double grad_scale = 1.0) {
    const double lr = current_lr();
    const double t = static_cast<double>(step_ + 1);
    const double bc1 = 1.0 - std::pow(cfg_.beta1, t);
    const double bc2 = 1.0 - std::pow(cfg_.beta2, t);
    for (std::size_t i = 0; i < params_.size(); ++i) {
      Parameter& p = *params_[i];
      double* w = p.value.data();
      double* g = p.grad.data();
      double* m = m_[i].data();
      double* v = v_[i].data();
      for (std::size_t k = 0; k < p.value.size(); ++k) {
        const double gk = g[k] * grad_scale;
        m[k] = cfg_.beta1 * m[k] + (1.0 - cfg_.beta1) * gk;
        v[k] = cfg_.beta2 * v[k] + (1.0 - cfg_.beta2) * gk * gk;
        const double mhat = m[k] / bc1;
        const double vhat = v[k] / bc2;
        w[k] -= lr * (mhat / (std::sqrt(vhat) + cfg_.eps) + cfg_.weight_decay * w[k]);
        g[k] = 0.0;
      }
    }
    ++step_;
  }

  std::size_t step_count() const { return step_; }
  const OptimConfig& config() const { return cfg_; }

  // exact-resume state
  const std::vector<Matrix>& first_moments() const { return m_; }
  const std::vector<Matrix>& second_moments() const { return v_; }
  void restore(std::size_t step, std::vector<Matrix> m, std::vector<Matrix> v) {
    if (m.size() != params_.size() || v.size() != params_.size())
      throw DataError("AdamW::restore: moment count mismatch");
    step_ = step;
    m_ = std::move(m);
    v_ = std::move(v);
  }

 private:
  std::vector<Parameter*> params_;
  OptimConfig cfg_;
  std::vector<Matrix> m_, v_;
  std::size_t step_ = 0;
};

}  // namespace t2sg::train
