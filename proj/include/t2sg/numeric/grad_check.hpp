#pragma once

#include <functional>
#include <vector>

#include "t2sg/numeric/tape.hpp"

namespace t2sg::num {

// Central-difference oracle for reverse-mode gradients. `build` must rebuild
// the full forward sweep on the given tape and return the scalar loss node;
// it is evaluated 2 x (#coordinates) times plus once analytically. Returns
// max over coordinates of |analytic - numeric| / (|analytic| + |numeric| + eps).
// eps absorbs the ~1e-12 cancellation noise of coordinates with zero gradient.
inline double grad_check(const std::function<Value(Tape&)>& build,
                         const std::vector<Parameter*>& params, double h = 1e-5,
                         double eps = 1e-6) {
  for (Parameter* p : params) p->zero_grad();
  {
    Tape t;
    t.backward(build(t));
  }
  std::vector<Matrix> analytic;
  analytic.reserve(params.size());
  for (Parameter* p : params) analytic.push_back(p->grad);

  auto loss_at = [&]() {
    Tape t;
    return t.scalar(build(t));
  };

  double max_rel = 0.0;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Matrix& v = params[pi]->value;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double saved = v.data()[i];
      v.data()[i] = saved + h;
      const double lp = loss_at();
      v.data()[i] = saved - h;
      const double lm = loss_at();
      v.data()[i] = saved;
      const double numeric = (lp - lm) / (2.0 * h);
      const double a = analytic[pi].data()[i];
      const double rel = std::abs(a - numeric) / (std::abs(a) + std::abs(numeric) + eps);
      max_rel = std::max(max_rel, rel);
    }
  }
  return max_rel;
}

}  // namespace t2sg::num
