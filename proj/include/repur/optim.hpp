#pragma once

#include <vector>

#include "repur/tensor.hpp"

namespace repur {

struct AdamConfig {
  double lr = 5e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First/second moment estimates of one parameter plus the step counter.
struct AdamMoments {
  Matrix m;
  Matrix v;
  long step = 0;
};

/// One bias-corrected Adam update of a single parameter. Moments are
/// zero-initialized on first use. Throws std::invalid_argument on shape
/// mismatch.
void adam_step(Matrix& param, const Matrix& grad, AdamMoments& state, const AdamConfig& cfg);

/// Adam over a fixed parameter list, reading each parameter's accumulated
/// gradient.
class Adam {
 public:
  Adam(std::vector<Tensor> params, AdamConfig cfg);

  void step();
  void zero_grad();
  long steps() const { return steps_; }
  const AdamConfig& config() const { return cfg_; }
  void set_lr(double lr) { cfg_.lr = lr; }

 private:
  std::vector<Tensor> params_;
  std::vector<AdamMoments> moments_;
  AdamConfig cfg_;
  long steps_ = 0;
};

}  // namespace repur
