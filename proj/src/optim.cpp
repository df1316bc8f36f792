#include "repur/optim.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace repur {

void adam_step(Matrix& param, const Matrix& grad, AdamMoments& state, const AdamConfig& cfg) {
  if (grad.rows() != param.rows() || grad.cols() != param.cols()) {
    throw std::invalid_argument("adam_step: gradient is " + std::to_string(grad.rows()) + "x" +
                                std::to_string(grad.cols()) + ", parameter is " + std::to_string(param.rows()) +
                                "x" + std::to_string(param.cols()));
  }
  if (state.m.size() == 0) {
    state.m = Matrix::Zero(param.rows(), param.cols());
    state.v = Matrix::Zero(param.rows(), param.cols());
  } else if (state.m.rows() != param.rows() || state.m.cols() != param.cols()) {
    throw std::invalid_argument("adam_step: optimizer state does not match the parameter shape");
  }
  ++state.step;
  state.m = cfg.beta1 * state.m + (1.0 - cfg.beta1) * grad;
  state.v = cfg.beta2 * state.v + (1.0 - cfg.beta2) * grad.cwiseAbs2();
  const double m_corr = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double v_corr = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  param.array() -= cfg.lr * (state.m.array() / m_corr) / ((state.v.array() / v_corr).sqrt() + cfg.eps);
}

Adam::Adam(std::vector<Tensor> params, AdamConfig cfg)
    : params_(std::move(params)), moments_(params_.size()), cfg_(cfg) {}

void Adam::step() {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = params_[i];
    if (!p.has_grad()) continue;
    adam_step(p.mutable_value(), p.node()->grad, moments_[i], cfg_);
  }
  ++steps_;
}

void Adam::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

}  // namespace repur
