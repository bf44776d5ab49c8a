#include "rfgsnn/grad/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <fmt/format.h>

namespace rfgsnn::grad {

void OptimizerSpec::validate() const {
  if (!(learning_rate > 0.0)) {
    throw ConfigError(fmt::format("learning_rate must be positive, got {}", learning_rate));
  }
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("Adam betas must lie in [0, 1)");
  }
  if (!(epsilon > 0.0)) throw ConfigError("Adam epsilon must be positive");
  if (!(final_fraction > 0.0 && final_fraction <= 1.0))
    throw ConfigError("final_fraction must lie in (0, 1]");
}

double scheduled_learning_rate(const OptimizerSpec& spec, std::size_t step, std::size_t total) {
  if (spec.schedule == Schedule::Constant || total <= 1) return spec.learning_rate;
  const double t = static_cast<double>(std::min(step, total - 1)) / static_cast<double>(total - 1);
  const double lo = spec.final_fraction * spec.learning_rate;
  return lo + 0.5 * (spec.learning_rate - lo) * (1.0 + std::cos(std::numbers::pi * t));
}

Optimizer::Optimizer(OptimizerSpec spec) : spec_(spec), lr_(spec.learning_rate) {
  spec_.validate();
}

void Optimizer::step(std::span<double> params, std::span<const double> grad) {
  if (params.size() != grad.size()) {
    throw DimensionError(fmt::format("update: {} parameters but {} gradient entries",
                                     params.size(), grad.size()));
  }
  if (!std::all_of(grad.begin(), grad.end(), [](double g) { return std::isfinite(g); })) {
    throw NumericalError("update refused: gradient has non-finite entries");
  }
  const double lr = lr_;
  if (spec_.kind == OptimizerKind::SGD) {
    for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr * grad[i];
    return;
  }
  if (m_.size() != params.size()) {
    m_.assign(params.size(), 0.0);
    v_.assign(params.size(), 0.0);
    steps_ = 0;
  }
  ++steps_;
  const double b1 = spec_.beta1;
  const double b2 = spec_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = b1 * m_[i] + (1.0 - b1) * grad[i];
    v_[i] = b2 * v_[i] + (1.0 - b2) * grad[i] * grad[i];
    params[i] -= lr * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + spec_.epsilon);
  }
}

std::vector<double> apply_update(std::vector<double> params, const GradientEstimate& grad,
                                 Optimizer& optimizer) {
  optimizer.step(params, grad.values);
  return params;
}

}  // namespace rfgsnn::grad
