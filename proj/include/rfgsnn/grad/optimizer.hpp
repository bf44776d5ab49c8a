#pragma once

#include <span>
#include <vector>

#include "rfgsnn/grad/estimators.hpp"

namespace rfgsnn::grad {

enum class OptimizerKind { SGD, Adam };
enum class Schedule { Constant, Cosine };

struct OptimizerSpec {
  OptimizerKind kind = OptimizerKind::Adam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  // Cosine decays from learning_rate to final_fraction * learning_rate.
  Schedule schedule = Schedule::Constant;
  double final_fraction = 0.01;

  void validate() const;
};

// Learning rate for 0-based iteration `step` of `total`.
double scheduled_learning_rate(const OptimizerSpec& spec, std::size_t step, std::size_t total);

// Plain SGD applies theta - eta * g; Adam keeps first and second moments.
class Optimizer {
 public:
  explicit Optimizer(OptimizerSpec spec);

  const OptimizerSpec& spec() const { return spec_; }
  void set_learning_rate(double lr) { lr_ = lr; }
  // Refuses (throws NumericalError) when the gradient has non-finite entries.
  void step(std::span<double> params, std::span<const double> grad);

 private:
  OptimizerSpec spec_;
  double lr_;
  std::vector<double> m_, v_;
  long long steps_ = 0;
};

std::vector<double> apply_update(std::vector<double> params, const GradientEstimate& grad,
                                 Optimizer& optimizer);

}  // namespace rfgsnn::grad
