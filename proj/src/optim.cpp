#include "gandetect/optim.hpp"

#include "gandetect/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace gandetect {

std::string to_string(OptimizerKind kind) { return kind == OptimizerKind::kSgd ? "sgd" : "adam"; }

OptimizerKind optimizer_kind_from_string(const std::string& name) {
  if (name == "sgd") return OptimizerKind::kSgd;
  if (name == "adam") return OptimizerKind::kAdam;
  throw ContractViolation("unknown optimizer '" + name + "'");
}

void Optimizer::step(std::map<std::string, Parameter>& params, double lr) {
  if (!(lr > 0.0)) throw ContractViolation("learning rate must be positive");
  for (const auto& [name, p] : params) {
    if (p.trainable && !p.grad.all_finite()) {
      throw NonFiniteGradient("non-finite gradient in parameter '" + name + "'");
    }
  }
  ++steps_;
  for (auto& [name, p] : params) {
    if (!p.trainable) continue;
    Eigen::VectorXd& w = p.value.data();
    const Eigen::VectorXd& g = p.grad.data();
    if (kind_ == OptimizerKind::kSgd) {
      w -= lr * g;
      continue;
    }
    Moments& mom = moments_[name];
    if (mom.first.size() != g.size()) {
      mom.first = Eigen::VectorXd::Zero(g.size());
      mom.second = Eigen::VectorXd::Zero(g.size());
    }
    mom.first = adam_.beta1 * mom.first + (1.0 - adam_.beta1) * g;
    mom.second = adam_.beta2 * mom.second + (1.0 - adam_.beta2) * g.cwiseProduct(g);
    const double c1 = 1.0 - std::pow(adam_.beta1, static_cast<double>(steps_));
    const double c2 = 1.0 - std::pow(adam_.beta2, static_cast<double>(steps_));
    w.array() -= lr * (mom.first.array() / c1) / ((mom.second.array() / c2).sqrt() + adam_.epsilon);
  }
}

PlateauScheduler::PlateauScheduler(double initial_lr, double factor, int patience, double floor)
    : lr_(initial_lr), factor_(factor), patience_(patience), floor_(floor),
      best_(std::numeric_limits<double>::infinity()) {
  if (!(initial_lr > 0.0) || !(floor > 0.0) || floor > initial_lr) {
    throw ContractViolation("plateau: need 0 < floor <= initial learning rate");
  }
  if (!(factor > 1.0)) throw ContractViolation("plateau: factor must exceed 1");
  if (patience < 1) throw ContractViolation("plateau: patience must be at least 1");
}

double PlateauScheduler::step(double val_loss) {
  if (val_loss < best_) {
    best_ = val_loss;
    bad_epochs_ = 0;
    return lr_;
  }
  if (++bad_epochs_ < patience_) return lr_;
  bad_epochs_ = 0;
  if (lr_ == floor_) {
    exhausted_ = true;
    return lr_;
  }
  const double next = lr_ / factor_;
  // Snap onto the floor when division lands within rounding of it.
  lr_ = next <= floor_ * (1.0 + 1e-9) ? floor_ : next;
  return lr_;
}

}  // namespace gandetect
