#pragma once

#include "gandetect/autodiff.hpp"

#include <map>
#include <string>

namespace gandetect {

enum class OptimizerKind { kSgd, kAdam };

std::string to_string(OptimizerKind kind);
OptimizerKind optimizer_kind_from_string(const std::string& name);

struct AdamSettings {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Plain SGD or bias-corrected Adam over a name -> Parameter map.
class Optimizer {
 public:
  explicit Optimizer(OptimizerKind kind, AdamSettings adam = {}) : kind_(kind), adam_(adam) {}

  OptimizerKind kind() const { return kind_; }
  long steps() const { return steps_; }

  /// Updates every trainable parameter from its accumulated gradient. Throws
  /// NonFiniteGradient naming the first offending parameter, before any update.
  void step(std::map<std::string, Parameter>& params, double lr);

 private:
  struct Moments {
    Eigen::VectorXd first;
    Eigen::VectorXd second;
  };

  OptimizerKind kind_;
  AdamSettings adam_;
  long steps_ = 0;
  std::map<std::string, Moments> moments_;
};

/// Divides the learning rate by `factor` after `patience` consecutive epochs
/// without a strict improvement of the validation loss, never going below `floor`.
class PlateauScheduler {
 public:
  PlateauScheduler(double initial_lr, double factor = 10.0, int patience = 5, double floor = 1e-6);

  double lr() const { return lr_; }
  double best() const { return best_; }
  int bad_epochs() const { return bad_epochs_; }
  bool at_floor() const { return lr_ == floor_; }
  /// True once the lr sits at the floor and the patience ran out again.
  bool exhausted() const { return exhausted_; }

  /// Returns the learning rate to use for the next epoch.
  double step(double val_loss);

 private:
  double lr_;
  double factor_;
  int patience_;
  double floor_;
  double best_;
  int bad_epochs_ = 0;
  bool exhausted_ = false;
};

}  // namespace gandetect
