#pragma once

#include <stdexcept>
#include <string>

namespace gandetect {

/// A caller broke an operation's precondition (shapes, ranges, head kind).
class ContractViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Input is mathematically degenerate for the operation, e.g. a zero-norm vector.
class DegenerateInput : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Image is smaller than the network's receptive-field floor.
class TooSmallInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Metric needs both classes (or another population) that is absent.
class UndefinedMetric : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Optimizer saw a NaN/Inf gradient.
class NonFiniteGradient : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Corpus, manifest, checkpoint or image file problems.
class LoadError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace gandetect
