#pragma once

#include "gandetect/tensor.hpp"

#include <deque>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

namespace gandetect {

/// A trainable tensor paired with its accumulated gradient.
struct Parameter {
  Parameter() = default;
  Parameter(std::string name_, Tensor value_, bool trainable_ = true)
      : name(std::move(name_)), value(std::move(value_)), grad(value.shape()),
        trainable(trainable_) {}

  std::string name;
  Tensor value;
  Tensor grad;
  bool trainable = true;

  void zero_grad() { grad = Tensor(value.shape()); }
};

class Tape;

/// Handle to a node recorded on a Tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  const Tensor& grad() const;
  const Shape& shape() const { return value().shape(); }
};

/// Receives the upstream gradient of a node and adds contributions into the
/// gradients of its inputs. Entries of `input_grads` are null for inputs that
/// do not require a gradient.
using BackwardFn =
    std::function<void(const Tensor& out_grad, const std::vector<Tensor*>& input_grads)>;

/// Per-forward-pass computation record. Node values never move once recorded,
/// so backward closures may hold pointers to them. Build the forward graph with the free
/// functions in ops.hpp, call backward() once (or more, to accumulate), then
/// discard the tape.
class Tape {
 public:
  enum class Mode { kRecord, kInference };

  explicit Tape(Mode mode = Mode::kRecord) : mode_(mode) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return mode_ == Mode::kRecord; }

  Var constant(Tensor value);
  /// Differentiable input that is not bound to a Parameter.
  Var leaf(Tensor value);
  /// Leaf bound to a Parameter; repeated calls return the same node.
  Var param(Parameter& p);

  /// Record an operation result. `backward` is dropped in inference mode or
  /// when no input requires a gradient.
  Var record(Tensor value, const std::vector<Var>& inputs, BackwardFn backward);

  bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }
  const Tensor& value(Var v) const { return nodes_.at(v.id).value; }
  const Tensor& grad(Var v) const { return nodes_.at(v.id).grad; }
  std::size_t size() const { return nodes_.size(); }

  /// Reverse sweep from a scalar loss. Parameter gradients accumulate additively
  /// across calls; node gradients are recomputed each call.
  void backward(Var loss);

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    Parameter* param = nullptr;
    bool requires_grad = false;
  };

  Var push(Node node);

  Mode mode_;
  std::deque<Node> nodes_;  // deque: node references stay valid while recording
  std::unordered_map<const Parameter*, std::size_t> param_nodes_;
};

}  // namespace gandetect
