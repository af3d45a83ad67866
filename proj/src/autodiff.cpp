#include "gandetect/autodiff.hpp"

#include "gandetect/errors.hpp"

namespace gandetect {

const Tensor& Var::value() const { return tape->value(*this); }
const Tensor& Var::grad() const { return tape->grad(*this); }

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var{this, nodes_.size() - 1};
}

Var Tape::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::leaf(Tensor value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = recording();
  return push(std::move(n));
}

Var Tape::param(Parameter& p) {
  if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return Var{this, it->second};
  Node n;
  n.value = p.value;
  n.param = &p;
  n.requires_grad = recording() && p.trainable;
  Var v = push(std::move(n));
  param_nodes_.emplace(&p, v.id);
  return v;
}

Var Tape::record(Tensor value, const std::vector<Var>& inputs, BackwardFn backward) {
  Node n;
  n.value = std::move(value);
  if (!n.value.all_finite()) {
    throw DegenerateInput("operation produced a non-finite value");
  }
  if (recording()) {
    for (const Var& in : inputs) {
      if (in.tape != this) throw ContractViolation("input recorded on a different tape");
      n.inputs.push_back(in.id);
      n.requires_grad = n.requires_grad || nodes_[in.id].requires_grad;
    }
    if (n.requires_grad) n.backward = std::move(backward);
  }
  return push(std::move(n));
}

void Tape::backward(Var loss) {
  if (loss.tape != this) throw ContractViolation("loss recorded on a different tape");
  if (!recording()) throw ContractViolation("backward on an inference-mode tape");
  const Node& root = nodes_.at(loss.id);
  if (root.value.size() != 1) {
    throw ContractViolation("backward needs a scalar loss, got shape " +
                            shape_string(root.value.shape()));
  }
  for (Node& n : nodes_) n.grad = Tensor();
  nodes_[loss.id].grad = Tensor::constant(root.value.shape(), 1.0);

  std::vector<Tensor*> input_grads;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.grad.empty() || !n.backward) continue;
    input_grads.clear();
    for (std::size_t in : n.inputs) {
      Node& src = nodes_[in];
      if (!src.requires_grad) {
        input_grads.push_back(nullptr);
        continue;
      }
      if (src.grad.empty()) src.grad = Tensor(src.value.shape());
      input_grads.push_back(&src.grad);
    }
    n.backward(n.grad, input_grads);
  }
  for (Node& n : nodes_) {
    if (n.param && n.requires_grad && !n.grad.empty()) n.param->grad.data() += n.grad.data();
  }
}

}  // namespace gandetect
