#pragma once

#include "gandetect/autodiff.hpp"

#include <functional>

namespace gandetect {

/// Builds a scalar from a single differentiable input on the given tape.
using ScalarFunction = std::function<Var(Tape&, Var)>;

/// Largest per-coordinate relative error between the tape gradient of `f` at
/// `x` and central differences with step `eps`. The denominator is
/// max(|analytic|, |numeric|, 1e-8).
double finite_difference_check(const ScalarFunction& f, const Tensor& x, double eps);

}  // namespace gandetect
