#include "gandetect/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace gandetect {

namespace {

double evaluate(const ScalarFunction& f, const Tensor& x) {
  Tape tape(Tape::Mode::kInference);
  return f(tape, tape.leaf(x)).value().item();
}

}  // namespace

double finite_difference_check(const ScalarFunction& f, const Tensor& x, double eps) {
  Tape tape;
  Var input = tape.leaf(x);
  tape.backward(f(tape, input));
  const Tensor analytic = tape.grad(input).empty() ? Tensor(x.shape()) : tape.grad(input);

  double worst = 0.0;
  Tensor probe = x;
  for (Index i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + eps;
    const double up = evaluate(f, probe);
    probe[i] = x[i] - eps;
    const double down = evaluate(f, probe);
    probe[i] = x[i];
    const double numeric = (up - down) / (2.0 * eps);
    const double a = analytic[i];
    const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
    worst = std::max(worst, std::abs(a - numeric) / denom);
  }
  return worst;
}

}  // namespace gandetect
