#include "icar/numerics/gradcheck.hpp"

#include "icar/error.hpp"

#include <algorithm>
#include <cmath>

namespace icar {

namespace {

double evaluate(const ScalarFn& f, Tensor& x) {
  Tape tape;
  return f(tape, x).scalar();
}

}  // namespace

double finite_diff_check(const ScalarFn& f, Tensor& x, double eps, std::span<const Index> coordinates) {
  if (eps < 1e-7 || eps > 1e-3) throw ContractError("finite_diff_check: eps must lie in [1e-7, 1e-3]");
  const bool was_tracking = x.requires_grad();
  x.set_requires_grad(true);
  x.zero_grad();
  {
    Tape tape;
    Var loss = f(tape, x);
    tape.backward(loss);
  }
  const Vector analytic = x.grad();
  x.zero_grad();
  x.set_requires_grad(was_tracking);

  std::vector<Index> coords(coordinates.begin(), coordinates.end());
  if (coords.empty()) {
    coords.resize(static_cast<std::size_t>(x.numel()));
    for (Index i = 0; i < x.numel(); ++i) coords[static_cast<std::size_t>(i)] = i;
  }

  double worst = 0.0;
  for (Index i : coords) {
    if (i < 0 || i >= x.numel()) throw ContractError("finite_diff_check: coordinate out of range");
    const double original = x[i];
    x[i] = original + eps;
    const double plus = evaluate(f, x);
    x[i] = original - eps;
    const double minus = evaluate(f, x);
    x[i] = original;
    const double numeric = (plus - minus) / (2.0 * eps);
    worst = std::max(worst, std::abs(numeric - analytic[i]) / (std::abs(analytic[i]) + 1e-8));
  }
  return worst;
}

}  // namespace icar
