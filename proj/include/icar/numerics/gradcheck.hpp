#pragma once

#include "icar/numerics/tape.hpp"

#include <functional>
#include <span>

namespace icar {

// A scalar function of one tensor, recorded on the supplied tape.
using ScalarFn = std::function<Var(Tape&, Tensor&)>;

// Compares the tape gradient of f at x against central differences
//   (f(x + eps e_i) - f(x - eps e_i)) / (2 eps)
// and returns max_i |numeric_i - analytic_i| / (|analytic_i| + 1e-8).
// `coordinates` restricts the comparison; empty means all of x.
// x is restored exactly and its grad cleared before returning.
double finite_diff_check(const ScalarFn& f, Tensor& x, double eps = 1e-5,
                         std::span<const Index> coordinates = {});

}  // namespace icar
