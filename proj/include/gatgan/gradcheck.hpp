#pragma once

#include <functional>

#include "gatgan/tensor.hpp"

namespace gatgan {

// Compares reverse-mode gradients of a scalar-valued function against
// central finite differences at every coordinate of x. Returns the worst
// relative error |g - fd| / max(1, |g|, |fd|). eps must lie in
// [1e-5, 1e-2]; callers should evaluate away from activation kinks.
double grad_check(const std::function<Tensor(const Tensor&)>& f, Tensor x, double eps = 1e-3);

}  // namespace gatgan
