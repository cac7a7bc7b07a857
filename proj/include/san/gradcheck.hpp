#pragma once

#include <functional>
#include <vector>

#include "san/tensor.hpp"

namespace san {

// Scalar function of several tensors, differentiable when a tape is given.
using GradCheckFn =
    std::function<DTensor(std::vector<DTensor>& inputs, DTape* tape)>;

// Central-difference gradient check in 64-bit mode, eps per element, relative
// error |analytic - numeric| / max(1, |analytic|, |numeric|). Returns the
// maximum over all elements of all inputs.
double grad_check(const GradCheckFn& f, std::vector<DTensor> inputs, double eps = 1e-5);

}  // namespace san
