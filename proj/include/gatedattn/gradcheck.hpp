/* Copyright 2026 The GatedAttention Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "gatedattn/tensor.hpp"

namespace gatedattn {

struct GradcheckReport {
  double max_relative_error = 0.0;
  std::size_t elements_checked = 0;
  std::size_t worst_input = 0;
  std::size_t worst_element = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  bool passed = false;

  std::string summary() const;
};

// Compares reverse-mode gradients of a scalar function against central
// differences (f(x + step) - f(x - step)) / (2 step), perturbing every element
// of every input in place. The relative error of one element is
// |analytic - numeric| / max(|analytic|, |numeric|, 1e-3). Any NaN fails.
//
// f is evaluated under its own tape; inputs must be leaves with
// requires_grad set. Existing gradients on the inputs are overwritten.
GradcheckReport gradcheck(const std::function<Tensor()>& f, std::vector<Tensor> inputs,
                          double step = 1e-5, double tol = 1e-4);

}  // namespace gatedattn
