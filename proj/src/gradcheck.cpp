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

#include "gatedattn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "gatedattn/errors.hpp"

namespace gatedattn {

std::string GradcheckReport::summary() const {
  return fmt::format("{} max_rel_err={:.3e} over {} elements (worst input {} element {}: "
                     "analytic={:.9g} numeric={:.9g})",
                     passed ? "PASS" : "FAIL", max_relative_error, elements_checked,
                     worst_input, worst_element, worst_analytic, worst_numeric);
}

GradcheckReport gradcheck(const std::function<Tensor()>& f, std::vector<Tensor> inputs,
                          double step, double tol) {
  for (Tensor& t : inputs) {
    if (!t.requires_grad()) throw ContractError("gradcheck: input does not require grad");
    t.zero_grad();
  }
  {
    Tape tape;
    TapeScope scope(tape);
    const Tensor loss = f();
    tape.backward(loss);
  }
  std::vector<std::vector<double>> analytic;
  analytic.reserve(inputs.size());
  for (const Tensor& t : inputs) analytic.emplace_back(t.grad().begin(), t.grad().end());

  auto eval = [&f]() { return f().item(); };

  GradcheckReport report;
  bool nan_seen = false;
  for (std::size_t ii = 0; ii < inputs.size(); ++ii) {
    auto values = inputs[ii].mutable_data();
    for (std::size_t e = 0; e < values.size(); ++e) {
      const double saved = values[e];
      values[e] = saved + step;
      const double plus = eval();
      values[e] = saved - step;
      const double minus = eval();
      values[e] = saved;
      const double numeric = (plus - minus) / (2.0 * step);
      const double a = analytic[ii][e];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-3});
      double rel = std::abs(a - numeric) / denom;
      if (std::isnan(rel)) {
        nan_seen = true;
        rel = std::numeric_limits<double>::infinity();
      }
      ++report.elements_checked;
      if (rel > report.max_relative_error || report.elements_checked == 1) {
        report.max_relative_error = rel;
        report.worst_input = ii;
        report.worst_element = e;
        report.worst_analytic = a;
        report.worst_numeric = numeric;
      }
    }
  }
  report.passed = !nan_seen && report.max_relative_error <= tol;
  return report;
}

}  // namespace gatedattn
