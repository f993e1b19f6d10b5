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

#include "gatedattn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include "gatedattn/errors.hpp"
#include "gatedattn/kernels.hpp"

namespace gatedattn {

namespace {

using kernels::Trans;

bool tracking(std::initializer_list<const Tensor*> inputs) {
  if (active_tape() == nullptr) return false;
  return std::any_of(inputs.begin(), inputs.end(),
                     [](const Tensor* t) { return t->requires_grad(); });
}

Tensor record(Tensor out, std::vector<Tensor> inputs, Tape::BackwardFn fn) {
  out.impl()->requires_grad = true;
  out.impl()->is_leaf = false;
  active_tape()->record(std::move(inputs), out, std::move(fn));
  return out;
}

void require_defined(const char* op, const Tensor& t) {
  if (!t.defined()) throw ContractError(std::string(op) + ": undefined operand");
}

bool is_suffix(const Shape& small, const Shape& big) {
  if (small.size() > big.size()) return false;
  return std::equal(small.rbegin(), small.rend(), big.rbegin());
}

std::size_t broadcast_inner(const char* op, const Tensor& a, const Tensor& b) {
  require_defined(op, a);
  require_defined(op, b);
  if (!is_suffix(b.shape(), a.shape())) {
    throw ShapeError(std::string(op) + ": shapes " + to_string(a.shape()) + " and " +
                     to_string(b.shape()) + " are not broadcast-compatible");
  }
  return b.size();
}

template <typename Fwd, typename DA, typename DB>
Tensor binary(const char* op, const Tensor& a, const Tensor& b, Fwd fwd, DA da, DB db) {
  const std::size_t inner = broadcast_inner(op, a, b);
  const std::size_t total = a.size();
  Tensor out(a.shape());
  auto o = out.mutable_data();
  auto av = a.data();
  auto bv = b.data();
  for (std::size_t base = 0; base < total; base += inner) {
    for (std::size_t j = 0; j < inner; ++j) o[base + j] = fwd(av[base + j], bv[j]);
  }
  if (!tracking({&a, &b})) return out;
  return record(out, {a, b}, [a, b, out, inner, da, db]() mutable {
    auto g = out.grad();
    auto av = a.data();
    auto bv = b.data();
    auto ov = out.data();
    if (a.requires_grad()) {
      auto ga = a.mutable_grad();
      for (std::size_t base = 0; base < g.size(); base += inner) {
        for (std::size_t j = 0; j < inner; ++j) {
          ga[base + j] += g[base + j] * da(av[base + j], bv[j], ov[base + j]);
        }
      }
    }
    if (b.requires_grad()) {
      auto gb = b.mutable_grad();
      for (std::size_t base = 0; base < g.size(); base += inner) {
        for (std::size_t j = 0; j < inner; ++j) {
          gb[j] += g[base + j] * db(av[base + j], bv[j], ov[base + j]);
        }
      }
    }
  });
}

// derivative receives (x, y) and returns dy/dx
template <typename Fwd, typename Deriv>
Tensor unary(const Tensor& x, Fwd fwd, Deriv deriv) {
  require_defined("unary", x);
  Tensor out(x.shape());
  auto o = out.mutable_data();
  auto xv = x.data();
  for (std::size_t i = 0; i < xv.size(); ++i) o[i] = fwd(xv[i]);
  if (!tracking({&x})) return out;
  return record(out, {x}, [x, out, deriv]() mutable {
    auto g = out.grad();
    auto xv = x.data();
    auto ov = out.data();
    auto gx = x.mutable_grad();
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * deriv(xv[i], ov[i]);
  });
}

std::size_t product(const Shape& s, std::size_t begin, std::size_t end) {
  std::size_t p = 1;
  for (std::size_t i = begin; i < end; ++i) p *= s[i];
  return p;
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_defined("matmul", a);
  require_defined("matmul", b);
  const Shape& as = a.shape();
  const Shape& bs = b.shape();
  auto mismatch = [&]() {
    return ShapeError("matmul: incompatible shapes " + to_string(as) + " and " + to_string(bs));
  };
  if (as.size() < 2 || as.size() > 3 || bs.size() < 2 || bs.size() > 3) throw mismatch();
  const bool batched_b = bs.size() == 3;
  if (batched_b && (as.size() != 3 || as[0] != bs[0])) throw mismatch();
  const std::size_t k = as.back();
  if (bs[bs.size() - 2] != k) throw mismatch();
  const std::size_t m = bs.back();

  if (!batched_b) {
    // rank-3 a is treated as a stack of rows sharing b
    const std::size_t n = a.size() / k;
    Shape out_shape = as;
    out_shape.back() = m;
    Tensor out(out_shape);
    kernels::gemm(a.data(), b.data(), out.mutable_data(), n, k, m);
    if (!tracking({&a, &b})) return out;
    return record(out, {a, b}, [a, b, out, n, k, m]() mutable {
      auto g = out.grad();
      if (a.requires_grad()) {
        kernels::gemm(g, b.data(), a.mutable_grad(), n, m, k, Trans::no, Trans::yes, true);
      }
      if (b.requires_grad()) {
        kernels::gemm(a.data(), g, b.mutable_grad(), k, n, m, Trans::yes, Trans::no, true);
      }
    });
  }

  const std::size_t batch = as[0];
  const std::size_t n = as[1];
  Tensor out(Shape{batch, n, m});
  kernels::gemm_batched(a.data(), b.data(), out.mutable_data(), batch, n, k, m, n * k, k * m);
  if (!tracking({&a, &b})) return out;
  return record(out, {a, b}, [a, b, out, batch, n, k, m]() mutable {
    auto g = out.grad();
    if (a.requires_grad()) {
      kernels::gemm_batched(g, b.data(), a.mutable_grad(), batch, n, m, k, n * m, k * m,
                            Trans::no, Trans::yes, true);
    }
    if (b.requires_grad()) {
      kernels::gemm_batched(a.data(), g, b.mutable_grad(), batch, k, n, m, n * k, n * m,
                            Trans::yes, Trans::no, true);
    }
  });
}

Tensor transpose_last2(const Tensor& x) {
  require_defined("transpose_last2", x);
  const Shape& s = x.shape();
  if (s.size() != 2 && s.size() != 3) {
    throw ShapeError("transpose_last2: expected rank 2 or 3, got " + to_string(s));
  }
  const std::size_t rows = s[s.size() - 2];
  const std::size_t cols = s.back();
  const std::size_t batch = x.size() / (rows * cols);
  Shape out_shape = s;
  std::swap(out_shape[s.size() - 2], out_shape[s.size() - 1]);
  Tensor out(out_shape);
  auto permute = [batch, rows, cols](std::span<const double> src, std::span<double> dst,
                                     bool forward) {
    for (std::size_t bi = 0; bi < batch; ++bi) {
      const std::size_t base = bi * rows * cols;
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
          if (forward) {
            dst[base + c * rows + r] = src[base + r * cols + c];
          } else {
            dst[base + r * cols + c] += src[base + c * rows + r];
          }
        }
      }
    }
  };
  permute(x.data(), out.mutable_data(), true);
  if (!tracking({&x})) return out;
  return record(out, {x}, [x, out, permute]() mutable {
    permute(out.grad(), x.mutable_grad(), false);
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_defined("add", a);
  require_defined("add", b);
  if (a.size() < b.size()) return add(b, a);
  return binary(
      "add", a, b, [](double x, double y) { return x + y; },
      [](double, double, double) { return 1.0; }, [](double, double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary(
      "sub", a, b, [](double x, double y) { return x - y; },
      [](double, double, double) { return 1.0; }, [](double, double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_defined("mul", a);
  require_defined("mul", b);
  if (a.size() < b.size()) return mul(b, a);
  return binary(
      "mul", a, b, [](double x, double y) { return x * y; },
      [](double, double y, double) { return y; }, [](double x, double, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
  return binary(
      "div", a, b, [](double x, double y) { return x / y; },
      [](double, double y, double) { return 1.0 / y; },
      [](double, double y, double o) { return -o / y; });
}

namespace {

template <typename Fwd, typename DX, typename DS>
Tensor rowwise(const char* op, const Tensor& x, const Tensor& s, Fwd fwd, DX dx, DS ds) {
  require_defined(op, x);
  require_defined(op, s);
  if (x.rank() < 1 || s.size() != x.dim(0)) {
    throw ShapeError(std::string(op) + ": expected " + std::to_string(x.rank() ? x.dim(0) : 0) +
                     " row scalars for " + to_string(x.shape()) + ", got " +
                     to_string(s.shape()));
  }
  const std::size_t rows = s.size();
  const std::size_t inner = rows == 0 ? 0 : x.size() / rows;
  Tensor out(x.shape());
  auto o = out.mutable_data();
  auto xv = x.data();
  auto sv = s.data();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < inner; ++j) o[r * inner + j] = fwd(xv[r * inner + j], sv[r]);
  }
  if (!tracking({&x, &s})) return out;
  return record(out, {x, s}, [x, s, out, rows, inner, dx, ds]() mutable {
    auto g = out.grad();
    auto xv = x.data();
    auto sv = s.data();
    if (x.requires_grad()) {
      auto gx = x.mutable_grad();
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t j = 0; j < inner; ++j) gx[r * inner + j] += g[r * inner + j] * dx(sv[r]);
      }
    }
    if (s.requires_grad()) {
      auto gs = s.mutable_grad();
      for (std::size_t r = 0; r < rows; ++r) {
        double acc = 0.0;
        for (std::size_t j = 0; j < inner; ++j) acc += g[r * inner + j] * ds(xv[r * inner + j]);
        gs[r] += acc;
      }
    }
  });
}

}  // namespace

Tensor mul_rows(const Tensor& x, const Tensor& s) {
  return rowwise(
      "mul_rows", x, s, [](double a, double b) { return a * b; }, [](double b) { return b; },
      [](double a) { return a; });
}

Tensor add_rows(const Tensor& x, const Tensor& s) {
  return rowwise(
      "add_rows", x, s, [](double a, double b) { return a + b; }, [](double) { return 1.0; },
      [](double) { return 1.0; });
}

Tensor scale(const Tensor& x, double factor) {
  return unary(
      x, [factor](double v) { return v * factor; }, [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& x, double value) {
  return unary(
      x, [value](double v) { return v + value; }, [](double, double) { return 1.0; });
}

Tensor neg(const Tensor& x) {
  return unary(
      x, [](double v) { return -v; }, [](double, double) { return -1.0; });
}

Tensor reciprocal(const Tensor& x) {
  return unary(
      x, [](double v) { return 1.0 / v; }, [](double, double y) { return -y * y; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      x,
      [](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& x) {
  return unary(
      x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor exp(const Tensor& x) {
  return unary(
      x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& x) {
  return unary(
      x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Tensor clamp(const Tensor& x, double lo, double hi) {
  return unary(
      x, [lo, hi](double v) { return std::clamp(v, lo, hi); },
      [lo, hi](double v, double) { return (v >= lo && v <= hi) ? 1.0 : 0.0; });
}

Tensor sum(const Tensor& x) {
  require_defined("sum", x);
  double total = 0.0;
  for (double v : x.data()) total += v;
  Tensor out = Tensor::scalar(total);
  if (!tracking({&x})) return out;
  return record(out, {x}, [x, out]() mutable {
    const double g = out.grad()[0];
    for (double& gx : x.mutable_grad()) gx += g;
  });
}

Tensor mean(const Tensor& x) {
  require_defined("mean", x);
  if (x.size() == 0) throw ContractError("mean: empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(x.size()));
}

Tensor sum_last(const Tensor& x) {
  require_defined("sum_last", x);
  const Shape& s = x.shape();
  if (s.empty()) throw ShapeError("sum_last: rank-0 tensor");
  const std::size_t inner = s.back();
  const std::size_t outer = inner == 0 ? 0 : x.size() / inner;
  Shape out_shape(s.begin(), s.end() - 1);
  if (out_shape.empty()) out_shape = {1};
  Tensor out(out_shape);
  auto o = out.mutable_data();
  auto xv = x.data();
  for (std::size_t r = 0; r < outer; ++r) {
    double acc = 0.0;
    for (std::size_t j = 0; j < inner; ++j) acc += xv[r * inner + j];
    o[r] = acc;
  }
  if (!tracking({&x})) return out;
  return record(out, {x}, [x, out, outer, inner]() mutable {
    auto g = out.grad();
    auto gx = x.mutable_grad();
    for (std::size_t r = 0; r < outer; ++r) {
      for (std::size_t j = 0; j < inner; ++j) gx[r * inner + j] += g[r];
    }
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  require_defined("reshape", x);
  if (numel(shape) != x.size()) {
    throw ShapeError("reshape: cannot view " + to_string(x.shape()) + " as " + to_string(shape));
  }
  Tensor out(std::move(shape), std::vector<double>(x.data().begin(), x.data().end()));
  if (!tracking({&x})) return out;
  return record(out, {x}, [x, out]() mutable {
    auto g = out.grad();
    auto gx = x.mutable_grad();
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
  });
}

Tensor concat(std::span<const Tensor> parts, std::size_t axis) {
  if (parts.empty()) throw ContractError("concat: no operands");
  const Shape& first = parts[0].shape();
  if (axis >= first.size()) {
    throw ShapeError("concat: axis " + std::to_string(axis) + " out of range for " +
                     to_string(first));
  }
  std::size_t axis_total = 0;
  for (const Tensor& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == first.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i) ok = i == axis || s[i] == first[i];
    if (!ok) {
      throw ShapeError("concat: shapes " + to_string(first) + " and " + to_string(s) +
                       " differ off axis " + std::to_string(axis));
    }
    axis_total += s[axis];
  }
  const std::size_t outer = product(first, 0, axis);
  const std::size_t inner = product(first, axis + 1, first.size());
  Shape out_shape = first;
  out_shape[axis] = axis_total;
  Tensor out(out_shape);
  auto o = out.mutable_data();
  std::size_t offset = 0;
  std::vector<std::size_t> offsets;
  for (const Tensor& p : parts) {
    offsets.push_back(offset);
    const std::size_t block = p.shape()[axis] * inner;
    auto pv = p.data();
    for (std::size_t r = 0; r < outer; ++r) {
      std::copy_n(pv.begin() + static_cast<std::ptrdiff_t>(r * block), block,
                  o.begin() + static_cast<std::ptrdiff_t>(r * axis_total * inner + offset));
    }
    offset += block;
  }
  bool any = false;
  if (active_tape() != nullptr) {
    for (const Tensor& p : parts) any = any || p.requires_grad();
  }
  if (!any) return out;
  std::vector<Tensor> inputs(parts.begin(), parts.end());
  return record(out, inputs, [inputs, out, offsets, outer, inner, axis, axis_total]() mutable {
    auto g = out.grad();
    for (std::size_t pi = 0; pi < inputs.size(); ++pi) {
      Tensor& p = inputs[pi];
      if (!p.requires_grad()) continue;
      const std::size_t block = p.shape()[axis] * inner;
      auto gp = p.mutable_grad();
      for (std::size_t r = 0; r < outer; ++r) {
        const std::size_t src = r * axis_total * inner + offsets[pi];
        for (std::size_t j = 0; j < block; ++j) gp[r * block + j] += g[src + j];
      }
    }
  });
}

Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin, std::size_t end) {
  require_defined("slice", x);
  const Shape& s = x.shape();
  if (axis >= s.size() || begin > end || end > s[axis]) {
    throw ShapeError("slice: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") on axis " + std::to_string(axis) + " invalid for " + to_string(s));
  }
  const std::size_t outer = product(s, 0, axis);
  const std::size_t inner = product(s, axis + 1, s.size());
  const std::size_t src_block = s[axis] * inner;
  const std::size_t block = (end - begin) * inner;
  const std::size_t start = begin * inner;
  Shape out_shape = s;
  out_shape[axis] = end - begin;
  Tensor out(out_shape);
  auto o = out.mutable_data();
  auto xv = x.data();
  for (std::size_t r = 0; r < outer; ++r) {
    std::copy_n(xv.begin() + static_cast<std::ptrdiff_t>(r * src_block + start), block,
                o.begin() + static_cast<std::ptrdiff_t>(r * block));
  }
  if (!tracking({&x})) return out;
  return record(out, {x}, [x, out, outer, src_block, block, start]() mutable {
    auto g = out.grad();
    auto gx = x.mutable_grad();
    for (std::size_t r = 0; r < outer; ++r) {
      for (std::size_t j = 0; j < block; ++j) gx[r * src_block + start + j] += g[r * block + j];
    }
  });
}

namespace {

double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Tensor lstm_cell(const Tensor& x_proj, std::size_t t, const Tensor& recurrent, const Tensor& prev,
                 std::span<const std::uint8_t> keep) {
  require_defined("lstm_cell", x_proj);
  require_defined("lstm_cell", recurrent);
  require_defined("lstm_cell", prev);
  if (x_proj.rank() != 3 || recurrent.rank() != 2 || prev.rank() != 2 || t >= x_proj.dim(1) ||
      x_proj.dim(2) % 4 != 0) {
    throw ShapeError("lstm_cell: invalid operands " + to_string(x_proj.shape()) + ", " +
                     to_string(recurrent.shape()) + ", " + to_string(prev.shape()));
  }
  const std::size_t batch = x_proj.dim(0);
  const std::size_t steps = x_proj.dim(1);
  const std::size_t h = x_proj.dim(2) / 4;
  if (recurrent.shape() != Shape{batch, 4 * h} || prev.shape() != Shape{batch, 2 * h} ||
      keep.size() != batch) {
    throw ShapeError("lstm_cell: invalid operands " + to_string(x_proj.shape()) + ", " +
                     to_string(recurrent.shape()) + ", " + to_string(prev.shape()));
  }
  // activated gates i, f, g, o and tanh(c) per row, kept for the backward pass
  std::vector<double> cache(batch * 5 * h, 0.0);
  std::vector<std::uint8_t> live(keep.begin(), keep.end());
  Tensor out(Shape{batch, 2 * h});
  auto o = out.mutable_data();
  const auto xp = x_proj.data();
  const auto rec = recurrent.data();
  const auto pv = prev.data();
  for (std::size_t b = 0; b < batch; ++b) {
    if (!live[b]) continue;
    const double* xrow = xp.data() + (b * steps + t) * 4 * h;
    const double* rrow = rec.data() + b * 4 * h;
    double* act = cache.data() + b * 5 * h;
    for (std::size_t j = 0; j < h; ++j) {
      const double i = logistic(xrow[j] + rrow[j]);
      const double f = logistic(xrow[h + j] + rrow[h + j]);
      const double g = std::tanh(xrow[2 * h + j] + rrow[2 * h + j]);
      const double og = logistic(xrow[3 * h + j] + rrow[3 * h + j]);
      const double c = f * pv[b * 2 * h + h + j] + i * g;
      const double tc = std::tanh(c);
      act[j] = i;
      act[h + j] = f;
      act[2 * h + j] = g;
      act[3 * h + j] = og;
      act[4 * h + j] = tc;
      o[b * 2 * h + j] = og * tc;
      o[b * 2 * h + h + j] = c;
    }
  }
  if (!tracking({&x_proj, &recurrent, &prev})) return out;
  return record(out, {x_proj, recurrent, prev},
                [x_proj, recurrent, prev, out, t, batch, steps, h, cache = std::move(cache),
                 live = std::move(live)]() mutable {
    const auto g = out.grad();
    const auto pv = prev.data();
    std::vector<double> dpre(4 * h);
    for (std::size_t b = 0; b < batch; ++b) {
      if (!live[b]) continue;
      const double* act = cache.data() + b * 5 * h;
      double* dprev = prev.requires_grad() ? prev.mutable_grad().data() + b * 2 * h : nullptr;
      for (std::size_t j = 0; j < h; ++j) {
        const double i = act[j], f = act[h + j], gg = act[2 * h + j], og = act[3 * h + j];
        const double tc = act[4 * h + j];
        const double dh = g[b * 2 * h + j];
        const double dc = g[b * 2 * h + h + j] + dh * og * (1.0 - tc * tc);
        dpre[j] = dc * gg * i * (1.0 - i);
        dpre[h + j] = dc * pv[b * 2 * h + h + j] * f * (1.0 - f);
        dpre[2 * h + j] = dc * i * (1.0 - gg * gg);
        dpre[3 * h + j] = dh * tc * og * (1.0 - og);
        if (dprev != nullptr) dprev[h + j] += dc * f;
      }
      if (x_proj.requires_grad()) {
        double* gx = x_proj.mutable_grad().data() + (b * steps + t) * 4 * h;
        for (std::size_t j = 0; j < 4 * h; ++j) gx[j] += dpre[j];
      }
      if (recurrent.requires_grad()) {
        double* gr = recurrent.mutable_grad().data() + b * 4 * h;
        for (std::size_t j = 0; j < 4 * h; ++j) gr[j] += dpre[j];
      }
    }
  });
}

Tensor masked_fill(const Tensor& x, std::span<const std::uint8_t> mask, double value) {
  require_defined("masked_fill", x);
  if (mask.size() != x.size()) {
    throw ShapeError("masked_fill: mask of " + std::to_string(mask.size()) +
                     " entries for tensor " + to_string(x.shape()));
  }
  std::vector<std::uint8_t> keep(mask.begin(), mask.end());
  Tensor out(x.shape());
  auto o = out.mutable_data();
  auto xv = x.data();
  for (std::size_t i = 0; i < xv.size(); ++i) o[i] = keep[i] ? value : xv[i];
  if (!tracking({&x})) return out;
  return record(out, {x}, [x, out, keep = std::move(keep)]() mutable {
    auto g = out.grad();
    auto gx = x.mutable_grad();
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (!keep[i]) gx[i] += g[i];
    }
  });
}

Tensor gather_rows(const Tensor& table, std::span<const std::size_t> rows) {
  require_defined("gather_rows", table);
  if (table.rank() != 2) {
    throw ShapeError("gather_rows: expected rank-2 table, got " + to_string(table.shape()));
  }
  const std::size_t height = table.dim(0);
  const std::size_t width = table.dim(1);
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  Tensor out(Shape{idx.size(), width});
  auto o = out.mutable_data();
  auto tv = table.data();
  for (std::size_t r = 0; r < idx.size(); ++r) {
    if (idx[r] >= height) {
      throw ContractError("gather_rows: row " + std::to_string(idx[r]) + " out of range " +
                          std::to_string(height));
    }
    std::copy_n(tv.begin() + static_cast<std::ptrdiff_t>(idx[r] * width), width,
                o.begin() + static_cast<std::ptrdiff_t>(r * width));
  }
  if (!tracking({&table})) return out;
  return record(out, {table}, [table, out, idx = std::move(idx), width]() mutable {
    auto g = out.grad();
    auto gt = table.mutable_grad();
    for (std::size_t r = 0; r < idx.size(); ++r) {
      for (std::size_t j = 0; j < width; ++j) gt[idx[r] * width + j] += g[r * width + j];
    }
  });
}

Tensor scatter_rows(const Tensor& src, std::span<const std::size_t> rows,
                    std::size_t total_rows) {
  require_defined("scatter_rows", src);
  if (src.rank() != 2 || src.dim(0) != rows.size()) {
    throw ShapeError("scatter_rows: " + std::to_string(rows.size()) + " indices for " +
                     to_string(src.shape()));
  }
  const std::size_t width = src.dim(1);
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  Tensor out(Shape{total_rows, width});
  auto o = out.mutable_data();
  auto sv = src.data();
  for (std::size_t r = 0; r < idx.size(); ++r) {
    if (idx[r] >= total_rows) {
      throw ContractError("scatter_rows: row " + std::to_string(idx[r]) + " out of range " +
                          std::to_string(total_rows));
    }
    for (std::size_t j = 0; j < width; ++j) o[idx[r] * width + j] += sv[r * width + j];
  }
  if (!tracking({&src})) return out;
  return record(out, {src}, [src, out, idx = std::move(idx), width]() mutable {
    auto g = out.grad();
    auto gs = src.mutable_grad();
    for (std::size_t r = 0; r < idx.size(); ++r) {
      for (std::size_t j = 0; j < width; ++j) gs[r * width + j] += g[idx[r] * width + j];
    }
  });
}

Tensor detach(const Tensor& x) {
  require_defined("detach", x);
  return x.clone();
}

Tensor weighted_softmax(const Tensor& scores, const Tensor& weights) {
  require_defined("weighted_softmax", scores);
  require_defined("weighted_softmax", weights);
  if (scores.rank() != 2 || scores.shape() != weights.shape()) {
    throw ShapeError("weighted_softmax: scores " + to_string(scores.shape()) + " and weights " +
                     to_string(weights.shape()) + " must be equal rank-2 shapes");
  }
  const std::size_t rows = scores.dim(0);
  const std::size_t cols = scores.dim(1);
  auto sv = scores.data();
  auto wv = weights.data();
  Tensor neg_max(Shape{rows});
  std::vector<std::uint8_t> closed(scores.size(), 0);
  for (std::size_t r = 0; r < rows; ++r) {
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < cols; ++t) {
      const std::size_t i = r * cols + t;
      if (wv[i] > 0.0) {
        m = std::max(m, sv[i]);
      } else {
        closed[i] = 1;
      }
    }
    neg_max.mutable_data()[r] = std::isfinite(m) ? -m : 0.0;
  }
  const Tensor shifted = masked_fill(add_rows(scores, neg_max), closed, 0.0);
  const Tensor z = mul(weights, exp(shifted));
  return mul_rows(z, reciprocal(sum_last(z)));
}

Tensor softmax_rows(const Tensor& scores) {
  return weighted_softmax(scores, Tensor(scores.shape(), 1.0));
}

}  // namespace gatedattn
