#include "vadasr/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "vadasr/error.hpp"
#include "vadasr/kernels.hpp"

namespace vadasr::ops {
namespace k = kernels::omp;

namespace {

Tape& tape_of(std::initializer_list<Var> vars) {
  Tape* tape = nullptr;
  for (Var v : vars) {
    if (!v.valid()) continue;
    if (tape && v.tape() != tape) throw UsageError("inputs recorded on different tapes");
    tape = v.tape();
  }
  if (!tape) throw UsageError("op called without a bound input");
  return *tape;
}

void require_rank2(const char* op, Var v) {
  if (v.shape().size() != 2)
    throw DimensionError(std::string(op) + ": expected a matrix, got " +
                         shape_string(v.shape()));
}

void require_same(const char* op, Var a, Var b) {
  if (a.shape() != b.shape())
    throw DimensionError(std::string(op) + ": shape mismatch " +
                         shape_string(a.shape()) + " vs " + shape_string(b.shape()));
}

void add_into(Tensor& dst, const Tensor& src, double factor = 1.0) {
  auto d = dst.data();
  auto s = src.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += factor * s[i];
}

}  // namespace

Var matmul(Var a, Var b) {
  Tape& tape = tape_of({a, b});
  require_rank2("matmul", a);
  require_rank2("matmul", b);
  const std::size_t m = a.shape()[0], kk = a.shape()[1], n = b.shape()[1];
  if (b.shape()[0] != kk)
    throw DimensionError("matmul: shape mismatch " + shape_string(a.shape()) + " x " +
                         shape_string(b.shape()));
  Tensor out({m, n});
  k::gemm_nn(m, kk, n, a.value().data(), b.value().data(), out.data(), false);
  return tape.record(std::move(out), {a, b}, [a, b, m, kk, n](Tape& t, const Tensor& g) {
    if (t.needs_grad(a))
      k::gemm_nt(m, n, kk, g.data(), b.value().data(), t.grad_of(a).data(), true);
    if (t.needs_grad(b))
      k::gemm_tn(kk, m, n, a.value().data(), g.data(), t.grad_of(b).data(), true);
  });
}

Var add(Var a, Var b) {
  Tape& tape = tape_of({a, b});
  require_same("add", a, b);
  Tensor out = a.value();
  add_into(out, b.value());
  return tape.record(std::move(out), {a, b}, [a, b](Tape& t, const Tensor& g) {
    if (t.needs_grad(a)) add_into(t.grad_of(a), g);
    if (t.needs_grad(b)) add_into(t.grad_of(b), g);
  });
}

Var sub(Var a, Var b) {
  Tape& tape = tape_of({a, b});
  require_same("sub", a, b);
  Tensor out = a.value();
  add_into(out, b.value(), -1.0);
  return tape.record(std::move(out), {a, b}, [a, b](Tape& t, const Tensor& g) {
    if (t.needs_grad(a)) add_into(t.grad_of(a), g);
    if (t.needs_grad(b)) add_into(t.grad_of(b), g, -1.0);
  });
}

Var mul(Var a, Var b) {
  Tape& tape = tape_of({a, b});
  require_same("mul", a, b);
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  return tape.record(std::move(out), {a, b}, [a, b](Tape& t, const Tensor& g) {
    if (t.needs_grad(a)) {
      Tensor& ga = t.grad_of(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * b.value()[i];
    }
    if (t.needs_grad(b)) {
      Tensor& gb = t.grad_of(b);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * a.value()[i];
    }
  });
}

Var add_bias(Var x, Var bias) {
  Tape& tape = tape_of({x, bias});
  require_rank2("add_bias", x);
  const std::size_t rows = x.shape()[0], cols = x.shape()[1];
  if (bias.value().size() != cols)
    throw DimensionError("add_bias: shape mismatch " + shape_string(x.shape()) + " + " +
                         shape_string(bias.shape()));
  Tensor out = x.value();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out.at(r, c) += bias.value()[c];
  return tape.record(std::move(out), {x, bias}, [x, bias, rows, cols](Tape& t, const Tensor& g) {
    if (t.needs_grad(x)) add_into(t.grad_of(x), g);
    if (t.needs_grad(bias)) {
      Tensor& gb = t.grad_of(bias);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) gb[c] += g.at(r, c);
    }
  });
}

Var scale(Var x, double factor) {
  Tape& tape = tape_of({x});
  Tensor out = x.value();
  for (double& v : out.data()) v *= factor;
  return tape.record(std::move(out), {x}, [x, factor](Tape& t, const Tensor& g) {
    add_into(t.grad_of(x), g, factor);
  });
}

Var sigmoid(Var x) {
  Tape& tape = tape_of({x});
  Tensor out = x.value();
  for (double& v : out.data()) v = 1.0 / (1.0 + std::exp(-v));
  Tensor saved = out;
  return tape.record(std::move(out), {x}, [x, saved](Tape& t, const Tensor& g) {
    Tensor& gx = t.grad_of(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * saved[i] * (1.0 - saved[i]);
  });
}

Var relu(Var x) {
  Tape& tape = tape_of({x});
  Tensor out = x.value();
  for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
  return tape.record(std::move(out), {x}, [x](Tape& t, const Tensor& g) {
    Tensor& gx = t.grad_of(x);
    const Tensor& xv = x.value();
    for (std::size_t i = 0; i < g.size(); ++i)
      if (xv[i] > 0.0) gx[i] += g[i];
  });
}

Var log_softmax(Var x, std::size_t axis) {
  Tape& tape = tape_of({x});
  require_rank2("log_softmax", x);
  if (axis > 1) throw DimensionError("log_softmax: axis must be 0 or 1");
  const std::size_t rows = x.shape()[0], cols = x.shape()[1];
  // Normalize along `axis`: lines are rows (axis 1) or columns (axis 0).
  const std::size_t lines = axis == 1 ? rows : cols;
  const std::size_t len = axis == 1 ? cols : rows;
  const std::size_t line_stride = axis == 1 ? cols : 1;
  const std::size_t elem_stride = axis == 1 ? 1 : cols;
  Tensor out = x.value();
  for (std::size_t l = 0; l < lines; ++l) {
    double* p = out.data().data() + l * line_stride;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < len; ++i) mx = std::max(mx, p[i * elem_stride]);
    double acc = 0.0;
    for (std::size_t i = 0; i < len; ++i) acc += std::exp(p[i * elem_stride] - mx);
    const double lse = mx + std::log(acc);
    for (std::size_t i = 0; i < len; ++i) p[i * elem_stride] -= lse;
  }
  Tensor saved = out;
  return tape.record(std::move(out), {x},
                     [x, saved, lines, len, line_stride, elem_stride](Tape& t, const Tensor& g) {
    Tensor& gx = t.grad_of(x);
    for (std::size_t l = 0; l < lines; ++l) {
      const std::size_t base = l * line_stride;
      double gsum = 0.0;
      for (std::size_t i = 0; i < len; ++i) gsum += g[base + i * elem_stride];
      for (std::size_t i = 0; i < len; ++i) {
        const std::size_t idx = base + i * elem_stride;
        gx[idx] += g[idx] - std::exp(saved[idx]) * gsum;
      }
    }
  });
}

Var softmax_rows(Var x) {
  Tape& tape = tape_of({x});
  require_rank2("softmax_rows", x);
  const std::size_t rows = x.shape()[0], cols = x.shape()[1];
  Tensor out = x.value();
  for (std::size_t r = 0; r < rows; ++r) {
    auto row = out.row(r);
    const double mx = *std::max_element(row.begin(), row.end());
    double acc = 0.0;
    for (double& v : row) acc += (v = std::exp(v - mx));
    for (double& v : row) v /= acc;
  }
  Tensor saved = out;
  return tape.record(std::move(out), {x}, [x, saved, rows, cols](Tape& t, const Tensor& g) {
    Tensor& gx = t.grad_of(x);
    for (std::size_t r = 0; r < rows; ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c < cols; ++c) dot += g.at(r, c) * saved.at(r, c);
      for (std::size_t c = 0; c < cols; ++c)
        gx.at(r, c) += saved.at(r, c) * (g.at(r, c) - dot);
    }
  });
}

Var layer_norm(Var x, Var gain, Var shift, double eps) {
  Tape& tape = tape_of({x, gain, shift});
  require_rank2("layer_norm", x);
  const std::size_t rows = x.shape()[0], cols = x.shape()[1];
  if (gain.value().size() != cols || shift.value().size() != cols)
    throw DimensionError("layer_norm: shape mismatch " + shape_string(x.shape()) + " with " +
                         shape_string(gain.shape()));
  Tensor normed({rows, cols});
  std::vector<double> inv_std(rows);
  Tensor out({rows, cols});
  for (std::size_t r = 0; r < rows; ++r) {
    auto xr = x.value().row(r);
    double mu = 0.0;
    for (double v : xr) mu += v;
    mu /= static_cast<double>(cols);
    double var = 0.0;
    for (double v : xr) var += (v - mu) * (v - mu);
    var /= static_cast<double>(cols);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t c = 0; c < cols; ++c) {
      normed.at(r, c) = (xr[c] - mu) * inv_std[r];
      out.at(r, c) = normed.at(r, c) * gain.value()[c] + shift.value()[c];
    }
  }
  return tape.record(std::move(out), {x, gain, shift},
                     [x, gain, shift, normed, inv_std, rows, cols](Tape& t, const Tensor& g) {
    if (t.needs_grad(gain) || t.needs_grad(shift)) {
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) {
          if (t.needs_grad(gain)) t.grad_of(gain)[c] += g.at(r, c) * normed.at(r, c);
          if (t.needs_grad(shift)) t.grad_of(shift)[c] += g.at(r, c);
        }
    }
    if (!t.needs_grad(x)) return;
    Tensor& gx = t.grad_of(x);
    const double n = static_cast<double>(cols);
    for (std::size_t r = 0; r < rows; ++r) {
      double sum_dn = 0.0, sum_dn_n = 0.0;
      for (std::size_t c = 0; c < cols; ++c) {
        const double dn = g.at(r, c) * gain.value()[c];
        sum_dn += dn;
        sum_dn_n += dn * normed.at(r, c);
      }
      for (std::size_t c = 0; c < cols; ++c) {
        const double dn = g.at(r, c) * gain.value()[c];
        gx.at(r, c) += inv_std[r] * (dn - sum_dn / n - normed.at(r, c) * sum_dn_n / n);
      }
    }
  });
}

Var transpose(Var x) {
  Tape& tape = tape_of({x});
  require_rank2("transpose", x);
  const std::size_t rows = x.shape()[0], cols = x.shape()[1];
  Tensor out({cols, rows});
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out.at(c, r) = x.value().at(r, c);
  return tape.record(std::move(out), {x}, [x, rows, cols](Tape& t, const Tensor& g) {
    Tensor& gx = t.grad_of(x);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) gx.at(r, c) += g.at(c, r);
  });
}

Var slice(Var x, std::size_t axis, std::size_t begin, std::size_t end) {
  Tape& tape = tape_of({x});
  require_rank2("slice", x);
  if (axis > 1) throw DimensionError("slice: axis must be 0 or 1");
  const std::size_t rows = x.shape()[0], cols = x.shape()[1];
  const std::size_t extent = axis == 0 ? rows : cols;
  if (begin > end || end > extent)
    throw DimensionError("slice: range [" + std::to_string(begin) + ", " +
                         std::to_string(end) + ") outside " + shape_string(x.shape()));
  const std::size_t out_rows = axis == 0 ? end - begin : rows;
  const std::size_t out_cols = axis == 0 ? cols : end - begin;
  const std::size_t r0 = axis == 0 ? begin : 0, c0 = axis == 0 ? 0 : begin;
  Tensor out({out_rows, out_cols});
  for (std::size_t r = 0; r < out_rows; ++r)
    for (std::size_t c = 0; c < out_cols; ++c) out.at(r, c) = x.value().at(r0 + r, c0 + c);
  return tape.record(std::move(out), {x},
                     [x, out_rows, out_cols, r0, c0](Tape& t, const Tensor& g) {
    Tensor& gx = t.grad_of(x);
    for (std::size_t r = 0; r < out_rows; ++r)
      for (std::size_t c = 0; c < out_cols; ++c) gx.at(r0 + r, c0 + c) += g.at(r, c);
  });
}

Var concat(const std::vector<Var>& parts, std::size_t axis) {
  if (parts.empty()) throw DimensionError("concat: no inputs");
  if (axis > 1) throw DimensionError("concat: axis must be 0 or 1");
  Tape& tape = tape_of({parts.front()});
  std::size_t rows = 0, cols = 0;
  for (const Var& p : parts) {
    if (p.tape() != &tape) throw UsageError("inputs recorded on different tapes");
    require_rank2("concat", p);
    const Shape& s = p.shape();
    if (axis == 0) {
      if (rows == 0 && cols == 0) cols = s[1];
      if (s[1] != cols)
        throw DimensionError("concat: shape mismatch " + shape_string(parts.front().shape()) +
                             " vs " + shape_string(s));
      rows += s[0];
    } else {
      if (rows == 0 && cols == 0) rows = s[0];
      if (s[0] != rows)
        throw DimensionError("concat: shape mismatch " + shape_string(parts.front().shape()) +
                             " vs " + shape_string(s));
      cols += s[1];
    }
  }
  Tensor out({rows, cols});
  std::vector<std::size_t> offsets;
  std::size_t offset = 0;
  for (const Var& p : parts) {
    offsets.push_back(offset);
    const Tensor& v = p.value();
    for (std::size_t r = 0; r < v.rows(); ++r)
      for (std::size_t c = 0; c < v.cols(); ++c)
        out.at(axis == 0 ? offset + r : r, axis == 0 ? c : offset + c) = v.at(r, c);
    offset += axis == 0 ? v.rows() : v.cols();
  }
  return tape.record(std::move(out), parts, [parts, offsets, axis](Tape& t, const Tensor& g) {
    for (std::size_t i = 0; i < parts.size(); ++i) {
      if (!t.needs_grad(parts[i])) continue;
      Tensor& gp = t.grad_of(parts[i]);
      for (std::size_t r = 0; r < gp.rows(); ++r)
        for (std::size_t c = 0; c < gp.cols(); ++c)
          gp.at(r, c) += g.at(axis == 0 ? offsets[i] + r : r, axis == 0 ? c : offsets[i] + c);
    }
  });
}

Var sum(Var x) {
  Tape& tape = tape_of({x});
  double acc = 0.0;
  for (double v : x.value().data()) acc += v;
  return tape.record(Tensor::scalar(acc), {x}, [x](Tape& t, const Tensor& g) {
    for (double& v : t.grad_of(x).data()) v += g[0];
  });
}

Var mean(Var x) {
  const auto n = static_cast<double>(x.value().size());
  if (n == 0) throw EmptyInput("mean of an empty tensor");
  return scale(sum(x), 1.0 / n);
}

Var reshape(Var x, Shape shape) {
  Tape& tape = tape_of({x});
  Tensor out = x.value().reshaped(std::move(shape));
  return tape.record(std::move(out), {x}, [x](Tape& t, const Tensor& g) {
    Tensor& gx = t.grad_of(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
  });
}

namespace {

// Shared body of conv1d and grouped_conv1d: `groups` independent patch
// matmuls writing disjoint column blocks of the output.
Var conv_impl(const char* op, Var x, Var kernels, Var bias, std::size_t stride,
              std::size_t padding, std::size_t groups) {
  Tape& tape = tape_of({x, kernels, bias});
  require_rank2(op, x);
  const Shape& ks = kernels.shape();
  if (ks.size() != 3)
    throw DimensionError(std::string(op) + ": kernels must be [Cout x Cin x K], got " +
                         shape_string(ks));
  const std::size_t length = x.shape()[0], channels = x.shape()[1];
  const std::size_t cout = ks[0], cin_group = ks[1], width = ks[2];
  if (groups == 0 || channels % groups != 0 || cout % groups != 0 ||
      cin_group * groups != channels)
    throw DimensionError(std::string(op) + ": shape mismatch input " +
                         shape_string(x.shape()) + " kernels " + shape_string(ks) +
                         " groups " + std::to_string(groups));
  if (stride == 0) throw DimensionError(std::string(op) + ": stride must be positive");
  if (bias.valid() && bias.value().size() != cout)
    throw DimensionError(std::string(op) + ": bias " + shape_string(bias.shape()) +
                         " does not match " + std::to_string(cout) + " output channels");
  const std::size_t cout_group = cout / groups;

  std::vector<kernels::ConvGeometry> geo(groups);
  for (std::size_t g = 0; g < groups; ++g)
    geo[g] = kernels::ConvGeometry{length, channels, g * cin_group, cin_group,
                                   width, stride, padding};
  const std::size_t out_len = geo[0].out_length();
  const std::size_t patch = geo[0].patch();

  std::vector<Tensor> cols(groups, Tensor({out_len, patch}));
  Tensor out({out_len, cout});
  Tensor block({out_len, cout_group});
  for (std::size_t g = 0; g < groups; ++g) {
    k::im2col(geo[g], x.value().data(), cols[g].data());
    auto w = kernels.value().data().subspan(g * cout_group * patch, cout_group * patch);
    k::gemm_nt(out_len, patch, cout_group, cols[g].data(), w, block.data(), false);
    for (std::size_t o = 0; o < out_len; ++o)
      for (std::size_t c = 0; c < cout_group; ++c)
        out.at(o, g * cout_group + c) =
            block.at(o, c) + (bias.valid() ? bias.value()[g * cout_group + c] : 0.0);
  }

  std::vector<Var> inputs{x, kernels};
  if (bias.valid()) inputs.push_back(bias);
  return tape.record(std::move(out), inputs,
                     [x, kernels, bias, geo, cols = std::move(cols), out_len, patch,
                      cout_group, groups](Tape& t, const Tensor& g) {
    Tensor gblock({out_len, cout_group});
    Tensor dcols({out_len, patch});
    for (std::size_t grp = 0; grp < groups; ++grp) {
      for (std::size_t o = 0; o < out_len; ++o)
        for (std::size_t c = 0; c < cout_group; ++c)
          gblock.at(o, c) = g.at(o, grp * cout_group + c);
      if (t.needs_grad(kernels)) {
        auto dw = t.grad_of(kernels).data().subspan(grp * cout_group * patch,
                                                    cout_group * patch);
        k::gemm_tn(cout_group, out_len, patch, gblock.data(), cols[grp].data(), dw, true);
      }
      if (t.needs_grad(x)) {
        auto w = kernels.value().data().subspan(grp * cout_group * patch,
                                                cout_group * patch);
        k::gemm_nn(out_len, cout_group, patch, gblock.data(), w, dcols.data(), false);
        k::col2im_add(geo[grp], dcols.data(), t.grad_of(x).data());
      }
    }
    if (bias.valid() && t.needs_grad(bias)) {
      Tensor& gb = t.grad_of(bias);
      for (std::size_t o = 0; o < g.rows(); ++o)
        for (std::size_t c = 0; c < g.cols(); ++c) gb[c] += g.at(o, c);
    }
  });
}

}  // namespace

Var conv1d(Var x, Var kernels, Var bias, std::size_t stride, std::size_t padding) {
  return conv_impl("conv1d", x, kernels, bias, stride, padding, 1);
}

Var grouped_conv1d(Var x, Var kernels, Var bias, std::size_t groups, std::size_t padding) {
  return conv_impl("grouped_conv1d", x, kernels, bias, 1, padding, groups);
}

}  // namespace vadasr::ops
