#pragma once

#include <cstddef>
#include <vector>

#include "vadasr/tape.hpp"

// Differentiable primitives. Every op records onto the tape of its inputs;
// mixing Vars from different tapes is a usage error. Matrices are rank-2
// and row-major with time along rows.
namespace vadasr::ops {

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
// x[m x n] + bias[n] broadcast over rows.
Var add_bias(Var x, Var bias);
Var scale(Var x, double factor);
Var sigmoid(Var x);
Var relu(Var x);
Var log_softmax(Var x, std::size_t axis = 1);
Var softmax_rows(Var x);
// Per-row normalization with learned gain and shift, both [n].
Var layer_norm(Var x, Var gain, Var shift, double eps = 1e-5);
Var transpose(Var x);
Var slice(Var x, std::size_t axis, std::size_t begin, std::size_t end);
Var concat(const std::vector<Var>& parts, std::size_t axis);
Var sum(Var x);
Var mean(Var x);
Var reshape(Var x, Shape shape);

// x[L x Cin] (time-major), kernels[Cout x Cin x K], optional bias[Cout].
// Output [Lout x Cout], Lout = (L + 2*padding - K) / stride + 1.
Var conv1d(Var x, Var kernels, Var bias, std::size_t stride, std::size_t padding);

// Channels split into `groups` independent convolutions.
// kernels[Cout x Cin/groups x K]; stride 1.
Var grouped_conv1d(Var x, Var kernels, Var bias, std::size_t groups,
                   std::size_t padding);

}  // namespace vadasr::ops
