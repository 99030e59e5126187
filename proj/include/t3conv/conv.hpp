#pragma once

#include <cstdint>

#include "t3conv/tape.hpp"
#include "t3conv/tensor.hpp"

namespace t3conv {

struct Dims3 {
  int64_t d = 1;
  int64_t w = 1;
  int64_t h = 1;
};

// Stride-1/pad-0 is the base case; stride and zero padding generalize it.
// Output extent per axis: floor((in + 2*pad - filter)/stride) + 1, which must
// come out >= 1.
struct ConvGeometry {
  int64_t in_channels = 1;
  int64_t out_channels = 1;
  Dims3 filter;
  Dims3 stride{1, 1, 1};
  Dims3 pad{0, 0, 0};

  Dims3 out_extents(const Dims3& in) const;  // throws on violations
};

// Multi-channel 3-d cross-correlation (sliding dot product, no filter flip):
//   y[n,oc,a,b,c] = bias[oc] + sum_{ic,dt,dw,dh} w[oc,ic,dt,dw,dh] *
//                   x[n,ic, a*sd-pd+dt, b*sw-pw+dw, c*sh-ph+dh]
// x is [N, C_in, T, W, H], weights [C_out, C_in, D, W, H], bias [C_out].
// The activation is deliberately not applied here; the op stays linear so
// its adjoint is exact.
//
// Accumulation order is part of the contract: bias first, then taps in
// ascending (ic, dt, dw, dh) order, one scalar accumulator per output
// element. Independent implementations that follow the same order reproduce
// the result bitwise.
Tensor conv3d_forward(const Tensor& x, const Tensor& weights, const Tensor& bias,
                      const ConvGeometry& geom, Tape* tape = nullptr);

// Same contract, different evaluation structure: gathers each output
// element's receptive field into a patch buffer and reduces it against the
// flattened filter row. Kept as a second, independently coded path for
// equivalence checks; not recorded on a tape.
Tensor conv3d_forward_patchdot(const Tensor& x, const Tensor& weights, const Tensor& bias,
                               const ConvGeometry& geom);

}  // namespace t3conv
