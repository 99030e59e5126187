#pragma once

#include <cstdint>
#include <vector>

#include "t3conv/tensor.hpp"

namespace t3conv {

// One temporal step's similarity transform. rot is stored in radians
// (converted to degrees only for display); tx and ty are fractions of the
// source width and height. The same struct doubles as the gradient carrier
// for these four scalars.
struct AffineParams {
  double scale = 1.0;
  double rot = 0.0;
  double tx = 0.0;
  double ty = 0.0;

  bool is_identity() const { return scale == 1.0 && rot == 0.0 && tx == 0.0 && ty == 0.0; }
};

// 2x3 matrix, row-major: [m00 m01 m02; m10 m11 m12].
struct AffineMatrix {
  double m[2][3] = {{1, 0, 0}, {0, 1, 0}};
};

// Per-output-pixel normalized source coordinates, laid out W x H x 2.
struct SamplingGrid {
  int64_t width = 0;
  int64_t height = 0;
  std::vector<double> coords;  // [(ix*H + iy)*2 + {0:gx, 1:gy}]

  double gx(int64_t ix, int64_t iy) const { return coords[static_cast<size_t>((ix * height + iy) * 2)]; }
  double gy(int64_t ix, int64_t iy) const { return coords[static_cast<size_t>((ix * height + iy) * 2 + 1)]; }
};

// Coordinate convention, used everywhere in this library:
//  - pixel index i on an axis of extent n sits at the normalized coordinate
//    (i - (n-1)/2) / n, so the lattice is centered on 0 and one pixel spans
//    1/n normalized units;
//  - consequently a translation parameter is an exact fraction of the image
//    extent (tx = 1/W moves the sampling points by one pixel), and pixel
//    units are recovered as g*n + (n-1)/2.
// This is the single conversion point between normalized and pixel space.
double lattice_coord(int64_t index, int64_t extent);
double to_pixel(double g, int64_t extent);

// theta entries from (scale, rot, tx, ty):
//   [ s cos r, -s sin r, tx s cos r - ty s sin r ]
//   [ s sin r,  s cos r, tx s sin r + ty s cos r ]
// Throws std::domain_error when scale <= 0; a sign flip on scale would alias
// with a rotation by pi.
AffineMatrix compose(const AffineParams& params);

// Accumulates d(loss)/d(params) given d(loss)/d(matrix entries).
void compose_backward(const AffineParams& params, const AffineMatrix& upstream, AffineParams& grad);

// Maps every lattice coordinate through the matrix: [gx; gy] = m [x; y; 1].
SamplingGrid make_grid(const AffineMatrix& m, int64_t width, int64_t height);

// Accumulates d(loss)/d(matrix) given d(loss)/d(grid coords) (same layout as
// SamplingGrid::coords).
void make_grid_backward(const std::vector<double>& grad_coords, int64_t width, int64_t height,
                        AffineMatrix& grad_m);

// Hat-weighted resampling: every output pixel is
//   sum_{i,j} source[i,j] * max(0, 1-|px-i|) * max(0, 1-|py-j|)
// with (px, py) the grid coordinate in pixel units. Coordinates beyond one
// pixel outside the source contribute nothing (implicit zero padding). The
// accumulation order matches the naive double sum bitwise: i ascending, then
// j, each term evaluated as source * wx * wy.
Tensor bilinear_sample(const Tensor& source, const SamplingGrid& grid);

// Adjoint of bilinear_sample for a fixed grid: accumulates into grad_source
// and into grad_coords (layout of SamplingGrid::coords, normalized units).
// The hat function's outer kink |px-i| == 1 gets subgradient 0.
void bilinear_sample_backward(const Tensor& source, const SamplingGrid& grid,
                              const Tensor& upstream, Tensor& grad_source,
                              std::vector<double>& grad_coords);

// One temporal warp step: compose -> make_grid -> bilinear_sample.
Tensor warp(const Tensor& source, const AffineParams& params);

struct WarpGrads {
  Tensor source;        // d(loss)/d(source)
  AffineParams params;  // d(loss)/d(scale, rot, tx, ty)
};

// Full chain rule through the sampler, the grid, and the parameter-to-matrix
// map; returns gradients w.r.t. the source slice and the four parameters.
WarpGrads bilinear_backward(const Tensor& source, const AffineParams& params,
                            const Tensor& upstream);

}  // namespace t3conv
