#include "t3conv/affine.hpp"

#include <cmath>
#include <stdexcept>

namespace t3conv {

double lattice_coord(int64_t index, int64_t extent) {
  return (static_cast<double>(index) - static_cast<double>(extent - 1) / 2.0) /
         static_cast<double>(extent);
}

double to_pixel(double g, int64_t extent) {
  return g * static_cast<double>(extent) + static_cast<double>(extent - 1) / 2.0;
}

AffineMatrix compose(const AffineParams& p) {
  if (!(p.scale > 0.0))
    throw std::domain_error("compose: scale must be positive, got " + std::to_string(p.scale));
  const double c = std::cos(p.rot);
  const double s = std::sin(p.rot);
  AffineMatrix m;
  m.m[0][0] = p.scale * c;
  m.m[0][1] = -p.scale * s;
  m.m[0][2] = p.tx * p.scale * c - p.ty * p.scale * s;
  m.m[1][0] = p.scale * s;
  m.m[1][1] = p.scale * c;
  m.m[1][2] = p.tx * p.scale * s + p.ty * p.scale * c;
  return m;
}

void compose_backward(const AffineParams& p, const AffineMatrix& up, AffineParams& grad) {
  const double c = std::cos(p.rot);
  const double s = std::sin(p.rot);
  const double sc = p.scale;
  // d(entry)/d(scale)
  grad.scale += up.m[0][0] * c + up.m[0][1] * (-s) + up.m[0][2] * (p.tx * c - p.ty * s) +
                up.m[1][0] * s + up.m[1][1] * c + up.m[1][2] * (p.tx * s + p.ty * c);
  // d(entry)/d(rot)
  grad.rot += up.m[0][0] * (-sc * s) + up.m[0][1] * (-sc * c) +
              up.m[0][2] * (-p.tx * sc * s - p.ty * sc * c) + up.m[1][0] * (sc * c) +
              up.m[1][1] * (-sc * s) + up.m[1][2] * (p.tx * sc * c - p.ty * sc * s);
  // d(entry)/d(tx), d(entry)/d(ty): only the translation column depends on them
  grad.tx += up.m[0][2] * (sc * c) + up.m[1][2] * (sc * s);
  grad.ty += up.m[0][2] * (-sc * s) + up.m[1][2] * (sc * c);
}

SamplingGrid make_grid(const AffineMatrix& m, int64_t width, int64_t height) {
  if (width < 1 || height < 1)
    throw std::invalid_argument("make_grid: extents must be >= 1");
  SamplingGrid g;
  g.width = width;
  g.height = height;
  g.coords.resize(static_cast<size_t>(width * height * 2));
  for (int64_t ix = 0; ix < width; ++ix) {
    const double x = lattice_coord(ix, width);
    for (int64_t iy = 0; iy < height; ++iy) {
      const double y = lattice_coord(iy, height);
      const size_t at = static_cast<size_t>((ix * height + iy) * 2);
      g.coords[at] = m.m[0][0] * x + m.m[0][1] * y + m.m[0][2];
      g.coords[at + 1] = m.m[1][0] * x + m.m[1][1] * y + m.m[1][2];
    }
  }
  return g;
}

void make_grid_backward(const std::vector<double>& grad_coords, int64_t width, int64_t height,
                        AffineMatrix& grad_m) {
  if (grad_coords.size() != static_cast<size_t>(width * height * 2))
    throw std::invalid_argument("make_grid_backward: coord buffer size mismatch");
  for (int64_t ix = 0; ix < width; ++ix) {
    const double x = lattice_coord(ix, width);
    for (int64_t iy = 0; iy < height; ++iy) {
      const double y = lattice_coord(iy, height);
      const size_t at = static_cast<size_t>((ix * height + iy) * 2);
      const double gx = grad_coords[at];
      const double gy = grad_coords[at + 1];
      grad_m.m[0][0] += gx * x;
      grad_m.m[0][1] += gx * y;
      grad_m.m[0][2] += gx;
      grad_m.m[1][0] += gy * x;
      grad_m.m[1][1] += gy * y;
      grad_m.m[1][2] += gy;
    }
  }
}

namespace {

void check_sample_shapes(const Tensor& source, const SamplingGrid& grid) {
  if (source.ndim() != 2)
    throw std::invalid_argument("bilinear_sample: source must be 2-d, got " +
                                shape_str(source.shape()));
  if (source.extent(0) != grid.width || source.extent(1) != grid.height)
    throw std::invalid_argument("bilinear_sample: grid built for " + std::to_string(grid.width) +
                                "x" + std::to_string(grid.height) + ", source is " +
                                shape_str(source.shape()));
}

}  // namespace

Tensor bilinear_sample(const Tensor& source, const SamplingGrid& grid) {
  check_sample_shapes(source, grid);
  const int64_t W = grid.width, H = grid.height;
  Tensor out({W, H});
  const double* src = source.data();
  double* dst = out.data();
  for (int64_t ix = 0; ix < W; ++ix) {
    for (int64_t iy = 0; iy < H; ++iy) {
      const double px = to_pixel(grid.gx(ix, iy), W);
      const double py = to_pixel(grid.gy(ix, iy), H);
      const int64_t i0 = static_cast<int64_t>(std::floor(px));
      const int64_t j0 = static_cast<int64_t>(std::floor(py));
      double acc = 0.0;
      for (int64_t i = i0; i <= i0 + 1; ++i) {
        if (i < 0 || i >= W) continue;
        const double wx = std::max(0.0, 1.0 - std::abs(px - static_cast<double>(i)));
        for (int64_t j = j0; j <= j0 + 1; ++j) {
          if (j < 0 || j >= H) continue;
          const double wy = std::max(0.0, 1.0 - std::abs(py - static_cast<double>(j)));
          acc += src[i * H + j] * wx * wy;
        }
      }
      dst[ix * H + iy] = acc;
    }
  }
  return out;
}

void bilinear_sample_backward(const Tensor& source, const SamplingGrid& grid,
                              const Tensor& upstream, Tensor& grad_source,
                              std::vector<double>& grad_coords) {
  check_sample_shapes(source, grid);
  if (upstream.shape() != source.shape())
    throw std::invalid_argument("bilinear_sample_backward: upstream shape mismatch");
  if (grad_source.shape() != source.shape())
    throw std::invalid_argument("bilinear_sample_backward: grad_source shape mismatch");
  const int64_t W = grid.width, H = grid.height;
  grad_coords.resize(static_cast<size_t>(W * H * 2), 0.0);
  const double* src = source.data();
  const double* up = upstream.data();
  double* gsrc = grad_source.data();
  for (int64_t ix = 0; ix < W; ++ix) {
    for (int64_t iy = 0; iy < H; ++iy) {
      const double u = up[ix * H + iy];
      if (u == 0.0) continue;
      const double px = to_pixel(grid.gx(ix, iy), W);
      const double py = to_pixel(grid.gy(ix, iy), H);
      const int64_t i0 = static_cast<int64_t>(std::floor(px));
      const int64_t j0 = static_cast<int64_t>(std::floor(py));
      double dpx = 0.0, dpy = 0.0;
      for (int64_t i = i0; i <= i0 + 1; ++i) {
        if (i < 0 || i >= W) continue;
        const double ux = px - static_cast<double>(i);
        const double ax = std::abs(ux);
        const double wx = std::max(0.0, 1.0 - ax);
        // subgradient 0 both at the outer kink |u| == 1 and at u == 0
        const double dwx = (ax > 0.0 && ax < 1.0) ? (ux > 0.0 ? -1.0 : 1.0) : 0.0;
        for (int64_t j = j0; j <= j0 + 1; ++j) {
          if (j < 0 || j >= H) continue;
          const double uy = py - static_cast<double>(j);
          const double ay = std::abs(uy);
          const double wy = std::max(0.0, 1.0 - ay);
          const double dwy = (ay > 0.0 && ay < 1.0) ? (uy > 0.0 ? -1.0 : 1.0) : 0.0;
          const double sv = src[i * H + j];
          gsrc[i * H + j] += u * wx * wy;
          dpx += u * sv * dwx * wy;
          dpy += u * sv * wx * dwy;
        }
      }
      const size_t at = static_cast<size_t>((ix * H + iy) * 2);
      grad_coords[at] += dpx * static_cast<double>(W);       // d(pixel)/d(gx) = W
      grad_coords[at + 1] += dpy * static_cast<double>(H);
    }
  }
}

Tensor warp(const Tensor& source, const AffineParams& params) {
  const SamplingGrid grid =
      make_grid(compose(params), source.extent(0), source.extent(1));
  return bilinear_sample(source, grid);
}

WarpGrads bilinear_backward(const Tensor& source, const AffineParams& params,
                            const Tensor& upstream) {
  WarpGrads grads;
  grads.source = Tensor::zeros(source.shape());
  const SamplingGrid grid =
      make_grid(compose(params), source.extent(0), source.extent(1));
  std::vector<double> grad_coords;
  bilinear_sample_backward(source, grid, upstream, grads.source, grad_coords);
  AffineMatrix grad_m{{{0, 0, 0}, {0, 0, 0}}};
  make_grid_backward(grad_coords, grid.width, grid.height, grad_m);
  grads.params = AffineParams{0.0, 0.0, 0.0, 0.0};
  compose_backward(params, grad_m, grads.params);
  return grads;
}

}  // namespace t3conv
