#include "t3conv/conv.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace t3conv {

namespace {

int64_t out_extent(int64_t in, int64_t pad, int64_t filter, int64_t stride, const char* axis) {
  if (in < 1 || filter < 1 || stride < 1 || pad < 0)
    throw std::invalid_argument(std::string("conv geometry: bad ") + axis + " extents");
  const int64_t span = in + 2 * pad - filter;
  if (span < 0)
    throw std::invalid_argument(std::string("conv geometry: filter larger than padded input on ") +
                                axis);
  return span / stride + 1;
}

struct ConvDims {
  int64_t N, Ci, T, W, H;
  int64_t Co, D, Fw, Fh;
  int64_t To, Wo, Ho;
};

ConvDims resolve(const Tensor& x, const Tensor& w, const Tensor& b, const ConvGeometry& g) {
  if (x.ndim() != 5)
    throw std::invalid_argument("conv3d: input must be [N,C,T,W,H], got " + shape_str(x.shape()));
  if (w.ndim() != 5)
    throw std::invalid_argument("conv3d: weights must be [Co,Ci,D,W,H], got " +
                                shape_str(w.shape()));
  ConvDims d;
  d.N = x.extent(0);
  d.Ci = x.extent(1);
  d.T = x.extent(2);
  d.W = x.extent(3);
  d.H = x.extent(4);
  d.Co = w.extent(0);
  d.D = w.extent(2);
  d.Fw = w.extent(3);
  d.Fh = w.extent(4);
  if (w.extent(1) != d.Ci || d.Ci != g.in_channels || d.Co != g.out_channels ||
      d.D != g.filter.d || d.Fw != g.filter.w || d.Fh != g.filter.h)
    throw std::invalid_argument("conv3d: weights " + shape_str(w.shape()) +
                                " inconsistent with geometry/input " + shape_str(x.shape()));
  if (b.ndim() != 1 || b.extent(0) != d.Co)
    throw std::invalid_argument("conv3d: bias must be [C_out]");
  const Dims3 out = g.out_extents({d.T, d.W, d.H});
  d.To = out.d;
  d.Wo = out.w;
  d.Ho = out.h;
  return d;
}

}  // namespace

Dims3 ConvGeometry::out_extents(const Dims3& in) const {
  return {out_extent(in.d, pad.d, filter.d, stride.d, "temporal"),
          out_extent(in.w, pad.w, filter.w, stride.w, "width"),
          out_extent(in.h, pad.h, filter.h, stride.h, "height")};
}

Tensor conv3d_forward(const Tensor& x, const Tensor& weights, const Tensor& bias,
                      const ConvGeometry& geom, Tape* tape) {
  const ConvDims dm = resolve(x, weights, bias, geom);
  Tensor y({dm.N, dm.Co, dm.To, dm.Wo, dm.Ho});

  const double* xv = x.data();
  const double* wv = weights.data();
  const double* bv = bias.data();
  double* yv = y.data();

  const int64_t x_c = dm.T * dm.W * dm.H, x_t = dm.W * dm.H;
  const int64_t w_oc = dm.Ci * dm.D * dm.Fw * dm.Fh, w_ic = dm.D * dm.Fw * dm.Fh;
  const int64_t w_t = dm.Fw * dm.Fh;

  for (int64_t n = 0; n < dm.N; ++n) {
    const double* xn = xv + n * dm.Ci * x_c;
    for (int64_t oc = 0; oc < dm.Co; ++oc) {
      const double* wo = wv + oc * w_oc;
      double* yo = yv + ((n * dm.Co + oc) * dm.To) * dm.Wo * dm.Ho;
      for (int64_t ot = 0; ot < dm.To; ++ot) {
        const int64_t t0 = ot * geom.stride.d - geom.pad.d;
        for (int64_t ow = 0; ow < dm.Wo; ++ow) {
          const int64_t iw0 = ow * geom.stride.w - geom.pad.w;
          for (int64_t oh = 0; oh < dm.Ho; ++oh) {
            const int64_t ih0 = oh * geom.stride.h - geom.pad.h;
            double acc = bv[oc];
            for (int64_t ic = 0; ic < dm.Ci; ++ic) {
              const double* xc = xn + ic * x_c;
              const double* wc = wo + ic * w_ic;
              for (int64_t dt = 0; dt < dm.D; ++dt) {
                const int64_t it = t0 + dt;
                if (it < 0 || it >= dm.T) continue;
                const double* xt = xc + it * x_t;
                const double* wt = wc + dt * w_t;
                for (int64_t dw = 0; dw < dm.Fw; ++dw) {
                  const int64_t iw = iw0 + dw;
                  if (iw < 0 || iw >= dm.W) continue;
                  const double* xw = xt + iw * dm.H;
                  const double* ww = wt + dw * dm.Fh;
                  for (int64_t dh = 0; dh < dm.Fh; ++dh) {
                    const int64_t ih = ih0 + dh;
                    if (ih < 0 || ih >= dm.H) continue;
                    acc += ww[dh] * xw[ih];
                  }
                }
              }
            }
            yo[(ot * dm.Wo + ow) * dm.Ho + oh] = acc;
          }
        }
      }
    }
  }

  if (tape) {
    Tensor xc = x, wc = weights, bc = bias, yc = y;
    const ConvGeometry g = geom;
    tape->record("conv3d", [xc, wc, bc, yc, g, dm]() mutable {
      const double* up = yc.grad();
      const double* xv = xc.data();
      const double* wv = wc.data();
      double* gx = xc.grad();
      double* gw = wc.grad();
      double* gb = bc.grad();
      const int64_t x_c = dm.T * dm.W * dm.H, x_t = dm.W * dm.H;
      const int64_t w_oc = dm.Ci * dm.D * dm.Fw * dm.Fh, w_ic = dm.D * dm.Fw * dm.Fh;
      const int64_t w_t = dm.Fw * dm.Fh;
      for (int64_t n = 0; n < dm.N; ++n) {
        for (int64_t oc = 0; oc < dm.Co; ++oc) {
          const double* uo = up + ((n * dm.Co + oc) * dm.To) * dm.Wo * dm.Ho;
          for (int64_t ot = 0; ot < dm.To; ++ot) {
            const int64_t t0 = ot * g.stride.d - g.pad.d;
            for (int64_t ow = 0; ow < dm.Wo; ++ow) {
              const int64_t iw0 = ow * g.stride.w - g.pad.w;
              for (int64_t oh = 0; oh < dm.Ho; ++oh) {
                const double u = uo[(ot * dm.Wo + ow) * dm.Ho + oh];
                if (u == 0.0) continue;
                const int64_t ih0 = oh * g.stride.h - g.pad.h;
                gb[oc] += u;
                for (int64_t ic = 0; ic < dm.Ci; ++ic) {
                  for (int64_t dt = 0; dt < dm.D; ++dt) {
                    const int64_t it = t0 + dt;
                    if (it < 0 || it >= dm.T) continue;
                    for (int64_t dw = 0; dw < dm.Fw; ++dw) {
                      const int64_t iw = iw0 + dw;
                      if (iw < 0 || iw >= dm.W) continue;
                      for (int64_t dh = 0; dh < dm.Fh; ++dh) {
                        const int64_t ih = ih0 + dh;
                        if (ih < 0 || ih >= dm.H) continue;
                        const int64_t xi = (n * dm.Ci + ic) * x_c + it * x_t + iw * dm.H + ih;
                        const int64_t wi = oc * w_oc + ic * w_ic + dt * w_t + dw * dm.Fh + dh;
                        gx[xi] += u * wv[wi];
                        gw[wi] += u * xv[xi];
                      }
                    }
                  }
                }
              }
            }
          }
        }
      }
    });
  }
  return y;
}

Tensor conv3d_forward_patchdot(const Tensor& x, const Tensor& weights, const Tensor& bias,
                               const ConvGeometry& geom) {
  const ConvDims dm = resolve(x, weights, bias, geom);
  Tensor y({dm.N, dm.Co, dm.To, dm.Wo, dm.Ho});
  const int64_t patch_len = dm.Ci * dm.D * dm.Fw * dm.Fh;
  std::vector<double> patch(static_cast<size_t>(patch_len));
  const double* xv = x.data();
  const double* wv = weights.data();
  const double* bv = bias.data();
  double* yv = y.data();
  const int64_t x_c = dm.T * dm.W * dm.H, x_t = dm.W * dm.H;

  int64_t out_idx = 0;
  for (int64_t n = 0; n < dm.N; ++n) {
    for (int64_t oc = 0; oc < dm.Co; ++oc) {
      for (int64_t ot = 0; ot < dm.To; ++ot) {
        for (int64_t ow = 0; ow < dm.Wo; ++ow) {
          for (int64_t oh = 0; oh < dm.Ho; ++oh) {
            // gather the receptive field (zeros where padding reaches out)
            int64_t k = 0;
            for (int64_t ic = 0; ic < dm.Ci; ++ic) {
              for (int64_t dt = 0; dt < dm.D; ++dt) {
                const int64_t it = ot * geom.stride.d - geom.pad.d + dt;
                for (int64_t dw = 0; dw < dm.Fw; ++dw) {
                  const int64_t iw = ow * geom.stride.w - geom.pad.w + dw;
                  for (int64_t dh = 0; dh < dm.Fh; ++dh) {
                    const int64_t ih = oh * geom.stride.h - geom.pad.h + dh;
                    const bool inside = it >= 0 && it < dm.T && iw >= 0 && iw < dm.W &&
                                        ih >= 0 && ih < dm.H;
                    patch[static_cast<size_t>(k++)] =
                        inside ? xv[(n * dm.Ci + ic) * x_c + it * x_t + iw * dm.H + ih] : 0.0;
                  }
                }
              }
            }
            const double* wrow = wv + oc * patch_len;
            double acc = bv[oc];
            for (int64_t p = 0; p < patch_len; ++p) acc += wrow[p] * patch[static_cast<size_t>(p)];
            yv[out_idx++] = acc;
          }
        }
      }
    }
  }
  return y;
}

}  // namespace t3conv
