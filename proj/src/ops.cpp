#include "t3conv/ops.hpp"

#include <cmath>
#include <stdexcept>

namespace t3conv {

Tensor relu(const Tensor& x, Tape* tape) {
  Tensor y(x.shape());
  const double* xv = x.data();
  double* yv = y.data();
  for (int64_t i = 0; i < x.size(); ++i) yv[i] = xv[i] > 0.0 ? xv[i] : 0.0;
  if (tape) {
    Tensor xc = x, yc = y;
    tape->record("relu", [xc, yc]() mutable {
      const double* xv = xc.data();
      const double* up = yc.grad();
      double* gx = xc.grad();
      for (int64_t i = 0; i < xc.size(); ++i)
        if (xv[i] > 0.0) gx[i] += up[i];
    });
  }
  return y;
}

Tensor global_avg_pool(const Tensor& x, Tape* tape) {
  if (x.ndim() != 5)
    throw std::invalid_argument("global_avg_pool: expected [N,C,T,W,H], got " +
                                shape_str(x.shape()));
  const int64_t N = x.extent(0), C = x.extent(1);
  const int64_t vol = x.extent(2) * x.extent(3) * x.extent(4);
  Tensor y({N, C});
  const double* xv = x.data();
  double* yv = y.data();
  for (int64_t nc = 0; nc < N * C; ++nc) {
    double acc = 0.0;
    const double* base = xv + nc * vol;
    for (int64_t i = 0; i < vol; ++i) acc += base[i];
    yv[nc] = acc / static_cast<double>(vol);
  }
  if (tape) {
    Tensor xc = x, yc = y;
    tape->record("global_avg_pool", [xc, yc, N, C, vol]() mutable {
      const double* up = yc.grad();
      double* gx = xc.grad();
      const double inv = 1.0 / static_cast<double>(vol);
      for (int64_t nc = 0; nc < N * C; ++nc) {
        const double g = up[nc] * inv;
        double* base = gx + nc * vol;
        for (int64_t i = 0; i < vol; ++i) base[i] += g;
      }
    });
  }
  return y;
}

Tensor dense(const Tensor& x, const Tensor& weight, const Tensor& bias, Tape* tape) {
  if (x.ndim() != 2 || weight.ndim() != 2 || bias.ndim() != 1)
    throw std::invalid_argument("dense: expected x [N,F], weight [K,F], bias [K]");
  const int64_t N = x.extent(0), F = x.extent(1), K = weight.extent(0);
  if (weight.extent(1) != F || bias.extent(0) != K)
    throw std::invalid_argument("dense: shape mismatch, x " + shape_str(x.shape()) +
                                " weight " + shape_str(weight.shape()));
  Tensor y({N, K});
  const double* xv = x.data();
  const double* wv = weight.data();
  const double* bv = bias.data();
  double* yv = y.data();
  for (int64_t n = 0; n < N; ++n) {
    for (int64_t k = 0; k < K; ++k) {
      double acc = bv[k];
      for (int64_t f = 0; f < F; ++f) acc += wv[k * F + f] * xv[n * F + f];
      yv[n * K + k] = acc;
    }
  }
  if (tape) {
    Tensor xc = x, wc = weight, bc = bias, yc = y;
    tape->record("dense", [xc, wc, bc, yc, N, F, K]() mutable {
      const double* up = yc.grad();
      const double* xv = xc.data();
      const double* wv = wc.data();
      double* gx = xc.grad();
      double* gw = wc.grad();
      double* gb = bc.grad();
      for (int64_t n = 0; n < N; ++n) {
        for (int64_t k = 0; k < K; ++k) {
          const double u = up[n * K + k];
          if (u == 0.0) continue;
          gb[k] += u;
          for (int64_t f = 0; f < F; ++f) {
            gx[n * F + f] += u * wv[k * F + f];
            gw[k * F + f] += u * xv[n * F + f];
          }
        }
      }
    });
  }
  return y;
}

Tensor softmax(const Tensor& logits) {
  if (logits.ndim() != 2) throw std::invalid_argument("softmax: expected [N,K]");
  const int64_t N = logits.extent(0), K = logits.extent(1);
  Tensor p(logits.shape());
  const double* lv = logits.data();
  double* pv = p.data();
  for (int64_t n = 0; n < N; ++n) {
    const double* row = lv + n * K;
    double mx = row[0];
    for (int64_t k = 1; k < K; ++k) mx = std::max(mx, row[k]);
    double z = 0.0;
    for (int64_t k = 0; k < K; ++k) z += std::exp(row[k] - mx);
    for (int64_t k = 0; k < K; ++k) pv[n * K + k] = std::exp(row[k] - mx) / z;
  }
  return p;
}

Tensor softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels, Tape* tape) {
  if (logits.ndim() != 2) throw std::invalid_argument("softmax_cross_entropy: expected [N,K]");
  const int64_t N = logits.extent(0), K = logits.extent(1);
  if (static_cast<int64_t>(labels.size()) != N)
    throw std::invalid_argument("softmax_cross_entropy: labels/batch mismatch");
  for (int label : labels)
    if (label < 0 || label >= K)
      throw std::invalid_argument("softmax_cross_entropy: label out of range");
  const double* lv = logits.data();
  double total = 0.0;
  for (int64_t n = 0; n < N; ++n) {
    const double* row = lv + n * K;
    double mx = row[0];
    for (int64_t k = 1; k < K; ++k) mx = std::max(mx, row[k]);
    double z = 0.0;
    for (int64_t k = 0; k < K; ++k) z += std::exp(row[k] - mx);
    total += std::log(z) + mx - row[labels[static_cast<size_t>(n)]];
  }
  Tensor loss({1});
  loss[0] = total / static_cast<double>(N);
  if (tape) {
    Tensor lc = logits, out = loss;
    std::vector<int> lab = labels;
    tape->record("softmax_cross_entropy", [lc, out, lab, N, K]() mutable {
      const double u = out.grad()[0];
      if (u == 0.0) return;
      Tensor p = softmax(lc);
      const double* pv = p.data();
      double* gl = lc.grad();
      const double inv = u / static_cast<double>(N);
      for (int64_t n = 0; n < N; ++n)
        for (int64_t k = 0; k < K; ++k)
          gl[n * K + k] += inv * (pv[n * K + k] - (lab[static_cast<size_t>(n)] == k ? 1.0 : 0.0));
    });
  }
  return loss;
}

Tensor add(const Tensor& a, const Tensor& b, Tape* tape) {
  if (a.shape() != b.shape()) throw std::invalid_argument("add: shape mismatch");
  Tensor y(a.shape());
  const double* av = a.data();
  const double* bv = b.data();
  double* yv = y.data();
  for (int64_t i = 0; i < a.size(); ++i) yv[i] = av[i] + bv[i];
  if (tape) {
    Tensor ac = a, bc = b, yc = y;
    tape->record("add", [ac, bc, yc]() mutable {
      const double* up = yc.grad();
      double* ga = ac.grad();
      double* gb = bc.grad();
      for (int64_t i = 0; i < yc.size(); ++i) {
        ga[i] += up[i];
        gb[i] += up[i];
      }
    });
  }
  return y;
}

Tensor scale(const Tensor& x, double c, Tape* tape) {
  Tensor y(x.shape());
  const double* xv = x.data();
  double* yv = y.data();
  for (int64_t i = 0; i < x.size(); ++i) yv[i] = c * xv[i];
  if (tape) {
    Tensor xc = x, yc = y;
    tape->record("scale", [xc, yc, c]() mutable {
      const double* up = yc.grad();
      double* gx = xc.grad();
      for (int64_t i = 0; i < xc.size(); ++i) gx[i] += c * up[i];
    });
  }
  return y;
}

}  // namespace t3conv
