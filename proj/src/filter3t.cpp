#include "t3conv/filter3t.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "t3conv/serialize.hpp"

namespace t3conv {

namespace {

void check_step(const Filter3T& f, int64_t t) {
  if (t < 0 || t >= f.steps())
    throw std::out_of_range("Filter3T: step " + std::to_string(t) + " of " +
                            std::to_string(f.steps()));
}

Tensor slice_channel(const Tensor& volume, int64_t c, int64_t W, int64_t H) {
  Tensor s({W, H});
  std::memcpy(s.data(), volume.data() + c * W * H, static_cast<size_t>(W * H) * sizeof(double));
  return s;
}

}  // namespace

AffineParams Filter3T::step_params(int64_t t) const {
  check_step(*this, t);
  const double* row = thetas.data() + t * 4;
  return AffineParams{row[0], row[1], row[2], row[3]};
}

void Filter3T::set_step_params(int64_t t, const AffineParams& p) {
  check_step(*this, t);
  double* row = thetas.data() + t * 4;
  row[0] = p.scale;
  row[1] = p.rot;
  row[2] = p.tx;
  row[3] = p.ty;
}

void Filter3T::add_step_grad(int64_t t, const AffineParams& g) {
  check_step(*this, t);
  double* row = thetas.grad() + t * 4;
  row[0] += g.scale;
  row[1] += g.rot;
  row[2] += g.tx;
  row[3] += g.ty;
}

int64_t Filter3T::param_count() const { return base.size() + 4 * steps(); }

void set_identity_thetas(Tensor& thetas) {
  if (!thetas.defined()) return;
  double* row = thetas.data();
  for (int64_t t = 0; t < thetas.extent(0); ++t, row += 4) {
    row[0] = 1.0;
    row[1] = 0.0;
    row[2] = 0.0;
    row[3] = 0.0;
  }
}

Filter3T Filter3T::make(int64_t in_channels, int64_t width, int64_t height, int64_t depth) {
  if (depth < 1) throw std::invalid_argument("Filter3T: depth must be >= 1");
  Filter3T f;
  f.base = Tensor::zeros({in_channels, width, height});
  f.depth = depth;
  if (depth > 1) {
    f.thetas = Tensor::zeros({depth - 1, 4});
    set_identity_thetas(f.thetas);
  }
  return f;
}

Filter3T Filter3T::random(int64_t in_channels, int64_t width, int64_t height, int64_t depth,
                          Rng& rng) {
  Filter3T f = make(in_channels, width, height, depth);
  const double bound = std::sqrt(1.0 / static_cast<double>(in_channels * width * height));
  for (double& v : f.base.values()) v = rng.uniform(-bound, bound);
  return f;
}

std::pair<int64_t, int64_t> param_count(int64_t in_channels, int64_t width, int64_t height,
                                        int64_t depth) {
  if (in_channels < 1 || width < 1 || height < 1 || depth < 1)
    throw std::invalid_argument("param_count: all extents must be >= 1");
  const int64_t spatial = in_channels * width * height;
  return {spatial + 4 * (depth - 1), spatial * depth};
}

Tensor materialize(const Filter3T& filter, Tape* tape) {
  const int64_t C = filter.in_channels(), W = filter.width(), H = filter.height();
  const int64_t D = filter.depth;
  Tensor dense({C, D, W, H});
  const int64_t plane = W * H;

  // slice 0 = base
  for (int64_t c = 0; c < C; ++c)
    std::memcpy(dense.data() + (c * D + 0) * plane, filter.base.data() + c * plane,
                static_cast<size_t>(plane) * sizeof(double));

  for (int64_t t = 0; t < D - 1; ++t) {
    const SamplingGrid grid = make_grid(compose(filter.step_params(t)), W, H);
    for (int64_t c = 0; c < C; ++c) {
      Tensor prev({W, H});
      std::memcpy(prev.data(), dense.data() + (c * D + t) * plane,
                  static_cast<size_t>(plane) * sizeof(double));
      Tensor next = bilinear_sample(prev, grid);
      std::memcpy(dense.data() + (c * D + t + 1) * plane, next.data(),
                  static_cast<size_t>(plane) * sizeof(double));
    }
  }

  if (tape) {
    Filter3T f = filter;  // shares base/theta storage
    Tensor out = dense;
    tape->record("materialize", [f, out]() mutable {
      const int64_t C = f.in_channels(), W = f.width(), H = f.height(), D = f.depth;
      const int64_t plane = W * H;
      const double* dense_v = out.data();
      const double* dense_g = out.grad();
      // Running upstream per channel, walked from the last slice back to the
      // base; each step adds the dense slice's own gradient before crossing
      // the warp.
      std::vector<Tensor> carry(static_cast<size_t>(C));
      for (int64_t c = 0; c < C; ++c) {
        carry[c] = Tensor({W, H});
        std::memcpy(carry[c].data(), dense_g + (c * D + D - 1) * plane,
                    static_cast<size_t>(plane) * sizeof(double));
      }
      for (int64_t t = D - 2; t >= 0; --t) {
        const AffineParams params = f.step_params(t);
        AffineParams step_grad{0.0, 0.0, 0.0, 0.0};
        for (int64_t c = 0; c < C; ++c) {
          Tensor prev({W, H});
          std::memcpy(prev.data(), dense_v + (c * D + t) * plane,
                      static_cast<size_t>(plane) * sizeof(double));
          WarpGrads grads = bilinear_backward(prev, params, carry[c]);
          step_grad.scale += grads.params.scale;
          step_grad.rot += grads.params.rot;
          step_grad.tx += grads.params.tx;
          step_grad.ty += grads.params.ty;
          double* cv = carry[c].data();
          const double* gv = grads.source.data();
          const double* dg = dense_g + (c * D + t) * plane;
          for (int64_t k = 0; k < plane; ++k) cv[k] = gv[k] + dg[k];
        }
        f.add_step_grad(t, step_grad);
      }
      double* bg = f.base.grad();
      for (int64_t c = 0; c < C; ++c) {
        const double* cv = carry[c].data();
        for (int64_t k = 0; k < plane; ++k) bg[c * plane + k] += cv[k];
      }
    });
  }
  return dense;
}

std::vector<Filter3T> import_2d(const Tensor& bank, int64_t depth, bool scale_for_depth) {
  if (bank.ndim() != 4)
    throw std::invalid_argument("import_2d: bank must be [C_out, C_in, W, H], got " +
                                shape_str(bank.shape()));
  if (depth < 1) throw std::invalid_argument("import_2d: depth must be >= 1");
  const int64_t Co = bank.extent(0), Ci = bank.extent(1), W = bank.extent(2), H = bank.extent(3);
  const double scale = scale_for_depth ? 1.0 / static_cast<double>(depth) : 1.0;
  std::vector<Filter3T> filters;
  filters.reserve(static_cast<size_t>(Co));
  for (int64_t oc = 0; oc < Co; ++oc) {
    Filter3T f = Filter3T::make(Ci, W, H, depth);
    const double* src = bank.data() + oc * Ci * W * H;
    double* dst = f.base.data();
    for (int64_t k = 0; k < Ci * W * H; ++k) dst[k] = src[k] * scale;
    filters.push_back(std::move(f));
  }
  return filters;
}

void save_bank(const std::string& dir, const std::vector<BankLayer>& layers) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  nlohmann::json manifest;
  manifest["layers"] = nlohmann::json::array();
  std::vector<std::vector<std::string>> theta_rows;
  for (const BankLayer& layer : layers) {
    manifest["layers"].push_back({{"name", layer.name},
                                  {"C_out", layer.out_channels},
                                  {"C_in", layer.in_channels},
                                  {"W", layer.width},
                                  {"H", layer.height},
                                  {"D", layer.depth}});
    Tensor stacked({layer.out_channels, layer.in_channels, layer.width, layer.height});
    const int64_t per = layer.in_channels * layer.width * layer.height;
    for (int64_t oc = 0; oc < layer.out_channels; ++oc) {
      const Filter3T& f = layer.filters[static_cast<size_t>(oc)];
      std::memcpy(stacked.data() + oc * per, f.base.data(),
                  static_cast<size_t>(per) * sizeof(double));
      for (int64_t t = 0; t < f.steps(); ++t) {
        const AffineParams p = f.step_params(t);
        theta_rows.push_back({layer.name, std::to_string(oc), std::to_string(t + 1),
                              fmt_double(p.scale), fmt_double(p.rot), fmt_double(p.tx),
                              fmt_double(p.ty)});
      }
    }
    save_tsr((fs::path(dir) / (layer.name + ".base.tsr")).string(), stacked);
  }
  std::ofstream out(fs::path(dir) / "bank.json");
  if (!out) throw std::runtime_error("save_bank: cannot open manifest in " + dir);
  out << manifest.dump(2) << '\n';
  save_csv((fs::path(dir) / "thetas.csv").string(),
           {"layer", "filter", "step", "s", "r", "tx", "ty"}, theta_rows);
}

std::vector<BankLayer> load_bank(const std::string& dir) {
  namespace fs = std::filesystem;
  std::ifstream in(fs::path(dir) / "bank.json");
  if (!in) throw std::runtime_error("load_bank: cannot open manifest in " + dir);
  nlohmann::json manifest = nlohmann::json::parse(in);
  std::vector<BankLayer> layers;
  for (const auto& entry : manifest["layers"]) {
    BankLayer layer;
    layer.name = entry["name"].get<std::string>();
    layer.out_channels = entry["C_out"].get<int64_t>();
    layer.in_channels = entry["C_in"].get<int64_t>();
    layer.width = entry["W"].get<int64_t>();
    layer.height = entry["H"].get<int64_t>();
    layer.depth = entry["D"].get<int64_t>();
    Tensor stacked = load_tsr((fs::path(dir) / (layer.name + ".base.tsr")).string());
    const Shape expect{layer.out_channels, layer.in_channels, layer.width, layer.height};
    if (stacked.shape() != expect)
      throw std::runtime_error("load_bank: base bank shape mismatch for layer " + layer.name);
    const int64_t per = layer.in_channels * layer.width * layer.height;
    for (int64_t oc = 0; oc < layer.out_channels; ++oc) {
      Filter3T f = Filter3T::make(layer.in_channels, layer.width, layer.height, layer.depth);
      std::memcpy(f.base.data(), stacked.data() + oc * per,
                  static_cast<size_t>(per) * sizeof(double));
      layer.filters.push_back(std::move(f));
    }
    layers.push_back(std::move(layer));
  }
  CsvTable thetas = load_csv((fs::path(dir) / "thetas.csv").string());
  const int c_layer = thetas.column("layer"), c_filter = thetas.column("filter");
  const int c_step = thetas.column("step");
  const int c_s = thetas.column("s"), c_r = thetas.column("r");
  const int c_tx = thetas.column("tx"), c_ty = thetas.column("ty");
  if (c_layer < 0 || c_filter < 0 || c_step < 0 || c_s < 0 || c_r < 0 || c_tx < 0 || c_ty < 0)
    throw std::runtime_error("load_bank: thetas.csv missing required columns");
  for (const auto& row : thetas.rows) {
    BankLayer* layer = nullptr;
    for (BankLayer& l : layers)
      if (l.name == row[static_cast<size_t>(c_layer)]) layer = &l;
    if (!layer) throw std::runtime_error("load_bank: theta row for unknown layer");
    const int64_t oc = std::stoll(row[static_cast<size_t>(c_filter)]);
    const int64_t step = std::stoll(row[static_cast<size_t>(c_step)]);
    AffineParams p{std::stod(row[static_cast<size_t>(c_s)]),
                   std::stod(row[static_cast<size_t>(c_r)]),
                   std::stod(row[static_cast<size_t>(c_tx)]),
                   std::stod(row[static_cast<size_t>(c_ty)])};
    layer->filters.at(static_cast<size_t>(oc)).set_step_params(step - 1, p);
  }
  return layers;
}

}  // namespace t3conv
