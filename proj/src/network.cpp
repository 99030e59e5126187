#include "t3conv/network.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "t3conv/ops.hpp"
#include "t3conv/rng.hpp"
#include "t3conv/serialize.hpp"

namespace t3conv {

namespace fs = std::filesystem;

ModelSpec ModelSpec::tinyt(int64_t num_classes, const std::string& mode, int64_t in_channels,
                           int64_t frames, int64_t width, int64_t height, uint64_t seed) {
  if (mode != "3t" && mode != "3d" && mode != "2d")
    throw std::invalid_argument("tinyt: mode must be 3t, 3d or 2d, got " + mode);
  const bool flat = mode == "2d";
  const LayerKind conv_kind = mode == "3t" ? LayerKind::Conv3T : LayerKind::Conv3D;
  ModelSpec spec;
  spec.num_classes = num_classes;
  spec.in_channels = in_channels;
  spec.frames = flat ? 1 : frames;
  spec.width = width;
  spec.height = height;
  spec.seed = seed;
  spec.layers = {
      {conv_kind, "conv1", 8, 5, 5, flat ? 1 : 4},
      {LayerKind::Relu, "relu1", 0, 0, 0, 1},
      {conv_kind, "conv2", 16, 3, 3, flat ? 1 : 3},
      {LayerKind::Relu, "relu2", 0, 0, 0, 1},
      {LayerKind::GlobalAvgPool, "pool", 0, 0, 0, 1},
      {LayerKind::Dense, "head", num_classes, 0, 0, 1},
  };
  return spec;
}

void ModelSpec::validate() const {
  if (num_classes < 2) throw std::invalid_argument("ModelSpec: need at least 2 classes");
  if (layers.empty()) throw std::invalid_argument("ModelSpec: no layers");
  int heads = 0;
  for (const LayerPlan& plan : layers)
    if (plan.kind == LayerKind::Dense) ++heads;
  if (heads != 1) throw std::invalid_argument("ModelSpec: exactly one dense head required");
  if (layers.back().kind != LayerKind::Dense)
    throw std::invalid_argument("ModelSpec: head must be the last layer");
}

const std::string& layer_name(const Layer& layer) {
  return std::visit([](const auto& l) -> const std::string& { return l.name; }, layer);
}

Model Model::build(const ModelSpec& spec) {
  spec.validate();
  Model model;
  model.spec_ = spec;
  Rng rng(spec.seed);

  int64_t C = spec.in_channels, T = spec.frames, W = spec.width, H = spec.height;
  bool pooled = false;
  for (const LayerPlan& plan : spec.layers) {
    switch (plan.kind) {
      case LayerKind::Conv3T:
      case LayerKind::Conv3D: {
        if (pooled) throw std::invalid_argument("ModelSpec: conv after pooling");
        ConvGeometry geom;
        geom.in_channels = C;
        geom.out_channels = plan.filters;
        geom.filter = {plan.depth, plan.kernel_w, plan.kernel_h};
        const Dims3 out = geom.out_extents({T, W, H});  // validates shapes
        if (plan.kind == LayerKind::Conv3T) {
          Conv3TLayer layer;
          layer.name = plan.name;
          layer.geom = geom;
          for (int64_t f = 0; f < plan.filters; ++f) {
            Filter3T filter =
                Filter3T::random(C, plan.kernel_w, plan.kernel_h, plan.depth, rng);
            filter.base.set_name(plan.name + ".f" + std::to_string(f) + ".base");
            if (filter.thetas.defined())
              filter.thetas.set_name(plan.name + ".f" + std::to_string(f) + ".thetas");
            layer.filters.push_back(std::move(filter));
          }
          layer.bias = Tensor::zeros({plan.filters});
          layer.bias.set_name(plan.name + ".bias");
          model.layers_.emplace_back(std::move(layer));
        } else {
          Conv3DLayer layer;
          layer.name = plan.name;
          layer.geom = geom;
          layer.weights =
              Tensor::zeros({plan.filters, C, plan.depth, plan.kernel_w, plan.kernel_h});
          const double bound =
              std::sqrt(1.0 / static_cast<double>(C * plan.depth * plan.kernel_w * plan.kernel_h));
          for (double& v : layer.weights.values()) v = rng.uniform(-bound, bound);
          layer.weights.set_name(plan.name + ".weights");
          layer.bias = Tensor::zeros({plan.filters});
          layer.bias.set_name(plan.name + ".bias");
          model.layers_.emplace_back(std::move(layer));
        }
        C = plan.filters;
        T = out.d;
        W = out.w;
        H = out.h;
        break;
      }
      case LayerKind::Relu:
        model.layers_.emplace_back(ReluLayer{plan.name});
        break;
      case LayerKind::GlobalAvgPool:
        model.layers_.emplace_back(PoolLayer{plan.name});
        pooled = true;
        break;
      case LayerKind::Dense: {
        if (!pooled)
          throw std::invalid_argument("ModelSpec: dense head requires global pooling first");
        DenseLayer layer;
        layer.name = plan.name;
        layer.weight = Tensor::zeros({plan.filters, C});
        const double bound = std::sqrt(1.0 / static_cast<double>(C));
        for (double& v : layer.weight.values()) v = rng.uniform(-bound, bound);
        layer.weight.set_name(plan.name + ".weight");
        layer.bias = Tensor::zeros({plan.filters});
        layer.bias.set_name(plan.name + ".bias");
        model.layers_.emplace_back(std::move(layer));
        break;
      }
    }
  }
  return model;
}

int Model::layer_index(const std::string& name) const {
  for (size_t i = 0; i < layers_.size(); ++i)
    if (layer_name(layers_[i]) == name) return static_cast<int>(i);
  return -1;
}

Tensor Model::forward_to(const Tensor& clips, size_t upto, Tape* tape) const {
  if (upto >= layers_.size()) throw std::out_of_range("forward_to: layer index out of range");
  if (clips.ndim() != 5)
    throw std::invalid_argument("forward: clips must be [N,C,T,W,H], got " +
                                shape_str(clips.shape()));
  if (clips.extent(1) != spec_.in_channels || clips.extent(2) != spec_.frames ||
      clips.extent(3) != spec_.width || clips.extent(4) != spec_.height)
    throw std::invalid_argument("forward: clip shape " + shape_str(clips.shape()) +
                                " does not match the model input");
  Tensor x = clips;
  for (size_t i = 0; i <= upto; ++i) {
    const Layer& layer = layers_[i];
    if (const auto* conv3t = std::get_if<Conv3TLayer>(&layer)) {
      const int64_t Co = conv3t->geom.out_channels;
      const Filter3T& first = conv3t->filters.front();
      Tensor weights({Co, first.in_channels(), first.depth, first.width(), first.height()});
      const int64_t per = weights.size() / Co;
      for (int64_t oc = 0; oc < Co; ++oc) {
        Tensor dense_filter = materialize(conv3t->filters[static_cast<size_t>(oc)], tape);
        std::memcpy(weights.data() + oc * per, dense_filter.data(),
                    static_cast<size_t>(per) * sizeof(double));
        if (tape) {
          // scatter the stacked weight grad back into this filter's grad
          Tensor stacked = weights, part = dense_filter;
          tape->record("stack_filter", [stacked, part, oc, per]() mutable {
            const double* gs = stacked.grad() + oc * per;
            double* gp = part.grad();
            for (int64_t k = 0; k < per; ++k) gp[k] += gs[k];
          });
        }
      }
      x = conv3d_forward(x, weights, conv3t->bias, conv3t->geom, tape);
    } else if (const auto* conv3d = std::get_if<Conv3DLayer>(&layer)) {
      x = conv3d_forward(x, conv3d->weights, conv3d->bias, conv3d->geom, tape);
    } else if (std::holds_alternative<ReluLayer>(layer)) {
      x = relu(x, tape);
    } else if (std::holds_alternative<PoolLayer>(layer)) {
      x = global_avg_pool(x, tape);
    } else {
      const auto& head = std::get<DenseLayer>(layer);
      x = dense(x, head.weight, head.bias, tape);
    }
  }
  return x;
}

Tensor Model::forward(const Tensor& clips, Tape* tape) const {
  return forward_to(clips, layers_.size() - 1, tape);
}

std::vector<Model::Param> Model::parameters() const {
  std::vector<Param> params;
  for (const Layer& layer : layers_) {
    if (const auto* conv3t = std::get_if<Conv3TLayer>(&layer)) {
      for (const Filter3T& f : conv3t->filters) {
        params.push_back({f.base, false});
        if (f.thetas.defined()) params.push_back({f.thetas, true});
      }
      params.push_back({conv3t->bias, false});
    } else if (const auto* conv3d = std::get_if<Conv3DLayer>(&layer)) {
      params.push_back({conv3d->weights, false});
      params.push_back({conv3d->bias, false});
    } else if (const auto* head = std::get_if<DenseLayer>(&layer)) {
      params.push_back({head->weight, false});
      params.push_back({head->bias, false});
    }
  }
  return params;
}

std::vector<Tensor> Model::parameter_tensors() const {
  std::vector<Tensor> out;
  for (const Param& p : parameters()) out.push_back(p.tensor);
  return out;
}

int64_t Model::trainable_count() const {
  int64_t n = 0;
  for (const Param& p : parameters()) n += p.tensor.size();
  return n;
}

void Model::zero_grads() const {
  for (const Param& p : parameters()) {
    Tensor t = p.tensor;
    t.zero_grad();
  }
}

Model Model::densified() const {
  Model copy;
  copy.spec_ = spec_;
  for (const Layer& layer : layers_) {
    if (const auto* conv3t = std::get_if<Conv3TLayer>(&layer)) {
      Conv3DLayer dense_layer;
      dense_layer.name = conv3t->name;
      dense_layer.geom = conv3t->geom;
      const int64_t Co = conv3t->geom.out_channels;
      const Filter3T& first = conv3t->filters.front();
      dense_layer.weights =
          Tensor({Co, first.in_channels(), first.depth, first.width(), first.height()});
      const int64_t per = dense_layer.weights.size() / Co;
      for (int64_t oc = 0; oc < Co; ++oc) {
        Tensor w = materialize(conv3t->filters[static_cast<size_t>(oc)]);
        std::memcpy(dense_layer.weights.data() + oc * per, w.data(),
                    static_cast<size_t>(per) * sizeof(double));
      }
      dense_layer.bias = conv3t->bias.clone();
      copy.layers_.emplace_back(std::move(dense_layer));
    } else if (const auto* conv3d = std::get_if<Conv3DLayer>(&layer)) {
      Conv3DLayer dense_layer = *conv3d;
      dense_layer.weights = conv3d->weights.clone();
      dense_layer.bias = conv3d->bias.clone();
      copy.layers_.emplace_back(std::move(dense_layer));
    } else if (const auto* head = std::get_if<DenseLayer>(&layer)) {
      DenseLayer h = *head;
      h.weight = head->weight.clone();
      h.bias = head->bias.clone();
      copy.layers_.emplace_back(std::move(h));
    } else {
      copy.layers_.push_back(layer);
    }
  }
  return copy;
}

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw std::invalid_argument("TrainConfig: lr must be > 0");
  if (batch < 1) throw std::invalid_argument("TrainConfig: batch must be >= 1");
  if (epochs < 0) throw std::invalid_argument("TrainConfig: epochs must be >= 0");
  if (momentum < 0.0 || momentum >= 1.0)
    throw std::invalid_argument("TrainConfig: momentum must be in [0,1)");
}

SgdOptimizer::SgdOptimizer(const Model& model, const TrainConfig& cfg)
    : params_(model.parameters()), cfg_(cfg) {
  cfg.validate();
  velocity_.reserve(params_.size());
  for (const Model::Param& p : params_)
    velocity_.emplace_back(static_cast<size_t>(p.tensor.size()), 0.0);
}

void SgdOptimizer::step() {
  for (size_t pi = 0; pi < params_.size(); ++pi) {
    Tensor t = params_[pi].tensor;
    const double lr = cfg_.lr * (params_[pi].is_theta ? cfg_.theta_lr_mult : 1.0);
    double* v = velocity_[pi].data();
    double* w = t.data();
    const double* g = t.grad();
    for (int64_t i = 0; i < t.size(); ++i) {
      v[i] = cfg_.momentum * v[i] + (g[i] + cfg_.weight_decay * w[i]);
      w[i] -= lr * v[i];
    }
  }
}

namespace {

std::string find_nonfinite_layer(const Model& model, const Tensor& clips) {
  for (size_t i = 0; i < model.layers().size(); ++i) {
    Tensor out = model.forward_to(clips, i);
    if (!all_finite(out.values())) return layer_name(model.layers()[i]);
  }
  return "loss";
}

}  // namespace

double train_step(Model& model, const Batch& batch, SgdOptimizer& opt) {
  model.zero_grads();
  Tape tape;
  Tensor logits = model.forward(batch.clips, &tape);
  Tensor loss = softmax_cross_entropy(logits, batch.labels, &tape);
  if (!std::isfinite(loss[0]))
    throw std::runtime_error("train_step: non-finite loss; first bad layer: " +
                             find_nonfinite_layer(model, batch.clips));
  tape.backward_from(loss);
  opt.step();
  return loss[0];
}

double batch_loss(const Model& model, const Batch& batch) {
  Tensor logits = model.forward(batch.clips);
  Tensor loss = softmax_cross_entropy(logits, batch.labels);
  return loss[0];
}

namespace {

Tensor gather_clips(const Tensor& clips, const std::vector<int64_t>& idx) {
  const int64_t per = clips.size() / clips.extent(0);
  Shape shape = clips.shape();
  shape[0] = static_cast<int64_t>(idx.size());
  Tensor out(shape);
  for (size_t k = 0; k < idx.size(); ++k)
    std::memcpy(out.data() + static_cast<int64_t>(k) * per, clips.data() + idx[k] * per,
                static_cast<size_t>(per) * sizeof(double));
  return out;
}

}  // namespace

double accuracy(const Model& model, const Tensor& clips, const std::vector<int>& labels,
                int64_t eval_batch) {
  const int64_t n = clips.extent(0);
  if (n != static_cast<int64_t>(labels.size()))
    throw std::invalid_argument("accuracy: clips/labels mismatch");
  int64_t correct = 0;
  for (int64_t start = 0; start < n; start += eval_batch) {
    const int64_t stop = std::min(n, start + eval_batch);
    std::vector<int64_t> idx(static_cast<size_t>(stop - start));
    std::iota(idx.begin(), idx.end(), start);
    Tensor logits = model.forward(gather_clips(clips, idx));
    const int64_t K = logits.extent(1);
    for (int64_t row = 0; row < stop - start; ++row) {
      const double* lv = logits.data() + row * K;
      int64_t best = 0;
      for (int64_t k = 1; k < K; ++k)
        if (lv[k] > lv[best]) best = k;
      if (best == labels[static_cast<size_t>(start + row)]) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(n);
}

TrainResult train(Model& model, const Tensor& clips, const std::vector<int>& labels,
                  const TrainConfig& cfg, const Tensor* val_clips,
                  const std::vector<int>* val_labels) {
  cfg.validate();
  const int64_t n = clips.extent(0);
  if (n != static_cast<int64_t>(labels.size()))
    throw std::invalid_argument("train: clips/labels mismatch");
  SgdOptimizer opt(model, cfg);
  Rng shuffle_rng(Rng::mix(cfg.seed, 0xBA7C4));
  TrainResult result;
  std::vector<int64_t> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  int64_t step = 0;
  for (int64_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    // Fisher-Yates with our own rng; std::shuffle is implementation-defined
    for (int64_t i = n - 1; i > 0; --i)
      std::swap(order[static_cast<size_t>(i)],
                order[static_cast<size_t>(shuffle_rng.uniform_int(i + 1))]);
    for (int64_t start = 0; start < n; start += cfg.batch) {
      const int64_t stop = std::min(n, start + cfg.batch);
      std::vector<int64_t> idx(order.begin() + start, order.begin() + stop);
      Batch batch;
      batch.clips = gather_clips(clips, idx);
      for (int64_t i : idx) batch.labels.push_back(labels[static_cast<size_t>(i)]);
      const double loss = train_step(model, batch, opt);
      result.curve.push_back({epoch, step++, loss});
    }
    if (val_clips && val_labels)
      result.val_accuracy.push_back(accuracy(model, *val_clips, *val_labels));
  }
  return result;
}

namespace {

nlohmann::json plan_to_json(const LayerPlan& plan) {
  static const char* names[] = {"conv3t", "conv3d", "relu", "global_avg_pool", "dense"};
  return {{"kind", names[static_cast<int>(plan.kind)]},
          {"name", plan.name},
          {"filters", plan.filters},
          {"kernel_w", plan.kernel_w},
          {"kernel_h", plan.kernel_h},
          {"depth", plan.depth}};
}

LayerPlan plan_from_json(const nlohmann::json& j) {
  LayerPlan plan;
  const std::string kind = j["kind"].get<std::string>();
  if (kind == "conv3t")
    plan.kind = LayerKind::Conv3T;
  else if (kind == "conv3d")
    plan.kind = LayerKind::Conv3D;
  else if (kind == "relu")
    plan.kind = LayerKind::Relu;
  else if (kind == "global_avg_pool")
    plan.kind = LayerKind::GlobalAvgPool;
  else if (kind == "dense")
    plan.kind = LayerKind::Dense;
  else
    throw std::runtime_error("checkpoint: unknown layer kind " + kind);
  plan.name = j["name"].get<std::string>();
  plan.filters = j["filters"].get<int64_t>();
  plan.kernel_w = j["kernel_w"].get<int64_t>();
  plan.kernel_h = j["kernel_h"].get<int64_t>();
  plan.depth = j["depth"].get<int64_t>();
  return plan;
}

}  // namespace

void save_checkpoint(const std::string& dir, const Model& model,
                     const std::string& extra_state_json) {
  fs::create_directories(dir);
  const ModelSpec& spec = model.spec();
  nlohmann::json manifest;
  manifest["format"] = "t3conv-checkpoint-v1";
  manifest["num_classes"] = spec.num_classes;
  manifest["in_channels"] = spec.in_channels;
  manifest["frames"] = spec.frames;
  manifest["width"] = spec.width;
  manifest["height"] = spec.height;
  manifest["seed"] = spec.seed;
  manifest["layers"] = nlohmann::json::array();
  for (const LayerPlan& plan : spec.layers) manifest["layers"].push_back(plan_to_json(plan));
  if (!extra_state_json.empty())
    manifest["train_state"] = nlohmann::json::parse(extra_state_json);

  std::vector<BankLayer> bank;
  for (const Layer& layer : model.layers()) {
    if (const auto* conv3t = std::get_if<Conv3TLayer>(&layer)) {
      BankLayer bl;
      bl.name = conv3t->name;
      bl.out_channels = conv3t->geom.out_channels;
      bl.in_channels = conv3t->geom.in_channels;
      bl.width = conv3t->geom.filter.w;
      bl.height = conv3t->geom.filter.h;
      bl.depth = conv3t->geom.filter.d;
      bl.filters = conv3t->filters;
      bank.push_back(std::move(bl));
      save_tsr((fs::path(dir) / (conv3t->name + ".bias.tsr")).string(), conv3t->bias);
    } else if (const auto* conv3d = std::get_if<Conv3DLayer>(&layer)) {
      save_tsr((fs::path(dir) / (conv3d->name + ".weights.tsr")).string(), conv3d->weights);
      save_tsr((fs::path(dir) / (conv3d->name + ".bias.tsr")).string(), conv3d->bias);
    } else if (const auto* head = std::get_if<DenseLayer>(&layer)) {
      save_tsr((fs::path(dir) / (head->name + ".weight.tsr")).string(), head->weight);
      save_tsr((fs::path(dir) / (head->name + ".bias.tsr")).string(), head->bias);
    }
  }
  if (!bank.empty()) save_bank(dir, bank);

  std::ofstream out(fs::path(dir) / "model.json");
  if (!out) throw std::runtime_error("save_checkpoint: cannot write manifest in " + dir);
  out << manifest.dump(2) << '\n';
}

Model load_checkpoint(const std::string& dir) {
  std::ifstream in(fs::path(dir) / "model.json");
  if (!in) throw std::runtime_error("load_checkpoint: cannot open manifest in " + dir);
  nlohmann::json manifest = nlohmann::json::parse(in);
  ModelSpec spec;
  spec.num_classes = manifest["num_classes"].get<int64_t>();
  spec.in_channels = manifest["in_channels"].get<int64_t>();
  spec.frames = manifest["frames"].get<int64_t>();
  spec.width = manifest["width"].get<int64_t>();
  spec.height = manifest["height"].get<int64_t>();
  spec.seed = manifest["seed"].get<uint64_t>();
  for (const auto& j : manifest["layers"]) spec.layers.push_back(plan_from_json(j));

  Model model = Model::build(spec);
  bool has_bank = false;
  for (Layer& layer : model.layers())
    if (std::holds_alternative<Conv3TLayer>(layer)) has_bank = true;
  std::vector<BankLayer> bank;
  if (has_bank) bank = load_bank(dir);

  for (Layer& layer : model.layers()) {
    if (auto* conv3t = std::get_if<Conv3TLayer>(&layer)) {
      const BankLayer* bl = nullptr;
      for (const BankLayer& candidate : bank)
        if (candidate.name == conv3t->name) bl = &candidate;
      if (!bl) throw std::runtime_error("load_checkpoint: bank missing layer " + conv3t->name);
      for (size_t f = 0; f < conv3t->filters.size(); ++f) {
        std::memcpy(conv3t->filters[f].base.data(), bl->filters[f].base.data(),
                    static_cast<size_t>(bl->filters[f].base.size()) * sizeof(double));
        if (conv3t->filters[f].thetas.defined())
          std::memcpy(conv3t->filters[f].thetas.data(), bl->filters[f].thetas.data(),
                      static_cast<size_t>(bl->filters[f].thetas.size()) * sizeof(double));
      }
      Tensor bias = load_tsr((fs::path(dir) / (conv3t->name + ".bias.tsr")).string());
      std::memcpy(conv3t->bias.data(), bias.data(),
                  static_cast<size_t>(bias.size()) * sizeof(double));
    } else if (auto* conv3d = std::get_if<Conv3DLayer>(&layer)) {
      Tensor weights = load_tsr((fs::path(dir) / (conv3d->name + ".weights.tsr")).string());
      if (weights.shape() != conv3d->weights.shape())
        throw std::runtime_error("load_checkpoint: weight shape mismatch for " + conv3d->name);
      std::memcpy(conv3d->weights.data(), weights.data(),
                  static_cast<size_t>(weights.size()) * sizeof(double));
      Tensor bias = load_tsr((fs::path(dir) / (conv3d->name + ".bias.tsr")).string());
      std::memcpy(conv3d->bias.data(), bias.data(),
                  static_cast<size_t>(bias.size()) * sizeof(double));
    } else if (auto* head = std::get_if<DenseLayer>(&layer)) {
      Tensor weight = load_tsr((fs::path(dir) / (head->name + ".weight.tsr")).string());
      if (weight.shape() != head->weight.shape())
        throw std::runtime_error("load_checkpoint: head shape mismatch");
      std::memcpy(head->weight.data(), weight.data(),
                  static_cast<size_t>(weight.size()) * sizeof(double));
      Tensor bias = load_tsr((fs::path(dir) / (head->name + ".bias.tsr")).string());
      std::memcpy(head->bias.data(), bias.data(),
                  static_cast<size_t>(bias.size()) * sizeof(double));
    }
  }
  return model;
}

}  // namespace t3conv
