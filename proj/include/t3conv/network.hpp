#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "t3conv/conv.hpp"
#include "t3conv/filter3t.hpp"
#include "t3conv/tape.hpp"
#include "t3conv/tensor.hpp"

namespace t3conv {

enum class LayerKind { Conv3T, Conv3D, Relu, GlobalAvgPool, Dense };

struct LayerPlan {
  LayerKind kind = LayerKind::Relu;
  std::string name;
  int64_t filters = 0;  // conv/dense output size
  int64_t kernel_w = 0;
  int64_t kernel_h = 0;
  int64_t depth = 1;  // temporal filter extent
};

struct ModelSpec {
  std::vector<LayerPlan> layers;
  int64_t num_classes = 0;
  int64_t in_channels = 1;
  int64_t frames = 8;
  int64_t width = 28;
  int64_t height = 28;
  uint64_t seed = 1;

  // Reference architecture: conv(8 filters 5x5 depth 4) -> relu ->
  // conv(16 filters 3x3 depth 3) -> relu -> global mean pool -> dense head.
  // mode "3t" builds factorized conv layers, "3d" dense ones, "2d" dense
  // layers of depth 1 (single-frame input).
  static ModelSpec tinyt(int64_t num_classes, const std::string& mode, int64_t in_channels = 1,
                         int64_t frames = 8, int64_t width = 28, int64_t height = 28,
                         uint64_t seed = 1);

  void validate() const;
};

struct Conv3TLayer {
  std::string name;
  ConvGeometry geom;
  std::vector<Filter3T> filters;
  Tensor bias;
};

struct Conv3DLayer {
  std::string name;
  ConvGeometry geom;
  Tensor weights;  // [C_out, C_in, D, W, H]
  Tensor bias;
};

struct ReluLayer {
  std::string name;
};

struct PoolLayer {
  std::string name;
};

struct DenseLayer {
  std::string name;
  Tensor weight;  // [K, F]
  Tensor bias;    // [K]
};

using Layer = std::variant<Conv3TLayer, Conv3DLayer, ReluLayer, PoolLayer, DenseLayer>;

const std::string& layer_name(const Layer& layer);

class Model {
 public:
  static Model build(const ModelSpec& spec);

  const ModelSpec& spec() const { return spec_; }
  std::vector<Layer>& layers() { return layers_; }
  const std::vector<Layer>& layers() const { return layers_; }
  int layer_index(const std::string& name) const;  // -1 when absent

  Tensor forward(const Tensor& clips, Tape* tape = nullptr) const;
  // Output of layers [0, upto]; upto == layers().size()-1 gives the logits.
  Tensor forward_to(const Tensor& clips, size_t upto, Tape* tape = nullptr) const;

  // All trainable tensors, in a stable order; theta tensors are flagged so
  // the optimizer can scale their rate.
  struct Param {
    Tensor tensor;
    bool is_theta = false;
  };
  std::vector<Param> parameters() const;
  std::vector<Tensor> parameter_tensors() const;
  int64_t trainable_count() const;
  void zero_grads() const;

  // Replaces every factorized conv layer by a dense one holding the
  // materialized weights (used by the equivalence checks).
  Model densified() const;

 private:
  ModelSpec spec_;
  std::vector<Layer> layers_;
};

struct TrainConfig {
  double lr = 0.05;
  double momentum = 0.9;
  int64_t batch = 8;
  int64_t epochs = 20;
  uint64_t seed = 1;
  double weight_decay = 0.0;
  double theta_lr_mult = 1.0;

  void validate() const;
};

// SGD with classical momentum: v = mu*v + (g + wd*w); w -= lr*v.
class SgdOptimizer {
 public:
  SgdOptimizer(const Model& model, const TrainConfig& cfg);
  void step();

 private:
  std::vector<Model::Param> params_;
  std::vector<std::vector<double>> velocity_;
  TrainConfig cfg_;
};

struct Batch {
  Tensor clips;  // [N, C, T, W, H]
  std::vector<int> labels;
};

// One forward/backward/update. Throws std::runtime_error naming the first
// layer with a non-finite output if the loss diverges.
double train_step(Model& model, const Batch& batch, SgdOptimizer& opt);

// Forward-only loss/accuracy.
double batch_loss(const Model& model, const Batch& batch);
double accuracy(const Model& model, const Tensor& clips, const std::vector<int>& labels,
                int64_t eval_batch = 32);

struct TrainRecord {
  int64_t epoch = 0;
  int64_t step = 0;
  double loss = 0.0;
};

struct TrainResult {
  std::vector<TrainRecord> curve;
  std::vector<double> val_accuracy;  // one entry per epoch when val data given
};

// Deterministic epoch loop: seeded shuffle, fixed batch order.
TrainResult train(Model& model, const Tensor& clips, const std::vector<int>& labels,
                  const TrainConfig& cfg, const Tensor* val_clips = nullptr,
                  const std::vector<int>* val_labels = nullptr);

// Checkpoint directory: model.json manifest + filter-bank files for
// factorized layers + .tsr weights for dense layers and the head.
void save_checkpoint(const std::string& dir, const Model& model,
                     const std::string& extra_state_json = "");
Model load_checkpoint(const std::string& dir);

}  // namespace t3conv
