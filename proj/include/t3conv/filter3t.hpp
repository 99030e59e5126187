#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "t3conv/affine.hpp"
#include "t3conv/rng.hpp"
#include "t3conv/tape.hpp"
#include "t3conv/tensor.hpp"

namespace t3conv {

// Temporally factorized filter: a 2-d base slice shared by every temporal
// position plus one similarity transform per slice-to-slice step. thetas has
// shape [depth-1, 4] with rows (scale, rot, tx, ty); step t maps slice t to
// slice t+1 and is shared across the filter's input channels.
struct Filter3T {
  Tensor base;    // [C_in, W, H]
  Tensor thetas;  // [depth-1, 4]; undefined when depth == 1
  int64_t depth = 1;

  int64_t in_channels() const { return base.extent(0); }
  int64_t width() const { return base.extent(1); }
  int64_t height() const { return base.extent(2); }
  int64_t steps() const { return depth - 1; }

  AffineParams step_params(int64_t t) const;
  void set_step_params(int64_t t, const AffineParams& p);
  void add_step_grad(int64_t t, const AffineParams& g);

  // Trainable scalars in this filter: C_in*W*H + 4*(depth-1).
  int64_t param_count() const;

  // Zeroed base, identity steps.
  static Filter3T make(int64_t in_channels, int64_t width, int64_t height, int64_t depth);
  // Base drawn uniform in +-sqrt(1/(C_in*W*H)), identity steps.
  static Filter3T random(int64_t in_channels, int64_t width, int64_t height, int64_t depth,
                         Rng& rng);
};

void set_identity_thetas(Tensor& thetas);

// (factorized, dense) trainable-scalar counts for one filter of the given
// geometry: (C_in*W*H + 4*(D-1), C_in*W*H*D).
std::pair<int64_t, int64_t> param_count(int64_t in_channels, int64_t width, int64_t height,
                                        int64_t depth);

// Expands the recurrence into a dense [C_in, depth, W, H] filter: slice 0 is
// the base, slice t+1 resamples slice t through step t's transform. When a
// tape is given the whole chain is recorded, so backward fills the grads of
// both base and thetas (the base accumulates contributions from every
// slice).
Tensor materialize(const Filter3T& filter, Tape* tape = nullptr);

// Builds one Filter3T per output channel of a dense 2-d bank
// [C_out, C_in, W, H], with identity steps so every temporal slice equals
// the base. With scale_for_depth the base is divided by depth, which keeps
// the depth-summed response on temporally constant input equal to the
// source filter's 2-d response.
std::vector<Filter3T> import_2d(const Tensor& bank, int64_t depth,
                                bool scale_for_depth = true);

// Filter-bank files: a JSON manifest listing layer geometry, one .tsr of
// stacked bases per layer, and a single CSV of theta rows
// (layer,filter,step,s,r,tx,ty) with 1-based steps.
struct BankLayer {
  std::string name;
  int64_t out_channels = 0;
  int64_t in_channels = 0;
  int64_t width = 0;
  int64_t height = 0;
  int64_t depth = 1;
  std::vector<Filter3T> filters;
};

void save_bank(const std::string& dir, const std::vector<BankLayer>& layers);
std::vector<BankLayer> load_bank(const std::string& dir);

}  // namespace t3conv
