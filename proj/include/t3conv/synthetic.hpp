#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "t3conv/affine.hpp"
#include "t3conv/rng.hpp"
#include "t3conv/tensor.hpp"

namespace t3conv {

// Motion kinds name the per-step transform applied to the sampling window
// (a camera move): translate-right pans the window toward +x, so rendered
// content drifts toward -x. Positive rot is counter-clockwise, matching the
// stored parameter convention.
enum class MotionKind {
  TranslateRight,
  TranslateLeft,
  TranslateUp,
  TranslateDown,
  ZoomIn,
  ZoomOut,
  RotateCW,
  RotateCCW,
  Static,
};

const char* motion_name(MotionKind kind);
MotionKind motion_from_name(const std::string& name);

struct MotionSpec {
  MotionKind kind = MotionKind::Static;
  // Per-frame magnitude: fraction of width for translations, degrees for
  // rotations, scale ratio (e.g. 0.05 for 5%) for zooms.
  double magnitude = 0.0;
  double jitter = 0.0;  // relative, uniform in [-jitter, +jitter]
  uint64_t seed = 0;
  int64_t frames = 8;
  int64_t width = 28;
  int64_t height = 28;

  // Rejects magnitudes that would drive the pattern fully out of frame.
  void validate() const;
  // The ground-truth transform for one step, jitter drawn from rng.
  AffineParams step(Rng& rng) const;
};

struct Clip {
  Tensor frames;  // [1, T, W, H], values in [0, 1]
  int label = 0;
  MotionKind kind = MotionKind::Static;
  std::vector<AffineParams> truth;  // truth[t] warps frame t into frame t+1
};

// n clips of one motion spec; clip i derives its own stream from
// (spec.seed, i), so results are independent of generation order. Base
// patterns are randomized per clip.
std::vector<Clip> generate(const MotionSpec& spec, int64_t n);

struct DatasetOptions {
  int64_t frames = 8;
  int64_t width = 28;
  int64_t height = 28;
  double jitter = 0.0;
  double translate_px = 2.0;  // per frame
  double rotate_deg = 6.0;    // per frame
  double zoom_ratio = 0.05;   // per frame
};

struct Dataset {
  Tensor clips;  // [N, 1, T, W, H]
  std::vector<int> labels;
  std::vector<MotionKind> kinds;
  std::vector<std::vector<AffineParams>> truths;
  std::vector<std::string> class_names;
  std::string family;  // "motion6" or "appearance6"
  DatasetOptions options;
  uint64_t seed = 0;

  int64_t size() const { return static_cast<int64_t>(labels.size()); }
  int64_t num_classes() const { return static_cast<int64_t>(class_names.size()); }
};

// Six classes defined purely by motion (label = kind), balanced to +-1:
// translate-right/left/up/down, zoom-in, zoom-out. Patterns are randomized
// so single frames carry no label signal.
Dataset make_motion_dataset(int64_t n, uint64_t seed, const DatasetOptions& opts = {});

// Six classes defined by static texture identity; every clip gets a motion
// drawn uniformly from the six motion kinds, independent of its label.
Dataset make_appearance_dataset(int64_t n, uint64_t seed, const DatasetOptions& opts = {});

// Directory layout: manifest.json plus one clips/clip_NNNNNN.tsr per clip.
// Content is a pure function of the generator inputs, so reruns are
// byte-identical.
void save_dataset(const std::string& dir, const Dataset& dataset);
Dataset load_dataset(const std::string& dir);

}  // namespace t3conv
