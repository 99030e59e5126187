#pragma once

#include <functional>
#include <vector>

#include "t3conv/tensor.hpp"

namespace t3conv {

// Reverse-mode tape. Each differentiable op appends one node during the
// forward pass; a node's rule adds into the grad buffers of the op's inputs,
// reading the grads of its outputs. backward() replays the nodes
// newest-first and leaves the tape intact, so running it twice accumulates
// every gradient twice. Tensors are treated as immutable once recorded;
// parameter updates happen between tapes.
class Tape {
 public:
  struct Node {
    const char* op;
    std::function<void()> rule;
  };

  void record(const char* op, std::function<void()> rule) {
    nodes_.push_back(Node{op, std::move(rule)});
  }

  void backward() {
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) it->rule();
  }

  // Seeds d(loss)/d(loss) = 1 on a scalar tensor, then replays the tape.
  void backward_from(Tensor& loss) {
    if (loss.size() != 1) throw std::invalid_argument("backward_from: loss must be scalar");
    loss.grad()[0] += 1.0;
    backward();
  }

  std::size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

 private:
  std::vector<Node> nodes_;
};

}  // namespace t3conv
