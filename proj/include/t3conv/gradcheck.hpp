#pragma once

#include <functional>
#include <string>
#include <vector>

#include "t3conv/tape.hpp"
#include "t3conv/tensor.hpp"

namespace t3conv {

struct GradCheckItem {
  std::string tensor;
  int64_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_err = 0.0;
  bool ok = true;
};

struct GradCheckReport {
  std::vector<GradCheckItem> items;  // one per checked element
  int64_t checked = 0;
  int64_t failed = 0;
  double max_rel_err = 0.0;

  bool pass() const { return failed == 0; }
  std::vector<GradCheckItem> failures() const;
};

// Central-difference check of d(loss)/d(params). loss_fn must rebuild the
// scalar loss on the given tape from the current parameter values. For each
// element the analytic gradient (one recorded backward pass) is compared
// against (f(x+h) - f(x-h)) / (2h) with relative error
// |a-n| / max(|a|, |n|, 1e-8); elements above tol are flagged. A non-finite
// loss during perturbation raises std::runtime_error naming the element.
GradCheckReport gradcheck(const std::function<Tensor(Tape&)>& loss_fn,
                          const std::vector<Tensor>& params, double h = 1e-5,
                          double tol = 1e-4);

}  // namespace t3conv
