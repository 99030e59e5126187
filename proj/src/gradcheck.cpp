#include "t3conv/gradcheck.hpp"

#include <cmath>
#include <stdexcept>

namespace t3conv {

std::vector<GradCheckItem> GradCheckReport::failures() const {
  std::vector<GradCheckItem> out;
  for (const auto& item : items)
    if (!item.ok) out.push_back(item);
  return out;
}

namespace {

double eval_loss(const std::function<Tensor(Tape&)>& loss_fn) {
  Tape tape;
  Tensor loss = loss_fn(tape);
  if (loss.size() != 1) throw std::invalid_argument("gradcheck: loss_fn must return a scalar");
  return loss[0];
}

std::string element_name(const Tensor& t, size_t pi, int64_t i) {
  const std::string base = t.name().empty() ? "param" + std::to_string(pi) : t.name();
  return base + "[" + std::to_string(i) + "]";
}

}  // namespace

GradCheckReport gradcheck(const std::function<Tensor(Tape&)>& loss_fn,
                          const std::vector<Tensor>& params, double h, double tol) {
  if (h <= 0.0) throw std::invalid_argument("gradcheck: h must be positive");

  // analytic pass
  for (const Tensor& p : params) {
    Tensor t = p;
    t.zero_grad();
    t.grad();  // ensure allocated so the snapshot below is well-defined
  }
  {
    Tape tape;
    Tensor loss = loss_fn(tape);
    if (loss.size() != 1) throw std::invalid_argument("gradcheck: loss_fn must return a scalar");
    if (!std::isfinite(loss[0]))
      throw std::runtime_error("gradcheck: non-finite loss at the unperturbed point");
    tape.backward_from(loss);
  }
  std::vector<Tensor> analytic;
  analytic.reserve(params.size());
  for (const Tensor& p : params) analytic.push_back(p.grad_snapshot());

  GradCheckReport report;
  for (size_t pi = 0; pi < params.size(); ++pi) {
    Tensor p = params[pi];
    double* v = p.data();
    for (int64_t i = 0; i < p.size(); ++i) {
      const double saved = v[i];
      v[i] = saved + h;
      const double f_plus = eval_loss(loss_fn);
      v[i] = saved - h;
      const double f_minus = eval_loss(loss_fn);
      v[i] = saved;
      if (!std::isfinite(f_plus) || !std::isfinite(f_minus))
        throw std::runtime_error("gradcheck: non-finite loss when perturbing " +
                                 element_name(p, pi, i));
      GradCheckItem item;
      item.tensor = p.name().empty() ? "param" + std::to_string(pi) : p.name();
      item.index = i;
      item.analytic = analytic[pi][i];
      item.numeric = (f_plus - f_minus) / (2.0 * h);
      item.rel_err = std::abs(item.analytic - item.numeric) /
                     std::max({std::abs(item.analytic), std::abs(item.numeric), 1e-8});
      item.ok = item.rel_err <= tol;
      report.max_rel_err = std::max(report.max_rel_err, item.rel_err);
      ++report.checked;
      if (!item.ok) ++report.failed;
      report.items.push_back(std::move(item));
    }
  }
  return report;
}

}  // namespace t3conv
