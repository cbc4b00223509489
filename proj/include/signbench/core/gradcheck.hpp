#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "signbench/core/error.hpp"
#include "signbench/core/tensor.hpp"

namespace signbench {

// Central-difference gradient oracle. The caller evaluates f once with a
// backward pass so each parameter's grad holds the analytic gradient, then
// this walks every parameter element and compares against
// (f(p+h) - f(p-h)) / 2h. Returns the max relative error
// |analytic - numeric| / max(1, |analytic|).
inline double finite_diff_check(const std::function<double()>& f,
                                const std::vector<Tensor>& params, double h = 1e-5) {
  if (h <= 0.0) throw ContractError("finite_diff_check: h must be positive");
  double worst = 0.0;
  for (const Tensor& p : params) {
    if (!p.has_grad())
      throw ContractError("finite_diff_check: parameter has no analytic grad; run backward first");
    auto& v = const_cast<Tensor&>(p).values();
    const auto& g = p.grad();
    for (size_t i = 0; i < v.size(); ++i) {
      double keep = v[i];
      v[i] = keep + h;
      double up = f();
      v[i] = keep - h;
      double dn = f();
      v[i] = keep;
      if (!std::isfinite(up) || !std::isfinite(dn))
        throw NumericError("finite_diff_check: non-finite objective during probing");
      double numeric = (up - dn) / (2.0 * h);
      double rel = std::fabs(g[i] - numeric) / std::max(1.0, std::fabs(g[i]));
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

// Convenience wrapper: builds the loss via `make_loss` on a fresh tape,
// runs backward, then cross-checks each listed parameter.
inline double gradcheck(const std::function<Tensor(Tape&)>& make_loss,
                        const std::vector<Tensor>& params, double h = 1e-5) {
  for (const Tensor& p : params) const_cast<Tensor&>(p).zero_grad();
  Tape tape;
  Tensor loss = make_loss(tape);
  tape.backward(loss);
  auto eval = [&]() {
    Tape t2;
    return make_loss(t2).item();
  };
  return finite_diff_check(eval, params, h);
}

}  // namespace signbench
