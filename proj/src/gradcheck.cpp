#include "san/gradcheck.hpp"

#include <cmath>

namespace san {

double grad_check(const GradCheckFn& f, std::vector<DTensor> inputs, double eps) {
  for (auto& t : inputs) {
    t.set_requires_grad(true);
    t.zero_grad();
  }
  DTape tape;
  DTensor loss = f(inputs, &tape);
  check(loss.numel() == 1, "grad_check function must return a scalar");
  tape.backward(loss);

  std::vector<std::vector<double>> analytic(inputs.size());
  for (size_t t = 0; t < inputs.size(); ++t) {
    if (inputs[t].has_grad()) {
      auto g = inputs[t].grad();
      analytic[t].assign(g.begin(), g.end());
    } else {
      analytic[t].assign(static_cast<size_t>(inputs[t].numel()), 0.0);
    }
  }

  double max_rel = 0.0;
  for (size_t t = 0; t < inputs.size(); ++t) {
    auto vals = inputs[t].mutable_data();
    for (size_t i = 0; i < vals.size(); ++i) {
      const double orig = vals[i];
      vals[i] = orig + eps;
      const double up = f(inputs, nullptr).item();
      vals[i] = orig - eps;
      const double down = f(inputs, nullptr).item();
      vals[i] = orig;
      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic[t][i];
      const double rel =
          std::fabs(a - numeric) / std::max({1.0, std::fabs(a), std::fabs(numeric)});
      max_rel = std::max(max_rel, rel);
    }
  }
  return max_rel;
}

}  // namespace san
