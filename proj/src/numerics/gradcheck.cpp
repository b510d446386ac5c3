#include "seqacq/numerics/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "seqacq/errors.hpp"

namespace seqacq::numerics {

std::vector<double> finite_difference_gradient(const ScalarFn& f,
                                               std::span<const double> x,
                                               double step) {
  std::vector<double> point(x.begin(), x.end());
  std::vector<double> grad(x.size());
  for (std::size_t k = 0; k < point.size(); ++k) {
    const double saved = point[k];
    point[k] = saved + step;
    const double up = f(point);
    point[k] = saved - step;
    const double down = f(point);
    point[k] = saved;
    grad[k] = (up - down) / (2.0 * step);
  }
  return grad;
}

double relative_error(std::span<const double> a, std::span<const double> b,
                      double floor) {
  if (a.size() != b.size()) throw ShapeError("relative_error: size mismatch");
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    diff += (a[k] - b[k]) * (a[k] - b[k]);
    na += a[k] * a[k];
    nb += b[k] * b[k];
  }
  diff = std::sqrt(diff);
  const double denom = std::sqrt(na) + std::sqrt(nb);
  if (diff == 0.0) return 0.0;
  return diff / std::max(denom, floor);
}

}  // namespace seqacq::numerics
