#pragma once

#include <functional>
#include <span>
#include <vector>

namespace seqacq::numerics {

using ScalarFn = std::function<double(std::span<const double>)>;

// Central differences of f at x, one coordinate at a time.
std::vector<double> finite_difference_gradient(const ScalarFn& f,
                                               std::span<const double> x,
                                               double step = 1e-5);

// ||a - b|| / max(||a|| + ||b||, floor). Zero when both are zero.
double relative_error(std::span<const double> a, std::span<const double> b,
                      double floor = 1e-12);

}  // namespace seqacq::numerics
