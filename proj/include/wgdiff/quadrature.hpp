#pragma once

#include <functional>
#include <vector>

namespace wgdiff {

struct GaussRule {
  std::vector<double> nodes;    ///< on [-1, 1]
  std::vector<double> weights;
};

/// n-point Gauss-Legendre rule (Newton iteration on P_n), cached per n.
const GaussRule& gauss_legendre(int n);

/// Composite Gauss-Legendre over [a, b] with `panels` equal panels.
double integrate_gauss(const std::function<double(double)>& f, double a, double b, int order, int panels = 1);

struct AdaptiveResult {
  double value = 0.0;
  double error = 0.0;
  int evaluations = 0;
};

/// Adaptive 7/15-point Gauss-Kronrod on [a, b] to absolute tolerance `tol`.
AdaptiveResult integrate_adaptive(const std::function<double(double)>& f, double a, double b, double tol,
                                  int max_depth = 40);

}  // namespace wgdiff
