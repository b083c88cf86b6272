#pragma once

#include <functional>

namespace ktube {

// Adaptive Simpson integration. Stops when the local error estimate is below
// max(abs_tol, rel_tol * |whole integral estimate|) shared across subintervals.
double integrate(const std::function<double(double)>& f, double a, double b,
                 double abs_tol = 1e-10, double rel_tol = 1e-10, int max_depth = 60);

// Brent root bracketing: f(a) and f(b) must have opposite signs.
double brent_root(const std::function<double(double)>& f, double a, double b,
                  double xtol = 1e-14, int max_iter = 200);

}  // namespace ktube
