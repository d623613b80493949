#pragma once

namespace xlprime {

/// Regularized incomplete beta I_x(a, b). Requires a, b > 0 and 0 <= x <= 1;
/// throws Error(OutOfRange) otherwise. Absolute error below 1e-12.
double regularized_beta(double x, double a, double b);

/// P(F' >= f) for F' ~ F(d1, d2). Requires f >= 0 and d1, d2 > 0.
double f_upper_tail(double f, double d1, double d2);

} // namespace xlprime
