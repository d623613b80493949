#pragma once

#include <vector>

namespace xlprime {

/// Benjamini-Hochberg step-up adjustment, returned in input order.
/// q(i) = min(1, min over j >= i of m p(j) / j) on the ascending ranks.
/// Throws Error(OutOfRange) for values outside [0, 1].
std::vector<double> bh_adjust(const std::vector<double>& p);

} // namespace xlprime
