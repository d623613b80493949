#include "xlprime/fdr.hpp"
#include "xlprime/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <numeric>

namespace xlprime {

std::vector<double> bh_adjust(const std::vector<double>& p)
{
    for (double v : p)
        if (!(v >= 0.0 && v <= 1.0))
            throw Error(ErrorCode::OutOfRange, fmt::format("p-value {} outside [0, 1]", v));
    const size_t m = p.size();
    std::vector<size_t> order(m);
    std::iota(order.begin(), order.end(), size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) { return p[a] < p[b]; });

    std::vector<double> q(m);
    double running = 1.0;
    for (size_t j = m; j-- > 0;) {
        running = std::min(running, static_cast<double>(m) * p[order[j]] / static_cast<double>(j + 1));
        // m p / m can round one ulp below p.
        q[order[j]] = std::max(running, p[order[j]]);
    }
    return q;
}

} // namespace xlprime
