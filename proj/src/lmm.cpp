#include "xlprime/lmm.hpp"
#include "xlprime/error.hpp"
#include "xlprime/special.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <tuple>

namespace xlprime {

namespace {

constexpr double kLogLambdaMin = -18.420680743952367; // ln 1e-8
constexpr double kLogLambdaMax = 18.420680743952367;  // ln 1e8
constexpr int kGridPoints = 121;
constexpr double kLn2Pi = 1.8378770664093453;
constexpr int kParameters = 2;

} // namespace

RemlProfile::RemlProfile(const std::vector<double>& y, const std::vector<double>& x, const std::vector<std::string>& group)
{
    if (y.size() != x.size() || y.size() != group.size())
        throw Error(ErrorCode::DegenerateInput, "y, x and group must have equal lengths");
    for (size_t i = 0; i < y.size(); ++i)
        if (!std::isfinite(y[i]) || !std::isfinite(x[i]))
            throw Error(ErrorCode::NonFiniteInput, fmt::format("observation {} is not finite", i));

    std::vector<size_t> order(y.size());
    std::iota(order.begin(), order.end(), size_t{0});
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        return std::tie(group[a], x[a], y[a]) < std::tie(group[b], x[b], y[b]);
    });
    for (size_t k = 0; k < order.size(); ++k) {
        const size_t i = order[k];
        if (k == 0 || group[i] != group[order[k - 1]])
            starts_.push_back(k);
        y_.push_back(y[i]);
        x_.push_back(x[i]);
    }
    starts_.push_back(order.size());

    if (n_items() < 2 || n_obs() < 3)
        throw Error(ErrorCode::DegenerateInput, fmt::format("need at least 2 items and 3 observations (got {} and {})", n_items(), n_obs()));
    if (std::all_of(x_.begin(), x_.end(), [&](double v) { return v == x_.front(); }))
        throw Error(ErrorCode::DegenerateInput, "prime-type covariate is constant");
    if (std::all_of(y_.begin(), y_.end(), [&](double v) { return v == y_.front(); }))
        throw Error(ErrorCode::DegenerateInput, "response is constant");
}

RemlProfile::Evaluation RemlProfile::evaluate(double lambda) const
{
    const size_t n = y_.size();
    const size_t blocks = n_items();

    // Whitening: row j of block i minus a_i * (block mean), a_i = 1 - 1/sqrt(1 + lambda n_i).
    std::vector<double> c1(n), c2(n), r(n);
    double log_det_v = 0.0;
    for (size_t b = 0; b < blocks; ++b) {
        const size_t lo = starts_[b], hi = starts_[b + 1];
        const double ni = static_cast<double>(hi - lo);
        const double grow = lambda * ni;
        log_det_v += std::log1p(grow);
        const double shrink = -std::expm1(-0.5 * std::log1p(grow)); // a_i
        double sx = 0.0, sy = 0.0;
        for (size_t k = lo; k < hi; ++k)
            sx += x_[k], sy += y_[k];
        const double mx = shrink * sx / ni, my = shrink * sy / ni, m1 = shrink;
        for (size_t k = lo; k < hi; ++k) {
            c1[k] = 1.0 - m1;
            c2[k] = x_[k] - mx;
            r[k] = y_[k] - my;
        }
    }

    // Modified Gram-Schmidt on the two whitened columns, applied to y as well.
    auto dot = [n](const std::vector<double>& a, const std::vector<double>& b) {
        double s = 0.0;
        for (size_t k = 0; k < n; ++k)
            s += a[k] * b[k];
        return s;
    };
    const double r11 = std::sqrt(dot(c1, c1));
    for (auto& v : c1)
        v /= r11;
    const double r12 = dot(c1, c2);
    for (size_t k = 0; k < n; ++k)
        c2[k] -= r12 * c1[k];
    const double r22 = std::sqrt(dot(c2, c2));
    for (auto& v : c2)
        v /= r22;
    const double z1 = dot(c1, r);
    for (size_t k = 0; k < n; ++k)
        r[k] -= z1 * c1[k];
    const double z2 = dot(c2, r);
    for (size_t k = 0; k < n; ++k)
        r[k] -= z2 * c2[k];

    Evaluation e;
    e.beta[1] = z2 / r22;
    e.beta[0] = (z1 - r12 * e.beta[1]) / r11;
    e.rss = dot(r, r);
    e.r22 = r22;

    const double dof = static_cast<double>(n - kParameters);
    const double log_det_h = 2.0 * (std::log(r11) + std::log(r22));
    e.criterion = -0.5 * (dof * (1.0 + kLn2Pi + std::log(e.rss / dof)) + log_det_v + log_det_h);

    // Slope: rss' = -sum s_i^2/(1+lambda n_i)^2 over raw block residual sums,
    // (log det H)' = -sum g_i' H^-1 g_i with g_i = X_i'1/(1+lambda n_i).
    const double h11 = r11 * r11, h12 = r11 * r12, h22 = r12 * r12 + r22 * r22;
    const double det = h11 * h22 - h12 * h12;
    double d_rss = 0.0, d_log_det_v = 0.0, d_log_det_h = 0.0;
    for (size_t b = 0; b < blocks; ++b) {
        const size_t lo = starts_[b], hi = starts_[b + 1];
        const double ni = static_cast<double>(hi - lo);
        const double inv = 1.0 / (1.0 + lambda * ni);
        double sx = 0.0, s = 0.0;
        for (size_t k = lo; k < hi; ++k) {
            sx += x_[k];
            s += y_[k] - e.beta[0] - e.beta[1] * x_[k];
        }
        d_rss -= (s * inv) * (s * inv);
        d_log_det_v += ni * inv;
        const double g1 = ni * inv, g2 = sx * inv;
        d_log_det_h -= (h22 * g1 * g1 - 2.0 * h12 * g1 * g2 + h11 * g2 * g2) / det;
    }
    e.slope = -0.5 * (dof * d_rss / e.rss + d_log_det_v + d_log_det_h);
    return e;
}

LmmFit RemlProfile::assemble(double lambda, const Evaluation& e) const
{
    LmmFit fit;
    fit.beta = e.beta;
    fit.lambda = lambda;
    fit.sigma_e2 = e.rss / static_cast<double>(n_obs() - kParameters);
    fit.sigma_u2 = lambda * fit.sigma_e2;
    fit.se_beta1 = std::sqrt(fit.sigma_e2) / e.r22;
    fit.reml = e.criterion;
    fit.converged = true;
    fit.n_obs = n_obs();
    fit.n_items = n_items();
    return fit;
}

LmmFit RemlProfile::fit() const
{
    const auto at_log = [this](double t) { return criterion(std::exp(t)); };

    std::vector<double> grid(kGridPoints), values(kGridPoints);
    size_t best = 0;
    for (int k = 0; k < kGridPoints; ++k) {
        grid[k] = kLogLambdaMin + (kLogLambdaMax - kLogLambdaMin) * k / (kGridPoints - 1);
        values[k] = at_log(grid[k]);
        if (values[k] > values[best])
            best = k;
    }
    if (best == kGridPoints - 1)
        throw Error(ErrorCode::NoConvergence, fmt::format("restricted likelihood still increasing at lambda = 1e8 (best point lambda = {}, criterion = {})",
                                                          std::exp(grid[best]), values[best]));

    const Evaluation at_zero = evaluate(0.0);
    double best_lambda = 0.0;
    Evaluation best_eval = at_zero;

    const bool interior = best > 0 || at_zero.slope > 0.0;
    if (interior) {
        // Golden section on log lambda inside the grid bracket.
        double lo = best > 0 ? grid[best - 1] : kLogLambdaMin - 2.0 * (grid[1] - grid[0]);
        double hi = grid[best + 1];
        const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
        double a = hi - phi * (hi - lo), b = lo + phi * (hi - lo);
        double fa = at_log(a), fb = at_log(b);
        while (hi - lo > 1e-10 * std::max(1.0, std::abs(lo))) {
            if (fa >= fb) {
                hi = b, b = a, fb = fa;
                a = hi - phi * (hi - lo), fa = at_log(a);
            } else {
                lo = a, a = b, fa = fb;
                b = lo + phi * (hi - lo), fb = at_log(b);
            }
        }
        double t = 0.5 * (lo + hi);
        Evaluation candidate = evaluate(std::exp(t));

        // Polish on the slope: bisect its sign change in lambda.
        double left = best > 0 ? std::exp(grid[best - 1]) : 0.0;
        double right = std::exp(grid[best + 1]);
        if (evaluate(left).slope > 0.0 && evaluate(right).slope < 0.0) {
            for (int it = 0; it < 200 && right - left > 4.0 * std::numeric_limits<double>::epsilon() * right; ++it) {
                const double mid = 0.5 * (left + right);
                (evaluate(mid).slope > 0.0 ? left : right) = mid;
            }
            const double root = 0.5 * (left + right);
            const Evaluation polished = evaluate(root);
            if (polished.criterion >= candidate.criterion - 1e-12 * std::abs(candidate.criterion)) {
                candidate = polished;
                t = std::log(root);
            }
        }
        if (candidate.criterion > best_eval.criterion) {
            best_lambda = std::exp(t);
            best_eval = candidate;
        }
    }

    const double total = std::accumulate(y_.begin(), y_.end(), 0.0, [](double s, double v) { return s + v * v; });
    if (!(best_eval.rss > 1e-28 * total))
        throw Error(ErrorCode::DegenerateInput, "residual variance is zero");
    return assemble(best_lambda, best_eval);
}

LmmFit fit_lmm(const std::vector<double>& y, const std::vector<double>& x, const std::vector<std::string>& group)
{
    return RemlProfile(y, x, group).fit();
}

FTest f_test(const LmmFit& fit)
{
    if (!fit.converged)
        throw Error(ErrorCode::NoConvergence, "F test on a fit that did not converge");
    FTest out;
    out.df1 = 1.0;
    out.df2 = static_cast<double>(fit.n_obs) - static_cast<double>(fit.n_items) - kParameters + 1.0;
    if (out.df2 <= 0.0)
        throw Error(ErrorCode::DegenerateInput, fmt::format("denominator degrees of freedom {} not positive", out.df2));
    const double t = fit.beta[1] / fit.se_beta1;
    out.f = t * t;
    out.p = f_upper_tail(out.f, out.df1, out.df2);
    return out;
}

} // namespace xlprime
