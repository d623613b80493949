#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

namespace xlprime {

/// Random-intercept model y = b0 + b1 x + u_item + e fitted by REML.
struct LmmFit {
    std::array<double, 2> beta{};
    double se_beta1 = 0.0;
    double sigma_u2 = 0.0;
    double sigma_e2 = 0.0;
    double lambda = 0.0; // sigma_u2 / sigma_e2
    double reml = 0.0;   // restricted log-likelihood at lambda
    bool converged = false;
    size_t n_obs = 0;
    size_t n_items = 0;

    friend bool operator==(const LmmFit&, const LmmFit&) = default;
};

struct FTest {
    double f = 0.0;
    double df1 = 1.0;
    double df2 = 0.0;
    double p = 1.0;
};

/// Profiled restricted likelihood of one dataset as a function of the
/// variance ratio lambda. Observations are sorted by (group, x, y) on
/// construction, so every result is independent of input order.
class RemlProfile {
public:
    /// Throws Error(DegenerateInput) for fewer than 2 groups or 3
    /// observations, constant x, constant y, or mismatched lengths.
    RemlProfile(const std::vector<double>& y, const std::vector<double>& x, const std::vector<std::string>& group);

    struct Evaluation {
        std::array<double, 2> beta{};
        double rss = 0.0;       // whitened residual sum of squares
        double r22 = 0.0;       // second diagonal of the whitened design's R factor
        double criterion = 0.0; // restricted log-likelihood
        double slope = 0.0;     // d criterion / d lambda
    };

    Evaluation evaluate(double lambda) const;
    double criterion(double lambda) const { return evaluate(lambda).criterion; }

    /// Maximizer over lambda in {0} and [1e-8, 1e8]. Throws
    /// Error(NoConvergence) when the optimum sits on the upper bound and
    /// Error(DegenerateInput) when the residual variance vanishes.
    LmmFit fit() const;

    size_t n_obs() const { return y_.size(); }
    size_t n_items() const { return starts_.size() - 1; }

private:
    LmmFit assemble(double lambda, const Evaluation& e) const;

    std::vector<double> y_;
    std::vector<double> x_;
    std::vector<size_t> starts_; // block boundaries, one past the end last
};

LmmFit fit_lmm(const std::vector<double>& y, const std::vector<double>& x, const std::vector<std::string>& group);

/// Wald F on beta1 with df2 = n_obs - n_items - 1.
/// Throws Error(DegenerateInput) when df2 <= 0 or the fit did not converge.
FTest f_test(const LmmFit& fit);

} // namespace xlprime
