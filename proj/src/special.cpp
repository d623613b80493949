#include "xlprime/special.hpp"
#include "xlprime/error.hpp"

#include <fmt/format.h>

#include <cmath>
#include <limits>

namespace xlprime {

namespace {

constexpr double kTiny = 1e-300;
constexpr double kEps = 1e-16;
constexpr int kMaxIterations = 100000;

// Modified Lentz evaluation of the continued fraction for I_x(a, b).
double beta_fraction(double a, double b, double x)
{
    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < kTiny)
        d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIterations; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny)
            d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny)
            c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny)
            d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny)
            c = kTiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::abs(delta - 1.0) < kEps)
            return h;
    }
    throw Error(ErrorCode::NoConvergence, fmt::format("incomplete beta fraction did not converge (a={}, b={}, x={})", a, b, x));
}

// x and y = 1 - x are passed separately so neither is formed by cancellation.
double incomplete_beta(double a, double b, double x, double y)
{
    if (x <= 0.0)
        return 0.0;
    if (y <= 0.0)
        return 1.0;
    const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log(y);
    const double front = std::exp(log_front);
    if (x < (a + 1.0) / (a + b + 2.0))
        return front * beta_fraction(a, b, x) / a;
    return 1.0 - front * beta_fraction(b, a, y) / b;
}

} // namespace

double regularized_beta(double x, double a, double b)
{
    if (!(a > 0.0) || !(b > 0.0) || !(x >= 0.0 && x <= 1.0) || !std::isfinite(a) || !std::isfinite(b))
        throw Error(ErrorCode::OutOfRange, fmt::format("regularized_beta({}, {}, {}) outside its domain", x, a, b));
    return incomplete_beta(a, b, x, 1.0 - x);
}

double f_upper_tail(double f, double d1, double d2)
{
    if (!(f >= 0.0) || !(d1 > 0.0) || !(d2 > 0.0) || std::isnan(f) || !std::isfinite(d1) || !std::isfinite(d2))
        throw Error(ErrorCode::OutOfRange, fmt::format("F tail for F={} df=({}, {}) outside its domain", f, d1, d2));
    if (f == 0.0)
        return 1.0;
    if (std::isinf(f))
        return 0.0;
    const double denom = d2 + d1 * f;
    return incomplete_beta(d2 / 2.0, d1 / 2.0, d2 / denom, d1 * f / denom);
}

} // namespace xlprime
