#include "thinlim/fields.hpp"

#include <cmath>

namespace thinlim {

namespace fd {

namespace {

// Five-point first-derivative stencils of order four. `shift` is the offset
// of the leftmost sample relative to x, in units of h.
double stencil5(const std::function<double(double)>& f, double x, double h, int shift) {
    double s[5];
    for (int i = 0; i < 5; ++i) s[i] = f(x + (shift + i) * h);
    switch (shift) {
        case -4: return (3 * s[0] - 16 * s[1] + 36 * s[2] - 48 * s[3] + 25 * s[4]) / (12 * h);
        case -3: return (-s[0] + 6 * s[1] - 18 * s[2] + 10 * s[3] + 3 * s[4]) / (12 * h);
        case -2: return (s[0] - 8 * s[1] + 8 * s[3] - s[4]) / (12 * h);
        case -1: return (-3 * s[0] - 10 * s[1] + 18 * s[2] - 6 * s[3] + s[4]) / (12 * h);
        default: return (-25 * s[0] + 48 * s[1] - 36 * s[2] + 16 * s[3] - 3 * s[4]) / (12 * h);
    }
}

}  // namespace

double deriv1(const std::function<double(double)>& f, double x, double lo, double hi,
              double h) {
    int shift = -2;
    if (x - 2 * h < lo) shift = (x - h < lo) ? 0 : -1;
    if (x + 2 * h > hi) shift = (x + h > hi) ? -4 : -3;
    return stencil5(f, x, h, shift);
}

double deriv2(const std::function<double(double)>& f, double x, double lo, double hi,
              double h) {
    auto d1 = [&](double t) { return deriv1(f, t, lo, hi, h); };
    return deriv1(d1, x, lo, hi, h);
}

}  // namespace fd

ScalarField::ScalarField(std::string name, expr::Expression f, int arity)
    : name_(std::move(name)), f_(std::move(f)), arity_(arity) {}

ScalarField ScalarField::parse(std::string name, std::string_view text, int arity, int line) {
    static const std::vector<std::string> vars1 = {"x"};
    static const std::vector<std::string> vars2 = {"x", "y"};
    auto e = expr::Expression::parse(text, arity == 1 ? vars1 : vars2, line);
    return ScalarField(std::move(name), std::move(e), arity);
}

ScalarField ScalarField::constant(std::string name, double v, int arity) {
    return ScalarField(std::move(name), expr::Expression::constant(v), arity);
}

double ScalarField::operator()(double x) const { return f_.eval(x); }
double ScalarField::operator()(double x, double y) const { return f_.eval(x, y); }

double ScalarField::dx(double x) const {
    if (dx_) return dx_->eval(x);
    return fd::deriv1([this](double t) { return f_.eval(t); }, x, 0.0, 1.0);
}

double ScalarField::dx(double x, double y) const {
    if (dx_) return dx_->eval(x, y);
    return fd::deriv1([this, y](double t) { return f_.eval(t, y); }, x, 0.0, 1.0);
}

double ScalarField::dy(double x, double y) const {
    if (dy_) return dy_->eval(x, y);
    return fd::deriv1([this, x](double t) { return f_.eval(x, t); }, y, -1.0, 1.0);
}

double ScalarField::dxx(double x) const {
    if (dxx_) return dxx_->eval(x);
    if (dx_) return fd::deriv1([this](double t) { return dx_->eval(t); }, x, 0.0, 1.0);
    return fd::deriv2([this](double t) { return f_.eval(t); }, x, 0.0, 1.0);
}

void ScalarField::validate(int samples_per_axis) const {
    const int n = samples_per_axis;
    auto check_finite = [&](double v, double x, double y) {
        if (!std::isfinite(v)) {
            char buf[160];
            if (arity_ == 2)
                std::snprintf(buf, sizeof(buf), "field '%s' is not evaluable at (%.6g, %.6g)",
                              name_.c_str(), x, y);
            else
                std::snprintf(buf, sizeof(buf), "field '%s' is not evaluable at x=%.6g",
                              name_.c_str(), x);
            throw ValidationError("evaluable", buf);
        }
    };
    if (arity_ == 1) {
        for (int i = 0; i < n; ++i) {
            const double x = static_cast<double>(i) / (n - 1);
            check_finite(f_.eval(x), x, 0);
        }
    } else {
        const int m = 41;  // per-axis count for the 2-D lattice
        for (int i = 0; i < m; ++i) {
            for (int j = 0; j < m; ++j) {
                const double x = static_cast<double>(i) / (m - 1);
                const double y = -1.0 + 2.0 * j / (m - 1);
                check_finite(f_.eval(x, y), x, y);
            }
        }
    }

    // Supplied derivatives must agree with central differences (1e-6 relative
    // at 101 points).
    const double h = 1e-5;
    auto agree = [](double a, double b) { return std::abs(a - b) <= 1e-6 * (1.0 + std::abs(a)); };
    for (int i = 0; i <= 100; ++i) {
        const double x = 0.05 + 0.9 * i / 100.0;
        const double y = -0.9 + 1.8 * i / 100.0;
        if (dx_) {
            const double a = arity_ == 1 ? dx_->eval(x) : dx_->eval(x, y);
            const double c = arity_ == 1 ? (f_.eval(x + h) - f_.eval(x - h)) / (2 * h)
                                         : (f_.eval(x + h, y) - f_.eval(x - h, y)) / (2 * h);
            if (!agree(a, c))
                throw ValidationError(
                    "derivative-consistency",
                    "field '" + name_ + "': supplied dx disagrees with finite difference at x=" +
                        expr::format_double(x));
        }
        if (dy_ && arity_ == 2) {
            const double a = dy_->eval(x, y);
            const double c = (f_.eval(x, y + h) - f_.eval(x, y - h)) / (2 * h);
            if (!agree(a, c))
                throw ValidationError(
                    "derivative-consistency",
                    "field '" + name_ + "': supplied dy disagrees with finite difference at y=" +
                        expr::format_double(y));
        }
        if (dxx_ && arity_ == 1) {
            const double a = dxx_->eval(x);
            const double c = (f_.eval(x + h) - 2 * f_.eval(x) + f_.eval(x - h)) / (h * h);
            if (std::abs(a - c) > 1e-4 * (1.0 + std::abs(a)))
                throw ValidationError(
                    "derivative-consistency",
                    "field '" + name_ + "': supplied dxx disagrees with finite difference at x=" +
                        expr::format_double(x));
        }
    }
}

}  // namespace thinlim
