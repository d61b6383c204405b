#pragma once

#include <functional>
#include <optional>
#include <stdexcept>
#include <string>

#include "thinlim/expr.hpp"

namespace thinlim {

/// A semantic invariant of the problem data failed. Carries the name of
/// the violated condition and a witness point.
struct ValidationError : std::runtime_error {
    ValidationError(std::string check_, std::string msg)
        : std::runtime_error(std::move(msg)), check(std::move(check_)) {}
    std::string check;
};

/// Analytic field on [0,1] (arity 1) or [0,1]x[-1,1] (arity 2).
///
/// Derivatives use the supplied expressions when present and fall back to
/// fourth-order finite differences with h = 1e-4, one-sided near the domain
/// edge. Supplied derivatives are cross-checked against central differences
/// at construction.
class ScalarField {
public:
    ScalarField() = default;
    ScalarField(std::string name, expr::Expression f, int arity);

    static ScalarField parse(std::string name, std::string_view text, int arity,
                             int line = 0);
    static ScalarField constant(std::string name, double v, int arity);

    void set_dx(expr::Expression e) { dx_ = std::move(e); }
    void set_dy(expr::Expression e) { dy_ = std::move(e); }
    void set_dxx(expr::Expression e) { dxx_ = std::move(e); }
    bool has_dx() const { return dx_.has_value(); }
    bool has_dy() const { return dy_.has_value(); }

    int arity() const { return arity_; }
    const std::string& name() const { return name_; }
    const expr::Expression& expression() const { return f_; }
    const std::optional<expr::Expression>& dx_expression() const { return dx_; }
    const std::optional<expr::Expression>& dy_expression() const { return dy_; }
    const std::optional<expr::Expression>& dxx_expression() const { return dxx_; }
    bool valid() const { return f_.valid(); }

    double operator()(double x) const;
    double operator()(double x, double y) const;

    double dx(double x) const;
    double dx(double x, double y) const;
    double dy(double x, double y) const;
    double dxx(double x) const;

    /// Dense-sampling validation: finite values everywhere, and supplied
    /// derivative expressions within 1e-6 relative of central differences
    /// at 101 sample points. Throws ValidationError.
    void validate(int samples_per_axis = 1001) const;

private:
    std::string name_;
    expr::Expression f_;
    std::optional<expr::Expression> dx_, dy_, dxx_;
    int arity_ = 1;
};

namespace fd {

/// Fourth-order first derivative of `f` at `x`, one-sided near [lo, hi].
double deriv1(const std::function<double(double)>& f, double x, double lo, double hi,
              double h = 1e-4);

/// Second derivative via nested first derivatives (fourth order inside).
double deriv2(const std::function<double(double)>& f, double x, double lo, double hi,
              double h = 1e-4);

}  // namespace fd

}  // namespace thinlim
