#include "thinlim/problem.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <set>
#include <sstream>

namespace thinlim {

namespace {

std::string trim(std::string_view s) {
    size_t b = s.find_first_not_of(" \t\r");
    size_t e = s.find_last_not_of(" \t\r");
    if (b == std::string::npos) return {};
    return std::string(s.substr(b, e - b + 1));
}

struct ConfigEntry {
    std::string value;
    int line = 0;
    mutable bool used = false;
};

class Config {
public:
    static Config parse(const std::string& text) {
        Config cfg;
        std::istringstream in(text);
        std::string raw;
        std::string section;
        int line = 0;
        while (std::getline(in, raw)) {
            ++line;
            if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
            std::string s = trim(raw);
            if (s.empty()) continue;
            if (s.front() == '[') {
                if (s.back() != ']')
                    throw expr::ParseError("unterminated section header", line, 1);
                section = trim(s.substr(1, s.size() - 2));
                if (section.empty()) throw expr::ParseError("empty section name", line, 1);
                continue;
            }
            auto eq = s.find('=');
            if (eq == std::string::npos)
                throw expr::ParseError("expected 'key = value'", line, 1);
            std::string key = trim(s.substr(0, eq));
            std::string value = trim(s.substr(eq + 1));
            if (key.empty()) throw expr::ParseError("empty key", line, 1);
            if (section.empty())
                throw expr::ParseError("key '" + key + "' outside any [section]", line, 1);
            std::string full = section + "." + key;
            if (cfg.entries_.count(full))
                throw expr::ParseError("duplicate key '" + full + "'", line, 1);
            cfg.entries_[full] = ConfigEntry{value, line};
        }
        return cfg;
    }

    void apply_override(const std::string& keyval) {
        auto eq = keyval.find('=');
        if (eq == std::string::npos)
            throw expr::ParseError("override must look like section.key=value: " + keyval, 0, 1);
        std::string key = trim(keyval.substr(0, eq));
        std::string value = trim(keyval.substr(eq + 1));
        entries_[key] = ConfigEntry{value, 0};
    }

    const ConfigEntry* find(const std::string& key) const {
        auto it = entries_.find(key);
        if (it == entries_.end()) return nullptr;
        it->second.used = true;
        return &it->second;
    }

    bool has(const std::string& key) const { return entries_.count(key) > 0; }

    std::string require(const std::string& key) const {
        const ConfigEntry* e = find(key);
        if (!e) throw expr::ParseError("missing required key '" + key + "'", 0, 1);
        return e->value;
    }

    double number(const std::string& key, double fallback) const {
        const ConfigEntry* e = find(key);
        if (!e) return fallback;
        try {
            size_t pos = 0;
            double v = std::stod(e->value, &pos);
            if (pos != e->value.size()) throw std::invalid_argument("trailing");
            return v;
        } catch (const std::exception&) {
            throw expr::ParseError("key '" + key + "' expects a number, got '" + e->value + "'",
                                   e->line, 1);
        }
    }

    long integer(const std::string& key, long fallback) const {
        const ConfigEntry* e = find(key);
        if (!e) return fallback;
        try {
            size_t pos = 0;
            long v = std::stol(e->value, &pos);
            if (pos != e->value.size()) throw std::invalid_argument("trailing");
            return v;
        } catch (const std::exception&) {
            throw expr::ParseError("key '" + key + "' expects an integer, got '" + e->value + "'",
                                   e->line, 1);
        }
    }

    std::string text(const std::string& key, const std::string& fallback) const {
        const ConfigEntry* e = find(key);
        return e ? e->value : fallback;
    }

    /// Keys under `prefix.` (returned without the prefix).
    std::vector<std::string> subkeys(const std::string& prefix) const {
        std::vector<std::string> out;
        const std::string p = prefix + ".";
        for (const auto& [k, v] : entries_)
            if (k.rfind(p, 0) == 0) out.push_back(k.substr(p.size()));
        return out;
    }

    void reject_unused() const {
        for (const auto& [k, v] : entries_) {
            if (!v.used) {
                if (v.line == 0)
                    throw expr::ParseError("unknown override key '" + k + "'", 0, 1);
                throw expr::ParseError("unknown key '" + k + "'", v.line, 1);
            }
        }
    }

private:
    std::map<std::string, ConfigEntry> entries_;
};

ScalarField parse_field(const Config& cfg, const std::string& key, const std::string& name,
                        int arity, const char* fallback_expr) {
    const ConfigEntry* e = cfg.find(key);
    std::string text = e ? e->value : std::string(fallback_expr ? fallback_expr : "");
    if (text.empty())
        throw expr::ParseError("missing required key '" + key + "'", 0, 1);
    ScalarField f = ScalarField::parse(name, text, arity, e ? e->line : 0);
    static const std::vector<std::string> vars1 = {"x"};
    static const std::vector<std::string> vars2 = {"x", "y"};
    auto vars = [&]() -> std::span<const std::string> { return arity == 1 ? vars1 : vars2; };
    if (const ConfigEntry* d = cfg.find(key + ".dx"))
        f.set_dx(expr::Expression::parse(d->value, vars(), d->line));
    if (arity == 2) {
        if (const ConfigEntry* d = cfg.find(key + ".dy"))
            f.set_dy(expr::Expression::parse(d->value, vars(), d->line));
    } else if (const ConfigEntry* d = cfg.find(key + ".dxx")) {
        f.set_dxx(expr::Expression::parse(d->value, vars(), d->line));
    }
    f.validate();
    return f;
}

std::optional<ScalarField> parse_optional_field(const Config& cfg, const std::string& key,
                                                const std::string& name, int arity) {
    if (!cfg.has(key)) return std::nullopt;
    return parse_field(cfg, key, name, arity, nullptr);
}

/// "expr ; expr" pairs for sigma rows and drift.
std::array<std::string, 2> split_pair(const std::string& value, const std::string& key,
                                      int line) {
    auto semi = value.find(';');
    if (semi == std::string::npos)
        throw expr::ParseError("key '" + key + "' expects two expressions separated by ';'",
                               line, 1);
    return {trim(value.substr(0, semi)), trim(value.substr(semi + 1))};
}

ScalarField trace_at_zero(const ScalarField& f, const std::string& name) {
    ScalarField t(name, f.expression().bind(1, 0.0, 1), 1);
    if (f.dx_expression()) t.set_dx(f.dx_expression()->bind(1, 0.0, 1));
    return t;
}

BellmanIsaacsOperator parse_operator(const Config& cfg) {
    const double alpha = cfg.number("operator.alpha", 1.0);
    const double cf = cfg.number("operator.C_F", 10.0);

    // Collect family indices from the declared keys. Both family.<l>.<field>
    // and family.<l>.<m>.<field> forms are accepted.
    std::set<std::pair<int, int>> indices;
    for (const std::string& sub : cfg.subkeys("operator.family")) {
        std::istringstream ss(sub);
        std::string a, b;
        std::getline(ss, a, '.');
        std::getline(ss, b, '.');
        try {
            int l = std::stoi(a);
            int m = 0;
            if (!b.empty() && std::isdigit(static_cast<unsigned char>(b[0]))) m = std::stoi(b);
            indices.insert({l, m});
        } catch (const std::exception&) {
            throw expr::ParseError("malformed family key 'operator.family." + sub + "'", 0, 1);
        }
    }
    if (indices.empty())
        throw expr::ParseError("section [operator] declares no families", 0, 1);
    int n_lambda = 0, n_mu = 0;
    for (auto [l, m] : indices) {
        n_lambda = std::max(n_lambda, l + 1);
        n_mu = std::max(n_mu, m + 1);
    }

    std::vector<std::vector<CoefficientFamily>> families(
        static_cast<size_t>(n_lambda), std::vector<CoefficientFamily>(static_cast<size_t>(n_mu)));
    int sigma_rows = -1;
    for (int l = 0; l < n_lambda; ++l) {
        for (int m = 0; m < n_mu; ++m) {
            // Prefer the two-index form; fall back to the single-index
            // shorthand when m == 0.
            std::string base = "operator.family." + std::to_string(l) + "." + std::to_string(m);
            if (!cfg.has(base + ".sigma") && !cfg.has(base + ".sigma.0") && m == 0)
                base = "operator.family." + std::to_string(l);
            CoefficientFamily fam;
            for (int r = 0;; ++r) {
                std::string key = base + ".sigma." + std::to_string(r);
                if (r == 0 && !cfg.has(key) && cfg.has(base + ".sigma")) key = base + ".sigma";
                const ConfigEntry* e = cfg.find(key);
                if (!e) break;
                auto [sx, sy] = split_pair(e->value, key, e->line);
                std::array<ScalarField, 2> row = {
                    ScalarField::parse(key + "[0]", sx, 2, e->line),
                    ScalarField::parse(key + "[1]", sy, 2, e->line)};
                row[0].validate();
                row[1].validate();
                fam.sigma.push_back(std::move(row));
            }
            if (fam.sigma.empty())
                throw expr::ParseError("family " + base + " declares no sigma rows", 0, 1);
            if (sigma_rows < 0) sigma_rows = static_cast<int>(fam.sigma.size());
            if (static_cast<int>(fam.sigma.size()) != sigma_rows)
                throw expr::ParseError("family " + base + " has " +
                                           std::to_string(fam.sigma.size()) +
                                           " sigma rows; all families must share one k",
                                       0, 1);
            if (const ConfigEntry* e = cfg.find(base + ".drift")) {
                auto [bx, by] = split_pair(e->value, base + ".drift", e->line);
                fam.drift = {ScalarField::parse(base + ".drift[0]", bx, 2, e->line),
                             ScalarField::parse(base + ".drift[1]", by, 2, e->line)};
            } else {
                fam.drift = {ScalarField::constant(base + ".drift[0]", 0, 2),
                             ScalarField::constant(base + ".drift[1]", 0, 2)};
            }
            fam.drift[0].validate();
            fam.drift[1].validate();
            fam.zeroth = parse_field(cfg, base + ".c", base + ".c", 2, nullptr);
            fam.source = parse_field(cfg, base + ".f", base + ".f", 2, "0");
            families[static_cast<size_t>(l)][static_cast<size_t>(m)] = std::move(fam);
        }
    }
    return BellmanIsaacsOperator(std::move(families), alpha, cf);
}

}  // namespace

void DomainProfile::validate(int samples) const {
    for (int i = 0; i < samples; ++i) {
        const double x = static_cast<double>(i) / (samples - 1);
        const double lo = g_minus(x), hi = g_plus(x), mid = h(x);
        if (!(lo < hi))
            throw ValidationError("g_minus < g_plus",
                                  "g_minus < g_plus violated at x=" + expr::format_double(x));
        if (lo + delta0 > mid + 1e-12 || mid > hi - delta0 + 1e-12)
            throw ValidationError(
                "barrier separation",
                "g_minus + delta0 <= h <= g_plus - delta0 violated at x=" +
                    expr::format_double(x) + " (delta0=" + expr::format_double(delta0) + ")");
    }
}

ThinGrid build_thin_grid(const DomainProfile& profile, double eps, int nx, int nt) {
    ThinGrid g;
    g.eps = eps;
    g.nx = nx;
    g.nt = nt;
    g.hx = 1.0 / (nx - 1);
    g.ht = 1.0 / (nt - 1);
    g.xs.resize(static_cast<size_t>(nx));
    g.ts.resize(static_cast<size_t>(nt));
    for (int i = 0; i < nx; ++i) g.xs[static_cast<size_t>(i)] = static_cast<double>(i) / (nx - 1);
    for (int j = 0; j < nt; ++j) g.ts[static_cast<size_t>(j)] = static_cast<double>(j) / (nt - 1);
    g.metric.resize(static_cast<size_t>(nx) * static_cast<size_t>(nt));
    for (int i = 0; i < nx; ++i) {
        const double x = g.xs[static_cast<size_t>(i)];
        const double gm = profile.g_minus(x), gp = profile.g_plus(x);
        const double gm1 = profile.g_minus.dx(x), gp1 = profile.g_plus.dx(x);
        const double gm2 = profile.g_minus.dxx(x), gp2 = profile.g_plus.dxx(x);
        const double d = gp - gm, dd = gp1 - gm1, d2 = gp2 - gm2;
        for (int j = 0; j < nt; ++j) {
            const double t = g.ts[static_cast<size_t>(j)];
            ThinGrid::Metric& mm = g.metric[static_cast<size_t>(g.index(i, j))];
            mm.y = eps * (gm + t * d);
            mm.d = d;
            mm.dd = dd;
            mm.m = (gm1 + t * dd) / d;
            mm.m_t = dd / d;
            mm.m_x = (gm2 + t * d2) / d - (gm1 + t * dd) * dd / (d * d);
            mm.txx = -mm.m_x + mm.m * mm.m_t;
        }
    }
    return g;
}

std::array<double, 2> outward_normal_tb(const DomainProfile& profile, double eps, double x,
                                        bool top) {
    double nx, ny;
    if (top) {
        nx = -eps * profile.g_plus.dx(x);
        ny = 1.0;
    } else {
        nx = eps * profile.g_minus.dx(x);
        ny = -1.0;
    }
    const double norm = std::hypot(nx, ny);
    return {nx / norm, ny / norm};
}

CheckResult check_obliqueness_tb(const DomainProfile& profile, const ObliqueData& data,
                                 double eps, int samples) {
    CheckResult res{"top/bottom obliqueness (1.3+1)", true,
                    std::numeric_limits<double>::infinity(), "", ""};
    double min_top = std::numeric_limits<double>::infinity();
    double min_bot = min_top;
    for (int i = 0; i < samples; ++i) {
        const double x = static_cast<double>(i) / (samples - 1);
        const double top = -eps * profile.g_plus.dx(x) *
                               data.gamma1_plus(x, eps * profile.g_plus(x)) + 1.0;
        const double bot = eps * profile.g_minus.dx(x) *
                               data.gamma1_minus(x, eps * profile.g_minus(x)) + 1.0;
        if (std::min(top, bot) < res.value) {
            res.value = std::min(top, bot);
            res.witness = "x=" + expr::format_double(x) +
                          (top < bot ? " (top boundary)" : " (bottom boundary)");
        }
        min_top = std::min(min_top, top);
        min_bot = std::min(min_bot, bot);
    }
    res.pass = res.value > 0;
    res.detail = "min top " + expr::format_double(min_top) + ", min bottom " +
                 expr::format_double(min_bot) + " at eps=" + expr::format_double(eps);
    return res;
}

double obliqueness_threshold(const DomainProfile& profile, const ObliqueData& data,
                             double eps_hi) {
    auto pass = [&](double eps) {
        return check_obliqueness_tb(profile, data, eps, 257).pass;
    };
    if (pass(eps_hi)) return eps_hi;
    double lo = eps_hi;
    for (int k = 0; k < 60 && !pass(lo); ++k) lo /= 2;
    if (!pass(lo)) return 0.0;
    double hi = lo * 2;
    for (int k = 0; k < 50; ++k) {
        const double mid = 0.5 * (lo + hi);
        (pass(mid) ? lo : hi) = mid;
    }
    return lo;
}

CheckResult check_compatibility(const ObliqueData& data, int samples) {
    CheckResult res{"compatibility (1.4)", true, 0, "",
                    "max trace mismatch of beta and gamma1 at y=0"};
    constexpr double tol = 1e-10;
    for (int i = 0; i < samples; ++i) {
        const double x = static_cast<double>(i) / (samples - 1);
        const double db = std::abs(data.beta_plus(x, 0) + data.beta_minus(x, 0));
        const double dg = std::abs(data.gamma1_plus(x, 0) + data.gamma1_minus(x, 0));
        const double worst = std::max(db, dg);
        if (worst > res.value) {
            res.value = worst;
            res.witness = "x=" + expr::format_double(x) +
                          (db >= dg ? " (beta traces)" : " (gamma1 traces)");
        }
    }
    res.pass = res.value <= tol;
    return res;
}

namespace {

// Remainder against the field's own trace at y=0; trace matching itself is
// the compatibility check's job, so a broken (1.4) does not bleed in here.
double expansion_ratio(const ScalarField& f, const std::function<double(double)>& slope,
                       double y, int samples, double* worst_x) {
    double worst = 0;
    for (int i = 0; i < samples; ++i) {
        const double x = static_cast<double>(i) / (samples - 1);
        const double rem = std::abs(f(x, y) - f(x, 0) - slope(x) * y) / std::abs(y);
        if (rem > worst) {
            worst = rem;
            if (worst_x) *worst_x = x;
        }
    }
    return worst;
}

double richardson_slope(const ScalarField& f, double x) {
    const double h = 1e-2;
    const double s1 = (f(x, h) - f(x, -h)) / (2 * h);
    const double s2 = (f(x, h / 2) - f(x, -h / 2)) / h;
    return (4 * s2 - s1) / 3;
}

}  // namespace

CheckResult check_expansion(const ObliqueData& data, int samples) {
    CheckResult res{"first-order expansion (1.6)", true, 0, "",
                    "remainder ratio must shrink across y scales {1e-1,1e-2,1e-3}"};
    struct Entry {
        const ScalarField* f;
        const std::optional<ScalarField>* slope;
        const char* label;
    };
    const Entry entries[] = {
        {&data.gamma1_plus, &data.k_plus, "gamma1+"},
        {&data.gamma1_minus, &data.k_minus, "gamma1-"},
        {&data.beta_plus, &data.l_plus, "beta+"},
        {&data.beta_minus, &data.l_minus, "beta-"},
    };
    for (const Entry& e : entries) {
        std::function<double(double)> slope;
        if (e.slope->has_value())
            slope = [f = &e.slope->value()](double x) { return (*f)(x); };
        else
            slope = [f = e.f](double x) { return richardson_slope(*f, x); };
        for (const double scale : {0.1, -0.1}) {
            double wx = 0;
            const double coarse = expansion_ratio(*e.f, slope, scale, samples, nullptr);
            const double fine = expansion_ratio(*e.f, slope, scale / 100, samples, &wx);
            if (fine > res.value) {
                res.value = fine;
                res.witness = std::string(e.label) + " at x=" + expr::format_double(wx) +
                              ", y=" + expr::format_double(scale / 100);
            }
            if (fine > 0.5 * coarse + 1e-7) res.pass = false;
        }
    }
    return res;
}

CheckResult check_lateral_obliqueness(const LateralBC& lateral, int samples) {
    CheckResult res{"lateral obliqueness (5.2111)", true, 1.0, "", ""};
    if (lateral.kind == LateralKind::Neumann) {
        res.detail = "Neumann lateral: gamma = nu, trivially oblique";
        return res;
    }
    if (lateral.kind == LateralKind::Dirichlet) {
        res.detail = "Dirichlet lateral: not applicable";
        return res;
    }
    res.value = std::numeric_limits<double>::infinity();
    for (const double x : {0.0, 1.0}) {
        const double nu = LateralBC::nu(x);
        for (int i = 0; i < samples; ++i) {
            const double y = -1.0 + 2.0 * i / (samples - 1);
            const double dot = lateral.gamma1(x, y) * nu;
            if (dot < res.value) {
                res.value = dot;
                res.witness = "x=" + expr::format_double(x) + ", y=" + expr::format_double(y);
            }
        }
        if (std::abs(lateral.gamma2(x, 0)) > 1e-12) {
            res.pass = false;
            res.witness = "gamma2(x,0) != 0 at x=" + expr::format_double(x);
        }
    }
    if (res.value <= 0) res.pass = false;
    res.detail = "min gamma1 . nu over endpoints and sampled y";
    return res;
}

void ProblemInstance::validate() const {
    if (auto r = check_compatibility(oblique); !r.pass)
        throw ValidationError("compatibility (1.4)",
                              "compatibility (1.4) violated, witness " + r.witness);
    if (auto r = check_expansion(oblique); !r.pass)
        throw ValidationError("expansion (1.6)",
                              "expansion (1.6) not satisfied, witness " + r.witness);
    if (auto r = check_lateral_obliqueness(lateral); !r.pass)
        throw ValidationError("lateral obliqueness (5.2111)",
                              "lateral obliqueness violated, witness " + r.witness);
    // Zeroth-order positivity c >= alpha on a sample lattice.
    for (int l = 0; l < op.n_lambda(); ++l) {
        for (int m = 0; m < op.n_mu(); ++m) {
            for (int i = 0; i <= 40; ++i) {
                for (int j = 0; j <= 40; ++j) {
                    const double x = i / 40.0, y = -1.0 + 2.0 * j / 40.0;
                    if (op.family(l, m).zeroth(x, y) < op.alpha() - 1e-12)
                        throw ValidationError(
                            "zeroth-order bound (5.7)",
                            "c < alpha for family (" + std::to_string(l) + "," +
                                std::to_string(m) + ") at x=" + expr::format_double(x) +
                                ", y=" + expr::format_double(y));
                }
            }
        }
    }
    // Config-supplied slopes must agree with the numeric extraction.
    if (oblique.has_config_slopes()) {
        for (int i = 0; i <= 100; ++i) {
            const double x = i / 100.0;
            const double kp = richardson_slope(oblique.gamma1_plus, x);
            if (std::abs(kp - (*oblique.k_plus)(x)) > 1e-6 * (1 + std::abs(kp)))
                throw ValidationError("expansion slopes",
                                      "config k_plus disagrees with extracted slope at x=" +
                                          expr::format_double(x));
        }
    }
}

ProblemInstance parse_problem(const std::string& config_text,
                              const std::vector<std::string>& overrides, bool strict) {
    Config cfg = Config::parse(config_text);
    for (const std::string& ov : overrides) cfg.apply_override(ov);

    ProblemInstance inst;
    inst.profile.g_plus = parse_field(cfg, "domain.g_plus", "g_plus", 1, nullptr);
    inst.profile.g_minus = parse_field(cfg, "domain.g_minus", "g_minus", 1, nullptr);
    if (cfg.has("domain.h")) {
        inst.profile.h = parse_field(cfg, "domain.h", "h", 1, nullptr);
    } else {
        inst.profile.h = ScalarField(
            "h",
            (inst.profile.g_plus.expression() + inst.profile.g_minus.expression()) *
                expr::Expression::constant(0.5),
            1);
    }
    if (cfg.has("domain.delta0")) {
        inst.profile.delta0 = cfg.number("domain.delta0", 0);
        if (inst.profile.delta0 <= 0)
            throw ValidationError("barrier separation", "delta0 must be positive");
    } else {
        double sep = std::numeric_limits<double>::infinity();
        for (int i = 0; i <= 1000; ++i) {
            const double x = i / 1000.0;
            sep = std::min({sep, inst.profile.g_plus(x) - inst.profile.h(x),
                            inst.profile.h(x) - inst.profile.g_minus(x)});
        }
        inst.profile.delta0 = sep;
        if (!(sep > 0))
            throw ValidationError("barrier separation",
                                  "h does not separate g_minus and g_plus");
    }
    inst.profile.validate();

    inst.oblique.gamma1_plus = parse_field(cfg, "oblique.gamma1_plus", "gamma1_plus", 2, nullptr);
    inst.oblique.gamma1_minus =
        parse_field(cfg, "oblique.gamma1_minus", "gamma1_minus", 2, nullptr);
    inst.oblique.beta_plus = parse_field(cfg, "oblique.beta_plus", "beta_plus", 2, nullptr);
    inst.oblique.beta_minus = parse_field(cfg, "oblique.beta_minus", "beta_minus", 2, nullptr);
    inst.oblique.gamma_o = trace_at_zero(inst.oblique.gamma1_plus, "gamma_o");
    inst.oblique.beta_o = trace_at_zero(inst.oblique.beta_plus, "beta_o");
    inst.oblique.k_plus = parse_optional_field(cfg, "oblique.k_plus", "k_plus", 1);
    inst.oblique.k_minus = parse_optional_field(cfg, "oblique.k_minus", "k_minus", 1);
    inst.oblique.l_plus = parse_optional_field(cfg, "oblique.l_plus", "l_plus", 1);
    inst.oblique.l_minus = parse_optional_field(cfg, "oblique.l_minus", "l_minus", 1);

    const std::string kind = cfg.text("lateral.kind", "neumann");
    if (kind == "neumann") {
        inst.lateral.kind = LateralKind::Neumann;
    } else if (kind == "oblique") {
        inst.lateral.kind = LateralKind::Oblique;
        inst.lateral.gamma1 = parse_field(cfg, "lateral.gamma1", "lateral.gamma1", 2, nullptr);
        inst.lateral.gamma2 = parse_field(cfg, "lateral.gamma2", "lateral.gamma2", 2, "0");
        inst.lateral.beta = parse_field(cfg, "lateral.beta", "lateral.beta", 2, "0");
    } else if (kind == "dirichlet") {
        inst.lateral.kind = LateralKind::Dirichlet;
        inst.lateral.beta = parse_field(cfg, "lateral.beta", "lateral.beta", 2, nullptr);
    } else {
        throw expr::ParseError("lateral.kind must be neumann, oblique or dirichlet", 0, 1);
    }

    inst.op = parse_operator(cfg);

    inst.scheme.nx = static_cast<int>(cfg.integer("solver.nx", 201));
    inst.scheme.nt = static_cast<int>(cfg.integer("solver.nt", 41));
    inst.scheme.tol = cfg.number("solver.tol", 1e-8);
    inst.scheme.max_iter = static_cast<int>(cfg.integer("solver.max_iter", 200));
    inst.scheme.tau = cfg.number("solver.tau", 0);
    const std::string method = cfg.text("solver.method", "policy");
    if (method == "policy")
        inst.scheme.method = SolveMethod::Policy;
    else if (method == "fixed_point")
        inst.scheme.method = SolveMethod::FixedPoint;
    else
        throw expr::ParseError("solver.method must be policy or fixed_point", 0, 1);
    inst.scheme.cross_scheme = cfg.text("solver.cross_scheme", "seven_point_split");
    if (inst.scheme.cross_scheme != "seven_point_split")
        throw expr::ParseError("solver.cross_scheme: only seven_point_split is available", 0, 1);
    inst.scheme.bc_corner_rule = cfg.text("solver.bc_corner_rule", "prefer_top_bottom");
    if (inst.scheme.bc_corner_rule != "prefer_top_bottom" &&
        inst.scheme.bc_corner_rule != "prefer_lateral")
        throw expr::ParseError(
            "solver.bc_corner_rule must be prefer_top_bottom or prefer_lateral", 0, 1);
    inst.eps = cfg.number("solver.eps", 0.1);
    inst.seed = static_cast<std::uint64_t>(cfg.integer("solver.seed", 42));
    inst.samples = static_cast<int>(cfg.integer("solver.samples", 1000));
    if (inst.scheme.nx < 3 || inst.scheme.nt < 3)
        throw expr::ParseError("solver.nx and solver.nt must be at least 3", 0, 1);

    cfg.reject_unused();
    if (strict) inst.validate();
    return inst;
}

ProblemInstance parse_problem(const std::string& config_text, bool strict) {
    return parse_problem(config_text, {}, strict);
}

namespace {

void emit_field(std::ostringstream& out, const std::string& key, const ScalarField& f) {
    out << key << " = " << f.expression().to_string() << "\n";
    if (f.dx_expression()) out << key << ".dx = " << f.dx_expression()->to_string() << "\n";
    if (f.dy_expression()) out << key << ".dy = " << f.dy_expression()->to_string() << "\n";
    if (f.dxx_expression()) out << key << ".dxx = " << f.dxx_expression()->to_string() << "\n";
}

}  // namespace

std::string serialize_problem(const ProblemInstance& inst) {
    std::ostringstream out;
    out << "[domain]\n";
    emit_field(out, "g_minus", inst.profile.g_minus);
    emit_field(out, "g_plus", inst.profile.g_plus);
    emit_field(out, "h", inst.profile.h);
    out << "delta0 = " << expr::format_double(inst.profile.delta0) << "\n";

    out << "\n[oblique]\n";
    emit_field(out, "beta_minus", inst.oblique.beta_minus);
    emit_field(out, "beta_plus", inst.oblique.beta_plus);
    emit_field(out, "gamma1_minus", inst.oblique.gamma1_minus);
    emit_field(out, "gamma1_plus", inst.oblique.gamma1_plus);
    if (inst.oblique.k_plus) emit_field(out, "k_plus", *inst.oblique.k_plus);
    if (inst.oblique.k_minus) emit_field(out, "k_minus", *inst.oblique.k_minus);
    if (inst.oblique.l_plus) emit_field(out, "l_plus", *inst.oblique.l_plus);
    if (inst.oblique.l_minus) emit_field(out, "l_minus", *inst.oblique.l_minus);

    out << "\n[lateral]\n";
    switch (inst.lateral.kind) {
        case LateralKind::Neumann:
            out << "kind = neumann\n";
            break;
        case LateralKind::Oblique:
            out << "kind = oblique\n";
            emit_field(out, "beta", inst.lateral.beta);
            emit_field(out, "gamma1", inst.lateral.gamma1);
            emit_field(out, "gamma2", inst.lateral.gamma2);
            break;
        case LateralKind::Dirichlet:
            out << "kind = dirichlet\n";
            emit_field(out, "beta", inst.lateral.beta);
            break;
    }

    out << "\n[operator]\n";
    out << "C_F = " << expr::format_double(inst.op.uniform_bound()) << "\n";
    out << "alpha = " << expr::format_double(inst.op.alpha()) << "\n";
    for (int l = 0; l < inst.op.n_lambda(); ++l) {
        for (int m = 0; m < inst.op.n_mu(); ++m) {
            const auto& fam = inst.op.family(l, m);
            const std::string base = "family." + std::to_string(l) + "." + std::to_string(m);
            out << base << ".c = " << fam.zeroth.expression().to_string() << "\n";
            out << base << ".drift = " << fam.drift[0].expression().to_string() << " ; "
                << fam.drift[1].expression().to_string() << "\n";
            out << base << ".f = " << fam.source.expression().to_string() << "\n";
            for (size_t r = 0; r < fam.sigma.size(); ++r)
                out << base << ".sigma." << r << " = "
                    << fam.sigma[r][0].expression().to_string() << " ; "
                    << fam.sigma[r][1].expression().to_string() << "\n";
        }
    }

    out << "\n[solver]\n";
    out << "bc_corner_rule = " << inst.scheme.bc_corner_rule << "\n";
    out << "cross_scheme = " << inst.scheme.cross_scheme << "\n";
    out << "eps = " << expr::format_double(inst.eps) << "\n";
    out << "max_iter = " << inst.scheme.max_iter << "\n";
    out << "method = " << (inst.scheme.method == SolveMethod::Policy ? "policy" : "fixed_point")
        << "\n";
    out << "nt = " << inst.scheme.nt << "\n";
    out << "nx = " << inst.scheme.nx << "\n";
    out << "samples = " << inst.samples << "\n";
    out << "seed = " << inst.seed << "\n";
    out << "tau = " << expr::format_double(inst.scheme.tau) << "\n";
    out << "tol = " << expr::format_double(inst.scheme.tol) << "\n";
    return out.str();
}

}  // namespace thinlim
