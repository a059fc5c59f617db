#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "box.hpp"
#include "expression.hpp"
#include "multiindex.hpp"

namespace cylasym {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A coefficient or forcing field over R^n.
class ScalarField {
public:
    ScalarField() = default;
    ScalarField(Expression expr, std::size_t n) : expr_(std::move(expr)), n_(n) {
        if (static_cast<std::size_t>(expr_.max_variable()) > n_)
            throw ConfigError("field '" + expr_.print() + "' reads x" + std::to_string(expr_.max_variable()) +
                              " in a problem of dimension " + std::to_string(n_));
    }
    static ScalarField parse(std::string_view text, std::size_t n) { return ScalarField(Expression::parse(text), n); }
    static ScalarField constant(double v, std::size_t n) { return ScalarField(Expression::constant(v), n); }

    double operator()(std::span<const double> x) const { return expr_(x); }
    const Expression& expression() const noexcept { return expr_; }
    std::size_t declared_vars() const noexcept { return n_; }

    /// True when the AST cannot read any of x_1..x_p.
    bool syntactically_independent_of_axial(std::size_t p) const {
        return !expr_.references_any(1, static_cast<int>(p));
    }

    friend bool operator==(const ScalarField& a, const ScalarField& b) { return a.expr_ == b.expr_; }

private:
    Expression expr_;
    std::size_t n_ = 0;
};

/// Polynomial in a single cross-section coordinate; exact limit solutions
/// of the builtin problems are of this form.
struct Polynomial1D {
    std::vector<double> coeffs;  // sum c_k t^k

    double operator()(double t, int deriv = 0) const {
        double r = 0.0;
        for (std::size_t k = coeffs.size(); k-- > static_cast<std::size_t>(deriv);) {
            double c = coeffs[k];
            for (int j = 0; j < deriv; ++j) c *= static_cast<double>(k - static_cast<std::size_t>(j));
            r = r * t + c;
        }
        return r;
    }
};

using CoefficientKey = std::pair<MultiIndex, MultiIndex>;

struct ProblemSpec {
    std::string name;
    int m = 1;
    std::size_t n = 2;
    std::size_t p = 1;
    Box omega;  // n - p dimensional
    std::map<CoefficientKey, ScalarField> coefficients;
    ScalarField forcing;
    std::optional<double> lambda_hint;
    /// Known limit solution u_inf(x_{p+1}); only for 1D cross-sections.
    std::optional<Polynomial1D> exact_limit;

    std::size_t cross_dim() const noexcept { return n - p; }

    /// Omega_l = (-l, l)^p x omega.
    Box cylinder(double l) const { return Box::centered_cube(p, l).times(omega); }

    /// Structural checks that do not need sampling.
    void check_structure() const {
        if (m < 1) throw ConfigError("m must be a positive integer");
        if (m > 3) throw ConfigError("operators with m > 3 are not supported");
        if (!(p >= 1 && p < n)) throw ConfigError("p must satisfy 1 <= p < n");
        if (omega.dim() != n - p)
            throw ConfigError("omega has " + std::to_string(omega.dim()) + " dimensions, expected " +
                              std::to_string(n - p));
        for (const auto& [key, field] : coefficients) {
            const auto& [a, b] = key;
            if (a.size() != n || b.size() != n) throw ConfigError("coefficient index has the wrong dimension");
            if (a.length() > m || b.length() > m)
                throw ConfigError("coefficient a_" + a.code() + "_" + b.code() + " exceeds order m");
            if (field.declared_vars() != n) throw ConfigError("coefficient field declared for the wrong dimension");
        }
    }

    /// a_{ab} == a_{ba} as configured entries, optionally restricted to N2 x N2.
    bool symmetric(bool limit_only = false) const {
        for (const auto& [key, field] : coefficients) {
            const auto& [a, b] = key;
            if (limit_only && !(in_N2(a, p, m) && in_N2(b, p, m))) continue;
            auto it = coefficients.find({b, a});
            if (it == coefficients.end() || !(it->second == field)) return false;
        }
        return true;
    }

    /// Stable textual description, used for hashing and reports.
    std::string canonical_text() const {
        std::ostringstream os;
        os << "[problem]\nm = " << m << "\nn = " << n << "\np = " << p << "\nomega = ";
        for (std::size_t k = 0; k < omega.dim(); ++k) {
            if (k) os << ",";
            os << Expression::constant(omega.lo[k]).print() << "," << Expression::constant(omega.hi[k]).print();
        }
        os << "\n";
        if (lambda_hint) os << "lambda = " << Expression::constant(*lambda_hint).print() << "\n";
        os << "[coef]\n";
        for (const auto& [key, field] : coefficients)
            os << "a_" << key.first.code() << "_" << key.second.code() << " = " << field.expression().print() << "\n";
        os << "[forcing]\nf = " << forcing.expression().print() << "\n";
        return os.str();
    }
};

/// FNV-1a, 64 bit.
inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

/// Parses the sectioned key/value config:
///   [problem] m=, n=, p=, omega=lo,hi[,lo,hi...], lambda= (optional)
///   [coef]    a_<alpha>_<beta> = <expr>
///   [forcing] f = <expr>
inline ProblemSpec parse_problem_config(std::string_view text, std::string name = "config") {
    ProblemSpec spec;
    spec.name = std::move(name);
    std::map<std::string, std::pair<std::string, int>> problem_keys;
    std::vector<std::tuple<std::string, std::string, int>> coef_lines;
    std::optional<std::pair<std::string, int>> forcing_line;

    std::string section;
    std::istringstream in{std::string(text)};
    std::string line;
    int lineno = 0;
    auto trim = [](std::string s) {
        auto b = s.find_first_not_of(" \t\r");
        auto e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    auto fail = [&](int ln, const std::string& msg) -> ConfigError {
        return ConfigError("line " + std::to_string(ln) + ": " + msg);
    };

    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw fail(lineno, "malformed section header");
            section = trim(line.substr(1, line.size() - 2));
            if (section != "problem" && section != "coef" && section != "forcing")
                throw fail(lineno, "unknown section [" + section + "]");
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos) throw fail(lineno, "expected key = value");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (section.empty()) throw fail(lineno, "key outside of any section");
        if (value.empty()) throw fail(lineno, "empty value for '" + key + "'");
        if (section == "problem") {
            if (key != "m" && key != "n" && key != "p" && key != "omega" && key != "lambda")
                throw fail(lineno, "unknown key '" + key + "' in [problem]");
            if (problem_keys.count(key)) throw fail(lineno, "duplicate key '" + key + "'");
            problem_keys[key] = {value, lineno};
        } else if (section == "coef") {
            if (key.rfind("a_", 0) != 0) throw fail(lineno, "unknown key '" + key + "' in [coef]");
            coef_lines.emplace_back(key, value, lineno);
        } else {
            if (key != "f") throw fail(lineno, "unknown key '" + key + "' in [forcing]");
            if (forcing_line) throw fail(lineno, "duplicate key 'f'");
            forcing_line = {{value, lineno}};
        }
    }

    auto get_int = [&](const std::string& key) {
        auto it = problem_keys.find(key);
        if (it == problem_keys.end()) throw ConfigError("missing [problem] key '" + key + "'");
        try {
            std::size_t used = 0;
            int v = std::stoi(it->second.first, &used);
            if (used != it->second.first.size()) throw std::invalid_argument("trailing");
            return v;
        } catch (const std::exception&) {
            throw fail(it->second.second, "'" + key + "' must be an integer");
        }
    };
    spec.m = get_int("m");
    int n = get_int("n");
    int p = get_int("p");
    if (n < 2 || p < 1 || p >= n) throw ConfigError("dimensions must satisfy 1 <= p < n");
    spec.n = static_cast<std::size_t>(n);
    spec.p = static_cast<std::size_t>(p);

    auto oit = problem_keys.find("omega");
    if (oit == problem_keys.end()) throw ConfigError("missing [problem] key 'omega'");
    {
        std::vector<double> bounds;
        std::istringstream os(oit->second.first);
        std::string tok;
        while (std::getline(os, tok, ',')) {
            try {
                std::size_t used = 0;
                tok = trim(tok);
                bounds.push_back(std::stod(tok, &used));
                if (used != tok.size()) throw std::invalid_argument("trailing");
            } catch (const std::exception&) {
                throw fail(oit->second.second, "omega bounds must be numbers");
            }
        }
        if (bounds.size() != 2 * spec.cross_dim())
            throw fail(oit->second.second, "omega needs " + std::to_string(2 * spec.cross_dim()) + " bounds (lo,hi pairs)");
        std::vector<double> lo, hi;
        for (std::size_t k = 0; k < spec.cross_dim(); ++k) {
            lo.push_back(bounds[2 * k]);
            hi.push_back(bounds[2 * k + 1]);
        }
        try {
            spec.omega = Box(lo, hi);
        } catch (const std::invalid_argument& e) {
            throw fail(oit->second.second, e.what());
        }
    }
    if (auto it = problem_keys.find("lambda"); it != problem_keys.end()) {
        try {
            spec.lambda_hint = std::stod(it->second.first);
        } catch (const std::exception&) {
            throw fail(it->second.second, "'lambda' must be a number");
        }
        if (!(*spec.lambda_hint > 0)) throw fail(it->second.second, "'lambda' must be positive");
    }

    for (const auto& [key, value, ln] : coef_lines) {
        std::string digits = key.substr(2);
        MultiIndex both;
        try {
            both = parse_multiindex(digits, 2 * spec.n);
        } catch (const std::invalid_argument& e) {
            throw fail(ln, "unknown key '" + key + "' in [coef]: " + e.what());
        }
        CoefficientKey ck{both.slice(0, spec.n), both.slice(spec.n, spec.n)};
        if (spec.coefficients.count(ck)) throw fail(ln, "duplicate coefficient '" + key + "'");
        try {
            spec.coefficients.emplace(ck, ScalarField::parse(value, spec.n));
        } catch (const ParseError& e) {
            throw fail(ln, std::string("in '") + key + "': " + e.what());
        }
    }
    if (!forcing_line) throw ConfigError("missing [forcing] f");
    try {
        spec.forcing = ScalarField::parse(forcing_line->first, spec.n);
    } catch (const ParseError& e) {
        throw fail(forcing_line->second, std::string("in 'f': ") + e.what());
    }
    spec.check_structure();
    return spec;
}

inline ProblemSpec load_problem_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config '" + path + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_problem_config(ss.str(), path);
}

/// Catalog of strip problems on (-l,l) x (0,1).
///   poisson_strip     -Laplace u = 1
///   biharmonic_strip  Laplace^2 u = 1
///   varcoef_strip     -div(a(x2) grad u) = sin(pi x2),  a = 1 + x2^2/2
inline ProblemSpec builtin_problem(const std::string& name) {
    ProblemSpec s;
    s.name = name;
    s.n = 2;
    s.p = 1;
    s.omega = Box({0.0}, {1.0});
    auto field = [&](std::string_view t) { return ScalarField::parse(t, s.n); };
    if (name == "poisson_strip") {
        s.m = 1;
        s.coefficients.emplace(CoefficientKey{{1, 0}, {1, 0}}, field("1"));
        s.coefficients.emplace(CoefficientKey{{0, 1}, {0, 1}}, field("1"));
        s.forcing = field("1");
        s.exact_limit = Polynomial1D{{0.0, 0.5, -0.5}};
    } else if (name == "biharmonic_strip") {
        s.m = 2;
        s.coefficients.emplace(CoefficientKey{{2, 0}, {2, 0}}, field("1"));
        s.coefficients.emplace(CoefficientKey{{0, 2}, {0, 2}}, field("1"));
        s.coefficients.emplace(CoefficientKey{{2, 0}, {0, 2}}, field("1"));
        s.coefficients.emplace(CoefficientKey{{0, 2}, {2, 0}}, field("1"));
        s.forcing = field("1");
        // x^2 (1-x)^2 / 24
        s.exact_limit = Polynomial1D{{0.0, 0.0, 1.0 / 24.0, -2.0 / 24.0, 1.0 / 24.0}};
    } else if (name == "varcoef_strip") {
        s.m = 1;
        s.coefficients.emplace(CoefficientKey{{1, 0}, {1, 0}}, field("1 + x2^2/2"));
        s.coefficients.emplace(CoefficientKey{{0, 1}, {0, 1}}, field("1 + x2^2/2"));
        s.forcing = field("sin(pi*x2)");
    } else {
        throw ConfigError("unknown builtin problem '" + name + "'");
    }
    s.check_structure();
    return s;
}

inline bool is_builtin_problem(const std::string& name) {
    return name == "poisson_strip" || name == "biharmonic_strip" || name == "varcoef_strip";
}

struct HypothesisReport {
    bool forcing_x1_independent = true;      // f = f(X2)
    bool coefficients_x1_independent = true;  // a_{ab} = a_{ab}(X2) for a in N2
    std::vector<std::string> x1_dependent_fields;
    double lambda_hat = 0.0;  // sampled ellipticity constant
    bool elliptic = false;
    std::vector<std::pair<std::string, double>> sup_bounds;  // sampled |a_{ab}|_inf
    bool bounded = true;
    std::vector<std::string> warnings;
    int sample_count = 0;
    std::uint64_t seed = 0;

    bool passed() const { return forcing_x1_independent && coefficients_x1_independent && elliptic && bounded; }
};

namespace detail {

/// Uniform double in [0,1) from a 64-bit engine, independent of the
/// standard library's distribution implementation.
inline double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline double checked_eval(const ScalarField& f, std::span<const double> x, const std::string& what) {
    double v = f(x);
    if (!std::isfinite(v)) {
        std::ostringstream os;
        os << "evaluation of " << what << " is not finite at (";
        for (std::size_t k = 0; k < x.size(); ++k) os << (k ? "," : "") << x[k];
        os << ")";
        throw std::domain_error(os.str());
    }
    return v;
}

}  // namespace detail

/// Half-width of the axial sampling window used by validate_hypotheses.
inline constexpr double axial_sample_halfwidth = 100.0;

/// Sampled checks of X1-independence (forcing; N2 coefficients),
/// ellipticity of the principal part and boundedness of the coefficients.
inline HypothesisReport validate_hypotheses(const ProblemSpec& spec, int sample_count = 256, std::uint64_t seed = 0) {
    if (sample_count < 1) throw std::invalid_argument("sample_count must be >= 1");
    spec.check_structure();
    HypothesisReport rep;
    rep.sample_count = sample_count;
    rep.seed = seed;
    std::mt19937_64 rng(seed);
    const std::size_t n = spec.n, p = spec.p;

    auto sample_point = [&] {
        std::vector<double> x(n);
        for (std::size_t k = 0; k < p; ++k)
            x[k] = axial_sample_halfwidth * (2.0 * detail::unit_uniform(rng) - 1.0);
        for (std::size_t k = p; k < n; ++k)
            x[k] = spec.omega.lo[k - p] + spec.omega.extent(k - p) * detail::unit_uniform(rng);
        return x;
    };

    auto same = [](double a, double b) {
        return std::abs(a - b) <= 1e-12 * std::max({1.0, std::abs(a), std::abs(b)});
    };

    // (a) X1-independence on paired samples differing only in X1
    std::vector<std::pair<std::string, const ScalarField*>> axial_checked;
    axial_checked.emplace_back("f", &spec.forcing);
    for (const auto& [key, field] : spec.coefficients)
        if (in_N2(key.first, p, spec.m))
            axial_checked.emplace_back("a_" + key.first.code() + "_" + key.second.code(), &field);

    std::vector<bool> dependent(axial_checked.size(), false);
    for (int s = 0; s < sample_count; ++s) {
        std::vector<double> x = sample_point();
        std::vector<double> y = x;
        for (std::size_t k = 0; k < p; ++k)
            y[k] = axial_sample_halfwidth * (2.0 * detail::unit_uniform(rng) - 1.0);
        for (std::size_t i = 0; i < axial_checked.size(); ++i) {
            const auto& [label, field] = axial_checked[i];
            if (!same(detail::checked_eval(*field, x, label), detail::checked_eval(*field, y, label)))
                dependent[i] = true;
        }
    }
    for (std::size_t i = 0; i < axial_checked.size(); ++i) {
        if (!dependent[i]) continue;
        rep.x1_dependent_fields.push_back(axial_checked[i].first);
        if (i == 0)
            rep.forcing_x1_independent = false;
        else
            rep.coefficients_x1_independent = false;
    }

    // (b) ellipticity: min over x and unit xi of sum_{|a|=|b|=m} a_ab(x) xi^(a+b)
    std::vector<std::vector<double>> directions;
    if (n == 2) {
        for (int k = 0; k < std::max(sample_count, 64); ++k) {
            double t = std::numbers::pi * k / std::max(sample_count, 64);
            directions.push_back({std::cos(t), std::sin(t)});
        }
    } else {
        for (std::size_t k = 0; k < n; ++k) {
            std::vector<double> e(n, 0.0);
            e[k] = 1.0;
            directions.push_back(e);
        }
        for (int k = 0; k < sample_count; ++k) {
            std::vector<double> xi(n);
            double norm2 = 0.0;
            for (auto& c : xi) {
                // Box-Muller
                double u1 = 1.0 - detail::unit_uniform(rng), u2 = detail::unit_uniform(rng);
                c = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
                norm2 += c * c;
            }
            for (auto& c : xi) c /= std::sqrt(norm2);
            directions.push_back(xi);
        }
    }
    std::vector<std::pair<MultiIndex, const ScalarField*>> principal;
    for (const auto& [key, field] : spec.coefficients)
        if (key.first.length() == spec.m && key.second.length() == spec.m)
            principal.emplace_back(key.first + key.second, &field);

    double lambda = std::numeric_limits<double>::infinity();
    std::vector<double> sup(spec.coefficients.size(), 0.0);
    for (int s = 0; s < sample_count; ++s) {
        std::vector<double> x = sample_point();
        std::vector<double> values;
        for (const auto& [idx, field] : principal) values.push_back(detail::checked_eval(*field, x, "coefficient"));
        for (const auto& xi : directions) {
            double form = 0.0;
            for (std::size_t i = 0; i < principal.size(); ++i) {
                double mono = 1.0;
                for (std::size_t k = 0; k < n; ++k) mono *= std::pow(xi[k], principal[i].first[k]);
                form += values[i] * mono;
            }
            lambda = std::min(lambda, form);
        }
        // (c) sampled sup norms
        std::size_t i = 0;
        for (const auto& [key, field] : spec.coefficients) {
            sup[i] = std::max(sup[i], std::abs(detail::checked_eval(field, x, "coefficient")));
            ++i;
        }
    }
    rep.lambda_hat = principal.empty() ? 0.0 : lambda;
    rep.elliptic = rep.lambda_hat > 0.0;
    std::size_t i = 0;
    for (const auto& [key, field] : spec.coefficients) {
        rep.sup_bounds.emplace_back("a_" + key.first.code() + "_" + key.second.code(), sup[i]);
        if (!std::isfinite(sup[i])) rep.bounded = false;
        ++i;
    }
    if (spec.lambda_hint && rep.lambda_hat < *spec.lambda_hint)
        rep.warnings.push_back("sampled ellipticity constant is below the configured lambda");
    rep.warnings.push_back("continuity of the principal coefficients is not verified by sampling");
    return rep;
}

}  // namespace cylasym
