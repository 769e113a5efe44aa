#pragma once

// Radial influence profiles r -> I(r): nonincreasing, equal to 1 at r = 0,
// supported on [0, beta] with beta < pi/2, Lipschitz with a known constant.

#include <winfree/io.hpp>
#include <winfree/so_geometry.hpp>

#include <algorithm>
#include <string>
#include <variant>
#include <vector>

namespace winfree {

namespace profile {

struct LinearHat
{
    double beta;
    double operator()(double r) const { return std::max(0.0, 1.0 - r / beta); }
};

struct CosineTaper
{
    double beta;
    double operator()(double r) const
    {
        if (r >= beta) return 0.0;
        const double c = std::cos(0.5 * pi * r / beta);
        return c * c;
    }
};

/// Single-block profile whose fixed-point map is the identity on [x0, 1]:
/// I(arcsin(lambda/(kappa x))) = x there.
struct Continuum
{
    double lambda_star;
    double kappa;
    double x0;
    double beta;

    double r_of(double x) const { return std::asin(lambda_star / (kappa * x)); }

    double operator()(double y) const
    {
        const double r1 = r_of(1.0);
        const double rx0 = r_of(x0);
        if (y <= r1) return 1.0;
        if (y <= rx0) return lambda_star / (kappa * std::sin(y));
        if (y >= beta) return 0.0;
        return x0 * (beta - y) / (beta - rx0);
    }
};

/// Piecewise-linear interpolation through (r_k, v_k); zero beyond the last knot.
struct Tabulated
{
    std::vector<double> r;
    std::vector<double> v;

    double operator()(double y) const
    {
        if (y <= r.front()) return v.front();
        if (y >= r.back()) return 0.0;
        const auto it = std::upper_bound(r.begin(), r.end(), y);
        const auto k = static_cast<std::size_t>(it - r.begin());
        const double w = (y - r[k - 1]) / (r[k] - r[k - 1]);
        return v[k - 1] + w * (v[k] - v[k - 1]);
    }
};

}  // namespace profile

class InfluenceFunction
{
  public:
    using Profile = std::variant<profile::LinearHat, profile::CosineTaper, profile::Continuum, profile::Tabulated>;

    InfluenceFunction(Profile p, double beta, double lip) : p_(std::move(p)), beta_(beta), lip_(lip) {}

    double operator()(double r) const
    {
        if (r < 0.0) throw DomainError("influence evaluated at negative distance");
        if (r == 0.0) return 1.0;
        return std::visit([r](const auto& f) { return f(r); }, p_);
    }

    double beta() const { return beta_; }
    double lip() const { return lip_; }
    const Profile& profile() const { return p_; }

    std::string kind() const
    {
        return std::visit(
            [](const auto& f) -> std::string {
                using T = std::decay_t<decltype(f)>;
                if constexpr (std::is_same_v<T, profile::LinearHat>) return "linear-hat";
                else if constexpr (std::is_same_v<T, profile::CosineTaper>) return "cosine-taper";
                else if constexpr (std::is_same_v<T, profile::Continuum>) return "continuum-constructed";
                else return "user-tabulated";
            },
            p_);
    }

  private:
    Profile p_;
    double beta_;
    double lip_;
};

/// Grid check of monotonicity, support, the limit at zero and the Lipschitz constant.
inline void validate_profile(const InfluenceFunction& f, int grid = 10000)
{
    const double beta = f.beta();
    if (!(beta > 0.0 && beta < 0.5 * pi)) throw InvariantError("influence: beta must lie in (0, pi/2)");
    if (!(f.lip() > 0.0) || !std::isfinite(f.lip())) throw InvariantError("influence: invalid Lipschitz constant");

    const double near_zero = f(1e-8);
    if (std::abs(near_zero - 1.0) > f.lip() * 1e-8 + 1e-12)
    {
        throw InvariantError("influence: I(1e-8) = " + format_double(near_zero) + " is not ~1");
    }

    // include beta itself and the upper end of [0, pi] among the samples
    std::vector<double> rs;
    rs.reserve(grid + 2);
    for (int k = 0; k <= grid; ++k) rs.push_back(pi * k / grid);
    rs.push_back(beta);
    std::sort(rs.begin(), rs.end());

    double prev_r = rs.front();
    double prev_v = f(prev_r);
    for (std::size_t k = 1; k < rs.size(); ++k)
    {
        const double r = rs[k];
        const double v = f(r);
        if (!(v >= 0.0 && v <= 1.0)) throw InvariantError("influence: value " + format_double(v) + " outside [0, 1]");
        if (v > prev_v + 1e-14)
        {
            throw InvariantError("influence: profile increases near r = " + format_double(r));
        }
        if (r >= beta && v != 0.0) throw InvariantError("influence: nonzero beyond beta at r = " + format_double(r));
        if (std::abs(v - prev_v) > f.lip() * (r - prev_r) * (1.0 + 1e-9) + 1e-14)
        {
            throw InvariantError("influence: Lipschitz bound violated near r = " + format_double(r));
        }
        prev_r = r;
        prev_v = v;
    }
}

namespace detail {

inline void check_beta(double beta)
{
    if (!(beta > 0.0 && beta < 0.5 * pi)) throw DomainError("influence: beta must lie in (0, pi/2)");
}

}  // namespace detail

inline InfluenceFunction make_linear_hat(double beta)
{
    detail::check_beta(beta);
    InfluenceFunction f(profile::LinearHat{beta}, beta, 1.0 / beta);
    validate_profile(f);
    return f;
}

inline InfluenceFunction make_cosine_taper(double beta)
{
    detail::check_beta(beta);
    InfluenceFunction f(profile::CosineTaper{beta}, beta, 0.5 * pi / beta);
    validate_profile(f);
    return f;
}

inline InfluenceFunction make_continuum_influence(double lambda_star, double kappa, double x0, double beta)
{
    if (!(lambda_star > 0.0 && kappa > 0.0)) throw DomainError("continuum influence: lambda* and kappa must be positive");
    if (!(lambda_star < kappa)) throw DomainError("continuum influence: requires lambda* < kappa");
    if (!(x0 > lambda_star / kappa && x0 < 1.0)) throw DomainError("continuum influence: x0 must lie in (lambda*/kappa, 1)");
    detail::check_beta(beta);
    const profile::Continuum p{lambda_star, kappa, x0, beta};
    const double r1 = p.r_of(1.0);
    const double rx0 = p.r_of(x0);
    if (!(beta > rx0)) throw DomainError("continuum influence: beta must exceed r(x0) = " + format_double(rx0));
    // the inverse branch is steepest at its left end
    const double lip = std::max(kappa * std::cos(r1) / lambda_star, x0 / (beta - rx0));
    InfluenceFunction f(p, beta, lip);
    validate_profile(f);
    return f;
}

/// Knots must start at (0, 1), increase strictly in r, be nonincreasing in value and end at value 0.
inline InfluenceFunction make_tabulated(std::vector<double> r, std::vector<double> v)
{
    if (r.size() != v.size() || r.size() < 2) throw DomainError("tabulated influence: need at least two knots");
    if (r.front() != 0.0 || v.front() != 1.0) throw DomainError("tabulated influence: first knot must be (0, 1)");
    double lip = 0.0;
    for (std::size_t k = 1; k < r.size(); ++k)
    {
        if (!(r[k] > r[k - 1])) throw DomainError("tabulated influence: r must increase strictly");
        if (!(v[k] <= v[k - 1])) throw DomainError("tabulated influence: values must be nonincreasing");
        lip = std::max(lip, (v[k - 1] - v[k]) / (r[k] - r[k - 1]));
    }
    if (v.back() != 0.0) throw DomainError("tabulated influence: last value must be 0");
    // support ends at the first knot with value zero
    const auto first_zero = static_cast<std::size_t>(std::find(v.begin(), v.end(), 0.0) - v.begin());
    const double beta = r[first_zero];
    detail::check_beta(beta);
    r.resize(first_zero + 1);
    v.resize(first_zero + 1);
    InfluenceFunction f(profile::Tabulated{std::move(r), std::move(v)}, beta, lip);
    validate_profile(f);
    return f;
}

/// CSV rows "r,value"; a non-numeric first row is treated as a header.
inline InfluenceFunction load_tabulated_csv(const std::string& text)
{
    std::vector<double> r, v;
    std::stringstream ss(text);
    std::string line;
    bool first = true;
    while (std::getline(ss, line))
    {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::vector<double> row;
        try
        {
            row = detail::parse_number_list(line, ',');
        }
        catch (const DomainError&)
        {
            if (first)
            {
                first = false;
                continue;
            }
            throw;
        }
        first = false;
        if (row.size() != 2) throw DomainError("tabulated influence: expected two columns");
        r.push_back(row[0]);
        v.push_back(row[1]);
    }
    return make_tabulated(std::move(r), std::move(v));
}

/// (beta / sin beta) Lip(I~): Lipschitz bound for R -> I(d(I, R)) in the half-Frobenius norm.
inline double lip_star_bound(const InfluenceFunction& f) { return f.beta() / std::sin(f.beta()) * f.lip(); }

inline double eval_on_rotation(const InfluenceFunction& f, const RotationMatrix& r)
{
    return f(distance_from_identity(r));
}

inline Json influence_to_json(const InfluenceFunction& f)
{
    Json params = std::visit(
        [](const auto& p) -> Json {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, profile::LinearHat> || std::is_same_v<T, profile::CosineTaper>)
                return Json::object();
            else if constexpr (std::is_same_v<T, profile::Continuum>)
                return Json{{"lambda_star", p.lambda_star}, {"kappa", p.kappa}, {"x0", p.x0}};
            else
                return Json{{"r", p.r}, {"value", p.v}};
        },
        f.profile());
    return Json{{"kind", f.kind()}, {"beta", f.beta()}, {"lip", f.lip()}, {"params", params}};
}

inline InfluenceFunction influence_from_json(const Json& j)
{
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "linear-hat") return make_linear_hat(j.at("beta").get<double>());
    if (kind == "cosine-taper") return make_cosine_taper(j.at("beta").get<double>());
    const Json& p = j.at("params");
    if (kind == "continuum-constructed")
    {
        return make_continuum_influence(p.at("lambda_star").get<double>(), p.at("kappa").get<double>(),
                                        p.at("x0").get<double>(), j.at("beta").get<double>());
    }
    if (kind == "user-tabulated")
    {
        return make_tabulated(p.at("r").get<std::vector<double>>(), p.at("value").get<std::vector<double>>());
    }
    throw DomainError("unknown influence kind '" + kind + "'");
}

}  // namespace winfree
