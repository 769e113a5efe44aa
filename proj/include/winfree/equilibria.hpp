#pragma once

// Equilibria through the mean-influence fixed point x = f(x), where
//     f(x) = (1/N) sum_i I~( sqrt( sum_j arcsin^2(lambda_ij / (kappa x)) ) )
// and lambda_ij are the canonical rates of Omega_i.

#include <winfree/analysis.hpp>
#include <winfree/dynamics.hpp>

#include <optional>
#include <string>
#include <vector>

namespace winfree {

class FixedPointProblem
{
  public:
    explicit FixedPointProblem(const ModelConfig& cfg) : kappa_(cfg.kappa()), influence_(cfg.influence())
    {
        if (!(kappa_ > 0.0)) throw DomainError("fixed point: kappa must be positive");
        for (const auto& w : cfg.omegas())
        {
            rates_.push_back(canonical_skew_form(w).rates);
            norms_.push_back(norm(w.matrix()));
        }
    }

    double kappa() const { return kappa_; }
    const std::vector<std::vector<double>>& rates() const { return rates_; }
    const std::vector<double>& norms() const { return norms_; }
    double max_rate() const
    {
        double m = 0.0;
        for (const auto& r : rates_)
            for (double l : r) m = std::max(m, l);
        return m;
    }
    double max_norm() const
    {
        double m = 0.0;
        for (double v : norms_) m = std::max(m, v);
        return m;
    }

    /// Smallest x for which every arcsin argument is at most 1.
    double domain_start() const { return max_rate() / kappa_; }

    double f(double x) const
    {
        double s = 0.0;
        for (const auto& r : rates_)
        {
            double sq = 0.0;
            for (double l : r)
            {
                const double a = asin_arg(l, x);
                sq += a * a;
            }
            s += influence_(std::sqrt(sq));
        }
        return s / static_cast<double>(rates_.size());
    }

    /// Lower bound: influence at arcsin(||Omega_j|| / (kappa x)).
    double g(double x) const
    {
        double s = 0.0;
        for (double v : norms_) s += influence_(asin_arg(v, x));
        return s / static_cast<double>(norms_.size());
    }

    /// Upper bound: influence at ||Omega_j|| / (kappa x).
    double h(double x) const
    {
        if (!(x > 0.0)) throw DomainError("fixed point: x must be positive");
        double s = 0.0;
        for (double v : norms_) s += influence_(v / (kappa_ * x));
        return s / static_cast<double>(norms_.size());
    }

  private:
    double asin_arg(double l, double x) const
    {
        if (!(x > 0.0)) throw DomainError("fixed point: x must be positive");
        double a = l / (kappa_ * x);
        if (a > 1.0 + 1e-14) throw DomainError("fixed point: arcsin argument " + format_double(a) + " exceeds 1");
        return std::asin(std::min(a, 1.0));
    }

    double kappa_;
    InfluenceFunction influence_;
    std::vector<std::vector<double>> rates_;
    std::vector<double> norms_;
};

inline double mean_influence_map(double x, const ModelConfig& cfg) { return FixedPointProblem(cfg).f(x); }

struct FixedPointResult
{
    double x_star = 0.0;
    double x0 = 0.0;
    double x1 = 0.0;
    int iterations = 0;
    double residual = 0.0;
    double interior_bound = 0.0;  // max ||Omega|| / (kappa sin gamma); NaN when no framework was given

    Json to_json() const
    {
        return Json{{"x_star", x_star}, {"bracket", {x0, x1}}, {"iterations", iterations}, {"residual", residual},
                    {"interior_bound", std::isfinite(interior_bound) ? Json(interior_bound) : Json(nullptr)}};
    }
};

inline constexpr double fixed_point_tolerance = 1e-12;

/// Bisection on x - f(x) over a bracket with x0 - f(x0) <= 0 <= x1 - f(x1).
inline FixedPointResult bisect_fixed_point(const FixedPointProblem& p, double x0, double x1)
{
    if (!(x0 <= x1)) throw DomainError("bisect_fixed_point: empty bracket");
    double lo = x0, hi = x1;
    double flo = lo - p.f(lo), fhi = hi - p.f(hi);
    if (flo > 0.0 || fhi < 0.0) throw DomainError("bisect_fixed_point: x - f(x) does not change sign on the bracket");
    FixedPointResult r;
    r.x0 = x0;
    r.x1 = x1;
    r.interior_bound = std::nan("");
    double x = std::abs(flo) <= std::abs(fhi) ? lo : hi;
    double fx = std::abs(flo) <= std::abs(fhi) ? flo : fhi;
    while (std::abs(fx) > fixed_point_tolerance && r.iterations < 200)
    {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        const double fm = mid - p.f(mid);
        ++r.iterations;
        if (fm <= 0.0) lo = mid;
        else hi = mid;
        x = mid;
        fx = fm;
    }
    r.x_star = x;
    r.residual = std::abs(fx);
    if (r.residual > fixed_point_tolerance)
    {
        throw NumericalError("bisect_fixed_point: residual " + format_double(r.residual) + " above tolerance");
    }
    return r;
}

/// Bracket [x0, x1] as in the existence argument, then bisection.
inline FixedPointResult solve_fixed_point(const ModelConfig& cfg, const FrameworkParams& fw)
{
    const FixedPointProblem p(cfg);
    const double wmax = p.max_norm();
    if (wmax == 0.0)
    {
        FixedPointResult r = bisect_fixed_point(p, 1.0, 1.0);
        r.interior_bound = 0.0;
        return r;
    }
    const double ig = cfg.influence()(fw.gamma);
    const double sg = std::sin(fw.gamma);
    if (!(cfg.kappa() * sg * ig > wmax))
    {
        throw InfeasibleError("solve_fixed_point: coupling condition kappa > max||Omega|| / (sin(gamma) I~(gamma)) fails");
    }
    const double base = wmax / (cfg.kappa() * sg);
    double eps = 1e-3 * base;
    double x0 = base + eps;
    int halvings = 0;
    while (x0 - p.g(x0) > 0.0)
    {
        if (++halvings > 60) throw NumericalError("solve_fixed_point: no x0 with G(x0) <= 0 after 60 halvings");
        eps *= 0.5;
        x0 = base + eps;
    }
    double x1 = std::max(1.0, 2.0 * x0);
    while (x1 - p.h(x1) < 0.0) x1 *= 2.0;
    FixedPointResult r = bisect_fixed_point(p, x0, x1);
    r.interior_bound = base;
    if (!(r.x_star > base)) throw NumericalError("solve_fixed_point: root left the gamma interior");
    return r;
}

struct FixedPointScan
{
    std::vector<double> x;
    std::vector<double> fx;
    std::vector<double> sign_changes;  // midpoints of intervals where x - f(x) changes sign
    double max_abs_residual = 0.0;
    double zero_fraction = 0.0;  // share of grid points with |x - f(x)| <= zero_tol

    std::string to_csv() const
    {
        std::string out = "x,f(x),x-f(x)\n";
        for (std::size_t k = 0; k < x.size(); ++k)
        {
            out += format_double(x[k]) + ',' + format_double(fx[k]) + ',' + format_double(x[k] - fx[k]) + '\n';
        }
        return out;
    }
};

/// Uniform grid of `points` values of x - f(x) on [a, b].
inline FixedPointScan scan_fixed_point(const FixedPointProblem& p, double a, double b, std::size_t points,
                                       double zero_tol = 1e-10)
{
    if (points < 2 || !(a < b)) throw DomainError("scan_fixed_point: need a < b and at least two points");
    FixedPointScan s;
    s.x.resize(points);
    s.fx.resize(points);
    std::size_t zeros = 0;
    for (std::size_t k = 0; k < points; ++k)
    {
        const double x = k + 1 == points ? b : a + (b - a) * static_cast<double>(k) / static_cast<double>(points - 1);
        s.x[k] = x;
        s.fx[k] = p.f(x);
        const double res = x - s.fx[k];
        s.max_abs_residual = std::max(s.max_abs_residual, std::abs(res));
        if (std::abs(res) <= zero_tol) ++zeros;
        if (k > 0)
        {
            const double prev = s.x[k - 1] - s.fx[k - 1];
            if ((prev < 0.0 && res > 0.0) || (prev > 0.0 && res < 0.0)) s.sign_changes.push_back(0.5 * (s.x[k - 1] + x));
        }
    }
    s.zero_fraction = static_cast<double>(zeros) / static_cast<double>(points);
    return s;
}

struct EquilibriumEnsemble
{
    double x_star = 0.0;
    std::vector<RotationMatrix> rotations;
    std::vector<SkewCanonicalForm> forms;       // P_i from the canonical form of Omega_i
    std::vector<std::vector<double>> angles;    // theta_ij in the block order of forms[i]
    std::vector<std::vector<int>> branches;     // delta_ij
    double residual = 0.0;

    Json to_json() const
    {
        return Json{{"x_star", x_star}, {"angles", angles}, {"branches", branches}, {"residual", residual}};
    }
};

/// max_i ||dR_i/dt|| with the ensemble's own mean influence.
inline double equilibrium_residual(const std::vector<RotationMatrix>& rs, const ModelConfig& cfg)
{
    double worst = 0.0;
    for (const auto& v : rhs(EnsembleState{0.0, rs}, cfg)) worst = std::max(worst, norm(v));
    return worst;
}

/// theta_ij = arcsin(lambda_ij / (kappa x*)), or pi minus that where delta_ij = 1.
inline EquilibriumEnsemble construct_equilibrium(const ModelConfig& cfg, double x_star,
                                                 const std::optional<std::vector<std::vector<int>>>& branches = std::nullopt)
{
    if (!(x_star > 0.0)) throw DomainError("construct_equilibrium: x* must be positive");
    if (!cfg.attraction_is_identity()) throw DomainError("construct_equilibrium: attraction point must be the identity");
    const int n = cfg.dim();
    EquilibriumEnsemble e;
    e.x_star = x_star;
    const double scale = cfg.kappa() * x_star;
    for (int i = 0; i < cfg.count(); ++i)
    {
        const SkewMatrix& w = cfg.omegas()[i];
        SkewCanonicalForm form = canonical_skew_form(w);
        std::vector<double> theta;
        std::vector<int> flags(form.rates.size(), 0);
        if (branches)
        {
            if (static_cast<int>(branches->size()) != cfg.count() || (*branches)[i].size() > form.rates.size())
            {
                throw DomainError("construct_equilibrium: branch flags do not match the block structure");
            }
            std::copy((*branches)[i].begin(), (*branches)[i].end(), flags.begin());
        }
        for (std::size_t j = 0; j < form.rates.size(); ++j)
        {
            const double s = form.rates[j] / scale;
            if (s > 1.0 + 1e-14) throw DomainError("construct_equilibrium: lambda / (kappa x*) = " + format_double(s) + " exceeds 1");
            const double a = std::asin(std::min(s, 1.0));
            theta.push_back(flags[j] ? pi - a : a);
        }
        Matrix r = form.basis.transpose() * block_rotation(theta, n) * form.basis;
        const double mismatch = norm(0.5 * (r - r.transpose()) - w.matrix() / scale);
        if (mismatch > 1e-10)
        {
            throw NumericalError("construct_equilibrium: skew part misses Omega/(kappa x*) by " + format_double(mismatch));
        }
        e.rotations.emplace_back(std::move(r));
        e.forms.push_back(std::move(form));
        e.angles.push_back(std::move(theta));
        e.branches.push_back(std::move(flags));
    }
    e.residual = equilibrium_residual(e.rotations, cfg);
    return e;
}

/// Largest violation of ||Omega_i||/(kappa x*) <= d(I, R_i) <= arcsin(||Omega_i||/(kappa x*)).
inline double distance_sandwich_violation(const EquilibriumEnsemble& e, const ModelConfig& cfg)
{
    double worst = 0.0;
    for (int i = 0; i < cfg.count(); ++i)
    {
        const double s = norm(cfg.omegas()[i].matrix()) / (cfg.kappa() * e.x_star);
        const double d = distance_from_identity(e.rotations[i]);
        worst = std::max(worst, s - d);
        if (s <= 1.0) worst = std::max(worst, d - std::asin(s));
    }
    return worst;
}

/// Exponential approach to an equilibrium after the last entry into the gamma-ball.
inline Certificate certify_relaxation(const TrajectoryRecord& rec, const EquilibriumEnsemble& e, double lambda1_value,
                                      double gamma, double final_tol = 1e-8, const RateOptions& opt = {})
{
    Certificate c{"relaxation", Json{{"lambda1", lambda1_value}, {"gamma", gamma}, {"final_tol", final_tol}, {"eps_cert", opt.eps}},
                  true, {}};
    if (rec.states.empty())
    {
        c.pass = false;
        c.witnesses["reason"] = "record holds no states";
        return c;
    }
    // entry time: first sample after which every oscillator stays inside B_gamma
    std::size_t entry = rec.size();
    for (std::size_t k = rec.size(); k-- > 0;)
    {
        if (rec.max_distance(k) >= gamma) break;
        entry = k;
    }
    if (entry == rec.size())
    {
        c.pass = false;
        c.witnesses["reason"] = "trajectory never settles inside B_gamma";
        return c;
    }
    std::vector<double> t, gap;
    for (std::size_t s = 0; s < rec.states.size(); ++s)
    {
        if (rec.state_samples[s] < entry) continue;
        t.push_back(rec.times[rec.state_samples[s]]);
        gap.push_back(l1_distance(rec.states[s], e.rotations));
    }
    if (t.empty())
    {
        c.pass = false;
        c.witnesses["reason"] = "no stored states after entry";
        return c;
    }
    RateOptions o = opt;
    o.tol_rate = 1.0;  // only the envelope is asserted here
    const RateReport rr = measure_decay(t, gap, lambda1_value, o);
    const double final_gap = gap.back();
    const bool envelope = rr.degenerate || rr.envelope_ok;
    c.pass = envelope && final_gap <= final_tol;
    c.witnesses["entry_time"] = rec.times[entry];
    c.witnesses["gap_at_entry"] = gap.front();
    c.witnesses["final_gap"] = final_gap;
    c.witnesses["envelope_ok"] = envelope;
    c.witnesses["worst_envelope_ratio"] = rr.worst_envelope_ratio;
    c.witnesses["measured_slope"] = rr.fit.slope;
    return c;
}

enum class HomogeneousClass
{
    ClassA,          // every oscillator outside the support: <I> = 0
    ClassB,          // R_i^2 = I with Omega = 0
    GenericBranch,   // Omega != 0 with self-consistent branch angles
    NonEquilibrium,
};

inline std::string to_string(HomogeneousClass c)
{
    switch (c)
    {
        case HomogeneousClass::ClassA: return "class-A";
        case HomogeneousClass::ClassB: return "class-B";
        case HomogeneousClass::GenericBranch: return "generic-branch";
        case HomogeneousClass::NonEquilibrium: return "non-equilibrium";
    }
    return "?";
}

struct Classification
{
    HomogeneousClass label = HomogeneousClass::NonEquilibrium;
    double residual = 0.0;
    double mean_influence = 0.0;
    std::vector<int> minus_one_multiplicity;  // per oscillator, meaningful for class-B

    Json to_json() const
    {
        return Json{{"label", to_string(label)}, {"residual", residual}, {"mean_influence", mean_influence},
                    {"minus_one_multiplicity", minus_one_multiplicity}};
    }
};

inline Classification classify_homogeneous(const std::vector<RotationMatrix>& rs, const ModelConfig& cfg,
                                           double tol = 1e-10)
{
    const Matrix& w0 = cfg.omegas().front().matrix();
    for (const auto& w : cfg.omegas())
    {
        if (norm(w.matrix() - w0) > 0.0) throw DomainError("classify_homogeneous: frequencies are not identical");
    }
    Classification c;
    c.residual = equilibrium_residual(rs, cfg);
    c.mean_influence = mean_influence(rs, cfg);
    const bool omega_zero = norm(w0) == 0.0;
    const int n = cfg.dim();

    if (omega_zero)
    {
        bool involutions = true;
        for (const auto& r : rs)
        {
            const Matrix sq = r.matrix() * r.matrix();
            involutions = involutions && norm(sq - Matrix::Identity(n, n)) <= tol;
            c.minus_one_multiplicity.push_back(static_cast<int>(std::lround(0.5 * (n - r.matrix().trace()))));
        }
        bool even = true;
        for (int m : c.minus_one_multiplicity) even = even && m % 2 == 0;
        if (involutions && even && c.residual <= tol)
        {
            c.label = HomogeneousClass::ClassB;
            return c;
        }
        c.minus_one_multiplicity.clear();
    }

    bool outside = true;
    for (const auto& r : rs) outside = outside && distance_from_identity(r) >= cfg.influence().beta();
    if (outside && c.residual <= tol)
    {
        c.label = HomogeneousClass::ClassA;
        return c;
    }

    if (!omega_zero && c.residual <= tol && c.mean_influence > 0.0)
    {
        const Matrix target = w0 / (cfg.kappa() * c.mean_influence);
        bool consistent = true;
        for (const auto& r : rs) consistent = consistent && norm(0.5 * (r.matrix() - r.matrix().transpose()) - target) <= tol;
        if (consistent)
        {
            c.label = HomogeneousClass::GenericBranch;
            return c;
        }
    }
    c.label = HomogeneousClass::NonEquilibrium;
    return c;
}

/// Orthogonally similar skew matrices share their canonical rates with multiplicity.
inline bool check_skew_multiset(const SkewMatrix& a, const SkewMatrix& b, double tol = 1e-9)
{
    if (a.dim() != b.dim()) return false;
    const auto ra = canonical_skew_form(a).rates;
    const auto rb = canonical_skew_form(b).rates;
    if (ra.size() != rb.size()) return false;
    for (std::size_t k = 0; k < ra.size(); ++k)
    {
        const double sa = ra[k] * ra[k], sb = rb[k] * rb[k];
        if (std::abs(sa - sb) > tol * std::max(1.0, sa)) return false;
    }
    return true;
}

}  // namespace winfree
