#pragma once

// Closed-form thresholds for trapping, herding, l1 stability and
// synchronization, plus certificates evaluated on recorded trajectories.

#include <winfree/dynamics.hpp>
#include <winfree/influence.hpp>
#include <winfree/io.hpp>

#include <optional>
#include <string>
#include <vector>

namespace winfree {

/// gamma = 2 arcsin(gamma0 / 2); defined for gamma0 in [0, 2).
inline double gamma_of(double gamma0)
{
    if (!(gamma0 >= 0.0 && gamma0 < 2.0)) throw DomainError("gamma_of: gamma0 must lie in [0, 2)");
    return 2.0 * std::asin(0.5 * gamma0);
}

/// Radii of the framework: support end beta, initial ball gamma0, trapping ball gamma.
struct FrameworkParams
{
    double beta = 0.0;
    double gamma0 = 0.0;
    double gamma = 0.0;
    std::vector<int> leaders;  // index set K; N0 = leaders.size()

    int n0() const { return std::max<int>(1, static_cast<int>(leaders.size())); }

    /// Enforces 0 < beta < pi/2, 0 < gamma0 < 2 sin(beta/2) and gamma < beta.
    static FrameworkParams make(double beta, double gamma0, std::vector<int> leaders = {})
    {
        if (!(beta > 0.0 && beta < 0.5 * pi)) throw DomainError("(F_A1) violated: beta must lie in (0, pi/2)");
        if (!(gamma0 > 0.0 && gamma0 < 2.0 * std::sin(0.5 * beta)))
        {
            throw DomainError("(F_A1) violated: gamma0 = " + format_double(gamma0) + " must lie in (0, 2 sin(beta/2)) = (0, " +
                              format_double(2.0 * std::sin(0.5 * beta)) + ")");
        }
        FrameworkParams fw{beta, gamma0, gamma_of(gamma0), std::move(leaders)};
        if (!(fw.gamma < beta)) throw DomainError("(F_A1) violated: gamma >= beta");
        return fw;
    }

    Json to_json() const
    {
        return Json{{"beta", beta}, {"gamma0", gamma0}, {"gamma", gamma}, {"leaders", leaders}};
    }
};

namespace detail {

inline double influence_at_gamma(const InfluenceFunction& f, const FrameworkParams& fw)
{
    const double ig = f(fw.gamma);
    if (!(ig > 0.0)) throw InfeasibleError("influence vanishes at gamma; no coupling strength satisfies the framework");
    return ig;
}

inline double max_norm(const std::vector<SkewMatrix>& freqs)
{
    double m = 0.0;
    for (const auto& w : freqs) m = std::max(m, norm(w.matrix()));
    return m;
}

}  // namespace detail

/// max ||Omega_j|| / (I~(gamma) sin(2 sin(gamma/2))).
inline double kappa_trapping(const InfluenceFunction& f, const FrameworkParams& fw, const std::vector<SkewMatrix>& freqs)
{
    const double ig = detail::influence_at_gamma(f, fw);
    return detail::max_norm(freqs) / (ig * std::sin(2.0 * std::sin(0.5 * fw.gamma)));
}

/// (N / N0) times the trapping threshold.
inline double kappa_c(const InfluenceFunction& f, const FrameworkParams& fw, const std::vector<SkewMatrix>& freqs, int n0)
{
    const int count = static_cast<int>(freqs.size());
    if (!(n0 >= 1 && n0 <= count)) throw DomainError("kappa_c: N0 must lie in [1, N]");
    return static_cast<double>(count) / n0 * kappa_trapping(f, fw, freqs);
}

/// sqrt(2 + 2 sqrt(1 - x^2)), cross-checked against 2 cos(arcsin(x) / 2).
inline double big_gamma_of_ratio(double x)
{
    if (!(x >= 0.0 && x <= 1.0)) throw InfeasibleError("Gamma: ratio " + format_double(x) + " outside [0, 1]");
    const double radical = std::sqrt(2.0 + 2.0 * std::sqrt(1.0 - x * x));
    const double trig = 2.0 * std::cos(0.5 * std::asin(x));
    if (std::abs(radical - trig) > 1e-14) throw NumericalError("Gamma: half-angle identity mismatch at x = " + format_double(x));
    return radical;
}

inline double herd_ratio(const InfluenceFunction& f, const FrameworkParams& fw, double omega_norm, double kappa,
                         int count, int n0 = 1)
{
    if (!(kappa > 0.0)) throw DomainError("herding ratio: kappa must be positive");
    return static_cast<double>(count) / n0 * omega_norm / (kappa * detail::influence_at_gamma(f, fw));
}

/// Radius of the basin from which oscillator i is drawn in.
inline double big_gamma(const InfluenceFunction& f, const FrameworkParams& fw, const SkewMatrix& omega_i, double kappa,
                        int count)
{
    return big_gamma_of_ratio(herd_ratio(f, fw, norm(omega_i.matrix()), kappa, count));
}

/// 2 arcsin(arcsin(x) / 2) with x = (N / N0) ||Omega_i|| / (kappa I~(gamma)).
inline double asymptotic_radius(const InfluenceFunction& f, const FrameworkParams& fw, const SkewMatrix& omega_i,
                                double kappa, int count, int n0 = 1)
{
    const double x = herd_ratio(f, fw, norm(omega_i.matrix()), kappa, count, n0);
    if (x > 1.0) throw InfeasibleError("asymptotic_radius: ratio " + format_double(x) + " exceeds 1");
    return 2.0 * std::asin(0.5 * std::asin(x));
}

/// kappa (cos(gamma) I~(gamma) - gamma Lip*I).
inline double lambda1(const InfluenceFunction& f, const FrameworkParams& fw, double kappa)
{
    return kappa * (std::cos(fw.gamma) * f(fw.gamma) - fw.gamma * lip_star_bound(f));
}

/// kappa cos(gamma) I~(gamma).
inline double lambda2(const InfluenceFunction& f, const FrameworkParams& fw, double kappa)
{
    return kappa * std::cos(fw.gamma) * f(fw.gamma);
}

struct ThresholdReport
{
    double influence_at_gamma = 0.0;
    double kappa_trap = 0.0;
    double kappa_c = 0.0;
    std::vector<double> big_gamma;          // per oscillator; NaN where the ratio exceeds 1
    std::vector<double> asymptotic_radius;  // per oscillator; NaN where the ratio exceeds 1
    double lambda1 = 0.0;
    double lambda2 = 0.0;

    Json to_json() const
    {
        auto clean = [](const std::vector<double>& v) {
            Json a = Json::array();
            for (double x : v) a.push_back(std::isfinite(x) ? Json(x) : Json(nullptr));
            return a;
        };
        return Json{{"influence_at_gamma", influence_at_gamma},
                    {"kappa_trap", kappa_trap},
                    {"kappa_c", kappa_c},
                    {"big_gamma", clean(big_gamma)},
                    {"asymptotic_radius", clean(asymptotic_radius)},
                    {"lambda1", lambda1},
                    {"lambda2", lambda2}};
    }
};

inline ThresholdReport thresholds(const ModelConfig& cfg, const FrameworkParams& fw)
{
    const auto& f = cfg.influence();
    ThresholdReport t;
    t.influence_at_gamma = detail::influence_at_gamma(f, fw);
    t.kappa_trap = kappa_trapping(f, fw, cfg.omegas());
    t.kappa_c = kappa_c(f, fw, cfg.omegas(), fw.n0());
    for (const auto& w : cfg.omegas())
    {
        const double x1 = herd_ratio(f, fw, norm(w.matrix()), cfg.kappa(), cfg.count());
        const double x0 = herd_ratio(f, fw, norm(w.matrix()), cfg.kappa(), cfg.count(), fw.n0());
        t.big_gamma.push_back(x1 <= 1.0 ? big_gamma_of_ratio(x1) : std::nan(""));
        t.asymptotic_radius.push_back(x0 <= 1.0 ? 2.0 * std::asin(0.5 * std::asin(x0)) : std::nan(""));
    }
    t.lambda1 = lambda1(f, fw, cfg.kappa());
    t.lambda2 = lambda2(f, fw, cfg.kappa());
    return t;
}

/// Outcome of a certificate together with the hypotheses it assumed and the evidence.
struct Certificate
{
    std::string name;
    Json hypotheses = Json::object();
    bool pass = false;
    Json witnesses = Json::object();

    Json to_json() const
    {
        return Json{{"name", name}, {"hypotheses", hypotheses}, {"outcome", pass ? "PASS" : "FAIL"}, {"witnesses", witnesses}};
    }
};

inline constexpr double default_eps_cert = 1e-6;

/// Every sampled distance stays within gamma + eps.
inline Certificate certify_trapping(const TrajectoryRecord& rec, const FrameworkParams& fw, double eps = default_eps_cert)
{
    Certificate c{"trapping", fw.to_json(), true, {}};
    c.hypotheses["eps_cert"] = eps;
    double worst = 0.0;
    for (std::size_t k = 0; k < rec.size(); ++k)
    {
        for (std::size_t i = 0; i < rec.distances[k].size(); ++i)
        {
            const double d = rec.distances[k][i];
            worst = std::max(worst, d);
            if (c.pass && d > fw.gamma + eps)
            {
                c.pass = false;
                c.witnesses["first_violation"] = Json{{"t", rec.times[k]}, {"i", i}, {"distance", d}};
            }
        }
    }
    c.witnesses["max_distance"] = worst;
    c.witnesses["bound"] = fw.gamma + eps;
    c.witnesses["samples"] = rec.size();
    return c;
}

/// Fraction of trailing samples on which herding tails are judged.
inline constexpr double herding_tail_fraction = 0.2;

/// Leaders stay in the closed gamma-ball; every oscillator's tail sits below its asymptotic radius.
inline Certificate certify_herding(const TrajectoryRecord& rec, const ModelConfig& cfg, const FrameworkParams& fw,
                                   double eps = default_eps_cert)
{
    Certificate c{"herding", fw.to_json(), true, {}};
    const int count = cfg.count();
    const int n0 = fw.n0();
    std::vector<int> leaders = fw.leaders.empty() ? std::vector<int>{0} : fw.leaders;
    c.hypotheses["kappa"] = cfg.kappa();
    c.hypotheses["kappa_c"] = kappa_c(cfg.influence(), fw, cfg.omegas(), n0);
    c.hypotheses["N0"] = n0;
    c.hypotheses["eps_cert"] = eps;
    c.hypotheses["tail_fraction"] = herding_tail_fraction;
    if (rec.size() == 0)
    {
        c.pass = false;
        c.witnesses["reason"] = "empty trajectory";
        return c;
    }

    Json leader_report = Json::array();
    for (int l : leaders)
    {
        if (l < 0 || l >= count) throw DomainError("certify_herding: leader index out of range");
        double worst = 0.0;
        for (std::size_t k = 0; k < rec.size(); ++k) worst = std::max(worst, rec.distances[k][l]);
        const bool ok = worst <= fw.gamma + eps;
        c.pass = c.pass && ok;
        leader_report.push_back(Json{{"i", l}, {"max_distance", worst}, {"bound", fw.gamma + eps}, {"pass", ok}});
    }
    c.witnesses["leaders"] = leader_report;

    const auto tail_begin = static_cast<std::size_t>(std::floor((1.0 - herding_tail_fraction) * static_cast<double>(rec.size())));
    Json tails = Json::array();
    for (int i = 0; i < count; ++i)
    {
        const double x = herd_ratio(cfg.influence(), fw, norm(cfg.omegas()[i].matrix()), cfg.kappa(), count, n0);
        double worst = 0.0;
        for (std::size_t k = tail_begin; k < rec.size(); ++k) worst = std::max(worst, rec.distances[k][i]);
        if (x > 1.0)
        {
            c.pass = false;
            tails.push_back(Json{{"i", i}, {"ratio", x}, {"pass", false}, {"reason", "ratio exceeds 1"}});
            continue;
        }
        const double radius = 2.0 * std::asin(0.5 * std::asin(x));
        const bool ok = worst <= radius + eps;
        c.pass = c.pass && ok;
        tails.push_back(Json{{"i", i}, {"tail_max_distance", worst}, {"asymptotic_radius", radius}, {"pass", ok}});
    }
    c.witnesses["tails"] = tails;
    c.witnesses["tail_start_time"] = rec.times[tail_begin];
    return c;
}

/// Values at or below this are treated as roundoff when judging decay envelopes.
inline constexpr double decay_floor = 1e-13;

/// Pairwise ||R_i - R_j||(t) <= e^{-lambda2 t} ||R_i(0) - R_j(0)|| (1 + eps) on recorded states.
inline Certificate certify_sync(const TrajectoryRecord& rec, double lambda2, double eps = default_eps_cert)
{
    Certificate c{"sync", Json{{"lambda2", lambda2}, {"eps_cert", eps}, {"floor", decay_floor}}, true, {}};
    if (rec.states.empty())
    {
        c.pass = false;
        c.witnesses["reason"] = "record holds no states";
        return c;
    }
    const auto& first = rec.states.front();
    const double t0 = rec.times[rec.state_samples.front()];
    const std::size_t count = first.size();
    std::vector<double> initial;
    double initial_max = 0.0;
    for (std::size_t i = 0; i < count; ++i)
        for (std::size_t j = i + 1; j < count; ++j)
        {
            initial.push_back(norm(first[i].matrix() - first[j].matrix()));
            initial_max = std::max(initial_max, initial.back());
        }
    double worst_ratio = 0.0;
    double final_max = 0.0;
    for (std::size_t s = 0; s < rec.states.size(); ++s)
    {
        const double t = rec.times[rec.state_samples[s]];
        const double decay = std::exp(-lambda2 * (t - t0));
        const auto& st = rec.states[s];
        std::size_t p = 0;
        double current_max = 0.0;
        for (std::size_t i = 0; i < count; ++i)
            for (std::size_t j = i + 1; j < count; ++j, ++p)
            {
                const double d = norm(st[i].matrix() - st[j].matrix());
                current_max = std::max(current_max, d);
                const double bound = decay * initial[p] * (1.0 + eps);
                if (d > std::max(bound, decay_floor))
                {
                    if (c.pass) c.witnesses["first_violation"] = Json{{"t", t}, {"i", i}, {"j", j}, {"distance", d}, {"bound", bound}};
                    c.pass = false;
                }
                if (initial[p] > 0.0 && d > decay_floor) worst_ratio = std::max(worst_ratio, d / (decay * initial[p]));
            }
        if (current_max > std::max(decay * initial_max * (1.0 + eps), decay_floor)) c.pass = false;
        final_max = current_max;
    }
    c.witnesses["initial_max_pair_distance"] = initial_max;
    c.witnesses["final_max_pair_distance"] = final_max;
    c.witnesses["worst_ratio_to_envelope"] = worst_ratio;
    return c;
}

struct SlopeFit
{
    double slope = 0.0;
    double intercept = 0.0;
    double rms_residual = 0.0;
    std::size_t points = 0;
    double t_begin = 0.0;
    double t_end = 0.0;
};

/// Least-squares line through (t, log v) for t >= t_begin, stopping at the first v <= floor.
inline SlopeFit fit_log_slope(const std::vector<double>& t, const std::vector<double>& v, double t_begin,
                              double floor = decay_floor)
{
    if (t.size() != v.size()) throw DomainError("fit_log_slope: size mismatch");
    std::vector<double> xs, ys;
    for (std::size_t k = 0; k < t.size(); ++k)
    {
        if (t[k] < t_begin) continue;
        if (!(v[k] > floor)) break;
        xs.push_back(t[k]);
        ys.push_back(std::log(v[k]));
    }
    SlopeFit fit;
    fit.points = xs.size();
    if (xs.size() < 2) return fit;
    Eigen::MatrixXd a(xs.size(), 2);
    Eigen::VectorXd b(xs.size());
    for (std::size_t k = 0; k < xs.size(); ++k)
    {
        a(k, 0) = xs[k];
        a(k, 1) = 1.0;
        b(k) = ys[k];
    }
    const Eigen::Vector2d sol = a.colPivHouseholderQr().solve(b);
    fit.slope = sol(0);
    fit.intercept = sol(1);
    fit.rms_residual = std::sqrt((a * sol - b).squaredNorm() / static_cast<double>(xs.size()));
    fit.t_begin = xs.front();
    fit.t_end = xs.back();
    return fit;
}

struct RateReport
{
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    SlopeFit fit;
    bool degenerate = false;
    bool slope_ok = false;
    bool envelope_ok = false;
    std::optional<double> first_envelope_violation;
    double worst_envelope_ratio = 0.0;

    bool pass() const { return !degenerate && slope_ok && envelope_ok; }

    Json to_json() const
    {
        Json j{{"lambda1", lambda1},
               {"lambda2", lambda2},
               {"measured_slope", fit.slope},
               {"fit_rms_residual", fit.rms_residual},
               {"fit_points", fit.points},
               {"fit_window", {fit.t_begin, fit.t_end}},
               {"degenerate", degenerate},
               {"slope_ok", slope_ok},
               {"envelope_ok", envelope_ok},
               {"worst_envelope_ratio", worst_envelope_ratio},
               {"pass", pass()}};
        if (first_envelope_violation) j["first_envelope_violation"] = *first_envelope_violation;
        return j;
    }
};

struct RateOptions
{
    double burn_in = 0.1;   // fraction of the horizon skipped by the slope fit
    double tol_rate = 0.05; // relative slack on the slope
    double eps = default_eps_cert;
    double floor = decay_floor;
};

/// Decay of an l1 gap series against e^{-lambda t}: slope fit and pointwise envelope.
inline RateReport measure_decay(const std::vector<double>& t, const std::vector<double>& gap, double rate,
                                const RateOptions& opt = {})
{
    if (t.size() != gap.size() || t.empty()) throw DomainError("measure_decay: empty or mismatched series");
    RateReport r;
    r.lambda1 = rate;
    const double g0 = gap.front();
    if (!(g0 > opt.floor))
    {
        r.degenerate = true;
        return r;
    }
    const double t0 = t.front();
    const double horizon = t.back() - t0;
    r.fit = fit_log_slope(t, gap, t0 + opt.burn_in * horizon, opt.floor);
    r.slope_ok = r.fit.points >= 2 && r.fit.slope <= -rate * (1.0 - opt.tol_rate);
    r.envelope_ok = true;
    for (std::size_t k = 0; k < t.size(); ++k)
    {
        const double bound = std::exp(-rate * (t[k] - t0)) * g0;
        if (gap[k] > opt.floor) r.worst_envelope_ratio = std::max(r.worst_envelope_ratio, gap[k] / bound);
        if (gap[k] > std::max(bound * (1.0 + opt.eps), opt.floor))
        {
            if (r.envelope_ok) r.first_envelope_violation = t[k];
            r.envelope_ok = false;
        }
    }
    return r;
}

/// l1 stability between two trajectories integrated under the same model.
inline RateReport measure_l1_rate(const TrajectoryRecord& a, const TrajectoryRecord& b, double lambda1_value,
                                  double lambda2_value = 0.0, const RateOptions& opt = {})
{
    std::vector<double> gap = a.l1_companion;
    std::vector<double> times = a.times;
    if (gap.empty())
    {
        gap = l1_series(a, b);
        times.clear();
        for (std::size_t k : a.state_samples) times.push_back(a.times[k]);
    }
    RateReport r = measure_decay(times, gap, lambda1_value, opt);
    r.lambda2 = lambda2_value;
    return r;
}

inline Certificate rate_certificate(const RateReport& r, const Json& hypotheses)
{
    return Certificate{"l1_stability", hypotheses, r.pass(), r.to_json()};
}

}  // namespace winfree
