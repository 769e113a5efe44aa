#pragma once

#include <winfree/classical_winfree.hpp>
#include <winfree/equilibria.hpp>
#include <winfree/harness/config.hpp>

#include <algorithm>
#include <filesystem>
#include <map>
#include <iostream>

namespace winfree::harness {

/// Exit statuses of the command line tool.
enum ExitCode : int
{
    exit_pass = 0,
    exit_certificate_fail = 1,
    exit_validation_error = 2,
};

// ---------------------------------------------------------------------------------------------
// realization: the seed-dependent model and initial data

struct Realization
{
    std::uint64_t seed = 0;
    ModelConfig cfg;
    EnsembleState initial;
    std::optional<EnsembleState> partner;  // stability: the second trajectory
};

namespace detail {

enum Stream : std::uint64_t
{
    stream_frequency = 1,
    stream_initial = 2,
    stream_partner = 3,
};

inline Rng stream_rng(std::uint64_t seed, Stream role, int index)
{
    return Rng(split_seed(seed, (static_cast<std::uint64_t>(role) << 32) | static_cast<std::uint64_t>(index)));
}

inline SkewMatrix random_frequency(const FrequencySpec& fq, int n, Rng& rng)
{
    std::uniform_real_distribution<double> u(fq.min_fraction, 1.0);
    const double scale = fq.max_norm * u(rng);
    return scale * sample_skew_direction(n, rng);
}

inline std::vector<SkewMatrix> frequencies(const ExperimentSpec& s, std::uint64_t seed)
{
    const auto& fq = s.frequencies;
    std::vector<SkewMatrix> out;
    if (fq.mode == "explicit")
    {
        for (const auto& m : fq.explicit_values) out.emplace_back(m);
        return out;
    }
    if (fq.mode == "homogeneous")
    {
        SkewMatrix w = SkewMatrix::zero(s.dim);
        if (!fq.explicit_values.empty())
        {
            w = SkewMatrix(fq.explicit_values.front());
        }
        else
        {
            Rng rng = stream_rng(seed, stream_frequency, 0);
            w = random_frequency(fq, s.dim, rng);
        }
        return std::vector<SkewMatrix>(static_cast<std::size_t>(s.count), w);
    }
    for (int i = 0; i < s.count; ++i)
    {
        Rng rng = stream_rng(seed, stream_frequency, i);
        out.push_back(random_frequency(fq, s.dim, rng));
    }
    return out;
}

inline double reference_coupling(const ExperimentSpec& s, const std::vector<SkewMatrix>& w)
{
    if (!s.gamma0) throw ConfigError("model.kappa_factor needs framework.gamma0 to define the reference threshold");
    const FrameworkParams fw = s.framework();
    if (s.kind == ExperimentKind::Herd) return kappa_c(s.influence, fw, w, std::max(1, fw.n0()));
    return kappa_trapping(s.influence, fw, w);
}

inline EnsembleState initial_state(const ExperimentSpec& s, const ModelConfig& cfg, std::uint64_t seed, Stream role)
{
    EnsembleState st;
    const auto& in = s.initial;
    if (in.mode == "explicit")
    {
        for (const auto& m : in.explicit_values) st.rotations.emplace_back(m);
        return st;
    }
    const FrameworkParams fw = s.framework();
    std::vector<double> follower_radius(static_cast<std::size_t>(s.count), 0.0);
    if (s.kind == ExperimentKind::Herd && in.mode == "ball")
    {
        for (int i = 0; i < s.count; ++i)
        {
            double r = in.follower_radius.value_or(0.0);
            if (!in.follower_radius)
            {
                // just inside Gamma_i, kept off the antipodal shell
                const double x = herd_ratio(cfg.influence(), fw, norm(cfg.omegas()[i].matrix()), cfg.kappa(), s.count,
                                            std::max(1, fw.n0()));
                r = x <= 1.0 ? std::min(big_gamma_of_ratio(x) * (1.0 - 1e-9), 1.95) : fw.gamma0;
            }
            follower_radius[static_cast<std::size_t>(i)] = r;
        }
    }
    const std::vector<int> leaders = fw.leaders.empty() ? std::vector<int>{0} : fw.leaders;
    for (int i = 0; i < s.count; ++i)
    {
        Rng rng = stream_rng(seed, role, i);
        Matrix r;
        if (in.mode == "haar")
        {
            r = sample_haar(s.dim, rng).matrix();
        }
        else
        {
            double radius = in.radius.value_or(fw.gamma0);
            const bool leader = std::find(leaders.begin(), leaders.end(), i) != leaders.end();
            if (s.kind == ExperimentKind::Herd && !leader) radius = follower_radius[static_cast<std::size_t>(i)];
            if (!(radius > 0.0)) throw ConfigError("initial: ball sampling needs initial.radius or framework.gamma0 > 0");
            r = sample_ball(s.dim, radius, rng).matrix();
        }
        // balls are centred at the attraction point
        st.rotations.emplace_back(cfg.attraction_is_identity() ? r : Matrix(cfg.attraction().matrix() * r));
    }
    return st;
}

}  // namespace detail

inline Realization realize(const ExperimentSpec& s, std::uint64_t seed)
{
    auto w = detail::frequencies(s, seed);
    const double kappa = s.kappa ? *s.kappa : *s.kappa_factor * detail::reference_coupling(s, w);
    std::optional<RotationMatrix> q;
    if (s.attraction) q = RotationMatrix(*s.attraction);
    Realization r{seed, ModelConfig(kappa, std::move(w), s.influence, q), {}, std::nullopt};
    if (s.kind != ExperimentKind::FixedPoint) r.initial = detail::initial_state(s, r.cfg, seed, detail::stream_initial);
    if (s.kind == ExperimentKind::Stability) r.partner = detail::initial_state(s, r.cfg, seed, detail::stream_partner);
    return r;
}

// ---------------------------------------------------------------------------------------------
// hypothesis validation

struct Check
{
    std::string id;
    std::string requirement;
    bool ok = false;
    bool required = false;
    Json value;
    Json bound;
    std::string note;

    Json to_json() const
    {
        Json j{{"id", id}, {"requirement", requirement}, {"ok", ok}, {"required", required}, {"value", value}, {"bound", bound}};
        if (!note.empty()) j["note"] = note;
        return j;
    }
};

struct ValidationReport
{
    std::string kind;
    std::vector<Check> checks;
    Json thresholds = Json::object();
    bool override_hypotheses = false;

    bool ok() const
    {
        for (const auto& c : checks)
            if (c.required && !c.ok) return false;
        return true;
    }

    std::vector<std::string> failed() const
    {
        std::vector<std::string> out;
        for (const auto& c : checks)
            if (c.required && !c.ok) out.push_back(c.id);
        return out;
    }

    const Check* find(const std::string& id) const
    {
        for (const auto& c : checks)
            if (c.id == id) return &c;
        return nullptr;
    }

    Json to_json() const
    {
        Json items = Json::array();
        for (const auto& c : checks) items.push_back(c.to_json());
        return Json{{"kind", kind},
                    {"ok", ok()},
                    {"failed", failed()},
                    {"override_hypotheses", override_hypotheses},
                    {"checks", items},
                    {"thresholds", thresholds}};
    }
};

namespace detail {

inline std::vector<std::string> required_checks(const ExperimentSpec& s)
{
    switch (s.kind)
    {
        case ExperimentKind::Simulate: return {};
        case ExperimentKind::Trap: return {"F_A1", "F_A2", "F_A3"};
        case ExperimentKind::Herd: return {"F_A1", "herd.coupling", "herd.leaders", "herd.followers"};
        case ExperimentKind::Stability: return {"F_A1", "F_A2", "F_A3", "stability.rate"};
        case ExperimentKind::Sync: return {"F_B1", "F_B2", "F_B3", "F_B.homogeneous"};
        case ExperimentKind::Equilibrium:
            return {"F_A1", "F_A2", "F_A3", "stability.rate", "fixedpoint.coupling", "equilibrium.attraction"};
        case ExperimentKind::FixedPoint:
            if (s.bracket) return {"fixedpoint.bracket"};
            return {"F_A1", "fixedpoint.coupling"};
        case ExperimentKind::Reduce2d: return {"reduce2d.dim", "reduce2d.attraction"};
    }
    return {};
}

inline double max_initial_distance(const ModelConfig& cfg, const EnsembleState& st, const std::vector<int>& only = {})
{
    double m = 0.0;
    for (int i = 0; i < static_cast<int>(st.rotations.size()); ++i)
    {
        if (!only.empty() && std::find(only.begin(), only.end(), i) == only.end()) continue;
        m = std::max(m, distance_to_attraction(cfg, st.rotations[static_cast<std::size_t>(i)].matrix()));
    }
    return m;
}

}  // namespace detail

/// Itemized check of every framework hypothesis, with the computed thresholds echoed.
inline ValidationReport validate_framework(const ExperimentSpec& s, const Realization& r)
{
    ValidationReport rep;
    rep.kind = to_string(s.kind);
    rep.override_hypotheses = s.override_hypotheses;
    const ModelConfig& cfg = r.cfg;
    const InfluenceFunction& f = cfg.influence();
    const FrameworkParams fw = s.framework();
    const bool have_gamma0 = s.gamma0.has_value();
    const double wmax = winfree::detail::max_norm(cfg.omegas());

    auto add = [&](Check c) { rep.checks.push_back(std::move(c)); };
    auto guarded = [&](const std::string& id, const std::string& req, auto&& body) {
        Check c{id, req, false, false, nullptr, nullptr, ""};
        if (!have_gamma0)
        {
            c.note = "framework.gamma0 is not set";
        }
        else
        {
            try
            {
                body(c);
            }
            catch (const std::exception& e)
            {
                c.ok = false;
                c.note = e.what();
            }
        }
        add(std::move(c));
    };

    auto radii = [&](Check& c) {
        const bool beta_ok = fw.beta > 0.0 && fw.beta < pi / 2;
        const double cap = 2.0 * std::sin(0.5 * fw.beta);
        const bool g0_ok = fw.gamma0 > 0.0 && fw.gamma0 < cap;
        const bool g_ok = std::isfinite(fw.gamma) && fw.gamma < fw.beta;
        c.ok = beta_ok && g0_ok && g_ok;
        c.value = Json{{"beta", fw.beta}, {"gamma0", fw.gamma0}, {"gamma", std::isfinite(fw.gamma) ? Json(fw.gamma) : Json(nullptr)}};
        c.bound = Json{{"beta_max", pi / 2}, {"gamma0_max", cap}};
        if (f.beta() > fw.beta) c.note = "influence support exceeds framework beta";
    };
    auto coupling = [&](Check& c, double omega) {
        const double ig = f(fw.gamma);
        const double need = ig > 0.0 ? omega / (ig * std::sin(2.0 * std::sin(0.5 * fw.gamma))) : std::numeric_limits<double>::infinity();
        c.ok = cfg.kappa() > need;
        c.value = cfg.kappa();
        c.bound = std::isfinite(need) ? Json(need) : Json("inf");
    };
    auto confined = [&](Check& c) {
        double d = detail::max_initial_distance(cfg, r.initial);
        if (r.partner) d = std::max(d, detail::max_initial_distance(cfg, *r.partner));
        c.ok = d < fw.gamma0;
        c.value = d;
        c.bound = fw.gamma0;
    };

    guarded("F_A1", "0 < beta < pi/2, 0 < gamma0 < 2 sin(beta/2), gamma < beta", radii);
    guarded("F_A2", "kappa > max||Omega_j|| / (I(gamma) sin(2 sin(gamma/2)))", [&](Check& c) { coupling(c, wmax); });
    guarded("F_A3", "every R_i(0) in B_gamma0 around Q", confined);

    bool homogeneous = true;
    for (const auto& w : cfg.omegas()) homogeneous = homogeneous && norm(w.matrix() - cfg.omegas().front().matrix()) == 0.0;
    add(Check{"F_B.homogeneous", "all Omega_i equal", homogeneous, false, homogeneous, true, ""});
    guarded("F_B1", "0 < beta < pi/2, 0 < gamma0 < 2 sin(beta/2), gamma < beta", radii);
    guarded("F_B2", "kappa > ||Omega|| / (I(gamma) sin(2 sin(gamma/2)))", [&](Check& c) { coupling(c, wmax); });
    guarded("F_B3", "every R_i(0) in B_gamma0 around Q", confined);

    if (s.kind == ExperimentKind::Herd)
    {
        const std::vector<int> leaders = fw.leaders.empty() ? std::vector<int>{0} : fw.leaders;
        const int n0 = static_cast<int>(leaders.size());
        guarded("herd.coupling", "kappa > kappa_c(gamma, N0)", [&](Check& c) {
            const double kc = kappa_c(f, fw, cfg.omegas(), n0);
            c.ok = cfg.kappa() > kc;
            c.value = cfg.kappa();
            c.bound = kc;
        });
        guarded("herd.leaders", "leaders in B_gamma0 around Q", [&](Check& c) {
            for (int l : leaders)
                if (l < 0 || l >= cfg.count()) throw DomainError("leader index " + std::to_string(l) + " out of range");
            const double d = detail::max_initial_distance(cfg, r.initial, leaders);
            c.ok = d < fw.gamma0;
            c.value = d;
            c.bound = fw.gamma0;
        });
        guarded("herd.followers", "every follower inside its Gamma_i ball", [&](Check& c) {
            c.ok = true;
            Json worst = Json::array();
            for (int i = 0; i < cfg.count(); ++i)
            {
                if (std::find(leaders.begin(), leaders.end(), i) != leaders.end()) continue;
                const double x = herd_ratio(f, fw, norm(cfg.omegas()[i].matrix()), cfg.kappa(), cfg.count(), n0);
                const double d = distance_to_attraction(cfg, r.initial.rotations[static_cast<std::size_t>(i)].matrix());
                const bool ok = x <= 1.0 && d < big_gamma_of_ratio(std::min(x, 1.0));
                c.ok = c.ok && ok;
                worst.push_back(Json{{"i", i}, {"distance", d}, {"ratio", x}, {"big_gamma", x <= 1.0 ? Json(big_gamma_of_ratio(x)) : Json(nullptr)}});
            }
            c.value = worst;
        });
    }
    if (s.kind == ExperimentKind::Stability || s.kind == ExperimentKind::Equilibrium)
    {
        guarded("stability.rate", "lambda1 > 0", [&](Check& c) {
            const double l1 = lambda1(f, fw, cfg.kappa());
            c.ok = l1 > 0.0;
            c.value = l1;
            c.bound = 0.0;
        });
    }
    if (s.kind == ExperimentKind::Equilibrium || (s.kind == ExperimentKind::FixedPoint && !s.bracket))
    {
        guarded("fixedpoint.coupling", "kappa sin(gamma) I(gamma) > max||Omega_j||", [&](Check& c) {
            const double v = cfg.kappa() * std::sin(fw.gamma) * f(fw.gamma);
            c.ok = v > wmax || wmax == 0.0;
            c.value = v;
            c.bound = wmax;
        });
    }
    if (s.kind == ExperimentKind::Equilibrium || s.kind == ExperimentKind::Reduce2d)
    {
        const std::string id = s.kind == ExperimentKind::Equilibrium ? "equilibrium.attraction" : "reduce2d.attraction";
        add(Check{id, "attraction point Q = I", cfg.attraction_is_identity(), false, cfg.attraction_is_identity(), true, ""});
    }
    if (s.kind == ExperimentKind::Reduce2d) add(Check{"reduce2d.dim", "n = 2", cfg.dim() == 2, false, cfg.dim(), 2, ""});
    if (s.kind == ExperimentKind::FixedPoint && s.bracket)
    {
        const FixedPointProblem p(cfg);
        const bool ok = s.bracket->first >= p.domain_start() && s.bracket->first > 0.0;
        add(Check{"fixedpoint.bracket", "bracket inside the domain of f", ok, false, Json{s.bracket->first, s.bracket->second},
                  p.domain_start(), ""});
    }

    for (const auto& id : detail::required_checks(s))
    {
        bool seen = false;
        for (auto& c : rep.checks)
        {
            if (c.id == id)
            {
                c.required = true;
                seen = true;
            }
        }
        if (!seen) rep.checks.push_back(Check{id, "required by " + rep.kind, false, true, nullptr, nullptr, "not evaluated"});
    }

    if (have_gamma0)
    {
        try
        {
            rep.thresholds = thresholds(cfg, fw).to_json();
        }
        catch (const std::exception& e)
        {
            rep.thresholds = Json{{"error", e.what()}};
        }
    }
    return rep;
}

// ---------------------------------------------------------------------------------------------
// experiment runs

struct SweepRow
{
    std::string parameter;
    std::string certificate;
    bool pass = false;
    double measured = 0.0;
    double bound = 0.0;
};

struct SeedResult
{
    std::uint64_t seed = 0;
    ValidationReport validation;
    std::vector<Certificate> certificates;
    std::vector<SweepRow> rows;
    std::map<std::string, std::string> artifacts;  // file name -> contents

    bool pass() const
    {
        for (const auto& c : certificates)
            if (!c.pass) return false;
        return true;
    }
};

namespace detail {

inline Json integration_json(const IntegrationOptions& o)
{
    return Json{{"stepper", to_string(o.stepper)}, {"h", o.h}, {"t_end", o.t_end}, {"stride", o.stride}};
}

inline Certificate simple_certificate(const std::string& name, const Json& hypotheses, bool pass, double measured, double bound,
                                      Json witnesses = Json::object())
{
    witnesses["measured"] = measured;
    witnesses["bound"] = bound;
    return Certificate{name, hypotheses, pass, std::move(witnesses)};
}

/// Headline number and bound for the sweep table.
inline std::pair<double, double> headline(const Certificate& c)
{
    const Json& w = c.witnesses;
    auto num = [](const Json& j) { return j.is_number() ? j.get<double>() : std::numeric_limits<double>::quiet_NaN(); };
    if (c.name == "trapping") return {num(w.value("max_distance", Json())), num(w.value("bound", Json()))};
    if (c.name == "herding")
    {
        double worst = 0.0;
        for (const auto& t : w.value("tails", Json::array()))
        {
            if (t.contains("tail_max_distance") && num(t["asymptotic_radius"]) > 0.0)
            {
                worst = std::max(worst, num(t["tail_max_distance"]) / num(t["asymptotic_radius"]));
            }
        }
        return {worst, 1.0};
    }
    if (c.name == "sync") return {num(w.value("worst_ratio_to_envelope", Json())), 1.0 + num(c.hypotheses.value("eps_cert", Json()))};
    if (c.name == "l1_stability") return {num(w.value("measured_slope", Json())), -num(w.value("lambda1", Json()))};
    if (c.name == "relaxation") return {num(w.value("final_gap", Json())), num(c.hypotheses.value("final_tol", Json()))};
    return {num(w.value("measured", Json())), num(w.value("bound", Json()))};
}

inline Json hypothesis_echo(const ExperimentSpec& s, const Realization& r)
{
    Json j = s.framework().to_json();
    j["kappa"] = r.cfg.kappa();
    j["N"] = r.cfg.count();
    j["n"] = r.cfg.dim();
    j["max_omega_norm"] = winfree::detail::max_norm(r.cfg.omegas());
    j["eps_cert"] = s.eps_cert;
    return j;
}

inline IntegrationOptions with_states(IntegrationOptions o, int state_stride)
{
    o.state_stride = state_stride;
    return o;
}

inline void add_trajectory(SeedResult& out, const ExperimentSpec& s, const std::string& name, const ModelConfig& cfg,
                           const TrajectoryRecord& rec, const Json& rates = Json::object())
{
    if (s.write_trajectory) out.artifacts[name + ".csv"] = trajectory_csv(rec);
    out.artifacts[name + "_summary.json"] = trajectory_summary(cfg, rec, rates).dump(2) + "\n";
}

inline void run_simulate(const ExperimentSpec& s, const Realization& r, SeedResult& out)
{
    add_trajectory(out, s, "trajectory", r.cfg, integrate(r.cfg, r.initial, s.integration));
}

inline void run_trap(const ExperimentSpec& s, const Realization& r, SeedResult& out)
{
    const auto rec = integrate(r.cfg, r.initial, s.integration);
    add_trajectory(out, s, "trajectory", r.cfg, rec);
    auto c = certify_trapping(rec, s.framework(), s.eps_cert);
    c.hypotheses.update(hypothesis_echo(s, r));
    c.hypotheses["kappa_trap"] = kappa_trapping(r.cfg.influence(), s.framework(), r.cfg.omegas());
    out.certificates.push_back(std::move(c));
}

inline void run_herd(const ExperimentSpec& s, const Realization& r, SeedResult& out)
{
    const auto rec = integrate(r.cfg, r.initial, s.integration);
    add_trajectory(out, s, "trajectory", r.cfg, rec);
    auto c = certify_herding(rec, r.cfg, s.framework(), s.eps_cert);
    c.hypotheses.update(hypothesis_echo(s, r));
    out.certificates.push_back(std::move(c));
}

inline void run_stability(const ExperimentSpec& s, const Realization& r, SeedResult& out)
{
    const FrameworkParams fw = s.framework();
    const auto [a, b] = integrate_pair(r.cfg, r.initial, *r.partner, s.integration);
    const double l1 = lambda1(r.cfg.influence(), fw, r.cfg.kappa());
    const double l2 = lambda2(r.cfg.influence(), fw, r.cfg.kappa());
    RateOptions opt;
    opt.eps = s.eps_cert;
    const RateReport rep = measure_l1_rate(a, b, l1, l2, opt);
    add_trajectory(out, s, "trajectory", r.cfg, a, rep.to_json());
    add_trajectory(out, s, "trajectory_partner", r.cfg, b, rep.to_json());
    auto ta = certify_trapping(a, fw, s.eps_cert);
    auto tb = certify_trapping(b, fw, s.eps_cert);
    tb.name = "trapping_partner";
    Json hyp = hypothesis_echo(s, r);
    hyp["lambda1"] = l1;
    hyp["lip_star"] = lip_star_bound(r.cfg.influence());
    hyp["tol_rate"] = opt.tol_rate;
    hyp["burn_in"] = opt.burn_in;
    ta.hypotheses.update(hyp);
    tb.hypotheses.update(hyp);
    out.certificates.push_back(std::move(ta));
    out.certificates.push_back(std::move(tb));
    out.certificates.push_back(rate_certificate(rep, hyp));
}

inline void run_sync(const ExperimentSpec& s, const Realization& r, SeedResult& out)
{
    const FrameworkParams fw = s.framework();
    const auto rec = integrate(r.cfg, r.initial, with_states(s.integration, 1));
    add_trajectory(out, s, "trajectory", r.cfg, rec);
    const double l1 = lambda1(r.cfg.influence(), fw, r.cfg.kappa());
    const double l2 = lambda2(r.cfg.influence(), fw, r.cfg.kappa());
    Json hyp = hypothesis_echo(s, r);
    hyp["lambda1"] = l1;
    hyp["lambda2"] = l2;
    auto c = certify_sync(rec, l2, s.eps_cert);
    c.hypotheses.update(hyp);
    out.certificates.push_back(std::move(c));
    out.certificates.push_back(simple_certificate("rate_order", hyp, l2 > l1, l2, l1));
}

inline void run_equilibrium(const ExperimentSpec& s, const Realization& r, SeedResult& out)
{
    const FrameworkParams fw = s.framework();
    Json hyp = hypothesis_echo(s, r);
    const auto fp = solve_fixed_point(r.cfg, fw);
    out.artifacts["fixedpoint.json"] = fp.to_json().dump(2) + "\n";
    out.certificates.push_back(simple_certificate("fixed_point", hyp, fp.residual <= fixed_point_tolerance, fp.residual,
                                                  fixed_point_tolerance, fp.to_json()));

    const auto e = construct_equilibrium(r.cfg, fp.x_star);
    out.artifacts["equilibrium.json"] = e.to_json().dump(2) + "\n";
    const double sandwich = distance_sandwich_violation(e, r.cfg);
    const double consistency = std::abs(mean_influence(e.rotations, r.cfg) - fp.x_star);
    const double worst = std::max({e.residual, sandwich, consistency});
    out.certificates.push_back(simple_certificate(
        "equilibrium", hyp, worst <= 1e-10, worst, 1e-10,
        Json{{"residual", e.residual}, {"sandwich_violation", sandwich}, {"self_consistency", consistency}}));

    const auto still = integrate(r.cfg, EnsembleState{0.0, e.rotations}, with_states(s.integration, 1));
    double moved = 0.0;
    for (const auto& st : still.states) moved = std::max(moved, l1_distance(st, e.rotations));
    out.certificates.push_back(simple_certificate("stationarity", hyp, moved <= s.stationarity_tol, moved, s.stationarity_tol));

    const auto rec = integrate(r.cfg, r.initial, with_states(s.integration, 1));
    add_trajectory(out, s, "trajectory", r.cfg, rec);
    RateOptions opt;
    opt.eps = s.eps_cert;
    auto c = certify_relaxation(rec, e, lambda1(r.cfg.influence(), fw, r.cfg.kappa()), fw.gamma, s.relaxation_tol, opt);
    c.hypotheses.update(hyp);
    out.certificates.push_back(std::move(c));
}

inline void run_fixedpoint(const ExperimentSpec& s, const Realization& r, SeedResult& out)
{
    const FixedPointProblem p(r.cfg);
    Json hyp = hypothesis_echo(s, r);
    FixedPointResult fp;
    double a = 0.0, b = 1.0;
    if (s.bracket)
    {
        std::tie(a, b) = *s.bracket;
        fp = bisect_fixed_point(p, a, b);
        hyp["bracket"] = Json{a, b};
    }
    else
    {
        fp = solve_fixed_point(r.cfg, s.framework());
        a = std::max(p.domain_start(), 1e-12);
        b = std::max(1.0, fp.x1);
    }
    out.artifacts["fixedpoint.json"] = fp.to_json().dump(2) + "\n";
    out.certificates.push_back(simple_certificate("fixed_point", hyp, fp.residual <= fixed_point_tolerance, fp.residual,
                                                  fixed_point_tolerance, fp.to_json()));

    const auto scan = scan_fixed_point(p, a, b, s.scan_points, s.zero_tol);
    out.artifacts["scan.csv"] = scan.to_csv();
    // the scan must see the root: a zero on the grid or a sign change next to x*
    const double spacing = (b - a) / static_cast<double>(s.scan_points - 1);
    double nearest = std::numeric_limits<double>::infinity();
    for (double m : scan.sign_changes) nearest = std::min(nearest, std::abs(m - fp.x_star));
    for (std::size_t k = 0; k < scan.x.size(); ++k)
    {
        if (std::abs(scan.x[k] - scan.fx[k]) <= s.zero_tol) nearest = std::min(nearest, std::abs(scan.x[k] - fp.x_star));
    }
    Json w{{"zero_fraction", scan.zero_fraction},
           {"sign_changes", scan.sign_changes.size()},
           {"max_abs_residual", scan.max_abs_residual},
           {"grid_spacing", spacing},
           {"points", s.scan_points}};
    out.certificates.push_back(simple_certificate("scan", hyp, nearest <= spacing, nearest, spacing, w));
}

inline void run_reduce2d(const ExperimentSpec& s, const Realization& r, SeedResult& out)
{
    std::vector<double> nu, theta0;
    for (std::size_t i = 0; i < r.initial.rotations.size(); ++i)
    {
        nu.push_back(r.cfg.omegas()[i].matrix()(1, 0));
        theta0.push_back(extract_phase(r.initial.rotations[i]));
    }
    IntegrationOptions opt = s.integration;
    const auto rec = integrate(r.cfg, r.initial, with_states(opt, 1));
    add_trajectory(out, s, "trajectory", r.cfg, rec);
    const auto phases = ScalarWinfree{r.cfg.kappa(), nu, r.cfg.influence()}.integrate(theta0, opt.h, opt.t_end);
    double worst = 0.0;
    std::string csv = "i,matrix_phase,scalar_phase,error\n";
    for (std::size_t i = 0; i < nu.size(); ++i)
    {
        const double pm = extract_phase(rec.states.back()[i]);
        const double err = std::abs(wrap_angle(pm - phases[i]));
        worst = std::max(worst, err);
        csv += std::to_string(i) + ',' + format_double(pm) + ',' + format_double(wrap_angle(phases[i])) + ',' + format_double(err) + '\n';
    }
    out.artifacts["phases.csv"] = csv;
    Json hyp = hypothesis_echo(s, r);
    hyp["reduce_tol"] = s.reduce_tol;
    out.certificates.push_back(simple_certificate("reduction", hyp, worst <= s.reduce_tol, worst, s.reduce_tol));
}

}  // namespace detail

/// Validates and runs one seed; artifacts stay in memory.
inline SeedResult run_seed(const ExperimentSpec& s, std::uint64_t seed)
{
    SeedResult out;
    out.seed = seed;
    const Realization r = realize(s, seed);
    out.validation = validate_framework(s, r);
    out.artifacts["validation.json"] = out.validation.to_json().dump(2) + "\n";
    if (!out.validation.ok() && !s.override_hypotheses) return out;

    switch (s.kind)
    {
        case ExperimentKind::Simulate: detail::run_simulate(s, r, out); break;
        case ExperimentKind::Trap: detail::run_trap(s, r, out); break;
        case ExperimentKind::Herd: detail::run_herd(s, r, out); break;
        case ExperimentKind::Stability: detail::run_stability(s, r, out); break;
        case ExperimentKind::Sync: detail::run_sync(s, r, out); break;
        case ExperimentKind::Equilibrium: detail::run_equilibrium(s, r, out); break;
        case ExperimentKind::FixedPoint: detail::run_fixedpoint(s, r, out); break;
        case ExperimentKind::Reduce2d: detail::run_reduce2d(s, r, out); break;
    }

    const std::string param = "seed=" + std::to_string(seed);
    Json certs = Json::array();
    for (const auto& c : out.certificates)
    {
        const auto [measured, bound] = detail::headline(c);
        out.rows.push_back(SweepRow{param, c.name, c.pass, measured, bound});
        certs.push_back(c.to_json());
    }
    const Json doc{{"kind", to_string(s.kind)},
                   {"seed", seed},
                   {"outcome", out.pass() ? "PASS" : "FAIL"},
                   {"config", config_to_json(r.cfg)},
                   {"config_hash", config_hash(r.cfg)},
                   {"framework", s.framework().to_json()},
                   {"integration", detail::integration_json(s.integration)},
                   {"validation", out.validation.to_json()},
                   {"certificates", certs}};
    out.artifacts["certificate.json"] = doc.dump(2) + "\n";
    return out;
}

inline std::string sweep_csv(const std::vector<SweepRow>& rows)
{
    std::string out = "parameter,certificate,outcome,measured,bound\n";
    for (const auto& r : rows)
    {
        out += r.parameter + ',' + r.certificate + ',' + (r.pass ? "PASS" : "FAIL") + ',' + format_double(r.measured) + ',' +
               format_double(r.bound) + '\n';
    }
    return out;
}

/// Machine-readable reason printed on validation failure.
inline Json validation_failure(const SeedResult& r)
{
    return Json{{"error", "validation"}, {"seed", r.seed}, {"failed", r.validation.failed()}, {"report", r.validation.to_json()}};
}

/// Runs every seed and writes artifacts under out_dir/seed-<seed>/ plus out_dir/sweep.csv.
inline int run(const ExperimentSpec& s, std::ostream& log = std::cerr)
{
    namespace fs = std::filesystem;
    fs::create_directories(s.out_dir);
    std::vector<SweepRow> rows;
    bool all_pass = true;
    for (std::uint64_t seed : s.seeds)
    {
        SeedResult r = run_seed(s, seed);
        const fs::path dir = fs::path(s.out_dir) / ("seed-" + std::to_string(seed));
        fs::create_directories(dir);
        for (const auto& [name, text] : r.artifacts) write_text_file((dir / name).string(), text);
        if (!r.validation.ok() && !s.override_hypotheses)
        {
            log << validation_failure(r).dump() << '\n';
            return exit_validation_error;
        }
        for (const auto& c : r.certificates)
        {
            log << "seed " << seed << ": " << c.name << ' ' << (c.pass ? "PASS" : "FAIL") << '\n';
        }
        all_pass = all_pass && r.pass();
        rows.insert(rows.end(), r.rows.begin(), r.rows.end());
    }
    write_text_file((fs::path(s.out_dir) / "sweep.csv").string(), sweep_csv(rows));
    return all_pass ? exit_pass : exit_certificate_fail;
}

}  // namespace winfree::harness
