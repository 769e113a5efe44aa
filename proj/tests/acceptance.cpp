// Acceptance run: each criterion at its stated tolerance and time budget, one line per criterion.

#include <winfree/harness/experiments.hpp>

#include "oracles.hpp"

#include <chrono>
#include <cstdio>
#include <functional>

using namespace winfree;
using namespace winfree::harness;

namespace {

struct Outcome
{
    bool pass = false;
    std::string detail;
};

struct Criterion
{
    int id;
    std::string title;
    double budget_s;
    std::function<Outcome()> body;
};

std::string fmt(const char* f, double v)
{
    char buf[64];
    std::snprintf(buf, sizeof(buf), f, v);
    return buf;
}

ExperimentSpec deck_spec(const std::string& text)
{
    auto d = ConfigDeck::parse(text);
    d.set("output.trajectory", "false");
    return spec_from_deck(d);
}

std::string seed_list(int first, int count)
{
    std::string s;
    for (int k = 0; k < count; ++k) s += (k ? ", " : "") + std::to_string(first + k);
    return s;
}

/// Runs every seed of a harness deck; reports the first failing certificate.
Outcome run_harness(const ExperimentSpec& s, const std::function<std::string(const std::vector<SeedResult>&)>& summarize)
{
    std::vector<SeedResult> results;
    for (auto seed : s.seeds)
    {
        results.push_back(run_seed(s, seed));
        const auto& r = results.back();
        if (!r.validation.ok()) return {false, "seed " + std::to_string(seed) + " violates " + r.validation.failed().front()};
        for (const auto& c : r.certificates)
        {
            if (!c.pass) return {false, "seed " + std::to_string(seed) + " " + c.name + " FAIL: " + c.witnesses.dump()};
        }
    }
    return {true, summarize(results)};
}

double worst_row(const std::vector<SeedResult>& rs, const std::string& cert, bool ratio_to_bound = false)
{
    double w = -std::numeric_limits<double>::infinity();
    for (const auto& r : rs)
        for (const auto& row : r.rows)
            if (row.certificate == cert) w = std::max(w, ratio_to_bound ? row.measured / row.bound : row.measured);
    return w;
}

// 1 ---------------------------------------------------------------------------------------------
Outcome manifold_preservation()
{
    double worst = 0.0;
    for (int n : {2, 3, 4, 6})
    {
        Rng rng(1000 + static_cast<std::uint64_t>(n));
        std::vector<SkewMatrix> w;
        EnsembleState s;
        for (int i = 0; i < 10; ++i)
        {
            w.push_back(0.5 * sample_skew_direction(n, rng));
            s.rotations.push_back(sample_haar(n, rng));
        }
        ModelConfig cfg(1.0, w, make_linear_hat(1.2));
        IntegrationOptions opt;
        opt.h = 1e-3;
        opt.t_end = 50.0;
        opt.stride = 5000;
        worst = std::max(worst, integrate(cfg, s, opt).max_orth_error);
    }
    return {worst <= 1e-10, "max ||R^T R - I|| = " + fmt("%.2e", worst) + " (<= 1e-10)"};
}

// 2 ---------------------------------------------------------------------------------------------
Outcome planar_reduction()
{
    const auto f = make_cosine_taper(1.3);
    const std::vector<double> nu{0.45, -0.3, 0.2, 0.05, -0.5};
    const std::vector<double> theta0{0.3, -1.1, 2.0, -2.9, 0.9};
    const double kappa = 1.2;
    std::vector<SkewMatrix> w;
    EnsembleState s;
    for (std::size_t i = 0; i < nu.size(); ++i)
    {
        w.push_back(SkewMatrix(nu[i] * unit_j()));
        s.rotations.push_back(embed_phase(theta0[i]));
    }
    IntegrationOptions opt;
    opt.h = 1e-3;
    opt.t_end = 10.0;
    opt.stride = 10000;
    opt.state_stride = 1;
    const auto rec = integrate(ModelConfig(kappa, w, f), s, opt);
    const auto ref = ScalarWinfree{kappa, nu, f}.integrate(theta0, 1e-3, 10.0);
    double worst = 0.0;
    for (std::size_t i = 0; i < nu.size(); ++i)
    {
        worst = std::max(worst, std::abs(wrap_angle(extract_phase(rec.states.back()[i]) - ref[i])));
    }
    return {worst <= 1e-6, "max phase error at t = 10: " + fmt("%.2e", worst) + " (<= 1e-6)"};
}

// 3 ---------------------------------------------------------------------------------------------
Outcome distance_sandwich()
{
    long violations = 0, tested = 0;
    double worst = 0.0;
    for (int n = 3; n <= 6; ++n)
    {
        Rng rng(3000 + static_cast<std::uint64_t>(n));
        for (int k = 0; k < 10000; ++k)
        {
            const RotationMatrix r = sample_haar(n, rng);
            const double d = distance_from_identity(r);
            if (d > pi) continue;
            ++tested;
            const double gap = trace_gap(r);
            const double lo = 4.0 * std::sin(0.5 * d) * std::sin(0.5 * d) - gap;
            const double hi = gap - d * d;
            worst = std::max({worst, lo, hi});
            if (lo > 1e-12 || hi > 1e-12) ++violations;
        }
    }
    return {violations == 0, std::to_string(tested) + " samples with d <= pi, " + std::to_string(violations) +
                                 " violations, worst excess " + fmt("%.1e", worst)};
}

// 4 ---------------------------------------------------------------------------------------------
Outcome trapping()
{
    const auto s = deck_spec(R"(
[experiment]
kind = trap
seeds = )" + seed_list(1, 50) + R"(
[model]
dim = 3
count = 5
kappa_factor = 1.2
[influence]
kind = linear-hat
beta = 1.2
[frequencies]
max_norm = 0.5
[framework]
gamma0 = 0.5
[integration]
h = 0.01
t_end = 100
stride = 10
)");
    return run_harness(s, [](const std::vector<SeedResult>& rs) {
        return std::to_string(rs.size()) + " configs PASS, largest max-distance / (gamma + eps) = " +
               fmt("%.4f", worst_row(rs, "trapping", true));
    });
}

// 5 ---------------------------------------------------------------------------------------------
Outcome l1_envelope()
{
    const auto s = deck_spec(R"(
[experiment]
kind = stability
seeds = )" + seed_list(1, 10) + R"(
[model]
dim = 3
count = 5
kappa = 1.0
[influence]
kind = linear-hat
beta = 1.2
[frequencies]
max_norm = 0.1
[framework]
gamma0 = 0.2
[integration]
h = 0.01
t_end = 30
stride = 10
)");
    return run_harness(s, [](const std::vector<SeedResult>& rs) {
        double lambda = 0.0, slowest = -std::numeric_limits<double>::infinity(), ratio = 0.0;
        for (const auto& r : rs)
            for (const auto& c : r.certificates)
                if (c.name == "l1_stability")
                {
                    lambda = c.witnesses["lambda1"].get<double>();
                    slowest = std::max(slowest, c.witnesses["measured_slope"].get<double>());
                    ratio = std::max(ratio, c.witnesses["worst_envelope_ratio"].get<double>());
                }
        return std::to_string(rs.size()) + " pairs, lambda1 = " + fmt("%.4f", lambda) + ", slowest fitted slope " +
               fmt("%.4f", slowest) + ", worst gap/envelope " + fmt("%.4f", ratio);
    });
}

// 6 ---------------------------------------------------------------------------------------------
Outcome synchronization()
{
    const auto s = deck_spec(R"(
[experiment]
kind = sync
seeds = )" + seed_list(1, 5) + R"(
[model]
dim = 3
count = 8
kappa = 1.5
[influence]
kind = linear-hat
beta = 1.2
[frequencies]
mode = homogeneous
max_norm = 0.1
[framework]
gamma0 = 0.4
[integration]
h = 0.01
t_end = 15
stride = 10
)");
    return run_harness(s, [](const std::vector<SeedResult>& rs) {
        const Json& hyp = rs.front().certificates.front().hypotheses;
        return std::to_string(rs.size()) + " runs, lambda2 = " + fmt("%.4f", hyp["lambda2"].get<double>()) + " > lambda1 = " +
               fmt("%.4f", hyp["lambda1"].get<double>()) + ", worst pair/envelope " + fmt("%.4f", worst_row(rs, "sync"));
    });
}

// 7 ---------------------------------------------------------------------------------------------
Outcome equilibrium()
{
    const auto f = make_linear_hat(1.2);
    const auto fw = FrameworkParams::make(1.2, 0.2);
    Rng rng(7001);
    std::vector<SkewMatrix> w;
    for (int i = 0; i < 5; ++i) w.push_back((0.1 * std::uniform_real_distribution<double>(0.2, 1.0)(rng)) * sample_skew_direction(3, rng));
    const ModelConfig cfg(4.0, w, f);
    const auto fp = solve_fixed_point(cfg, fw);
    const auto e = construct_equilibrium(cfg, fp.x_star);

    double skew_identity = 0.0;
    for (int i = 0; i < cfg.count(); ++i)
    {
        const Matrix& r = e.rotations[static_cast<std::size_t>(i)].matrix();
        skew_identity = std::max(skew_identity, norm(w[static_cast<std::size_t>(i)].matrix() - cfg.kappa() * fp.x_star * 0.5 * (r - r.transpose())));
    }
    const double consistency = std::abs(mean_influence(e.rotations, cfg) - fp.x_star);
    const double sandwich = distance_sandwich_violation(e, cfg);

    IntegrationOptions opt;
    opt.h = 0.01;
    opt.t_end = 10.0;
    opt.stride = 10;
    opt.state_stride = 1;
    double moved = 0.0;
    for (const auto& st : integrate(cfg, EnsembleState{0.0, e.rotations}, opt).states) moved = std::max(moved, l1_distance(st, e.rotations));

    opt.t_end = 20.0;
    std::vector<std::vector<RotationMatrix>> finals;
    for (int run = 0; run < 2; ++run)
    {
        EnsembleState s;
        for (int i = 0; i < 5; ++i) s.rotations.push_back(sample_ball(3, fw.gamma0, rng));
        finals.push_back(integrate(cfg, s, opt).states.back());
    }
    const double apart = l1_distance(finals[0], finals[1]);
    const double to_e = std::max(l1_distance(finals[0], e.rotations), l1_distance(finals[1], e.rotations));

    const bool ok = fp.residual <= 1e-12 && skew_identity <= 1e-10 && consistency <= 1e-10 && e.residual <= 1e-10 &&
                    sandwich <= 1e-10 && moved <= 1e-7 && apart <= 1e-8 && to_e <= 1e-8;
    return {ok, "fixed-point residual " + fmt("%.1e", fp.residual) + ", equilibrium identity " + fmt("%.1e", skew_identity) +
                    ", sandwich " + fmt("%.1e", sandwich) + ", drift " + fmt("%.1e", moved) + ", two runs apart " +
                    fmt("%.1e", apart) + " (to target " + fmt("%.1e", to_e) + ")"};
}

// 8 ---------------------------------------------------------------------------------------------
Outcome continuum_witness()
{
    const ModelConfig cfg(2.0, {SkewMatrix(unit_j())}, make_continuum_influence(1.0, 2.0, 0.6, 1.2));
    const auto scan = scan_fixed_point(FixedPointProblem(cfg), 0.6, 1.0, 1000000);
    return {scan.max_abs_residual <= 1e-10,
            "10^6-point scan on [0.6, 1]: max |x - f(x)| = " + fmt("%.2e", scan.max_abs_residual) + " (<= 1e-10)"};
}

// 9 ---------------------------------------------------------------------------------------------
Outcome big_gamma_identity()
{
    double worst = 0.0;
    for (int k = 0; k <= 100000; ++k)
    {
        const double x = k / 100000.0;
        worst = std::max(worst, std::abs(big_gamma_of_ratio(x) - 2.0 * std::cos(0.5 * std::asin(x))));
    }
    const double e0 = std::abs(big_gamma_of_ratio(0.0) - 2.0);
    const double e1 = std::abs(big_gamma_of_ratio(1.0) - std::sqrt(2.0));
    return {worst <= 1e-14 && e0 <= 1e-15 && e1 <= 1e-15,
            "identity gap " + fmt("%.1e", worst) + ", endpoint errors " + fmt("%.1e", e0) + ", " + fmt("%.1e", e1)};
}

// 10 --------------------------------------------------------------------------------------------
Outcome oracle_equivalences()
{
    Rng rng(10001);
    std::uniform_real_distribution<double> scale(0.1, 3.0);
    double exp_gap = 0.0, angle_gap = 0.0;
    for (int k = 0; k < 500; ++k)
    {
        const int n = 2 + k % 7;
        const SkewMatrix x = scale(rng) * sample_skew_direction(n, rng);
        exp_gap = std::max(exp_gap, norm(exp_so(x).matrix() - exp_so_pade(x).matrix()));

        const RotationMatrix r = sample_haar(n, rng);
        auto ours = principal_angles(r).angles;
        auto ref = oracle::angles_from_complex_eigs(r.matrix());
        std::sort(ours.begin(), ours.end());
        std::sort(ref.begin(), ref.end());
        if (ours.size() != ref.size())
        {
            angle_gap = std::numeric_limits<double>::infinity();
            continue;
        }
        for (std::size_t j = 0; j < ours.size(); ++j) angle_gap = std::max(angle_gap, std::abs(ours[j] - ref[j]));
    }
    int multiset_fail = 0;
    for (int k = 0; k < 1000; ++k)
    {
        const int n = 2 + k % 7;
        const SkewMatrix a = sample_skew_direction(n, rng);
        const Matrix p = sample_haar(n, rng).matrix();
        if (!check_skew_multiset(a, project_skew(p * a.matrix() * p.transpose()))) ++multiset_fail;
        if (n >= 4 && check_skew_multiset(a, project_skew(p * (a.matrix() + block_skew({0.5}, n)) * p.transpose()))) ++multiset_fail;
    }
    return {exp_gap <= 1e-11 && angle_gap <= 1e-9 && multiset_fail == 0,
            "exp gap " + fmt("%.1e", exp_gap) + " (<= 1e-11), angle gap " + fmt("%.1e", angle_gap) +
                " (<= 1e-9), multiset failures " + std::to_string(multiset_fail) + "/1000 pairs"};
}

}  // namespace

int main()
{
    const std::vector<Criterion> criteria{
        {1, "manifold preservation", 30.0, manifold_preservation},
        {2, "planar reduction to the scalar model", 5.0, planar_reduction},
        {3, "trace-gap distance sandwich", 10.0, distance_sandwich},
        {4, "trapping region", 120.0, trapping},
        {5, "l1 exponential envelope", 60.0, l1_envelope},
        {6, "complete state synchronization", 30.0, synchronization},
        {7, "equilibrium construction and relaxation", 60.0, equilibrium},
        {8, "continuum of fixed points", 5.0, continuum_witness},
        {9, "Gamma identity and endpoints", 1e9, big_gamma_identity},
        {10, "oracle equivalences", 1e9, oracle_equivalences},
    };
    int failures = 0;
    for (const auto& c : criteria)
    {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try
        {
            o = c.body();
        }
        catch (const std::exception& e)
        {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool in_time = secs <= c.budget_s;
        const bool pass = o.pass && in_time;
        failures += pass ? 0 : 1;
        std::string timing = fmt("%.2f s", secs);
        if (c.budget_s < 1e8) timing += fmt(" (budget %.0f s)", c.budget_s);
        if (!in_time) timing += " OVER BUDGET";
        std::printf("[%s] criterion %2d %s: %s; %s\n", pass ? "PASS" : "FAIL", c.id, c.title.c_str(), o.detail.c_str(), timing.c_str());
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
