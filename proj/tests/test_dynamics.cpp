#include <winfree/classical_winfree.hpp>
#include <winfree/dynamics.hpp>

#include <gtest/gtest.h>

using namespace winfree;

namespace {

std::vector<SkewMatrix> random_frequencies(int n, int count, double scale, Rng& rng)
{
    std::vector<SkewMatrix> out;
    for (int i = 0; i < count; ++i) out.push_back(scale * sample_skew_direction(n, rng));
    return out;
}

EnsembleState ball_state(int n, int count, double radius, Rng& rng)
{
    EnsembleState s;
    for (int i = 0; i < count; ++i) s.rotations.push_back(sample_ball(n, radius, rng));
    return s;
}

EnsembleState final_state(const ModelConfig& cfg, const EnsembleState& s0, Stepper st, double h, double t_end)
{
    EnsembleState s = s0;
    const int steps = static_cast<int>(std::lround(t_end / h));
    for (int k = 0; k < steps; ++k) s = step(st, s, cfg, h);
    return s;
}

// Observed order from errors at h and h/2 against a fine reference.
double observed_order(const ModelConfig& cfg, const EnsembleState& s0, Stepper st, double h, double t_end,
                      const EnsembleState& ref)
{
    const double e1 = l1_distance(final_state(cfg, s0, st, h, t_end).rotations, ref.rotations);
    const double e2 = l1_distance(final_state(cfg, s0, st, 0.5 * h, t_end).rotations, ref.rotations);
    return std::log2(e1 / e2);
}

}  // namespace

TEST(Rhs, VanishesAtAttractionWithoutFrequencies)
{
    ModelConfig cfg(2.0, {SkewMatrix::zero(3), SkewMatrix::zero(3)}, make_linear_hat(1.0));
    EnsembleState s{0.0, {RotationMatrix::identity(3), RotationMatrix::identity(3)}};
    for (const auto& v : rhs(s, cfg)) EXPECT_EQ(norm(v), 0.0);
}

TEST(Rhs, PlanarCaseMatchesScalarWinfree)
{
    const double nu = 0.7, kappa = 1.3;
    const auto f = make_cosine_taper(1.4);
    ModelConfig cfg(kappa, {SkewMatrix(nu * unit_j())}, f);
    for (double theta : {-1.2, -0.3, 0.0, 0.4, 1.1, 2.5})
    {
        const EnsembleState s{0.0, {embed_phase(theta)}};
        const Matrix v = rhs(s, cfg)[0];
        const double omega = nu - kappa * f(std::abs(theta)) * std::sin(theta);
        EXPECT_LE(norm(v - omega * unit_j() * rotation2(theta)), 1e-15) << theta;
    }
}

TEST(Rhs, TangentToTheGroup)
{
    Rng rng(51);
    for (int n = 2; n <= 6; ++n)
    {
        const auto q = sample_haar(n, rng);
        ModelConfig cfg(3.0, random_frequencies(n, 4, 0.8, rng), make_linear_hat(1.3), q);
        EnsembleState s;
        for (int i = 0; i < 4; ++i) s.rotations.push_back(sample_haar(n, rng));
        const auto v = rhs(s, cfg);
        for (int i = 0; i < 4; ++i)
        {
            const Matrix a = v[i] * s.rotations[i].matrix().transpose();
            EXPECT_LE(norm(a + a.transpose()), 1e-12);
        }
    }
}

TEST(Rhs, DimensionMismatch)
{
    ModelConfig cfg(1.0, {SkewMatrix::zero(3)}, make_linear_hat(1.0));
    EXPECT_THROW(rhs(EnsembleState{0.0, {RotationMatrix::identity(2)}}, cfg), DomainError);
    EXPECT_THROW(rhs(EnsembleState{0.0, {}}, cfg), DomainError);
}

TEST(LieEuler, ZeroFieldLeavesStateUnchanged)
{
    ModelConfig cfg(1.0, {SkewMatrix::zero(3)}, make_linear_hat(1.0));
    const EnsembleState s{0.0, {RotationMatrix::identity(3)}};
    EXPECT_EQ(step_lie_euler(s, cfg, 0.1).rotations[0].matrix(), s.rotations[0].matrix());
}

TEST(FreeFlow, ExponentialUpdatesAreExact)
{
    Rng rng(52);
    for (int n : {3, 4})
    {
        const auto omegas = random_frequencies(n, 3, 1.1, rng);
        ModelConfig cfg(0.0, omegas, make_linear_hat(1.0));
        const EnsembleState s0 = ball_state(n, 3, 1.0, rng);

        const EnsembleState coarse = final_state(cfg, s0, Stepper::LieEuler, 0.5, 2.0);
        const EnsembleState fine = final_state(cfg, s0, Stepper::Rkmk4, 0.01, 2.0);
        for (int i = 0; i < 3; ++i)
        {
            const Matrix exact = exp_so_pade(2.0 * omegas[i]).matrix() * s0.rotations[i].matrix();
            EXPECT_LE(norm(coarse.rotations[i].matrix() - exact), 1e-12);
            EXPECT_LE(norm(fine.rotations[i].matrix() - exact), 2e-12);
        }
    }
}

TEST(Convergence, LieEulerIsFirstOrder)
{
    Rng rng(53);
    ModelConfig cfg(1.5, random_frequencies(3, 3, 0.6, rng), make_cosine_taper(1.5));
    const EnsembleState s0 = ball_state(3, 3, 0.6, rng);
    const EnsembleState ref = final_state(cfg, s0, Stepper::Rkmk4, 1e-3, 1.0);
    const double p = observed_order(cfg, s0, Stepper::LieEuler, 0.02, 1.0, ref);
    EXPECT_NEAR(p, 1.0, 0.15);
}

TEST(Convergence, Rkmk4IsFourthOrder)
{
    Rng rng(54);
    for (int n : {3, 4})
    {
        ModelConfig cfg(1.5, random_frequencies(n, 3, 0.6, rng), make_cosine_taper(1.5));
        const EnsembleState s0 = ball_state(n, 3, 0.6, rng);
        const EnsembleState ref = final_state(cfg, s0, Stepper::Rkmk4, 2.5e-3, 1.0);
        const double p = observed_order(cfg, s0, Stepper::Rkmk4, 0.1, 1.0, ref);
        EXPECT_NEAR(p, 4.0, 0.4) << "n = " << n;
    }
}

TEST(Convergence, AmbientRk4AgreesWithRkmk4)
{
    Rng rng(55);
    ModelConfig cfg(1.5, random_frequencies(3, 4, 0.6, rng), make_cosine_taper(1.5));
    const EnsembleState s0 = ball_state(3, 4, 0.6, rng);
    const EnsembleState a = final_state(cfg, s0, Stepper::AmbientRk4, 0.01, 2.0);
    const EnsembleState b = final_state(cfg, s0, Stepper::Rkmk4, 0.01, 2.0);
    EXPECT_LE(l1_distance(a.rotations, b.rotations), 1e-8);
}

TEST(Rkmk4, OrthogonalityDriftOverManySteps)
{
    Rng rng(56);
    ModelConfig cfg(2.0, random_frequencies(3, 2, 1.0, rng), make_linear_hat(1.2));
    IntegrationOptions opt;
    opt.h = 1e-3;
    opt.t_end = 100.0;  // 1e5 steps
    opt.stride = 1000;
    const auto rec = integrate(cfg, ball_state(3, 2, 0.4, rng), opt);
    EXPECT_LE(rec.max_orth_error, 1e-10);
    EXPECT_EQ(rec.times.back(), 100.0);
}

TEST(Integrate, ZeroHorizonKeepsOnlyInitialSample)
{
    Rng rng(57);
    ModelConfig cfg(1.0, random_frequencies(3, 2, 0.3, rng), make_linear_hat(1.0));
    IntegrationOptions opt;
    opt.t_end = 0.0;
    const auto rec = integrate(cfg, ball_state(3, 2, 0.3, rng), opt);
    ASSERT_EQ(rec.size(), 1u);
    EXPECT_EQ(rec.times[0], 0.0);
}

TEST(Integrate, DeterministicAndLandsOnEndTime)
{
    Rng rng(58);
    ModelConfig cfg(1.0, random_frequencies(4, 3, 0.3, rng), make_linear_hat(1.0));
    const EnsembleState s0 = ball_state(4, 3, 0.5, rng);
    IntegrationOptions opt;
    opt.h = 0.03;
    opt.t_end = 1.0;  // 33 full steps and a short last one
    opt.stride = 5;
    opt.state_stride = 1;
    const auto a = integrate(cfg, s0, opt);
    const auto b = integrate(cfg, s0, opt);
    EXPECT_EQ(trajectory_csv(a), trajectory_csv(b));
    ASSERT_EQ(a.states.size(), b.states.size());
    for (std::size_t k = 0; k < a.states.size(); ++k)
        for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(a.states[k][i].matrix(), b.states[k][i].matrix());
    EXPECT_EQ(a.times.back(), 1.0);
    for (std::size_t k = 1; k < a.times.size(); ++k) EXPECT_GT(a.times[k], a.times[k - 1]);
    EXPECT_EQ(a.size(), 1u + 6u + 1u);
}

TEST(Integrate, CsvAndSummary)
{
    Rng rng(59);
    ModelConfig cfg(1.0, random_frequencies(3, 2, 0.3, rng), make_linear_hat(1.0));
    IntegrationOptions opt;
    opt.h = 0.1;
    opt.t_end = 0.5;
    const auto rec = integrate(cfg, ball_state(3, 2, 0.3, rng), opt);
    const std::string csv = trajectory_csv(rec);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "t,i,dist,trace_gap,mean_influence");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 2 * 6);
    const Json j = trajectory_summary(cfg, rec);
    EXPECT_EQ(j["config_hash"], config_hash(cfg));
    EXPECT_EQ(j["final_distances"].size(), 2u);
    EXPECT_NE(config_hash(cfg), config_hash(cfg.with_kappa(2.0)));
}

TEST(Reduction, PlanarEnsembleMatchesScalarModel)
{
    const auto f = make_cosine_taper(1.3);
    const std::vector<double> nu{0.3, -0.2, 0.5, 0.1, -0.4};
    const std::vector<double> theta0{0.2, -0.5, 1.0, 2.8, -2.0};
    const double kappa = 1.7;
    std::vector<SkewMatrix> omegas;
    EnsembleState s0;
    for (std::size_t i = 0; i < nu.size(); ++i)
    {
        omegas.push_back(SkewMatrix(nu[i] * unit_j()));
        s0.rotations.push_back(embed_phase(theta0[i]));
    }
    ModelConfig cfg(kappa, omegas, f);
    IntegrationOptions opt;
    opt.h = 1e-3;
    opt.t_end = 10.0;
    opt.stride = 10000;
    opt.state_stride = 1;
    const auto rec = integrate(cfg, s0, opt);
    const auto phases = ScalarWinfree{kappa, nu, f}.integrate(theta0, 1e-3, 10.0);
    double worst = 0.0;
    for (std::size_t i = 0; i < nu.size(); ++i)
    {
        worst = std::max(worst, std::abs(wrap_angle(extract_phase(rec.states.back()[i]) - phases[i])));
    }
    EXPECT_LE(worst, 1e-6);
}

TEST(TranslateRight, IdentityAndDistances)
{
    Rng rng(60);
    const EnsembleState s = ball_state(4, 3, 1.0, rng);
    const auto same = translate_right(s, RotationMatrix::identity(4));
    for (int i = 0; i < 3; ++i) EXPECT_EQ(same.rotations[i].matrix(), s.rotations[i].matrix());
    const RotationMatrix q = sample_haar(4, rng), t = sample_haar(4, rng);
    const auto moved = translate_right(s, t);
    for (int i = 0; i < 3; ++i)
    {
        EXPECT_NEAR(geodesic_distance(q * t, moved.rotations[i]), geodesic_distance(q, s.rotations[i]), 1e-9);
    }
}

TEST(TranslateRight, TranslatedTrajectorySolvesTranslatedSystem)
{
    Rng rng(61);
    const int n = 3;
    const RotationMatrix q = sample_haar(n, rng);
    const RotationMatrix q_tilde = sample_haar(n, rng);
    const RotationMatrix t = q.transpose() * q_tilde;
    const auto omegas = random_frequencies(n, 4, 0.4, rng);
    const auto f = make_cosine_taper(1.4);
    ModelConfig cfg(2.0, omegas, f, q);
    ModelConfig cfg_t(2.0, omegas, f, q_tilde);
    // start near the attraction point so the coupling is active
    EnsembleState s0;
    for (int i = 0; i < 4; ++i) s0.rotations.push_back(q * sample_ball(n, 0.8, rng));

    IntegrationOptions opt;
    opt.h = 1e-2;
    opt.t_end = 5.0;
    opt.stride = 100;
    opt.state_stride = 1;
    const auto a = integrate(cfg, s0, opt);
    const auto b = integrate(cfg_t, translate_right(s0, t), opt);
    ASSERT_EQ(a.states.size(), b.states.size());
    for (std::size_t k = 0; k < a.states.size(); ++k)
    {
        const auto moved = translate_right(EnsembleState{0.0, a.states[k]}, t);
        EXPECT_LE(l1_distance(moved.rotations, b.states[k]), 1e-10);
        for (int i = 0; i < 4; ++i) EXPECT_NEAR(a.distances[k][i], b.distances[k][i], 1e-10);
    }
}

TEST(IntegratePair, CarriesTheL1Gap)
{
    Rng rng(62);
    ModelConfig cfg(2.0, random_frequencies(3, 3, 0.2, rng), make_linear_hat(1.2));
    const EnsembleState a = ball_state(3, 3, 0.3, rng), b = ball_state(3, 3, 0.3, rng);
    IntegrationOptions opt;
    opt.h = 0.01;
    opt.t_end = 1.0;
    opt.stride = 10;
    const auto [ra, rb] = integrate_pair(cfg, a, b, opt);
    ASSERT_EQ(ra.l1_companion.size(), ra.size());
    EXPECT_DOUBLE_EQ(ra.l1_companion.front(), l1_distance(a.rotations, b.rotations));
    EXPECT_TRUE(ra.states.empty());
    EXPECT_EQ(ra.l1_companion, rb.l1_companion);
}
