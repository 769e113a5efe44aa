#include <winfree/harness/experiments.hpp>

#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

using namespace winfree;
using namespace winfree::harness;
namespace fs = std::filesystem;

namespace {

const char* trap_deck = R"(
# compliant trapping deck
[experiment]
kind = trap
seeds = 11, 12

[model]
dim = 3
count = 5
kappa_factor = 1.2

[influence]
kind = linear-hat
beta = 1.2

[frequencies]
mode = random
max_norm = 0.5

[framework]
gamma0 = 0.5

[integration]
h = 0.02
t_end = 5
stride = 5
)";

ExperimentSpec spec_of(const std::string& text, const std::string& out)
{
    auto deck = ConfigDeck::parse(text);
    deck.set("output.dir", out);
    return spec_from_deck(deck);
}

fs::path scratch(const std::string& name)
{
    const fs::path p = fs::temp_directory_path() / ("winfree_harness_" + name);
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path& p) { return read_text_file(p.string()); }

}  // namespace

TEST(ConfigDeck, SectionsCommentsAndLists)
{
    const auto d = ConfigDeck::parse("top = 1\n[a.b]  # dotted\nx = 2.5 # trailing\n\n[c]\nlist = [1, 2, 3]\nflag = yes\n");
    EXPECT_EQ(d.get("top"), "1");
    EXPECT_EQ(d.number("a.b.x"), 2.5);
    EXPECT_EQ(d.numbers("c.list"), (std::vector<double>{1, 2, 3}));
    EXPECT_TRUE(d.boolean_or("c.flag", false));
    EXPECT_EQ(d.number_or("c.missing", 7.0), 7.0);
    EXPECT_EQ(d.u64_list("c.list"), (std::vector<std::uint64_t>{1, 2, 3}));
    const Matrix m = ConfigDeck::parse("m = [1, 2, 3, 4]").matrix("m", 2);
    EXPECT_EQ(m(0, 1), 2.0);
    EXPECT_EQ(m(1, 0), 3.0);
}

TEST(ConfigDeck, RejectsMalformedInput)
{
    EXPECT_THROW(ConfigDeck::parse("[s]\nno equals sign\n"), ConfigError);
    EXPECT_THROW(ConfigDeck::parse("a = 1\na = 2\n"), ConfigError);
    EXPECT_THROW(ConfigDeck::parse("x = abc").number("x"), ConfigError);
    EXPECT_THROW(ConfigDeck::parse("x = [1, 2").numbers("x"), ConfigError);
    EXPECT_THROW(ConfigDeck::parse("x = [1, 2, 3]").matrix("x", 2), ConfigError);
    EXPECT_THROW(ConfigDeck::parse("").get("missing"), ConfigError);
    EXPECT_THROW(ConfigDeck::parse("s = -1").u64_list("s"), ConfigError);
}

TEST(ConfigDeck, FileReferencesResolveAgainstTheDeck)
{
    const fs::path dir = scratch("files");
    fs::create_directories(dir);
    write_text_file((dir / "q.csv").string(), "1,0\n0,1\n");
    write_text_file((dir / "deck.cfg").string(), "[model]\nattraction = @q.csv\n");
    const auto d = ConfigDeck::load((dir / "deck.cfg").string());
    EXPECT_TRUE(d.matrix("model.attraction", 2).isIdentity());
}

TEST(Spec, BuildsFromDeck)
{
    const auto s = spec_of(trap_deck, "unused");
    EXPECT_EQ(s.kind, ExperimentKind::Trap);
    EXPECT_EQ(s.seeds, (std::vector<std::uint64_t>{11, 12}));
    EXPECT_EQ(s.dim, 3);
    EXPECT_EQ(s.count, 5);
    EXPECT_EQ(*s.kappa_factor, 1.2);
    EXPECT_EQ(s.influence.kind(), "linear-hat");
    EXPECT_EQ(s.beta, 1.2);
    EXPECT_NEAR(s.framework().gamma, gamma_of(0.5), 1e-15);
    EXPECT_EQ(s.integration.stepper, Stepper::Rkmk4);
    EXPECT_EQ(to_string(experiment_kind_from_string("reduce2d")), "reduce2d");
    EXPECT_THROW(experiment_kind_from_string("bogus"), ConfigError);

    auto d = ConfigDeck::parse(trap_deck);
    d.set("model.kappa", "2");
    EXPECT_THROW(spec_from_deck(d), ConfigError);  // kappa and kappa_factor together
}

TEST(Realize, SeedsAreReproducibleAndIndependent)
{
    const auto s = spec_of(trap_deck, "unused");
    const auto a = realize(s, 11), b = realize(s, 11), c = realize(s, 12);
    EXPECT_EQ(a.cfg.kappa(), b.cfg.kappa());
    for (int i = 0; i < 5; ++i)
    {
        EXPECT_EQ(a.initial.rotations[i].matrix(), b.initial.rotations[i].matrix());
        EXPECT_NE(a.initial.rotations[i].matrix(), c.initial.rotations[i].matrix());
    }
    const double kt = kappa_trapping(s.influence, s.framework(), a.cfg.omegas());
    EXPECT_NEAR(a.cfg.kappa(), 1.2 * kt, 1e-14);
    for (const auto& r : a.initial.rotations) EXPECT_LT(distance_from_identity(r), 0.5);
}

TEST(Validate, CompliantDeckIsGreen)
{
    const auto s = spec_of(trap_deck, "unused");
    const auto rep = validate_framework(s, realize(s, 11));
    EXPECT_TRUE(rep.ok()) << rep.to_json().dump(1);
    for (const char* id : {"F_A1", "F_A2", "F_A3"}) EXPECT_TRUE(rep.find(id)->ok) << id;
    EXPECT_TRUE(rep.thresholds.contains("kappa_trap"));
    EXPECT_FALSE(rep.find("F_B.homogeneous")->ok);  // heterogeneous frequencies are flagged, not required here
    EXPECT_FALSE(rep.find("F_B.homogeneous")->required);
}

TEST(Validate, NamesTheViolatedHypothesis)
{
    auto text = std::string(trap_deck);
    auto deck = ConfigDeck::parse(text.replace(text.find("kappa_factor = 1.2"), 18, "kappa = 5"));
    deck.set("framework.gamma0", "1.2");  // above 2 sin(beta/2) for beta = 1.2
    deck.set("initial.radius", "0.3");
    const auto s = spec_from_deck(deck);
    const auto rep = validate_framework(s, realize(s, 1));
    EXPECT_FALSE(rep.ok());
    EXPECT_EQ(rep.failed().front(), "F_A1");
    EXPECT_NE(rep.to_json().dump().find("F_A1"), std::string::npos);
}

TEST(Validate, SyncRequiresHomogeneity)
{
    auto text = std::string(trap_deck);
    text.replace(text.find("kind = trap"), 11, "kind = sync");
    const auto s = spec_of(text, "unused");
    const auto rep = validate_framework(s, realize(s, 1));
    EXPECT_FALSE(rep.ok());
    EXPECT_EQ(rep.failed(), (std::vector<std::string>{"F_B.homogeneous"}));
}

TEST(Run, TrapPassesAndWritesArtifacts)
{
    const fs::path out = scratch("trap");
    const auto s = spec_of(trap_deck, out.string());
    std::ostringstream log;
    EXPECT_EQ(run(s, log), exit_pass) << log.str();
    for (const char* f : {"seed-11/certificate.json", "seed-11/trajectory.csv", "seed-11/validation.json",
                          "seed-12/trajectory_summary.json", "sweep.csv"})
    {
        EXPECT_TRUE(fs::exists(out / f)) << f;
    }
    const Json cert = Json::parse(slurp(out / "seed-11/certificate.json"));
    EXPECT_EQ(cert["outcome"], "PASS");
    EXPECT_EQ(cert["certificates"][0]["name"], "trapping");
    for (const char* key : {"beta", "gamma0", "gamma", "kappa", "kappa_trap", "eps_cert"})
    {
        EXPECT_TRUE(cert["certificates"][0]["hypotheses"].contains(key)) << key;
    }
    EXPECT_EQ(slurp(out / "seed-11/trajectory.csv").substr(0, 32), "t,i,dist,trace_gap,mean_influenc");
    const std::string sweep = slurp(out / "sweep.csv");
    EXPECT_EQ(sweep.substr(0, sweep.find('\n')), "parameter,certificate,outcome,measured,bound");
    EXPECT_NE(sweep.find("seed=12,trapping,PASS"), std::string::npos);
}

TEST(Run, ArtifactsAreByteIdentical)
{
    const auto s = spec_of(trap_deck, "unused");
    const auto a = run_seed(s, 11), b = run_seed(s, 11);
    ASSERT_EQ(a.artifacts.size(), b.artifacts.size());
    for (const auto& [name, text] : a.artifacts) EXPECT_EQ(text, b.artifacts.at(name)) << name;
}

TEST(Run, ValidationFailureExitsTwoUnlessOverridden)
{
    const fs::path out = scratch("invalid");
    auto text = std::string(trap_deck);
    text.replace(text.find("kappa_factor = 1.2"), 18, "kappa = 0.1");
    auto s = spec_of(text, out.string());
    std::ostringstream log;
    EXPECT_EQ(run(s, log), exit_validation_error);
    const Json reason = Json::parse(log.str());
    EXPECT_EQ(reason["error"], "validation");
    EXPECT_EQ(reason["failed"], Json::array({"F_A2"}));
    EXPECT_FALSE(fs::exists(out / "seed-11/certificate.json"));

    s.override_hypotheses = true;
    const auto r = run_seed(s, 11);
    EXPECT_FALSE(r.validation.ok());
    EXPECT_EQ(r.certificates.size(), 1u);
    EXPECT_TRUE(r.artifacts.count("certificate.json"));
    EXPECT_TRUE(Json::parse(r.artifacts.at("certificate.json"))["validation"]["override_hypotheses"].get<bool>());
}

TEST(Run, NegativeControlFailsCertificate)
{
    auto text = std::string(trap_deck);
    text.replace(text.find("kappa_factor = 1.2"), 18, "kappa = 0");
    text.replace(text.find("t_end = 5"), 9, "t_end = 30");
    auto s = spec_of(text, scratch("negative").string());
    s.override_hypotheses = true;
    std::ostringstream log;
    EXPECT_EQ(run(s, log), exit_certificate_fail);
}

TEST(Run, SyncHomogeneous)
{
    auto text = std::string(trap_deck);
    text.replace(text.find("kind = trap"), 11, "kind = sync");
    text.replace(text.find("mode = random"), 13, "mode = homogeneous");
    text.replace(text.find("max_norm = 0.5"), 14, "max_norm = 0.1");
    text.replace(text.find("kappa_factor = 1.2"), 18, "kappa = 1.5");
    const auto r = run_seed(spec_of(text, "unused"), 5);
    ASSERT_TRUE(r.validation.ok()) << r.validation.to_json().dump(1);
    ASSERT_EQ(r.certificates.size(), 2u);
    EXPECT_EQ(r.certificates[0].name, "sync");
    EXPECT_TRUE(r.pass()) << Json::parse(r.artifacts.at("certificate.json")).dump(1);
}

TEST(Run, EquilibriumAndStability)
{
    auto text = std::string(trap_deck);
    text.replace(text.find("kappa_factor = 1.2"), 18, "kappa = 4");
    text.replace(text.find("max_norm = 0.5"), 14, "max_norm = 0.1");
    text.replace(text.find("gamma0 = 0.5"), 12, "gamma0 = 0.2");
    text.replace(text.find("t_end = 5"), 9, "t_end = 10");
    auto eq = text;
    eq.replace(eq.find("kind = trap"), 11, "kind = equilibrium");
    const auto r = run_seed(spec_of(eq, "unused"), 3);
    EXPECT_TRUE(r.pass()) << Json::parse(r.artifacts.at("certificate.json")).dump(1);
    EXPECT_TRUE(r.artifacts.count("equilibrium.json"));
    EXPECT_EQ(r.certificates.size(), 4u);

    auto st = text;
    st.replace(st.find("kind = trap"), 11, "kind = stability");
    const auto q = run_seed(spec_of(st, "unused"), 3);
    EXPECT_TRUE(q.pass()) << Json::parse(q.artifacts.at("certificate.json")).dump(1);
    EXPECT_TRUE(q.artifacts.count("trajectory_partner.csv"));
}

TEST(Run, ContinuumFixedPointAndReduction)
{
    const fs::path cfg_dir = fs::path(WINFREE_TEST_DATA_DIR).parent_path().parent_path() / "configs";
    auto deck = ConfigDeck::load((cfg_dir / "continuum.cfg").string());
    deck.set("fixedpoint.scan_points", "20000");
    const auto r = run_seed(spec_from_deck(deck), 0);
    EXPECT_TRUE(r.pass()) << r.artifacts.at("certificate.json");
    EXPECT_EQ(r.artifacts.at("scan.csv").substr(0, 14), "x,f(x),x-f(x)\n");
    EXPECT_EQ(Json::parse(r.artifacts.at("certificate.json"))["certificates"][1]["witnesses"]["zero_fraction"], 1.0);

    auto red = ConfigDeck::load((cfg_dir / "reduce2d.cfg").string());
    const auto p = run_seed(spec_from_deck(red), 7);
    EXPECT_TRUE(p.pass()) << p.artifacts.at("certificate.json");
}
