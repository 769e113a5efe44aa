// Command line front end: one subcommand per experiment kind, plus `validate`.

#include <winfree/harness/experiments.hpp>

#include <CLI11.hpp>

#include <iostream>

using namespace winfree;
using namespace winfree::harness;

namespace {

struct Flags
{
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    bool override_hypotheses = false;
    std::optional<std::string> stepper;
    std::optional<double> h;
    std::optional<double> t_end;
};

void add_flags(CLI::App* sub, Flags& f)
{
    sub->add_option("--config", f.config, "experiment deck")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", f.seed, "run a single seed instead of experiment.seeds");
    sub->add_option("--out", f.out, "output directory (overrides output.dir)");
    sub->add_flag("--override-hypotheses", f.override_hypotheses, "run even when framework checks fail");
    sub->add_option("--stepper", f.stepper, "integrator")->check(CLI::IsMember({"lie-euler", "rkmk4", "ambient-rk4"}));
    sub->add_option("--h", f.h, "step size")->check(CLI::PositiveNumber);
    sub->add_option("--t-end", f.t_end, "final time")->check(CLI::NonNegativeNumber);
}

ExperimentSpec load_spec(const Flags& f, std::optional<ExperimentKind> kind)
{
    ConfigDeck deck = ConfigDeck::load(f.config);
    if (f.stepper) deck.set("integration.stepper", *f.stepper);
    if (f.h) deck.set("integration.h", format_double(*f.h));
    if (f.t_end) deck.set("integration.t_end", format_double(*f.t_end));
    if (f.seed) deck.set("experiment.seeds", std::to_string(*f.seed));
    if (f.out) deck.set("output.dir", *f.out);
    if (!kind && !deck.has("experiment.kind")) deck.set("experiment.kind", "simulate");
    ExperimentSpec spec = spec_from_deck(deck, kind);
    spec.override_hypotheses = spec.override_hypotheses || f.override_hypotheses;
    return spec;
}

int report_error(const std::string& category, const std::string& what, int code)
{
    std::cerr << Json{{"error", category}, {"message", what}}.dump() << '\n';
    return code;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Winfree-type oscillator ensembles on SO(n): simulations and certificates"};
    app.require_subcommand(1);
    app.set_help_flag("--help", "print this help and exit");  // -h would collide with --h

    Flags flags;
    std::optional<ExperimentKind> chosen;
    bool validate_only = false;
    for (const auto& [kind, name] : experiment_kinds())
    {
        auto* sub = app.add_subcommand(name, "run the " + name + " experiment");
        add_flags(sub, flags);
        sub->callback([&chosen, kind = kind] { chosen = kind; });
    }
    auto* validate = app.add_subcommand("validate", "print the hypothesis report for each seed and exit");
    add_flags(validate, flags);
    validate->callback([&validate_only] { validate_only = true; });

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError& e)
    {
        const int code = app.exit(e);
        return code == 0 ? 0 : exit_validation_error;
    }

    try
    {
        const ExperimentSpec spec = load_spec(flags, validate_only ? std::nullopt : chosen);
        if (validate_only)
        {
            bool ok = true;
            for (std::uint64_t seed : spec.seeds)
            {
                const auto rep = validate_framework(spec, realize(spec, seed));
                std::cout << Json{{"seed", seed}, {"report", rep.to_json()}}.dump(2) << '\n';
                ok = ok && rep.ok();
            }
            return ok ? exit_pass : exit_validation_error;
        }
        return run(spec);
    }
    catch (const DomainError& e)
    {
        return report_error("validation", e.what(), exit_validation_error);
    }
    catch (const IntegrationError& e)
    {
        return report_error("integration", e.what(), exit_certificate_fail);
    }
    catch (const Error& e)
    {
        return report_error("numerical", e.what(), exit_certificate_fail);
    }
    catch (const std::exception& e)
    {
        return report_error("io", e.what(), exit_validation_error);
    }
}
