#pragma once

#include <winfree/analysis.hpp>
#include <winfree/io.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace winfree::harness {

class ConfigError : public DomainError
{
  public:
    using DomainError::DomainError;
};

/// Experiment deck: `[section]` headers (dotted names allowed), `key = value` lines, `#` comments.
/// Keys are addressed as `section.key`. A value starting with `@` names a file relative to the deck.
class ConfigDeck
{
  public:
    static ConfigDeck parse(const std::string& text, std::string base_dir = ".")
    {
        ConfigDeck deck;
        deck.base_ = std::move(base_dir);
        std::istringstream in(text);
        std::string line, section;
        int lineno = 0;
        while (std::getline(in, line))
        {
            ++lineno;
            if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
            line = trim(line);
            if (line.empty()) continue;
            if (line.front() == '[' && line.back() == ']' && line.find('=') == std::string::npos)
            {
                section = trim(line.substr(1, line.size() - 2));
                if (section.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty section name");
                continue;
            }
            const auto eq = line.find('=');
            if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
            const std::string key = trim(line.substr(0, eq));
            if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
            const std::string full = section.empty() ? key : section + "." + key;
            if (deck.values_.count(full)) throw ConfigError("config line " + std::to_string(lineno) + ": duplicate key " + full);
            deck.values_[full] = trim(line.substr(eq + 1));
        }
        return deck;
    }

    static ConfigDeck load(const std::string& path)
    {
        const auto parent = std::filesystem::path(path).parent_path();
        return parse(read_text_file(path), parent.empty() ? std::string(".") : parent.string());
    }

    bool has(const std::string& key) const { return values_.count(key) > 0; }
    void set(const std::string& key, const std::string& value) { values_[key] = value; }
    const std::string& base_dir() const { return base_; }

    std::vector<std::string> keys() const
    {
        std::vector<std::string> out;
        for (const auto& [k, v] : values_) out.push_back(k);
        return out;
    }

    const std::string& get(const std::string& key) const
    {
        const auto it = values_.find(key);
        if (it == values_.end()) throw ConfigError("missing required key " + key);
        return it->second;
    }
    std::string get_or(const std::string& key, const std::string& fallback) const { return has(key) ? get(key) : fallback; }

    double number(const std::string& key) const { return to_number(key, get(key)); }
    double number_or(const std::string& key, double fallback) const { return has(key) ? number(key) : fallback; }

    int integer(const std::string& key) const
    {
        const double v = number(key);
        if (v != std::floor(v) || std::abs(v) > 1e9) throw ConfigError(key + ": expected an integer");
        return static_cast<int>(v);
    }
    int integer_or(const std::string& key, int fallback) const { return has(key) ? integer(key) : fallback; }

    bool boolean_or(const std::string& key, bool fallback) const
    {
        if (!has(key)) return fallback;
        const std::string& v = get(key);
        if (v == "true" || v == "yes" || v == "1") return true;
        if (v == "false" || v == "no" || v == "0") return false;
        throw ConfigError(key + ": expected true or false");
    }

    /// Unsigned integers, as a bracketed or bare comma-separated list.
    std::vector<std::uint64_t> u64_list(const std::string& key) const
    {
        std::vector<std::uint64_t> out;
        std::string body = get(key);
        if (!body.empty() && body.front() == '[') body = strip_brackets(key, body);
        std::istringstream in(body);
        std::string item;
        while (std::getline(in, item, ','))
        {
            item = trim(item);
            if (item.empty()) continue;
            if (item.front() == '-' || item.front() == '+') throw ConfigError(key + ": '" + item + "' is not an unsigned integer");
            try
            {
                std::size_t used = 0;
                out.push_back(std::stoull(item, &used));
                if (used != item.size()) throw std::invalid_argument(item);
            }
            catch (const std::exception&)
            {
                throw ConfigError(key + ": '" + item + "' is not an unsigned integer");
            }
        }
        return out;
    }

    /// Reals from an inline list `[a, b, ...]` or a CSV file `@path` (row-major).
    std::vector<double> numbers(const std::string& key) const
    {
        const std::string& v = get(key);
        try
        {
            if (!v.empty() && v.front() == '@')
            {
                std::string text = read_text_file(resolve(v.substr(1)));
                for (char& c : text)
                    if (c == '\n' || c == '\r') c = ',';
                return detail::parse_number_list(text, ',');
            }
            return detail::parse_number_list(v.front() == '[' ? strip_brackets(key, v) : v, ',');
        }
        catch (const ConfigError&)
        {
            throw;
        }
        catch (const std::exception& e)
        {
            throw ConfigError(key + ": " + e.what());
        }
    }

    Matrix matrix(const std::string& key, int n) const
    {
        const auto v = numbers(key);
        if (static_cast<int>(v.size()) != n * n)
        {
            throw ConfigError(key + ": expected " + std::to_string(n * n) + " entries, got " + std::to_string(v.size()));
        }
        Matrix m(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) m(i, j) = v[static_cast<std::size_t>(i * n + j)];
        return m;
    }

    std::string resolve(const std::string& path) const
    {
        const std::filesystem::path p(path);
        return p.is_absolute() ? path : (std::filesystem::path(base_) / p).string();
    }

  private:
    static std::string trim(const std::string& s)
    {
        const auto b = s.find_first_not_of(" \t\r");
        if (b == std::string::npos) return {};
        const auto e = s.find_last_not_of(" \t\r");
        return s.substr(b, e - b + 1);
    }

    static std::string strip_brackets(const std::string& key, const std::string& v)
    {
        if (v.size() < 2 || v.back() != ']') throw ConfigError(key + ": unterminated list");
        return v.substr(1, v.size() - 2);
    }

    static double to_number(const std::string& key, const std::string& v)
    {
        try
        {
            std::size_t used = 0;
            const double d = std::stod(v, &used);
            if (used != v.size()) throw std::invalid_argument(v);
            return d;
        }
        catch (const std::exception&)
        {
            throw ConfigError(key + ": '" + v + "' is not a number");
        }
    }

    std::map<std::string, std::string> values_;
    std::string base_ = ".";
};

enum class ExperimentKind
{
    Simulate,
    Trap,
    Herd,
    Stability,
    Sync,
    Equilibrium,
    FixedPoint,
    Reduce2d,
};

inline const std::vector<std::pair<ExperimentKind, std::string>>& experiment_kinds()
{
    static const std::vector<std::pair<ExperimentKind, std::string>> kinds{
        {ExperimentKind::Simulate, "simulate"},       {ExperimentKind::Trap, "trap"},
        {ExperimentKind::Herd, "herd"},               {ExperimentKind::Stability, "stability"},
        {ExperimentKind::Sync, "sync"},               {ExperimentKind::Equilibrium, "equilibrium"},
        {ExperimentKind::FixedPoint, "fixedpoint"},   {ExperimentKind::Reduce2d, "reduce2d"}};
    return kinds;
}

inline std::string to_string(ExperimentKind k)
{
    for (const auto& [kind, name] : experiment_kinds())
        if (kind == k) return name;
    return "?";
}

inline ExperimentKind experiment_kind_from_string(const std::string& s)
{
    for (const auto& [kind, name] : experiment_kinds())
        if (name == s) return kind;
    throw ConfigError("unknown experiment kind '" + s + "'");
}

/// How the natural frequencies are produced.
struct FrequencySpec
{
    std::string mode = "random";          // random | homogeneous | explicit
    double max_norm = 0.0;                // random modes: ||Omega_i|| uniform in [min_fraction, 1] * max_norm
    double min_fraction = 0.2;
    std::vector<Matrix> explicit_values;  // explicit mode, or one entry shared by all under homogeneous
};

struct InitialSpec
{
    std::string mode = "ball";  // ball | haar | explicit
    std::optional<double> radius;           // defaults to gamma0
    std::optional<double> follower_radius;  // herd: defaults to Gamma_i, capped at 1.95
    std::vector<Matrix> explicit_values;
};

struct ExperimentSpec
{
    ExperimentKind kind = ExperimentKind::Simulate;
    int dim = 3;
    int count = 1;

    // exactly one of kappa / kappa_factor; the factor multiplies the kind's reference threshold
    std::optional<double> kappa;
    std::optional<double> kappa_factor;

    InfluenceFunction influence = make_linear_hat(1.0);
    std::optional<Matrix> attraction;
    FrequencySpec frequencies;

    double beta = 1.0;
    std::optional<double> gamma0;
    std::vector<int> leaders;

    IntegrationOptions integration;
    InitialSpec initial;
    std::vector<std::uint64_t> seeds{0};

    // fixedpoint / equilibrium
    std::optional<std::pair<double, double>> bracket;
    std::size_t scan_points = 10000;
    double zero_tol = 1e-10;

    double eps_cert = default_eps_cert;
    double reduce_tol = 1e-6;
    double stationarity_tol = 1e-7;
    double relaxation_tol = 1e-8;

    std::string out_dir = "out";
    bool override_hypotheses = false;
    bool write_trajectory = true;

    /// Framework radii without enforcing (F_A1); the validation report judges them.
    FrameworkParams framework() const
    {
        const double g0 = gamma0.value_or(0.0);
        const double g = g0 >= 0.0 && g0 < 2.0 ? gamma_of(g0) : std::numeric_limits<double>::quiet_NaN();
        return FrameworkParams{beta, g0, g, leaders};
    }
};

inline InfluenceFunction influence_from_deck(const ConfigDeck& d)
{
    const std::string kind = d.get_or("influence.kind", "linear-hat");
    if (kind == "linear-hat") return make_linear_hat(d.number("influence.beta"));
    if (kind == "cosine-taper") return make_cosine_taper(d.number("influence.beta"));
    if (kind == "continuum")
    {
        return make_continuum_influence(d.number("influence.lambda_star"), d.number("influence.kappa"),
                                        d.number("influence.x0"), d.number("influence.beta"));
    }
    if (kind == "tabulated")
    {
        const std::string& f = d.get("influence.table");
        if (f.empty() || f.front() != '@') throw ConfigError("influence.table: expected @path to a CSV file");
        return load_tabulated_csv(read_text_file(d.resolve(f.substr(1))));
    }
    throw ConfigError("influence.kind: unknown profile '" + kind + "'");
}

/// Indexed matrices `prefix.0`, `prefix.1`, ... until the first gap.
inline std::vector<Matrix> indexed_matrices(const ConfigDeck& d, const std::string& prefix, int n)
{
    std::vector<Matrix> out;
    for (int i = 0; d.has(prefix + "." + std::to_string(i)); ++i) out.push_back(d.matrix(prefix + "." + std::to_string(i), n));
    return out;
}

/// Builds a spec from a deck; `kind_override` wins over `experiment.kind`.
inline ExperimentSpec spec_from_deck(const ConfigDeck& d, std::optional<ExperimentKind> kind_override = std::nullopt)
{
    ExperimentSpec s;
    s.kind = kind_override ? *kind_override : experiment_kind_from_string(d.get("experiment.kind"));
    if (d.has("experiment.seeds")) s.seeds = d.u64_list("experiment.seeds");
    if (s.seeds.empty()) throw ConfigError("experiment.seeds: at least one seed is required");
    s.out_dir = d.get_or("output.dir", s.out_dir);
    s.write_trajectory = d.boolean_or("output.trajectory", true);
    s.override_hypotheses = d.boolean_or("experiment.override_hypotheses", false);

    s.dim = d.integer("model.dim");
    s.count = d.integer("model.count");
    if (s.dim < 2) throw ConfigError("model.dim must be at least 2");
    if (s.count < 1) throw ConfigError("model.count must be at least 1");
    if (d.has("model.kappa") == d.has("model.kappa_factor"))
    {
        throw ConfigError("exactly one of model.kappa and model.kappa_factor is required");
    }
    if (d.has("model.kappa")) s.kappa = d.number("model.kappa");
    if (d.has("model.kappa_factor")) s.kappa_factor = d.number("model.kappa_factor");
    if (d.has("model.attraction")) s.attraction = d.matrix("model.attraction", s.dim);

    s.influence = influence_from_deck(d);

    auto& fq = s.frequencies;
    fq.mode = d.get_or("frequencies.mode", "random");
    if (fq.mode == "random" || fq.mode == "homogeneous")
    {
        fq.max_norm = d.number_or("frequencies.max_norm", 0.0);
        fq.min_fraction = d.number_or("frequencies.min_fraction", fq.min_fraction);
        if (fq.max_norm < 0.0 || fq.min_fraction < 0.0 || fq.min_fraction > 1.0)
        {
            throw ConfigError("frequencies: need max_norm >= 0 and min_fraction in [0, 1]");
        }
        if (fq.mode == "homogeneous" && d.has("frequencies.omega")) fq.explicit_values.push_back(d.matrix("frequencies.omega", s.dim));
    }
    else if (fq.mode == "explicit")
    {
        fq.explicit_values = indexed_matrices(d, "frequencies.omega", s.dim);
        if (static_cast<int>(fq.explicit_values.size()) != s.count)
        {
            throw ConfigError("frequencies: explicit mode needs frequencies.omega.0 ... omega." + std::to_string(s.count - 1));
        }
    }
    else
    {
        throw ConfigError("frequencies.mode: unknown mode '" + fq.mode + "'");
    }

    s.beta = d.number_or("framework.beta", s.influence.beta());
    if (d.has("framework.gamma0")) s.gamma0 = d.number("framework.gamma0");
    if (d.has("framework.leaders"))
    {
        for (auto v : d.u64_list("framework.leaders")) s.leaders.push_back(static_cast<int>(v));
    }

    auto& io = s.integration;
    io.stepper = stepper_from_string(d.get_or("integration.stepper", "rkmk4"));
    io.h = d.number_or("integration.h", 1e-2);
    io.t_end = d.number_or("integration.t_end", 10.0);
    io.stride = d.integer_or("integration.stride", 10);
    if (!(io.h > 0.0) || !(io.t_end >= 0.0) || io.stride < 1) throw ConfigError("integration: need h > 0, t_end >= 0, stride >= 1");

    auto& in = s.initial;
    in.mode = d.get_or("initial.mode", "ball");
    if (d.has("initial.radius")) in.radius = d.number("initial.radius");
    if (d.has("initial.follower_radius")) in.follower_radius = d.number("initial.follower_radius");
    if (in.mode == "explicit")
    {
        in.explicit_values = indexed_matrices(d, "initial.rotation", s.dim);
        if (static_cast<int>(in.explicit_values.size()) != s.count)
        {
            throw ConfigError("initial: explicit mode needs initial.rotation.0 ... rotation." + std::to_string(s.count - 1));
        }
    }
    else if (in.mode != "ball" && in.mode != "haar")
    {
        throw ConfigError("initial.mode: unknown mode '" + in.mode + "'");
    }

    if (d.has("fixedpoint.bracket"))
    {
        const auto b = d.numbers("fixedpoint.bracket");
        if (b.size() != 2 || !(b[0] < b[1])) throw ConfigError("fixedpoint.bracket: expected [a, b] with a < b");
        s.bracket = std::make_pair(b[0], b[1]);
    }
    const int points = d.integer_or("fixedpoint.scan_points", static_cast<int>(s.scan_points));
    if (points < 2) throw ConfigError("fixedpoint.scan_points must be at least 2");
    s.scan_points = static_cast<std::size_t>(points);
    s.zero_tol = d.number_or("fixedpoint.zero_tol", s.zero_tol);

    s.eps_cert = d.number_or("certificate.eps", s.eps_cert);
    s.reduce_tol = d.number_or("certificate.reduce_tol", s.reduce_tol);
    s.stationarity_tol = d.number_or("certificate.stationarity_tol", s.stationarity_tol);
    s.relaxation_tol = d.number_or("certificate.relaxation_tol", s.relaxation_tol);
    return s;
}

}  // namespace winfree::harness
