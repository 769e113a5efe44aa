#pragma once

// The Winfree matrix model on SO(n)
//
//     dR_i/dt = Omega_i R_i + (kappa <I> / 2) (Q R_i^T - R_i Q^T) R_i,
//     <I> = (1/N) sum_j I~(d(Q, R_j)),
//
// and fixed-step integrators that keep every R_i on SO(n).

#include <winfree/influence.hpp>
#include <winfree/io.hpp>
#include <winfree/so_geometry.hpp>

#include <cstdint>
#include <cstdio>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace winfree {

class ModelConfig
{
  public:
    ModelConfig(double kappa, std::vector<SkewMatrix> omegas, InfluenceFunction influence,
                std::optional<RotationMatrix> attraction = std::nullopt)
        : kappa_(kappa), omegas_(std::move(omegas)), influence_(std::move(influence)),
          attraction_(attraction ? *attraction : RotationMatrix::identity(omegas_.empty() ? 2 : omegas_.front().dim()))
    {
        if (omegas_.empty()) throw DomainError("ModelConfig: need at least one oscillator");
        if (!(kappa_ >= 0.0) || !std::isfinite(kappa_)) throw DomainError("ModelConfig: kappa must be >= 0");
        const int n = omegas_.front().dim();
        if (n < 2) throw DomainError("ModelConfig: n must be >= 2");
        for (const auto& w : omegas_)
        {
            if (w.dim() != n) throw DomainError("ModelConfig: frequencies have mixed dimensions");
        }
        if (attraction_.dim() != n) throw DomainError("ModelConfig: attraction point has wrong dimension");
        q_is_identity_ = attraction_.matrix().isIdentity(0.0);
    }

    int dim() const { return omegas_.front().dim(); }
    int count() const { return static_cast<int>(omegas_.size()); }
    double kappa() const { return kappa_; }
    const std::vector<SkewMatrix>& omegas() const { return omegas_; }
    const InfluenceFunction& influence() const { return influence_; }
    const RotationMatrix& attraction() const { return attraction_; }
    bool attraction_is_identity() const { return q_is_identity_; }

    double max_frequency_norm() const
    {
        double m = 0.0;
        for (const auto& w : omegas_) m = std::max(m, norm(w.matrix()));
        return m;
    }

    ModelConfig with_kappa(double k) const { return ModelConfig(k, omegas_, influence_, attraction_); }

  private:
    double kappa_;
    std::vector<SkewMatrix> omegas_;
    InfluenceFunction influence_;
    RotationMatrix attraction_;
    bool q_is_identity_ = true;
};

struct EnsembleState
{
    double t = 0.0;
    std::vector<RotationMatrix> rotations;
};

enum class Stepper
{
    LieEuler,
    Rkmk4,
    AmbientRk4,
};

inline std::string to_string(Stepper s)
{
    switch (s)
    {
        case Stepper::LieEuler: return "lie-euler";
        case Stepper::Rkmk4: return "rkmk4";
        case Stepper::AmbientRk4: return "ambient-rk4";
    }
    return "?";
}

inline Stepper stepper_from_string(const std::string& s)
{
    if (s == "lie-euler") return Stepper::LieEuler;
    if (s == "rkmk4") return Stepper::Rkmk4;
    if (s == "ambient-rk4") return Stepper::AmbientRk4;
    throw DomainError("unknown stepper '" + s + "'");
}

struct IntegrationOptions
{
    Stepper stepper = Stepper::Rkmk4;
    double h = 1e-3;
    double t_end = 1.0;
    int stride = 1;        // record observables every `stride` steps (and always at t_end)
    int state_stride = 0;  // keep raw states every `state_stride` samples; 0 keeps none
    Tolerances tol{};
};

/// Raised when an accepted step leaves SO(n); carries the time of the failing step.
class IntegrationError : public Error
{
  public:
    IntegrationError(double t, const std::string& what)
        : Error("integration aborted at t = " + format_double(t) + ": " + what), time(t)
    {
    }
    double time;
};

struct TrajectoryRecord
{
    std::vector<double> times;
    std::vector<std::vector<double>> distances;   // [sample][i], d(Q, R_i)
    std::vector<std::vector<double>> trace_gaps;  // [sample][i], n - tr(Q^T R_i)
    std::vector<double> mean_influence;
    std::vector<double> l1_companion;  // filled by integrate_pair
    std::vector<std::size_t> state_samples;
    std::vector<std::vector<RotationMatrix>> states;
    double max_orth_error = 0.0;  // over every accepted step

    std::size_t size() const { return times.size(); }
    double max_distance(std::size_t sample) const
    {
        double m = 0.0;
        for (double d : distances[sample]) m = std::max(m, d);
        return m;
    }
};

/// d(Q, R) measured in the frame of the attraction point.
inline double distance_to_attraction(const ModelConfig& cfg, const Matrix& r)
{
    if (cfg.attraction_is_identity()) return detail::distance_from_identity(r);
    return detail::distance_from_identity(cfg.attraction().matrix().transpose() * r);
}

namespace detail {

inline void check_state(const std::vector<RotationMatrix>& rs, const ModelConfig& cfg)
{
    if (static_cast<int>(rs.size()) != cfg.count()) throw DomainError("state size does not match N");
    for (const auto& r : rs)
    {
        if (r.dim() != cfg.dim()) throw DomainError("state dimension does not match n");
    }
}

template <class Mats>
double mean_influence_raw(const Mats& rs, const ModelConfig& cfg)
{
    double s = 0.0;
    for (const Matrix& r : rs) s += cfg.influence()(distance_to_attraction(cfg, r));
    return s / static_cast<double>(rs.size());
}

// A_i such that dR_i/dt = A_i R_i; exactly skew by construction.
template <class Mats>
std::vector<Matrix> generators_raw(const Mats& rs, const ModelConfig& cfg)
{
    const double c = 0.5 * cfg.kappa() * mean_influence_raw(rs, cfg);
    std::vector<Matrix> out;
    out.reserve(rs.size());
    for (std::size_t i = 0; i < rs.size(); ++i)
    {
        const Matrix& r = rs[i];
        const Matrix m = cfg.attraction_is_identity() ? Matrix(r.transpose())
                                                      : Matrix(cfg.attraction().matrix() * r.transpose());
        out.push_back(cfg.omegas()[i].matrix() + c * (m - m.transpose()));
    }
    return out;
}

// Closed forms for n <= 3; scaling-and-squaring above, where the Schur route
// would dominate the cost of a step.
inline Matrix exp_skew_fast(const Matrix& x)
{
    if (x.rows() <= 3) return exp_skew_blockwise(x);
    return x.exp();
}

inline Matrix commutator(const Matrix& a, const Matrix& b) { return a * b - b * a; }

// Truncated inverse of the derivative of exp: v - [u,v]/2 + [u,[u,v]]/12.
inline Matrix dexpinv(const Matrix& u, const Matrix& v)
{
    const Matrix uv = commutator(u, v);
    return v - 0.5 * uv + (1.0 / 12.0) * commutator(u, uv);
}

inline std::vector<Matrix> matrices_of(const std::vector<RotationMatrix>& rs)
{
    std::vector<Matrix> out;
    out.reserve(rs.size());
    for (const auto& r : rs) out.push_back(r.matrix());
    return out;
}

inline Matrix polar_factor(const Matrix& y)
{
    Eigen::JacobiSVD<Matrix> svd(y, Eigen::ComputeFullU | Eigen::ComputeFullV);
    return svd.matrixU() * svd.matrixV().transpose();
}

// Ambient vector field; accepts off-manifold stage values, whose influence is
// evaluated at their polar projection.
inline std::vector<Matrix> ambient_field(const std::vector<Matrix>& ys, const ModelConfig& cfg)
{
    std::vector<Matrix> proj;
    proj.reserve(ys.size());
    for (const auto& y : ys) proj.push_back(polar_factor(y));
    const double c = 0.5 * cfg.kappa() * mean_influence_raw(proj, cfg);
    const Matrix& q = cfg.attraction().matrix();
    std::vector<Matrix> out;
    out.reserve(ys.size());
    for (std::size_t i = 0; i < ys.size(); ++i)
    {
        const Matrix& y = ys[i];
        out.push_back(cfg.omegas()[i].matrix() * y + c * (q * y.transpose() - y * q.transpose()) * y);
    }
    return out;
}

inline std::vector<RotationMatrix> to_rotations(std::vector<Matrix>&& ms, const Tolerances& tol)
{
    std::vector<RotationMatrix> out;
    out.reserve(ms.size());
    for (auto& m : ms) out.emplace_back(std::move(m), tol);
    return out;
}

}  // namespace detail

inline double mean_influence(const std::vector<RotationMatrix>& rs, const ModelConfig& cfg)
{
    detail::check_state(rs, cfg);
    return detail::mean_influence_raw(detail::matrices_of(rs), cfg);
}

/// Skew generators A_i with dR_i/dt = A_i R_i.
inline std::vector<SkewMatrix> generators(const EnsembleState& s, const ModelConfig& cfg)
{
    detail::check_state(s.rotations, cfg);
    std::vector<SkewMatrix> out;
    for (auto& a : detail::generators_raw(detail::matrices_of(s.rotations), cfg)) out.emplace_back(std::move(a));
    return out;
}

inline std::vector<Matrix> rhs(const EnsembleState& s, const ModelConfig& cfg)
{
    detail::check_state(s.rotations, cfg);
    const auto rs = detail::matrices_of(s.rotations);
    auto gens = detail::generators_raw(rs, cfg);
    for (std::size_t i = 0; i < gens.size(); ++i) gens[i] = gens[i] * rs[i];
    return gens;
}

/// R_i <- exp(h A_i(R)) R_i.
inline EnsembleState step_lie_euler(const EnsembleState& s, const ModelConfig& cfg, double h)
{
    if (!(h > 0.0)) throw DomainError("step size must be positive");
    detail::check_state(s.rotations, cfg);
    const auto rs = detail::matrices_of(s.rotations);
    const auto a = detail::generators_raw(rs, cfg);
    std::vector<Matrix> next;
    next.reserve(rs.size());
    for (std::size_t i = 0; i < rs.size(); ++i) next.push_back(detail::exp_skew_fast(h * a[i]) * rs[i]);
    return {s.t + h, detail::to_rotations(std::move(next), {})};
}

/// Classical RK4 tableau in exponential coordinates (Munthe-Kaas).
inline EnsembleState step_rkmk4(const EnsembleState& s, const ModelConfig& cfg, double h)
{
    if (!(h > 0.0)) throw DomainError("step size must be positive");
    detail::check_state(s.rotations, cfg);
    const auto rs = detail::matrices_of(s.rotations);
    const std::size_t count = rs.size();

    auto stage = [&](const std::vector<Matrix>& u) {
        std::vector<Matrix> y(count);
        for (std::size_t i = 0; i < count; ++i) y[i] = detail::exp_skew_fast(u[i]) * rs[i];
        auto b = detail::generators_raw(y, cfg);
        std::vector<Matrix> k(count);
        for (std::size_t i = 0; i < count; ++i) k[i] = detail::dexpinv(u[i], h * b[i]);
        return k;
    };

    auto k1 = detail::generators_raw(rs, cfg);
    for (auto& k : k1) k *= h;
    std::vector<Matrix> u(count);
    for (std::size_t i = 0; i < count; ++i) u[i] = 0.5 * k1[i];
    const auto k2 = stage(u);
    for (std::size_t i = 0; i < count; ++i) u[i] = 0.5 * k2[i];
    const auto k3 = stage(u);
    const auto k4 = stage(k3);

    std::vector<Matrix> next(count);
    for (std::size_t i = 0; i < count; ++i)
    {
        Matrix v = (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) / 6.0;
        v = 0.5 * (v - v.transpose());
        next[i] = detail::exp_skew_fast(v) * rs[i];
    }
    return {s.t + h, detail::to_rotations(std::move(next), {})};
}

/// Classical RK4 in R^{n x n} followed by polar projection onto SO(n).
inline EnsembleState step_ambient_rk4(const EnsembleState& s, const ModelConfig& cfg, double h)
{
    if (!(h > 0.0)) throw DomainError("step size must be positive");
    detail::check_state(s.rotations, cfg);
    const auto rs = detail::matrices_of(s.rotations);
    const std::size_t count = rs.size();
    auto shifted = [&](const std::vector<Matrix>& k, double a) {
        std::vector<Matrix> y(count);
        for (std::size_t i = 0; i < count; ++i) y[i] = rs[i] + a * k[i];
        return y;
    };
    const auto k1 = detail::ambient_field(rs, cfg);
    const auto k2 = detail::ambient_field(shifted(k1, 0.5 * h), cfg);
    const auto k3 = detail::ambient_field(shifted(k2, 0.5 * h), cfg);
    const auto k4 = detail::ambient_field(shifted(k3, h), cfg);
    std::vector<Matrix> next(count);
    for (std::size_t i = 0; i < count; ++i)
    {
        next[i] = detail::polar_factor(rs[i] + (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
    }
    return {s.t + h, detail::to_rotations(std::move(next), {})};
}

inline EnsembleState step(Stepper kind, const EnsembleState& s, const ModelConfig& cfg, double h)
{
    switch (kind)
    {
        case Stepper::LieEuler: return step_lie_euler(s, cfg, h);
        case Stepper::Rkmk4: return step_rkmk4(s, cfg, h);
        case Stepper::AmbientRk4: return step_ambient_rk4(s, cfg, h);
    }
    throw DomainError("unknown stepper");
}

inline double l1_distance(const std::vector<RotationMatrix>& a, const std::vector<RotationMatrix>& b)
{
    if (a.size() != b.size()) throw DomainError("l1_distance: ensemble sizes differ");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += norm(a[i].matrix() - b[i].matrix());
    return s;
}

inline EnsembleState translate_right(const EnsembleState& s, const RotationMatrix& t)
{
    EnsembleState out{s.t, {}};
    out.rotations.reserve(s.rotations.size());
    for (const auto& r : s.rotations) out.rotations.push_back(r * t);
    return out;
}

namespace detail {

inline double orth_error(const Matrix& r)
{
    return norm(r.transpose() * r - Matrix::Identity(r.rows(), r.cols()));
}

inline void record_sample(TrajectoryRecord& rec, const EnsembleState& s, const ModelConfig& cfg,
                          const IntegrationOptions& opt)
{
    std::vector<double> dist, gap;
    dist.reserve(s.rotations.size());
    gap.reserve(s.rotations.size());
    double infl = 0.0;
    for (const auto& r : s.rotations)
    {
        const Matrix rel = cfg.attraction_is_identity() ? r.matrix() : Matrix(cfg.attraction().matrix().transpose() * r.matrix());
        const double d = distance_from_identity(rel);
        dist.push_back(d);
        gap.push_back(static_cast<double>(cfg.dim()) - rel.trace());
        infl += cfg.influence()(d);
    }
    const std::size_t index = rec.times.size();
    rec.times.push_back(s.t);
    rec.distances.push_back(std::move(dist));
    rec.trace_gaps.push_back(std::move(gap));
    rec.mean_influence.push_back(infl / static_cast<double>(s.rotations.size()));
    if (opt.state_stride > 0 && index % static_cast<std::size_t>(opt.state_stride) == 0)
    {
        rec.state_samples.push_back(index);
        rec.states.push_back(s.rotations);
    }
}

// Steps from s.t to opt.t_end, shortening the last step to land on t_end.
template <class OnStep>
void march(EnsembleState& s, const ModelConfig& cfg, const IntegrationOptions& opt, OnStep&& on_step)
{
    if (!(opt.h > 0.0)) throw DomainError("integrate: h must be positive");
    if (!(opt.t_end >= s.t)) throw DomainError("integrate: t_end precedes the initial time");
    if (opt.stride < 1) throw DomainError("integrate: stride must be >= 1");
    const double t0 = s.t;
    const double span = opt.t_end - t0;
    const auto full = static_cast<std::uint64_t>(std::floor(span / opt.h * (1.0 + 1e-14)));
    const double rest = span - static_cast<double>(full) * opt.h;
    const std::uint64_t total = full + (rest > 1e-12 * std::max(1.0, opt.t_end) ? 1 : 0);
    for (std::uint64_t k = 1; k <= total; ++k)
    {
        const double h = k <= full ? opt.h : rest;
        try
        {
            s = step(opt.stepper, s, cfg, h);
        }
        catch (const InvariantError& e)
        {
            throw IntegrationError(t0 + static_cast<double>(k) * opt.h, e.what());
        }
        s.t = k <= full ? t0 + static_cast<double>(k) * opt.h : opt.t_end;
        on_step(k, k == total);
    }
}

}  // namespace detail

/// Fixed-step integration with observables every opt.stride steps.
inline TrajectoryRecord integrate(const ModelConfig& cfg, const EnsembleState& initial, const IntegrationOptions& opt)
{
    detail::check_state(initial.rotations, cfg);
    TrajectoryRecord rec;
    EnsembleState s = initial;
    detail::record_sample(rec, s, cfg, opt);
    for (const auto& r : s.rotations) rec.max_orth_error = std::max(rec.max_orth_error, detail::orth_error(r.matrix()));
    detail::march(s, cfg, opt, [&](std::uint64_t k, bool last) {
        for (const auto& r : s.rotations)
        {
            rec.max_orth_error = std::max(rec.max_orth_error, detail::orth_error(r.matrix()));
        }
        if (k % static_cast<std::uint64_t>(opt.stride) == 0 || last) detail::record_sample(rec, s, cfg, opt);
    });
    return rec;
}

/// l1 gap between two trajectories at every sample where both kept their states.
inline std::vector<double> l1_series(const TrajectoryRecord& a, const TrajectoryRecord& b)
{
    if (a.states.size() != b.states.size()) throw DomainError("l1_series: records hold different sample counts");
    std::vector<double> out;
    out.reserve(a.states.size());
    for (std::size_t k = 0; k < a.states.size(); ++k) out.push_back(l1_distance(a.states[k], b.states[k]));
    return out;
}

/// Integrates two ensembles under the same model; both records carry the l1 gap between them.
inline std::pair<TrajectoryRecord, TrajectoryRecord> integrate_pair(const ModelConfig& cfg, const EnsembleState& a,
                                                                    const EnsembleState& b,
                                                                    const IntegrationOptions& opt)
{
    if (a.t != b.t) throw DomainError("integrate_pair: initial times differ");
    IntegrationOptions o = opt;
    o.state_stride = 1;
    TrajectoryRecord ra = integrate(cfg, a, o);
    TrajectoryRecord rb = integrate(cfg, b, o);
    ra.l1_companion = l1_series(ra, rb);
    rb.l1_companion = ra.l1_companion;
    if (opt.state_stride != 1)
    {
        for (TrajectoryRecord* r : {&ra, &rb})
        {
            std::vector<std::size_t> keep_idx;
            std::vector<std::vector<RotationMatrix>> keep;
            for (std::size_t k = 0; opt.state_stride > 0 && k < r->states.size(); ++k)
            {
                if (k % static_cast<std::size_t>(opt.state_stride) == 0)
                {
                    keep_idx.push_back(k);
                    keep.push_back(std::move(r->states[k]));
                }
            }
            r->state_samples = std::move(keep_idx);
            r->states = std::move(keep);
        }
    }
    return {std::move(ra), std::move(rb)};
}

/// One row per oscillator per sample: t,i,dist,trace_gap,mean_influence.
inline std::string trajectory_csv(const TrajectoryRecord& rec)
{
    std::string out = "t,i,dist,trace_gap,mean_influence\n";
    for (std::size_t k = 0; k < rec.times.size(); ++k)
    {
        for (std::size_t i = 0; i < rec.distances[k].size(); ++i)
        {
            out += format_double(rec.times[k]) + ',' + std::to_string(i) + ',' + format_double(rec.distances[k][i]) +
                   ',' + format_double(rec.trace_gaps[k][i]) + ',' + format_double(rec.mean_influence[k]) + '\n';
        }
    }
    return out;
}

inline Json config_to_json(const ModelConfig& cfg)
{
    Json omegas = Json::array();
    for (const auto& w : cfg.omegas()) omegas.push_back(matrix_to_json(w.matrix()));
    return Json{{"n", cfg.dim()},
                {"N", cfg.count()},
                {"kappa", cfg.kappa()},
                {"omegas", omegas},
                {"influence", influence_to_json(cfg.influence())},
                {"attraction", matrix_to_json(cfg.attraction().matrix())}};
}

/// FNV-1a over the canonical JSON dump of the configuration.
inline std::string config_hash(const ModelConfig& cfg)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : config_to_json(cfg).dump())
    {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

inline Json trajectory_summary(const ModelConfig& cfg, const TrajectoryRecord& rec, const Json& measured_rates = Json::object())
{
    return Json{{"config_hash", config_hash(cfg)},
                {"final_time", rec.times.empty() ? 0.0 : rec.times.back()},
                {"final_distances", rec.distances.empty() ? std::vector<double>{} : rec.distances.back()},
                {"max_orth_error", rec.max_orth_error},
                {"measured_rates", measured_rates}};
}

}  // namespace winfree
