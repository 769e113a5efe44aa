#pragma once

// Scalar Winfree model on the circle,
//     dtheta_i/dt = nu_i - kappa <I~(|theta_j|)> sin(theta_i),
// which the SO(2) matrix model reproduces under theta -> R(theta).

#include <winfree/influence.hpp>
#include <winfree/so_geometry.hpp>

#include <vector>

namespace winfree {

/// Wraps an angle into (-pi, pi].
inline double wrap_angle(double theta)
{
    double w = std::remainder(theta, 2.0 * pi);
    if (w <= -pi) w += 2.0 * pi;
    return w;
}

inline RotationMatrix embed_phase(double theta) { return RotationMatrix(rotation2(theta)); }

inline double extract_phase(const RotationMatrix& r)
{
    if (r.dim() != 2) throw DomainError("extract_phase: expected an SO(2) element");
    return std::atan2(r.matrix()(1, 0), r.matrix()(0, 0));
}

struct ScalarWinfree
{
    double kappa;
    std::vector<double> nu;
    InfluenceFunction influence;

    std::vector<double> rhs(const std::vector<double>& theta) const
    {
        double mean = 0.0;
        for (double t : theta) mean += influence(std::abs(wrap_angle(t)));
        mean /= static_cast<double>(theta.size());
        std::vector<double> out(theta.size());
        for (std::size_t i = 0; i < theta.size(); ++i) out[i] = nu[i] - kappa * mean * std::sin(theta[i]);
        return out;
    }

    /// Classical RK4 on the unwrapped phases.
    std::vector<double> integrate(std::vector<double> theta, double h, double t_end) const
    {
        if (theta.size() != nu.size()) throw DomainError("ScalarWinfree: phase count does not match frequencies");
        if (!(h > 0.0)) throw DomainError("ScalarWinfree: h must be positive");
        const auto full = static_cast<long long>(std::floor(t_end / h * (1.0 + 1e-14)));
        const double rest = t_end - static_cast<double>(full) * h;
        auto advance = [&](double dt) {
            const std::size_t m = theta.size();
            auto shifted = [&](const std::vector<double>& k, double a) {
                std::vector<double> y(m);
                for (std::size_t i = 0; i < m; ++i) y[i] = theta[i] + a * k[i];
                return y;
            };
            const auto k1 = rhs(theta);
            const auto k2 = rhs(shifted(k1, 0.5 * dt));
            const auto k3 = rhs(shifted(k2, 0.5 * dt));
            const auto k4 = rhs(shifted(k3, dt));
            for (std::size_t i = 0; i < m; ++i) theta[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        };
        for (long long k = 0; k < full; ++k) advance(h);
        if (rest > 1e-12 * std::max(1.0, t_end)) advance(rest);
        return theta;
    }
};

}  // namespace winfree
