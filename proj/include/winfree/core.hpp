#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

namespace winfree {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Rng = std::mt19937_64;

inline constexpr double pi = std::numbers::pi;

/// Tolerances shared by every invariant check in the library.
struct Tolerances
{
    double orth = 1e-10;   // ||R^T R - I|| and |det R - 1|
    double skew = 1e-12;   // ||X + X^T||
    double recon = 1e-9;   // canonical-form reconstruction residual
    double angle = 1e-9;   // angles below this are absorbed into the fixed subspace
};

class Error : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

/// Precondition or range violation on user-supplied values.
class DomainError : public Error
{
  public:
    using Error::Error;
};

/// A value failed a structural invariant (orthogonality, skewness, monotonicity, ...).
class InvariantError : public Error
{
  public:
    using Error::Error;
};

/// The matrix logarithm is not unique for the given input.
class BranchError : public DomainError
{
  public:
    using DomainError::DomainError;
};

/// Eigensolver or reconstruction failure.
class NumericalError : public Error
{
  public:
    using Error::Error;
};

/// Hypotheses of a threshold formula cannot be met (e.g. zero influence at gamma).
class InfeasibleError : public DomainError
{
  public:
    using DomainError::DomainError;
};

/// Half-Frobenius inner product tr(A^T B) / 2.
inline double half_frobenius(const Matrix& a, const Matrix& b)
{
    if (a.rows() != b.rows() || a.cols() != b.cols() || a.rows() != a.cols())
    {
        throw DomainError("half_frobenius: dimension mismatch");
    }
    return 0.5 * a.cwiseProduct(b).sum();
}

/// Norm induced by half_frobenius.
inline double norm(const Matrix& a) { return a.norm() / std::numbers::sqrt2; }

/// SplitMix64 finalizer; used to derive independent per-stream seeds from one root seed.
inline std::uint64_t split_seed(std::uint64_t root, std::uint64_t stream)
{
    std::uint64_t z = root + (stream + 1) * 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

}  // namespace winfree
