#pragma once

// SO(n) and so(n) primitives: projections, canonical block forms, principal
// angles, geodesic distance, exponential/logarithm and random sampling.
//
// Conventions used throughout:
//   * <A, B> = tr(A^T B) / 2 and ||A|| = sqrt(<A, A>);
//   * a canonical form stores an orthogonal P with source = P^T * Lambda * P,
//     where Lambda is block diagonal (2x2 blocks first, identity/zero tail).

#include <winfree/core.hpp>

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <limits>
#include <utility>
#include <vector>

namespace winfree {

class RotationMatrix
{
  public:
    /// Validates orthogonality and unit determinant; throws InvariantError otherwise.
    explicit RotationMatrix(Matrix m, const Tolerances& tol = {}) : m_(std::move(m))
    {
        if (m_.rows() != m_.cols() || m_.rows() < 2)
        {
            throw InvariantError("RotationMatrix: expected a square matrix of dimension >= 2");
        }
        const auto n = m_.rows();
        const double orth = norm(m_.transpose() * m_ - Matrix::Identity(n, n));
        if (!(orth <= tol.orth))
        {
            throw InvariantError("RotationMatrix: ||R^T R - I|| = " + std::to_string(orth));
        }
        // det(R^T R) = 1 + tr(E) to first order, so the determinant deviation
        // scales with the dimension.
        const double det = m_.determinant();
        if (!(std::abs(det - 1.0) <= tol.orth * static_cast<double>(n)))
        {
            throw InvariantError("RotationMatrix: det(R) = " + std::to_string(det));
        }
    }

    static RotationMatrix identity(int n) { return RotationMatrix(Matrix::Identity(n, n)); }

    const Matrix& matrix() const { return m_; }
    int dim() const { return static_cast<int>(m_.rows()); }
    RotationMatrix transpose() const { return RotationMatrix(m_.transpose()); }

    friend RotationMatrix operator*(const RotationMatrix& a, const RotationMatrix& b)
    {
        if (a.dim() != b.dim())
        {
            throw DomainError("RotationMatrix product: dimension mismatch");
        }
        return RotationMatrix(a.m_ * b.m_);
    }

  private:
    Matrix m_;
};

class SkewMatrix
{
  public:
    explicit SkewMatrix(Matrix m, double tol = Tolerances{}.skew) : m_(std::move(m))
    {
        if (m_.rows() != m_.cols() || m_.rows() < 1)
        {
            throw InvariantError("SkewMatrix: expected a square matrix");
        }
        const double asym = norm(m_ + m_.transpose());
        if (!(asym <= tol))
        {
            throw InvariantError("SkewMatrix: ||X + X^T|| = " + std::to_string(asym));
        }
    }

    static SkewMatrix zero(int n) { return SkewMatrix(Matrix::Zero(n, n)); }

    const Matrix& matrix() const { return m_; }
    int dim() const { return static_cast<int>(m_.rows()); }

    friend SkewMatrix operator*(double s, const SkewMatrix& x) { return SkewMatrix(s * x.m_); }
    friend SkewMatrix operator-(const SkewMatrix& x) { return SkewMatrix(-x.m_); }

  private:
    Matrix m_;
};

/// Rotation angles of the 2x2 blocks of a rotation, sorted in decreasing order.
struct PrincipalAngles
{
    std::vector<double> angles;
    int dim = 0;

    int m() const { return static_cast<int>(angles.size()); }
    int fixed_subspace_dim() const { return dim - 2 * m(); }
    double norm() const
    {
        double s = 0.0;
        for (double a : angles) s += a * a;
        return std::sqrt(s);
    }
};

/// Planar rotation by theta.
inline Matrix rotation2(double theta)
{
    Matrix r(2, 2);
    const double c = std::cos(theta), s = std::sin(theta);
    r << c, -s, s, c;
    return r;
}

/// The generator J = [[0, -1], [1, 0]].
inline Matrix unit_j()
{
    Matrix j(2, 2);
    j << 0.0, -1.0, 1.0, 0.0;
    return j;
}

/// diag(R(theta_1), ..., R(theta_m), I_{n-2m}).
inline Matrix block_rotation(const std::vector<double>& angles, int n)
{
    if (2 * static_cast<int>(angles.size()) > n) throw DomainError("block_rotation: too many blocks");
    Matrix out = Matrix::Identity(n, n);
    for (std::size_t k = 0; k < angles.size(); ++k)
    {
        out.block<2, 2>(2 * k, 2 * k) = rotation2(angles[k]);
    }
    return out;
}

/// diag(l_1 J, ..., l_k J, O_{n-2k}).
inline Matrix block_skew(const std::vector<double>& rates, int n)
{
    if (2 * static_cast<int>(rates.size()) > n) throw DomainError("block_skew: too many blocks");
    Matrix out = Matrix::Zero(n, n);
    for (std::size_t k = 0; k < rates.size(); ++k)
    {
        out.block<2, 2>(2 * k, 2 * k) = rates[k] * unit_j();
    }
    return out;
}

struct RotationCanonicalForm
{
    Matrix basis;  // P, orthogonal (det +-1)
    PrincipalAngles angles;

    Matrix block_matrix() const { return block_rotation(angles.angles, angles.dim); }
    Matrix reconstruct() const { return basis.transpose() * block_matrix() * basis; }
};

struct SkewCanonicalForm
{
    Matrix basis;               // P, orthogonal (det +-1)
    std::vector<double> rates;  // strictly positive, decreasing
    int dim = 0;

    Matrix block_matrix() const { return block_skew(rates, dim); }
    Matrix reconstruct() const { return basis.transpose() * block_matrix() * basis; }
};

inline SkewMatrix project_skew(const Matrix& x)
{
    if (x.rows() != x.cols()) throw DomainError("project_skew: matrix is not square");
    return SkewMatrix(0.5 * (x - x.transpose()));
}

/// Orthogonal projection of X onto the tangent space so(n) R.
inline Matrix project_tangent(const Matrix& x, const RotationMatrix& r)
{
    if (x.rows() != r.dim() || x.cols() != r.dim()) throw DomainError("project_tangent: shape mismatch");
    const Matrix xr = x * r.matrix().transpose();
    return 0.5 * (xr - xr.transpose()) * r.matrix();
}

namespace detail {

struct Plane
{
    double value;
    Vector first;
    Vector second;
};

inline Matrix assemble_basis(std::vector<Plane>& planes, const std::vector<Vector>& tail, Eigen::Index n)
{
    std::stable_sort(planes.begin(), planes.end(),
                     [](const Plane& a, const Plane& b) { return a.value > b.value; });
    Matrix cols(n, n);
    Eigen::Index c = 0;
    for (const auto& p : planes)
    {
        cols.col(c++) = p.first;
        cols.col(c++) = p.second;
    }
    for (const auto& v : tail) cols.col(c++) = v;
    return cols.transpose();
}

}  // namespace detail

/// Real-Schur based block diagonalization R = P^T diag(R(theta_j), I) P with
/// theta_j in (0, pi], sorted decreasingly. Angles <= tol.angle join the fixed subspace.
inline RotationCanonicalForm canonical_rotation_form(const RotationMatrix& r, const Tolerances& tol = {})
{
    const Matrix& m = r.matrix();
    const Eigen::Index n = m.rows();
    Eigen::RealSchur<Matrix> schur(m);
    if (schur.info() != Eigen::Success) throw NumericalError("canonical_rotation_form: Schur iteration failed");
    const Matrix& t = schur.matrixT();
    const Matrix& u = schur.matrixU();

    std::vector<detail::Plane> planes;
    std::vector<Vector> fixed;
    std::vector<Vector> reversed;  // eigenvalue -1
    for (Eigen::Index i = 0; i < n;)
    {
        if (i + 1 < n && t(i + 1, i) != 0.0)
        {
            const double c = 0.5 * (t(i, i) + t(i + 1, i + 1));
            const double s = 0.5 * (t(i + 1, i) - t(i, i + 1));
            double theta = std::atan2(s, c);
            Vector a = u.col(i), b = u.col(i + 1);
            if (theta < 0.0)
            {
                // swapping the basis vectors reverses the block orientation
                theta = -theta;
                std::swap(a, b);
            }
            if (theta <= tol.angle)
            {
                fixed.push_back(std::move(a));
                fixed.push_back(std::move(b));
            }
            else
            {
                planes.push_back({theta, std::move(a), std::move(b)});
            }
            i += 2;
        }
        else
        {
            const double v = t(i, i);
            if (std::abs(std::abs(v) - 1.0) > 1e-6)
            {
                throw NumericalError("canonical_rotation_form: real eigenvalue " + std::to_string(v) +
                                     " is not +-1 (nearly defective input?)");
            }
            (v > 0.0 ? fixed : reversed).push_back(u.col(i));
            ++i;
        }
    }
    if (reversed.size() % 2 != 0)
    {
        throw NumericalError("canonical_rotation_form: eigenvalue -1 has odd multiplicity");
    }
    for (std::size_t k = 0; k < reversed.size(); k += 2)
    {
        planes.push_back({pi, reversed[k], reversed[k + 1]});
    }

    RotationCanonicalForm form;
    form.basis = detail::assemble_basis(planes, fixed, n);
    form.angles.dim = static_cast<int>(n);
    for (const auto& p : planes) form.angles.angles.push_back(p.value);

    const double residual = norm(form.reconstruct() - m);
    if (!(residual <= tol.recon))
    {
        throw NumericalError("canonical_rotation_form: reconstruction residual " + std::to_string(residual));
    }
    return form;
}

inline PrincipalAngles principal_angles(const RotationMatrix& r, double tol = Tolerances{}.angle)
{
    Tolerances t;
    t.angle = tol;
    return canonical_rotation_form(r, t).angles;
}

/// Omega = P^T diag(l_1 J, ..., l_k J, O) P with l_j > 0 decreasing.
inline SkewCanonicalForm canonical_skew_form(const SkewMatrix& x, const Tolerances& tol = {})
{
    const Matrix& m = x.matrix();
    const Eigen::Index n = m.rows();
    const double scale = std::max(m.norm(), std::numeric_limits<double>::min());
    const double zero_rate = 64.0 * std::numeric_limits<double>::epsilon() * scale;

    Eigen::RealSchur<Matrix> schur(m);
    if (schur.info() != Eigen::Success) throw NumericalError("canonical_skew_form: Schur iteration failed");
    const Matrix& t = schur.matrixT();
    const Matrix& u = schur.matrixU();

    std::vector<detail::Plane> planes;
    std::vector<Vector> kernel;
    for (Eigen::Index i = 0; i < n;)
    {
        if (i + 1 < n && t(i + 1, i) != 0.0)
        {
            double rate = 0.5 * (t(i + 1, i) - t(i, i + 1));
            Vector a = u.col(i), b = u.col(i + 1);
            if (rate < 0.0)
            {
                rate = -rate;
                std::swap(a, b);
            }
            if (rate <= zero_rate)
            {
                kernel.push_back(std::move(a));
                kernel.push_back(std::move(b));
            }
            else
            {
                planes.push_back({rate, std::move(a), std::move(b)});
            }
            i += 2;
        }
        else
        {
            if (std::abs(t(i, i)) > 1e-6 * std::max(1.0, scale))
            {
                throw NumericalError("canonical_skew_form: nonzero real eigenvalue " + std::to_string(t(i, i)));
            }
            kernel.push_back(u.col(i));
            ++i;
        }
    }

    SkewCanonicalForm form;
    form.dim = static_cast<int>(n);
    form.basis = detail::assemble_basis(planes, kernel, n);
    for (const auto& p : planes) form.rates.push_back(p.value);

    const double residual = norm(form.reconstruct() - m);
    if (!(residual <= tol.recon * std::max(1.0, norm(m))))
    {
        throw NumericalError("canonical_skew_form: reconstruction residual " + std::to_string(residual));
    }
    return form;
}

namespace detail {

// Geodesic distance from the identity for an orthogonal matrix. For n >= 4 the
// angles come from the commuting pair S = (M + M^T)/2 (eigenvalues cos theta)
// and K = (M - M^T)/2 (||K v||^2 = sin^2 theta on each eigenvector v of S).
inline double distance_from_identity(const Matrix& m)
{
    const Eigen::Index n = m.rows();
    if (n == 2)
    {
        return std::abs(std::atan2(0.5 * (m(1, 0) - m(0, 1)), 0.5 * (m(0, 0) + m(1, 1))));
    }
    if (n == 3)
    {
        const double x = 0.5 * (m(2, 1) - m(1, 2));
        const double y = 0.5 * (m(0, 2) - m(2, 0));
        const double z = 0.5 * (m(1, 0) - m(0, 1));
        return std::atan2(std::sqrt(x * x + y * y + z * z), 0.5 * (m.trace() - 1.0));
    }
    const Matrix sym = 0.5 * (m + m.transpose());
    const Matrix skw = 0.5 * (m - m.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> eig(sym);
    if (eig.info() != Eigen::Success) throw NumericalError("geodesic_distance: eigensolver failed");
    const Matrix kv = skw * eig.eigenvectors();
    double sum = 0.0;
    for (Eigen::Index k = 0; k < n; ++k)
    {
        const double theta = std::atan2(kv.col(k).norm(), eig.eigenvalues()(k));
        sum += theta * theta;
    }
    // every angle is seen once per eigenvector of its plane
    return std::sqrt(0.5 * sum);
}

}  // namespace detail

/// d(A, B) = d(I, A^T B) = sqrt(sum of squared principal angles of A^T B).
inline double geodesic_distance(const RotationMatrix& a, const RotationMatrix& b)
{
    if (a.dim() != b.dim()) throw DomainError("geodesic_distance: dimension mismatch");
    return detail::distance_from_identity(a.matrix().transpose() * b.matrix());
}

inline double distance_from_identity(const RotationMatrix& r) { return detail::distance_from_identity(r.matrix()); }

/// n - tr(R); sandwiched by 4 sin^2(d/2) <= gap <= d^2 for d <= pi.
inline double trace_gap(const RotationMatrix& r) { return static_cast<double>(r.dim()) - r.matrix().trace(); }

namespace detail {

inline Matrix exp_skew_blockwise(const Matrix& x)
{
    const Eigen::Index n = x.rows();
    if (n == 2) return rotation2(0.5 * (x(1, 0) - x(0, 1)));
    if (n == 3)
    {
        // one-block case: Rodrigues form of P^T diag(R(theta), 1) P
        const double theta = norm(x);
        double a, b;
        if (theta < 1e-4)
        {
            const double t2 = theta * theta;
            a = 1.0 - t2 / 6.0 + t2 * t2 / 120.0;
            b = 0.5 - t2 / 24.0 + t2 * t2 / 720.0;
        }
        else
        {
            const double h = std::sin(0.5 * theta);
            a = std::sin(theta) / theta;
            b = 2.0 * h * h / (theta * theta);
        }
        return Matrix::Identity(3, 3) + a * x + b * (x * x);
    }
    const SkewCanonicalForm form = canonical_skew_form(SkewMatrix(x));
    return form.basis.transpose() * block_rotation(form.rates, form.dim) * form.basis;
}

}  // namespace detail

/// Matrix exponential evaluated block by block through the canonical skew form.
inline RotationMatrix exp_so(const SkewMatrix& x) { return RotationMatrix(detail::exp_skew_blockwise(x.matrix())); }

/// Scaling-and-squaring (Pade) exponential; independent of the canonical-form route.
inline RotationMatrix exp_so_pade(const SkewMatrix& x) { return RotationMatrix(Matrix(x.matrix().exp())); }

/// Principal logarithm. Throws BranchError when an angle is within tol of pi.
inline SkewMatrix log_so(const RotationMatrix& r, double tol = Tolerances{}.angle)
{
    if (r.dim() == 2)
    {
        const Matrix& m = r.matrix();
        const double theta = std::atan2(0.5 * (m(1, 0) - m(0, 1)), 0.5 * (m(0, 0) + m(1, 1)));
        if (std::abs(theta) >= pi - tol) throw BranchError("log_so: rotation angle is pi");
        return SkewMatrix(theta * unit_j());
    }
    Tolerances t;
    t.angle = tol;
    const RotationCanonicalForm form = canonical_rotation_form(r, t);
    if (!form.angles.angles.empty() && form.angles.angles.front() >= pi - tol)
    {
        throw BranchError("log_so: principal angle at pi, logarithm is not unique");
    }
    Matrix x = form.basis.transpose() * block_skew(form.angles.angles, form.angles.dim) * form.basis;
    return SkewMatrix(0.5 * (x - x.transpose()));
}

/// Gaussian skew matrix rescaled to unit half-Frobenius norm.
inline SkewMatrix sample_skew_direction(int n, Rng& rng)
{
    if (n < 2) throw DomainError("sample_skew_direction: n must be >= 2");
    std::normal_distribution<double> gauss;
    Matrix x = Matrix::Zero(n, n);
    for (int i = 0; i < n; ++i)
    {
        for (int j = i + 1; j < n; ++j)
        {
            x(i, j) = gauss(rng);
            x(j, i) = -x(i, j);
        }
    }
    return SkewMatrix(x / norm(x));
}

/// Haar-distributed rotation: QR of a Gaussian matrix with sign-corrected R
/// diagonal; a column swap maps the det = -1 coset onto SO(n).
inline RotationMatrix sample_haar(int n, Rng& rng)
{
    if (n < 2) throw DomainError("sample_haar: n must be >= 2");
    std::normal_distribution<double> gauss;
    Matrix g(n, n);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) g(i, j) = gauss(rng);
    Eigen::HouseholderQR<Matrix> qr(g);
    Matrix q = qr.householderQ();
    const Matrix& rr = qr.matrixQR();
    for (int j = 0; j < n; ++j)
    {
        if (rr(j, j) < 0.0) q.col(j) *= -1.0;
    }
    if (q.determinant() < 0.0) q.col(0).swap(q.col(1));
    return RotationMatrix(q);
}

inline RotationMatrix sample_haar(int n, std::uint64_t seed)
{
    Rng rng(seed);
    return sample_haar(n, rng);
}

/// exp(rho U) with U a uniform unit skew direction and rho ~ U[0, radius).
inline RotationMatrix sample_ball(int n, double radius, Rng& rng)
{
    if (!(radius > 0.0 && radius <= pi)) throw DomainError("sample_ball: radius must lie in (0, pi]");
    std::uniform_real_distribution<double> uniform(0.0, radius);
    for (;;)
    {
        const SkewMatrix dir = sample_skew_direction(n, rng);
        const double rho = uniform(rng);
        RotationMatrix r = exp_so(rho * dir);
        // rounding in exp can land exactly on the boundary
        if (distance_from_identity(r) < radius) return r;
    }
}

inline RotationMatrix sample_ball(int n, double radius, std::uint64_t seed)
{
    Rng rng(seed);
    return sample_ball(n, radius, rng);
}

}  // namespace winfree
