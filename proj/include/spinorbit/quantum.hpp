#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"

namespace spinorbit {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

inline constexpr Complex I{0.0, 1.0};
inline constexpr int max_oam_truncation = 8;

namespace tolerance {
inline constexpr double normalization = 1e-12;
inline constexpr double hermitian = 1e-10;
inline constexpr double trace = 1e-10;
inline constexpr double negative_eigenvalue = 1e-9;
}  // namespace tolerance

//! Photon spin (circular polarization). Values are the helicity in units of hbar.
enum class Spin : int
{
    plus = 1,
    minus = -1
};

constexpr int spin_value(Spin s) { return static_cast<int>(s); }
constexpr int spin_index(Spin s) { return s == Spin::plus ? 0 : 1; }
constexpr Spin flip(Spin s) { return s == Spin::plus ? Spin::minus : Spin::plus; }

//---------------------------------------------------------------------------//
/*!
 * Polarization ket stored in the circular basis {sigma+, sigma-}.
 *
 * The linear basis is tied to the circular one by
 *   |H> = (|s+> + |s->)/sqrt2,   |V> = (|s+> - |s->)/(sqrt2 i),
 * so |s+-> = (|H> +- i|V>)/sqrt2. Construction always normalizes.
 */
class SpinKet
{
  public:
    SpinKet(Complex plus, Complex minus) : amps_(plus, minus)
    {
        double const n = amps_.norm();
        if (!(n > 0.0) || !std::isfinite(n))
            throw InvalidArgument("SpinKet: zero or non-finite amplitude vector");
        amps_ /= n;
    }

    static SpinKet sigma_plus() { return {1.0, 0.0}; }
    static SpinKet sigma_minus() { return {0.0, 1.0}; }
    static SpinKet horizontal() { return from_linear({1.0, 0.0}); }
    static SpinKet vertical() { return from_linear({0.0, 1.0}); }
    static SpinKet diagonal() { return from_linear({1.0, 1.0}); }
    static SpinKet antidiagonal() { return from_linear({1.0, -1.0}); }

    //! Build from Jones-vector amplitudes (H, V).
    static SpinKet from_linear(Eigen::Vector2cd const& hv)
    {
        double const r = 1.0 / std::sqrt(2.0);
        return {r * (hv[0] - I * hv[1]), r * (hv[0] + I * hv[1])};
    }

    //! Jones-vector amplitudes (H, V).
    Eigen::Vector2cd linear() const
    {
        double const r = 1.0 / std::sqrt(2.0);
        return {r * (amps_[0] + amps_[1]), I * r * (amps_[0] - amps_[1])};
    }

    Complex operator[](Spin s) const { return amps_[spin_index(s)]; }
    Eigen::Vector2cd const& amplitudes() const { return amps_; }

  private:
    Eigen::Vector2cd amps_;
};

//! |<a|b>| for polarization kets.
inline double overlap_modulus(SpinKet const& a, SpinKet const& b)
{
    return std::abs(a.amplitudes().dot(b.amplitudes()));
}

//---------------------------------------------------------------------------//
//! Discrete OAM ket on ell in [-L, L].
class OamKet
{
  public:
    OamKet(int truncation, CVector amplitudes)
        : truncation_(truncation), amps_(std::move(amplitudes))
    {
        if (truncation_ < 0 || truncation_ > max_oam_truncation)
            throw InvalidArgument("OamKet: truncation out of range [0, 8]");
        if (amps_.size() != 2 * truncation_ + 1)
            throw InvalidArgument("OamKet: expected 2L+1 amplitudes");
        double const n = amps_.norm();
        if (!(n > 0.0) || !std::isfinite(n))
            throw InvalidArgument("OamKet: zero or non-finite amplitude vector");
        amps_ /= n;
    }

    static OamKet basis(int ell, int truncation = 1)
    {
        if (std::abs(ell) > truncation)
            throw InvalidArgument("OamKet: |ell| exceeds truncation");
        CVector a = CVector::Zero(2 * truncation + 1);
        a[ell + truncation] = 1.0;
        return {truncation, std::move(a)};
    }

    int truncation() const { return truncation_; }
    CVector const& amplitudes() const { return amps_; }

    //! Amplitude at ell; zero outside the truncation window.
    Complex amplitude(int ell) const
    {
        return std::abs(ell) > truncation_ ? Complex{} : amps_[ell + truncation_];
    }

  private:
    int truncation_;
    CVector amps_;
};

//---------------------------------------------------------------------------//
//! Label of one product-basis vector. A traced-out factor is labeled 0.
struct BasisLabel
{
    int spin = 0;
    int ell = 0;

    friend bool operator==(BasisLabel const&, BasisLabel const&) = default;
};

using BasisLabels = std::vector<BasisLabel>;

//---------------------------------------------------------------------------//
/*!
 * Pure state on spin (x) OAM, truncated to ell in [-L, L].
 *
 * Amplitudes are stored spin-major: index = spin_index * (2L+1) + (ell + L).
 */
class PureState
{
  public:
    PureState(int truncation, CVector amplitudes)
        : truncation_(truncation), amps_(std::move(amplitudes))
    {
        if (truncation_ < 0 || truncation_ > max_oam_truncation)
            throw InvalidArgument("PureState: truncation out of range [0, 8]");
        if (amps_.size() != 2 * (2 * truncation_ + 1))
            throw InvalidArgument("PureState: expected 2(2L+1) amplitudes");
        double const n = amps_.norm();
        if (!(n > 0.0) || !std::isfinite(n))
            throw InvalidArgument("PureState: zero or non-finite amplitude vector");
        amps_ /= n;
    }

    static PureState basis(Spin s, int ell, int truncation = 1)
    {
        if (std::abs(ell) > truncation)
            throw InvalidArgument("PureState: |ell| exceeds truncation");
        CVector a = CVector::Zero(2 * (2 * truncation + 1));
        a[index(s, ell, truncation)] = 1.0;
        return {truncation, std::move(a)};
    }

    static Eigen::Index index(Spin s, int ell, int truncation)
    {
        return spin_index(s) * (2 * truncation + 1) + (ell + truncation);
    }

    int truncation() const { return truncation_; }
    Eigen::Index dim() const { return amps_.size(); }
    CVector const& amplitudes() const { return amps_; }

    Complex amplitude(Spin s, int ell) const
    {
        return std::abs(ell) > truncation_ ? Complex{}
                                           : amps_[index(s, ell, truncation_)];
    }

    BasisLabels labels() const { return product_labels(truncation_); }

    static BasisLabels product_labels(int truncation)
    {
        BasisLabels out;
        for (Spin s : {Spin::plus, Spin::minus})
            for (int ell = -truncation; ell <= truncation; ++ell)
                out.push_back({spin_value(s), ell});
        return out;
    }

  private:
    int truncation_;
    CVector amps_;
};

inline PureState tensor(SpinKet const& spin, OamKet const& oam)
{
    int const L = oam.truncation();
    CVector a(2 * (2 * L + 1));
    for (Spin s : {Spin::plus, Spin::minus})
        for (int ell = -L; ell <= L; ++ell)
            a[PureState::index(s, ell, L)] = spin[s] * oam.amplitude(ell);
    return {L, std::move(a)};
}

//! |<a|b>|; states compare equal up to global phase when this is 1.
inline double overlap_modulus(PureState const& a, PureState const& b)
{
    if (a.truncation() != b.truncation())
        throw InvalidArgument("overlap_modulus: truncation mismatch");
    return std::abs(a.amplitudes().dot(b.amplitudes()));
}

//---------------------------------------------------------------------------//
/*!
 * Hermitian, unit-trace, positive semidefinite operator with basis labels.
 *
 * The constructor validates all three properties; eigenvalues in
 * [-1e-9, 0) are tolerated as rounding noise.
 */
class DensityMatrix
{
  public:
    DensityMatrix(CMatrix entries, BasisLabels labels)
        : rho_(std::move(entries)), labels_(std::move(labels))
    {
        if (rho_.rows() == 0 || rho_.rows() != rho_.cols())
            throw InvalidArgument("DensityMatrix: matrix must be square and non-empty");
        if (static_cast<Eigen::Index>(labels_.size()) != rho_.rows())
            throw InvalidArgument("DensityMatrix: label count does not match dimension");
        if (!rho_.allFinite())
            throw InvalidArgument("DensityMatrix: non-finite entries");
        if ((rho_ - rho_.adjoint()).cwiseAbs().maxCoeff() >= tolerance::hermitian)
            throw InvalidArgument("DensityMatrix: matrix is not Hermitian");
        if (std::abs(rho_.trace() - 1.0) > tolerance::trace)
            throw InvalidArgument("DensityMatrix: trace differs from 1");
        Eigen::SelfAdjointEigenSolver<CMatrix> es(rho_, Eigen::EigenvaluesOnly);
        if (es.eigenvalues().minCoeff() < -tolerance::negative_eigenvalue)
            throw InvalidArgument("DensityMatrix: matrix is not positive semidefinite");
    }

    static DensityMatrix maximally_mixed(BasisLabels labels)
    {
        auto const n = static_cast<Eigen::Index>(labels.size());
        return {CMatrix::Identity(n, n) / static_cast<double>(n), std::move(labels)};
    }

    Eigen::Index dim() const { return rho_.rows(); }
    CMatrix const& matrix() const { return rho_; }
    BasisLabels const& labels() const { return labels_; }
    Complex operator()(Eigen::Index i, Eigen::Index j) const { return rho_(i, j); }

  private:
    CMatrix rho_;
    BasisLabels labels_;
};

inline DensityMatrix density_from_pure(PureState const& psi)
{
    CVector const& a = psi.amplitudes();
    CMatrix rho = a * a.adjoint();
    // Exact Hermiticity; the outer product is Hermitian only up to rounding.
    rho = 0.5 * (rho + rho.adjoint()).eval();
    return {std::move(rho), psi.labels()};
}

//---------------------------------------------------------------------------//
inline CMatrix hermitian_part(CMatrix const& m)
{
    return 0.5 * (m + m.adjoint());
}

//! Set negative eigenvalues to zero and rescale to unit trace.
inline CMatrix clamp_to_physical(CMatrix const& m)
{
    Eigen::SelfAdjointEigenSolver<CMatrix> es(hermitian_part(m));
    Eigen::VectorXd w = es.eigenvalues().cwiseMax(0.0);
    double const total = w.sum();
    if (!(total > 0.0))
        throw NumericalError("clamp_to_physical: no positive eigenvalues");
    w /= total;
    CMatrix const& v = es.eigenvectors();
    return hermitian_part(v * w.asDiagonal() * v.adjoint());
}

/*!
 * Principal square root of a Hermitian PSD matrix via eigendecomposition.
 *
 * Eigenvalues in [-1e-9, 0) and those at roundoff level are set to zero; anything more negative,
 * or a non-Hermitian input, throws.
 */
inline CMatrix matrix_sqrt_psd(CMatrix const& m)
{
    if (m.rows() != m.cols())
        throw InvalidArgument("matrix_sqrt_psd: matrix must be square");
    if (m.size() == 0)
        return m;
    if ((m - m.adjoint()).cwiseAbs().maxCoeff() >= tolerance::hermitian)
        throw InvalidArgument("matrix_sqrt_psd: matrix is not Hermitian");
    Eigen::SelfAdjointEigenSolver<CMatrix> es(hermitian_part(m));
    Eigen::VectorXd w = es.eigenvalues();
    if (w.minCoeff() < -tolerance::negative_eigenvalue)
        throw InvalidArgument("matrix_sqrt_psd: matrix has a negative eigenvalue");
    // eigenvalues at roundoff level are zero; their square roots would not be
    double const floor = 64.0 * std::numeric_limits<double>::epsilon() * w.cwiseAbs().maxCoeff();
    w = w.unaryExpr([floor](double x) { return x <= floor ? 0.0 : std::sqrt(x); });
    CMatrix const& v = es.eigenvectors();
    return hermitian_part(v * w.asDiagonal() * v.adjoint());
}

namespace detail {
inline void require_compatible(DensityMatrix const& a, DensityMatrix const& b,
                               char const* who)
{
    if (a.dim() != b.dim())
        throw InvalidArgument(std::string(who) + ": dimension mismatch");
    if (a.labels() != b.labels())
        throw InvalidArgument(std::string(who) + ": basis labels differ");
}
}  // namespace detail

/*!
 * Root fidelity F = Tr sqrt( sqrt(b) a sqrt(b) ) = Tr |sqrt(a) sqrt(b)|, in [0, 1].
 *
 * This is the unsquared form; for a pure `a` it equals sqrt(<psi|b|psi>).
 */
inline double fidelity(DensityMatrix const& a, DensityMatrix const& b)
{
    detail::require_compatible(a, b, "fidelity");
    // Tr|sqrt(a) sqrt(b)| via singular values: stays accurate when either
    // state is rank deficient, unlike the square roots of roundoff eigenvalues.
    CMatrix const m = matrix_sqrt_psd(a.matrix()) * matrix_sqrt_psd(b.matrix());
    Eigen::JacobiSVD<CMatrix> svd(m);
    return std::clamp(svd.singularValues().sum(), 0.0, 1.0);
}

//! Half the trace norm of a - b.
inline double trace_distance(DensityMatrix const& a, DensityMatrix const& b)
{
    detail::require_compatible(a, b, "trace_distance");
    Eigen::SelfAdjointEigenSolver<CMatrix> es(hermitian_part(a.matrix() - b.matrix()),
                                              Eigen::EigenvaluesOnly);
    return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

//---------------------------------------------------------------------------//
enum class Subsystem
{
    spin,
    oam
};

namespace detail {
//! Factor a label list as spins x ells (spin-major); throws if not a product.
struct ProductShape
{
    std::vector<int> spins;
    std::vector<int> ells;
};

inline ProductShape product_shape(BasisLabels const& labels)
{
    ProductShape shape;
    for (auto const& l : labels)
    {
        if (std::find(shape.spins.begin(), shape.spins.end(), l.spin) == shape.spins.end())
            shape.spins.push_back(l.spin);
        if (std::find(shape.ells.begin(), shape.ells.end(), l.ell) == shape.ells.end())
            shape.ells.push_back(l.ell);
    }
    std::size_t const ne = shape.ells.size();
    if (shape.spins.size() * ne != labels.size())
        throw InvalidArgument("basis labels do not form a spin x OAM product");
    for (std::size_t i = 0; i < labels.size(); ++i)
    {
        if (labels[i].spin != shape.spins[i / ne] || labels[i].ell != shape.ells[i % ne])
            throw InvalidArgument("basis labels are not in spin-major product order");
    }
    return shape;
}
}  // namespace detail

//! Reduced density matrix after tracing out `traced`.
inline DensityMatrix partial_trace(DensityMatrix const& rho, Subsystem traced)
{
    auto const shape = detail::product_shape(rho.labels());
    auto const ns = static_cast<Eigen::Index>(shape.spins.size());
    auto const ne = static_cast<Eigen::Index>(shape.ells.size());
    CMatrix const& m = rho.matrix();
    BasisLabels labels;
    CMatrix out;
    if (traced == Subsystem::oam)
    {
        out = CMatrix::Zero(ns, ns);
        for (Eigen::Index a = 0; a < ns; ++a)
            for (Eigen::Index b = 0; b < ns; ++b)
                for (Eigen::Index k = 0; k < ne; ++k)
                    out(a, b) += m(a * ne + k, b * ne + k);
        for (int s : shape.spins)
            labels.push_back({s, 0});
    }
    else
    {
        out = CMatrix::Zero(ne, ne);
        for (Eigen::Index a = 0; a < ne; ++a)
            for (Eigen::Index b = 0; b < ne; ++b)
                for (Eigen::Index k = 0; k < ns; ++k)
                    out(a, b) += m(k * ne + a, k * ne + b);
        for (int e : shape.ells)
            labels.push_back({0, e});
    }
    return {hermitian_part(out), std::move(labels)};
}

//---------------------------------------------------------------------------//
//! The ell = -1, +1 subspace in spin-major order.
inline BasisLabels block_labels()
{
    return {{+1, -1}, {+1, +1}, {-1, -1}, {-1, +1}};
}

/*!
 * Project onto the subspace spanned by `block` and renormalize.
 *
 * This is post-selection: the unconverted ell = 0 light is discarded.
 */
inline DensityMatrix restrict_to_block(DensityMatrix const& rho, BasisLabels const& block)
{
    auto const& labels = rho.labels();
    std::vector<Eigen::Index> idx;
    for (auto const& b : block)
    {
        auto it = std::find(labels.begin(), labels.end(), b);
        if (it == labels.end())
            throw InvalidArgument("restrict_to_block: block label absent from basis");
        idx.push_back(it - labels.begin());
    }
    auto const n = static_cast<Eigen::Index>(idx.size());
    CMatrix sub(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            sub(i, j) = rho(idx[i], idx[j]);
    double const w = sub.trace().real();
    if (!(w > 1e-15))
        throw NumericalError("restrict_to_block: no weight in the selected subspace");
    return {hermitian_part(sub) / w, block};
}

//! Restriction of a pure state's amplitudes to the ell = +-1 block (unnormalized).
inline Eigen::Vector4cd block_amplitudes(PureState const& psi)
{
    Eigen::Vector4cd out;
    auto const labels = block_labels();
    for (int i = 0; i < 4; ++i)
        out[i] = psi.amplitude(labels[i].spin > 0 ? Spin::plus : Spin::minus, labels[i].ell);
    return out;
}

/*!
 * Von Neumann entropy (bits) of the spin marginal of a state supported on
 * ell = +-1. Throws if more than 1e-9 of the weight lies outside the block.
 */
inline double entanglement_entropy(PureState const& psi)
{
    Eigen::Vector4cd const a = block_amplitudes(psi);
    double const inside = a.squaredNorm();
    if (1.0 - inside > 1e-9)
        throw InvalidArgument("entanglement_entropy: support outside the ell=+-1 block");
    Eigen::Matrix2cd coeff;  // rows: spin, cols: ell
    coeff << a[0], a[1], a[2], a[3];
    coeff /= std::sqrt(inside);
    Eigen::Matrix2cd const marginal = coeff * coeff.adjoint();
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2cd> es(marginal, Eigen::EigenvaluesOnly);
    double s = 0.0;
    for (double lambda : es.eigenvalues())
        if (lambda > 0.0)
            s -= lambda * std::log2(lambda);
    return std::clamp(s, 0.0, 1.0);
}

struct AngularMomentum
{
    double spin = 0.0;
    double orbital = 0.0;

    double total() const { return spin + orbital; }
};

inline AngularMomentum angular_momentum_expectations(PureState const& psi)
{
    AngularMomentum out;
    int const L = psi.truncation();
    for (Spin s : {Spin::plus, Spin::minus})
    {
        for (int ell = -L; ell <= L; ++ell)
        {
            double const w = std::norm(psi.amplitude(s, ell));
            out.spin += w * spin_value(s);
            out.orbital += w * ell;
        }
    }
    return out;
}

//---------------------------------------------------------------------------//
enum class BellState
{
    psi_plus,
    psi_minus,
    phi_plus,
    phi_minus
};

inline constexpr BellState all_bell_states[] = {BellState::psi_plus, BellState::psi_minus,
                                                BellState::phi_plus, BellState::phi_minus};

inline std::string_view to_string(BellState b)
{
    switch (b)
    {
        case BellState::psi_plus: return "psi+";
        case BellState::psi_minus: return "psi-";
        case BellState::phi_plus: return "phi+";
        case BellState::phi_minus: return "phi-";
    }
    return "?";
}

inline BellState parse_bell_state(std::string_view s)
{
    for (BellState b : all_bell_states)
        if (to_string(b) == s)
            return b;
    throw InvalidArgument("unknown Bell state '" + std::string(s) +
                          "' (expected psi+, psi-, phi+ or phi-)");
}

/*!
 * Closed-form Bell states on spin x OAM:
 *   Psi+- = (|s+,-1> +- |s-,+1>)/sqrt2
 *   Phi+- = (|s+,+1> +- |s-,-1>)/sqrt2
 */
inline PureState bell_state(BellState b, int truncation = 1)
{
    if (truncation < 1)
        throw InvalidArgument("bell_state: truncation must be at least 1");
    bool const psi = b == BellState::psi_plus || b == BellState::psi_minus;
    double const sign = (b == BellState::psi_plus || b == BellState::phi_plus) ? 1.0 : -1.0;
    int const ell_plus = psi ? -1 : +1;
    CVector a = CVector::Zero(2 * (2 * truncation + 1));
    a[PureState::index(Spin::plus, ell_plus, truncation)] = 1.0;
    a[PureState::index(Spin::minus, -ell_plus, truncation)] = sign;
    return {truncation, std::move(a)};
}

//! Bell-state density matrix on the 4-dimensional ell = +-1 block.
inline DensityMatrix bell_density(BellState b)
{
    return restrict_to_block(density_from_pure(bell_state(b)), block_labels());
}

}  // namespace spinorbit
