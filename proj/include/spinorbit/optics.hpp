#pragma once

#include <cmath>
#include <numbers>
#include <string_view>

#include "quantum.hpp"

namespace spinorbit {

//---------------------------------------------------------------------------//
// Jones calculus
//
// Jones vectors are (H, V) amplitudes. Element angles are positive in the
// clockwise sense: an element at angle theta has its fast axis along
// (cos theta, -sin theta). With |s+-> = (|H> +- i|V>)/sqrt2 this makes a
// half-wave plate at theta act as
//     hwp(theta) |s+-> = exp(-+ 2i theta) |s-+>,
// the geometric phase -2 sigma theta picked up by a rotated nano half-wave
// plate. Retarders are diag(1, -1) and diag(1, -i) in their own frames.
//---------------------------------------------------------------------------//

enum class ElementKind
{
    hwp,
    qwp,
    polarizer,
    rotation,
    mirror
};

struct PolarizationOperator
{
    Eigen::Matrix2cd jones;
    ElementKind kind;

    Eigen::Vector2cd operator()(Eigen::Vector2cd const& hv) const { return jones * hv; }

    //! Apply to a polarization ket. Throws if the element extinguishes it.
    SpinKet operator()(SpinKet const& in) const { return SpinKet::from_linear(jones * in.linear()); }

    friend PolarizationOperator operator*(PolarizationOperator const& a,
                                          PolarizationOperator const& b)
    {
        return {a.jones * b.jones, ElementKind::rotation};
    }
};

namespace detail {
//! Columns are the element's fast and slow axes in the lab (H, V) frame.
inline Eigen::Matrix2cd element_frame(double theta)
{
    double const c = std::cos(theta);
    double const s = std::sin(theta);
    Eigen::Matrix2cd f;
    f << c, s, -s, c;
    return f;
}

inline Eigen::Matrix2cd in_frame(double theta, Complex fast, Complex slow)
{
    Eigen::Matrix2cd const f = element_frame(theta);
    return f * Eigen::Vector2cd(fast, slow).asDiagonal() * f.adjoint();
}
}  // namespace detail

inline PolarizationOperator hwp(double theta)
{
    return {detail::in_frame(theta, 1.0, -1.0), ElementKind::hwp};
}

inline PolarizationOperator qwp(double theta)
{
    return {detail::in_frame(theta, 1.0, -I), ElementKind::qwp};
}

//! Linear polarizer transmitting along angle theta.
inline PolarizationOperator polarizer(double theta)
{
    return {detail::in_frame(theta, 1.0, 0.0), ElementKind::polarizer};
}

//! Rotates the polarization plane by theta (same sense as element angles).
inline PolarizationOperator rotator(double theta)
{
    return {detail::element_frame(theta), ElementKind::rotation};
}

//! Normal-incidence reflection (the SLM): mirrors the transverse frame.
inline PolarizationOperator mirror()
{
    Eigen::Matrix2cd m;
    m << 1.0, 0.0, 0.0, -1.0;
    return {m, ElementKind::mirror};
}

inline double degrees_to_radians(double deg) { return deg * std::numbers::pi / 180.0; }

/*!
 * Polarization ket selected by the analyzer chain for given waveplate angles.
 *
 * The photon reflects off the SLM, then traverses the QWP, the HWP and a
 * horizontal polarizer. The returned |p> is the state the chain transmits
 * with unit probability: |p> = M^dag QWP(q)^dag HWP(h)^dag |H>.
 */
inline SpinKet polarization_projector_from_waveplates(double qwp_deg, double hwp_deg)
{
    Eigen::Matrix2cd const chain = hwp(degrees_to_radians(hwp_deg)).jones *
                                   qwp(degrees_to_radians(qwp_deg)).jones * mirror().jones;
    return SpinKet::from_linear(chain.adjoint() * Eigen::Vector2cd(1.0, 0.0));
}

//---------------------------------------------------------------------------//
// Geometric-phase metasurface
//---------------------------------------------------------------------------//

//! Metasurface channel parameters.
struct GpmSpec
{
    int winding = 1;          //!< orientation winding number ell_m
    bool flipped = false;     //!< metasurface turned over: OAM shifts reverse
    double efficiency = 0.72; //!< fraction of photons converted

    int delta_ell() const { return winding; }

    //! OAM shift applied to a sigma+ input.
    int shift() const { return flipped ? -winding : winding; }

    void validate() const
    {
        if (!(efficiency >= 0.0 && efficiency <= 1.0))
            throw InvalidArgument("GpmSpec: efficiency must lie in [0, 1]");
    }
};

/*!
 * Spin-flip and OAM shift of the metasurface:
 *   unflipped  |s+, l> -> |s-, l + dl>,  |s-, l> -> |s+, l - dl>
 *   flipped    |s+, l> -> |s-, l - dl>,  |s-, l> -> |s+, l + dl>
 * Amplitudes move with unit coefficient. Throws if any populated mode would
 * leave [-L, L].
 */
inline PureState gpm_unitary(GpmSpec const& spec, PureState const& psi)
{
    spec.validate();
    int const L = psi.truncation();
    int const d = spec.shift();
    CVector out = CVector::Zero(psi.dim());
    for (Spin s : {Spin::plus, Spin::minus})
    {
        int const step = s == Spin::plus ? d : -d;
        for (int ell = -L; ell <= L; ++ell)
        {
            Complex const a = psi.amplitude(s, ell);
            if (a == Complex{})
                continue;
            int const target = ell + step;
            if (std::abs(target) > L)
                throw InvalidArgument("gpm_unitary: OAM shift leaves the truncation window");
            out[PureState::index(flip(s), target, L)] = a;
        }
    }
    return {L, std::move(out)};
}

namespace detail {
inline int truncation_of(BasisLabels const& labels)
{
    if (labels.empty() || labels.size() % 2 != 0)
        throw InvalidArgument("basis is not a full spin x OAM product");
    int const L = static_cast<int>((labels.size() / 2 - 1) / 2);
    if (labels != PureState::product_labels(L))
        throw InvalidArgument("basis is not a full spin x OAM product");
    return L;
}
}  // namespace detail

//! Matrix of gpm_unitary on the full basis; columns that would overflow are zero.
inline CMatrix gpm_matrix(GpmSpec const& spec, int truncation)
{
    int const L = truncation;
    int const d = spec.shift();
    auto const n = static_cast<Eigen::Index>(2 * (2 * L + 1));
    CMatrix u = CMatrix::Zero(n, n);
    for (Spin s : {Spin::plus, Spin::minus})
    {
        int const step = s == Spin::plus ? d : -d;
        for (int ell = -L; ell <= L; ++ell)
        {
            int const target = ell + step;
            if (std::abs(target) <= L)
                u(PureState::index(flip(s), target, L), PureState::index(s, ell, L)) = 1.0;
        }
    }
    return u;
}

/*!
 * Lossy metasurface: rho -> eta U rho U^dag + (1 - eta) rho.
 *
 * The unconverted fraction keeps its spin and OAM (zero-order light).
 */
inline DensityMatrix gpm_channel(GpmSpec const& spec, DensityMatrix const& rho)
{
    spec.validate();
    int const L = detail::truncation_of(rho.labels());
    CMatrix const u = gpm_matrix(spec, L);
    for (Eigen::Index k = 0; k < rho.dim(); ++k)
    {
        if (u.col(k).cwiseAbs().maxCoeff() == 0.0 && rho(k, k).real() > 1e-14)
            throw InvalidArgument("gpm_channel: OAM shift leaves the truncation window");
    }
    double const eta = spec.efficiency;
    CMatrix out = eta * (u * rho.matrix() * u.adjoint()) + (1.0 - eta) * rho.matrix();
    return {hermitian_part(out), rho.labels()};
}

//---------------------------------------------------------------------------//
// SLM projections
//---------------------------------------------------------------------------//

enum class SlmProfile
{
    ell_plus_one,
    ell_minus_one,
    plus,  //!< (|+1> + |-1>)/sqrt2
    r      //!< (|+1> + i|-1>)/sqrt2
};

inline OamKet slm_projection_ket(SlmProfile profile, int truncation = 1)
{
    if (truncation < 1)
        throw InvalidArgument("slm_projection_ket: truncation must be at least 1");
    CVector a = CVector::Zero(2 * truncation + 1);
    auto at = [&](int ell) -> Complex& { return a[ell + truncation]; };
    switch (profile)
    {
        case SlmProfile::ell_plus_one: at(+1) = 1.0; break;
        case SlmProfile::ell_minus_one: at(-1) = 1.0; break;
        case SlmProfile::plus:
            at(+1) = 1.0;
            at(-1) = 1.0;
            break;
        case SlmProfile::r:
            at(+1) = 1.0;
            at(-1) = I;
            break;
    }
    return {truncation, std::move(a)};
}

inline std::string_view to_string(SlmProfile p)
{
    switch (p)
    {
        case SlmProfile::ell_plus_one: return "ℓ=1";
        case SlmProfile::ell_minus_one: return "ℓ=-1";
        case SlmProfile::plus: return "+";
        case SlmProfile::r: return "r";
    }
    return "?";
}

}  // namespace spinorbit
