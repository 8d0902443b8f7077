#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "experiment.hpp"
#include "minimize.hpp"
#include "quantum.hpp"
#include "quantum_json.hpp"

namespace spinorbit {

//---------------------------------------------------------------------------//
// Reconstruction of the 4x4 density matrix on spin (x) {ell = -1, +1} from
// the 17-row counts table. Linear inversion is exact for exact data and
// serves as the seed and cross-check for the maximum-likelihood fit.
//---------------------------------------------------------------------------//

enum class TomographyMethod
{
    linear,
    mle
};

inline std::string_view to_string(TomographyMethod m)
{
    return m == TomographyMethod::linear ? "linear" : "mle";
}

struct TomographyResult
{
    DensityMatrix rho;  //!< physical estimate (clamped if linear was not)
    TomographyMethod method = TomographyMethod::mle;
    CMatrix raw;        //!< unclamped estimate; equals rho for mle
    std::optional<double> fidelity_vs_target;
    std::optional<double> nll;  //!< final cost (mle only)
    int iterations = 0;
    int evaluations = 0;
    double gradient_norm = 0.0;
    bool converged = true;
    bool physical = true;  //!< false if the raw estimate had eigenvalues < -1e-6
    bool clamped = false;  //!< true if rho differs from raw by eigenvalue clamping
    double min_eigenvalue = 0.0;
};

//! The 16 projections and their counts, normalized by the intensity row.
struct TomographyData
{
    std::array<Eigen::Vector4cd, 16> kets;
    Eigen::Matrix<double, 16, 1> counts;
    double n_ref = 0.0;
};

inline std::array<Eigen::Vector4cd, 16> block_projector_kets()
{
    std::array<Eigen::Vector4cd, 16> kets;
    auto const settings = standard_measurement_set();
    auto const labels = block_labels();
    for (int k = 0; k < 16; ++k)
        kets[k] = projector_ket(settings[k + 1], labels);
    return kets;
}

inline TomographyData make_tomography_data(std::vector<CountRecord> const& records)
{
    std::array<CountRecord const*, num_settings> by_id{};
    for (auto const& r : records)
    {
        if (r.setting_id < 0 || r.setting_id >= num_settings)
            throw InvalidArgument("tomography: setting id " + std::to_string(r.setting_id) +
                                  " out of range");
        if (by_id[r.setting_id])
            throw InvalidArgument("tomography: duplicate setting " +
                                  std::to_string(r.setting_id));
        if (r.counts < 0)
            throw InvalidArgument("tomography: negative counts for setting " +
                                  std::to_string(r.setting_id));
        by_id[r.setting_id] = &r;
    }
    for (int id = 0; id < num_settings; ++id)
        if (!by_id[id])
            throw InvalidArgument("tomography: missing setting " + std::to_string(id));
    if (by_id[0]->counts <= 0)
        throw InvalidArgument("tomography: reference intensity (setting 0) must be positive");

    TomographyData d;
    d.kets = block_projector_kets();
    d.n_ref = static_cast<double>(by_id[0]->counts);
    for (int k = 0; k < 16; ++k)
        d.counts[k] = static_cast<double>(by_id[k + 1]->counts);
    return d;
}

namespace detail {
//! Orthonormal Hermitian basis (Pauli x Pauli)/2 on spin (x) {ell=-1, +1}.
inline std::array<Eigen::Matrix4cd, 16> pauli_product_basis()
{
    std::array<Eigen::Matrix2cd, 4> p;
    p[0] << 1, 0, 0, 1;
    p[1] << 0, 1, 1, 0;
    p[2] << 0, -I, I, 0;
    p[3] << 1, 0, 0, -1;
    std::array<Eigen::Matrix4cd, 16> out;
    for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b)
        {
            Eigen::Matrix4cd m;
            for (int i = 0; i < 2; ++i)
                for (int j = 0; j < 2; ++j)
                    m.block<2, 2>(2 * i, 2 * j) = p[a](i, j) * p[b];
            out[4 * a + b] = 0.5 * m;
        }
    return out;
}

//! Row nu, column k: Tr(Pi_nu B_k).
inline Eigen::Matrix<double, 16, 16>
measurement_matrix(std::array<Eigen::Vector4cd, 16> const& kets)
{
    auto const basis = pauli_product_basis();
    Eigen::Matrix<double, 16, 16> a;
    for (int nu = 0; nu < 16; ++nu)
        for (int k = 0; k < 16; ++k)
            a(nu, k) = kets[nu].dot(basis[k] * kets[nu]).real();
    return a;
}

inline double min_eigenvalue(CMatrix const& m)
{
    Eigen::SelfAdjointEigenSolver<CMatrix> es(hermitian_part(m), Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}
}  // namespace detail

/*!
 * Solve Tr(Pi_nu rho) = n_nu / n_ref for Hermitian rho, then rescale to unit
 * trace. A raw estimate with eigenvalues below -1e-6 is flagged non-physical;
 * `rho` then holds the clamped, renormalized matrix.
 */
inline TomographyResult linear_inversion(TomographyData const& data)
{
    auto const a = detail::measurement_matrix(data.kets);
    Eigen::JacobiSVD<Eigen::Matrix<double, 16, 16>> svd(a, Eigen::ComputeFullU |
                                                               Eigen::ComputeFullV);
    auto const& sv = svd.singularValues();
    if (!(sv[15] > 1e-12 * sv[0]))
        throw NumericalError("linear_inversion: measurement set is not tomographically complete");
    Eigen::Matrix<double, 16, 1> const b = data.counts / data.n_ref;
    Eigen::Matrix<double, 16, 1> const coeff = svd.solve(b);

    auto const basis = detail::pauli_product_basis();
    CMatrix raw = CMatrix::Zero(4, 4);
    for (int k = 0; k < 16; ++k)
        raw += coeff[k] * basis[k];
    raw = hermitian_part(raw);
    double const tr = raw.trace().real();
    if (!(tr > 0.0))
        throw NumericalError("linear_inversion: estimate has non-positive trace");
    raw /= tr;

    double const min_eig = detail::min_eigenvalue(raw);
    bool const clamp = min_eig < -tolerance::negative_eigenvalue;
    TomographyResult r{DensityMatrix(clamp ? clamp_to_physical(raw) : raw, block_labels()),
                       TomographyMethod::linear, raw, {}, {}};
    r.physical = min_eig >= -1e-6;
    r.clamped = clamp;
    r.min_eigenvalue = min_eig;
    return r;
}

inline TomographyResult linear_inversion(std::vector<CountRecord> const& records)
{
    return linear_inversion(make_tomography_data(records));
}

//---------------------------------------------------------------------------//
/*!
 * Lower-triangular T with real diagonal, packed as 16 reals:
 * [T00, T11, T22, T33, Re T10, Im T10, Re T20, Im T20, Re T21, Im T21,
 *  Re T30, Im T30, Re T31, Im T31, Re T32, Im T32].
 * rho(t) = T^dag T / Tr(T^dag T) is a density matrix for every t != 0.
 */
struct CholeskyParams
{
    using Vector = Eigen::Matrix<double, 16, 1>;

    Vector t;

    static constexpr std::array<std::pair<int, int>, 6> off_diagonal{
        {{1, 0}, {2, 0}, {2, 1}, {3, 0}, {3, 1}, {3, 2}}};

    Eigen::Matrix4cd matrix() const
    {
        Eigen::Matrix4cd m = Eigen::Matrix4cd::Zero();
        for (int i = 0; i < 4; ++i)
            m(i, i) = t[i];
        for (std::size_t k = 0; k < off_diagonal.size(); ++k)
        {
            auto [i, j] = off_diagonal[k];
            m(i, j) = {t[4 + 2 * k], t[5 + 2 * k]};
        }
        return m;
    }

    Eigen::Matrix4cd density() const
    {
        Eigen::Matrix4cd const m = matrix();
        Eigen::Matrix4cd rho = m.adjoint() * m;
        return rho / rho.trace().real();
    }

    /*!
     * Parameters reproducing a positive definite rho.
     *
     * Uses the Cholesky factor of the index-reversed matrix so that the
     * result is lower triangular with rho = T^dag T.
     */
    static CholeskyParams from_density(Eigen::Matrix4cd const& rho)
    {
        Eigen::Matrix4cd const rev = rho.colwise().reverse().rowwise().reverse();
        Eigen::LLT<Eigen::Matrix4cd> llt(rev);
        if (llt.info() != Eigen::Success)
            throw NumericalError("CholeskyParams: matrix is not positive definite");
        Eigen::Matrix4cd const l = llt.matrixL();
        Eigen::Matrix4cd const upper = l.colwise().reverse().rowwise().reverse();
        Eigen::Matrix4cd const t = upper.adjoint();
        CholeskyParams p;
        for (int i = 0; i < 4; ++i)
            p.t[i] = t(i, i).real();
        for (std::size_t k = 0; k < off_diagonal.size(); ++k)
        {
            auto [i, j] = off_diagonal[k];
            p.t[4 + 2 * k] = t(i, j).real();
            p.t[5 + 2 * k] = t(i, j).imag();
        }
        return p;
    }
};

/*!
 * Gaussian approximation to the Poisson negative log-likelihood,
 *   C(t) = sum_nu (n_ref p_nu(t) - n_nu)^2 / (2 max(n_ref p_nu(t), eps)),
 * with eps = 0.5 guarding projectors whose predicted count vanishes.
 */
class MleCost
{
  public:
    static constexpr double floor = 0.5;

    explicit MleCost(TomographyData data) : data_(std::move(data)) {}

    TomographyData const& data() const { return data_; }

    template<class Derived>
    double operator()(Eigen::MatrixBase<Derived> const& tv, Eigen::VectorXd* grad) const
    {
        CholeskyParams p;
        p.t = tv;
        Eigen::Matrix4cd const tm = p.matrix();
        Eigen::Matrix4cd const m = tm.adjoint() * tm;
        double const s = m.trace().real();
        if (!(s > 0.0) || !std::isfinite(s))
        {
            if (grad)
                grad->setZero(16);
            return std::numeric_limits<double>::infinity();
        }
        Eigen::Matrix4cd const rho = m / s;

        double const n_ref = data_.n_ref;
        double cost = 0.0;
        Eigen::Matrix4cd g = Eigen::Matrix4cd::Zero();
        for (int nu = 0; nu < 16; ++nu)
        {
            auto const& k = data_.kets[nu];
            double const prob = k.dot(rho * k).real();
            double const predicted = n_ref * prob;
            double const n = data_.counts[nu];
            double const denom = std::max(predicted, floor);
            double const diff = predicted - n;
            cost += diff * diff / (2.0 * denom);
            if (grad)
            {
                double const dc = predicted > floor
                                      ? (predicted * predicted - n * n) /
                                            (2.0 * predicted * predicted)
                                      : diff / floor;
                Eigen::Matrix4cd proj = k * k.adjoint();
                proj.diagonal().array() -= prob;
                g += (n_ref * dc) * proj;
            }
        }
        if (grad)
        {
            // dC = (2/s) Re Tr(G T^dag dT)
            Eigen::Matrix4cd const w = g * tm.adjoint();
            grad->resize(16);
            for (int i = 0; i < 4; ++i)
                (*grad)[i] = 2.0 / s * w(i, i).real();
            for (std::size_t q = 0; q < CholeskyParams::off_diagonal.size(); ++q)
            {
                auto [i, j] = CholeskyParams::off_diagonal[q];
                (*grad)[4 + 2 * q] = 2.0 / s * w(j, i).real();
                (*grad)[5 + 2 * q] = -2.0 / s * w(j, i).imag();
            }
        }
        return cost;
    }

  private:
    TomographyData data_;
};

enum class MleInit
{
    linear,
    identity
};

enum class MleOptimizer
{
    bfgs,
    nelder_mead
};

struct MleOptions
{
    MleInit init = MleInit::linear;
    MleOptimizer optimizer = MleOptimizer::bfgs;
    int max_evaluations = 100000;
    double gradient_tolerance = 1e-8;
    //! Weight of I/4 mixed into the linear seed so its Cholesky factor is full rank.
    double seed_mixing = 0.01;
};

/*!
 * Maximum-likelihood density matrix over the Cholesky parametrization.
 *
 * The fit runs from the seed, then restarts once from its own result with a
 * fresh curvature estimate; each BFGS pass ends with a Newton polish. The
 * result is physical by construction.
 */
inline TomographyResult mle_reconstruct(TomographyData const& data, MleOptions const& opts = {})
{
    MleCost const cost(data);

    Eigen::Matrix4cd seed = Eigen::Matrix4cd::Identity() / 4.0;
    if (opts.init == MleInit::linear)
    {
        Eigen::Matrix4cd const lin = linear_inversion(data).rho.matrix();
        seed = (1.0 - opts.seed_mixing) * lin +
               opts.seed_mixing * Eigen::Matrix4cd::Identity() / 4.0;
    }
    Eigen::VectorXd x = CholeskyParams::from_density(seed).t;
    x /= x.norm();

    auto objective = [&cost](Eigen::VectorXd const& t, Eigen::VectorXd* g) {
        return cost(t, g);
    };
    MinimizeOptions mopts;
    mopts.gradient_tolerance = opts.gradient_tolerance;

    double const initial_cost = cost(x, nullptr);
    int evaluations = 0;
    int iterations = 0;
    MinimizeResult best;
    for (int pass = 0; pass < 2; ++pass)
    {
        mopts.max_evaluations = std::max(1, opts.max_evaluations - evaluations);
        MinimizeResult r = opts.optimizer == MleOptimizer::bfgs
                               ? minimize_bfgs(objective, x, mopts)
                               : minimize_nelder_mead(objective, x, mopts);
        if (opts.optimizer == MleOptimizer::bfgs)
        {
            // The cost is scale invariant, so the gradient scales as 1/|t|;
            // polish at the unit-norm point that is reported.
            r.x /= r.x.norm();
            r = polish_newton(objective, std::move(r), mopts);
        }
        evaluations += r.evaluations;
        iterations += r.iterations;
        if (pass == 0 || r.value <= best.value)
            best = std::move(r);
        x = best.x / best.x.norm();
        if (evaluations >= opts.max_evaluations)
            break;
    }

    Eigen::VectorXd g(16);
    double const final_cost = cost(x, &g);
    CholeskyParams p;
    p.t = x;
    Eigen::Matrix4cd const rho = hermitian_part(p.density());

    TomographyResult r{DensityMatrix(rho, block_labels()), TomographyMethod::mle, rho, {}, {}};
    r.nll = final_cost;
    r.iterations = iterations;
    r.evaluations = evaluations;
    r.gradient_norm = g.norm();
    r.converged = opts.optimizer == MleOptimizer::bfgs ? r.gradient_norm < opts.gradient_tolerance
                                                       : best.converged;
    r.min_eigenvalue = detail::min_eigenvalue(rho);
    if (final_cost > initial_cost)
        throw NumericalError("mle_reconstruct: optimizer increased the cost");
    return r;
}

inline TomographyResult mle_reconstruct(std::vector<CountRecord> const& records,
                                        MleOptions const& opts = {})
{
    return mle_reconstruct(make_tomography_data(records), opts);
}

//! F(target, reconstruction) with the Bell state on the ell=+-1 block.
inline double fidelity_report(TomographyResult const& result, BellState target)
{
    return fidelity(bell_density(target), result.rho);
}

inline nlohmann::json to_json(TomographyResult const& r)
{
    nlohmann::json j;
    j["method"] = to_string(r.method);
    j["converged"] = r.converged;
    j["iterations"] = r.iterations;
    j["nll"] = r.nll ? nlohmann::json(*r.nll) : nlohmann::json(nullptr);
    j["fidelity_vs_target"] =
        r.fidelity_vs_target ? nlohmann::json(*r.fidelity_vs_target) : nlohmann::json(nullptr);
    j["physical"] = r.physical;
    j["rho"] = to_json(r.rho);
    return j;
}

}  // namespace spinorbit
