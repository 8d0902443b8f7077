#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "spinorbit/optics.hpp"

using namespace spinorbit;

namespace {

double overlap(Eigen::Vector2cd const& a, Eigen::Vector2cd const& b)
{
    return std::abs(a.normalized().dot(b.normalized()));
}

bool is_unitary(Eigen::Matrix2cd const& u, double tol)
{
    return (u.adjoint() * u - Eigen::Matrix2cd::Identity()).cwiseAbs().maxCoeff() < tol;
}

//! Max entry of |a - e^{i phi} b| for the best phase.
double matrix_distance_up_to_phase(Eigen::Matrix2cd const& a, Eigen::Matrix2cd const& b)
{
    Complex const tr = (b.adjoint() * a).trace();
    Complex const phase = tr / std::abs(tr);
    return (a - phase * b).cwiseAbs().maxCoeff();
}

}  // namespace

TEST(Waveplates, UnitaryForRandomAngles)
{
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> angle(-10.0, 10.0);
    for (int k = 0; k < 1000; ++k)
    {
        double const t = angle(rng);
        EXPECT_TRUE(is_unitary(hwp(t).jones, 1e-12));
        EXPECT_TRUE(is_unitary(qwp(t).jones, 1e-12));
        // two half-wave plates at the same angle cancel
        EXPECT_LT(matrix_distance_up_to_phase(hwp(t).jones * hwp(t).jones,
                                              Eigen::Matrix2cd::Identity()),
                  1e-12);
        // two quarter-wave plates make a half-wave plate
        EXPECT_LT(matrix_distance_up_to_phase(qwp(t).jones * qwp(t).jones, hwp(t).jones), 1e-12);
    }
}

TEST(Waveplates, Examples)
{
    EXPECT_NEAR(overlap(hwp(0.0)(oracle::h()), oracle::h()), 1.0, 1e-12);
    EXPECT_NEAR(overlap(qwp(0.0)(oracle::h()), oracle::h()), 1.0, 1e-12);
    // quarter-wave plate at 45 degrees turns H into a circular state
    auto const out = qwp(std::numbers::pi / 4)(oracle::h());
    double const best = std::max(overlap(out, oracle::sigma_plus()), overlap(out, oracle::sigma_minus()));
    EXPECT_NEAR(best, 1.0, 1e-12);
    // clockwise-positive angles: 22.5 degrees rotates H onto the antidiagonal
    Eigen::Vector2cd const a = Eigen::Vector2cd(1.0, -1.0) / std::sqrt(2.0);
    EXPECT_NEAR(overlap(hwp(std::numbers::pi / 8)(oracle::h()), a), 1.0, 1e-12);
}

TEST(Waveplates, GeometricPhaseLawOnGrid)
{
    for (int k = 0; k < 360; ++k)
    {
        double const t = 2.0 * std::numbers::pi * k / 360.0;
        Eigen::Vector2cd const plus_out = hwp(t)(oracle::sigma_plus());
        Eigen::Vector2cd const minus_out = hwp(t)(oracle::sigma_minus());
        EXPECT_LT((plus_out - std::exp(-2.0 * oracle::i1 * t) * oracle::sigma_minus()).cwiseAbs().maxCoeff(),
                  1e-12);
        EXPECT_LT((minus_out - std::exp(2.0 * oracle::i1 * t) * oracle::sigma_plus()).cwiseAbs().maxCoeff(),
                  1e-12);
    }
}

TEST(Polarizer, RankOneProjector)
{
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> angle(-4.0, 4.0);
    for (int k = 0; k < 100; ++k)
    {
        Eigen::Matrix2cd const p = polarizer(angle(rng)).jones;
        EXPECT_LT((p * p - p).cwiseAbs().maxCoeff(), 1e-12);
        EXPECT_LT((p.adjoint() - p).cwiseAbs().maxCoeff(), 1e-12);
        EXPECT_NEAR(p.trace().real(), 1.0, 1e-12);
    }
    EXPECT_NEAR(std::abs(polarizer(0.0).jones(0, 0)), 1.0, 1e-15);
}

TEST(AnalyzerChain, TableRowsByAngle)
{
    EXPECT_NEAR(overlap(polarization_projector_from_waveplates(0, 0).linear(), oracle::h()), 1.0, 1e-9);
    EXPECT_NEAR(overlap(polarization_projector_from_waveplates(0, 45).linear(), oracle::v()), 1.0, 1e-9);
    EXPECT_NEAR(overlap(polarization_projector_from_waveplates(45, 22.5).linear(), oracle::d()), 1.0,
                1e-9);
    EXPECT_NEAR(overlap(polarization_projector_from_waveplates(0, 22.5).linear(), oracle::sigma_plus()),
                1.0, 1e-9);
}

TEST(Gpm, SigmaPlusZeroShiftsUp)
{
    auto const out = gpm_unitary({}, PureState::basis(Spin::plus, 0));
    EXPECT_NEAR(overlap_modulus(out, PureState::basis(Spin::minus, 1)), 1.0, 1e-15);
}

TEST(Gpm, HorizontalAndVerticalInputs)
{
    double const s = 1.0 / std::sqrt(2.0);
    auto const h_out = gpm_unitary({}, tensor(SpinKet::horizontal(), OamKet::basis(0)));
    EXPECT_NEAR(std::abs(h_out.amplitude(Spin::minus, 1) - s), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(h_out.amplitude(Spin::plus, -1) - s), 0.0, 1e-15);

    auto const v_out = gpm_unitary({}, tensor(SpinKet::vertical(), OamKet::basis(0)));
    Complex const c = 1.0 / (std::sqrt(2.0) * I);
    EXPECT_NEAR(std::abs(v_out.amplitude(Spin::minus, 1) - c), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(v_out.amplitude(Spin::plus, -1) - (-c)), 0.0, 1e-15);

    GpmSpec flipped;
    flipped.flipped = true;
    auto const f_out = gpm_unitary(flipped, tensor(SpinKet::horizontal(), OamKet::basis(0)));
    EXPECT_NEAR(std::abs(f_out.amplitude(Spin::minus, -1) - s), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(f_out.amplitude(Spin::plus, 1) - s), 0.0, 1e-15);
}

TEST(Gpm, NormPreservingInvolution)
{
    std::mt19937_64 rng(4);
    for (bool flipped : {false, true})
    {
        GpmSpec spec;
        spec.flipped = flipped;
        for (int trial = 0; trial < 100; ++trial)
        {
            // populate only |ell| <= 1 so a shift of 1 fits in L = 2
            CVector a = CVector::Zero(10);
            Eigen::VectorXcd r = oracle::random_ket(6, rng);
            int k = 0;
            for (Spin sp : {Spin::plus, Spin::minus})
                for (int ell = -1; ell <= 1; ++ell)
                    a[PureState::index(sp, ell, 2)] = r[k++];
            PureState const psi(2, a);
            auto const once = gpm_unitary(spec, psi);
            EXPECT_NEAR(once.amplitudes().squaredNorm(), 1.0, 1e-12);
            auto const twice = gpm_unitary(spec, once);
            EXPECT_LT((twice.amplitudes() - psi.amplitudes()).cwiseAbs().maxCoeff(), 1e-12);
        }
    }
}

TEST(Gpm, FlippedAfterUnflippedShiftsByTwo)
{
    GpmSpec flipped;
    flipped.flipped = true;
    auto const out = gpm_unitary(flipped, gpm_unitary({}, PureState::basis(Spin::plus, 0, 2)));
    EXPECT_NEAR(overlap_modulus(out, PureState::basis(Spin::plus, 2, 2)), 1.0, 1e-15);
}

TEST(Gpm, TruncationOverflowThrows)
{
    EXPECT_THROW(gpm_unitary({}, PureState::basis(Spin::plus, 1)), InvalidArgument);
    EXPECT_THROW(gpm_channel({}, density_from_pure(PureState::basis(Spin::minus, -1))),
                 InvalidArgument);
    GpmSpec bad;
    bad.efficiency = 1.5;
    EXPECT_THROW(gpm_unitary(bad, PureState::basis(Spin::plus, 0)), InvalidArgument);
}

TEST(GpmChannel, LimitsAndPostSelection)
{
    auto const in = density_from_pure(tensor(SpinKet::horizontal(), OamKet::basis(0)));
    GpmSpec spec;
    spec.efficiency = 1.0;
    auto const full = gpm_channel(spec, in);
    auto const unitary = density_from_pure(gpm_unitary(spec, tensor(SpinKet::horizontal(), OamKet::basis(0))));
    EXPECT_LT((full.matrix() - unitary.matrix()).cwiseAbs().maxCoeff(), 1e-15);

    spec.efficiency = 0.0;
    EXPECT_LT((gpm_channel(spec, in).matrix() - in.matrix()).cwiseAbs().maxCoeff(), 1e-15);

    spec.efficiency = 0.72;
    auto const out = gpm_channel(spec, in);
    double block = 0.0;
    double zero = 0.0;
    auto const& labels = out.labels();
    for (std::size_t k = 0; k < labels.size(); ++k)
        (labels[k].ell == 0 ? zero : block) += out(k, k).real();
    EXPECT_NEAR(block, 0.72, 1e-12);
    EXPECT_NEAR(zero, 0.28, 1e-12);
    auto const post = restrict_to_block(out, block_labels());
    EXPECT_GE(fidelity(post, bell_density(BellState::psi_plus)), 1.0 - 1e-10);
}

TEST(GpmChannel, TraceAndPositivityPreserving)
{
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial)
    {
        // random state supported on |ell| <= 1 inside L = 2
        Eigen::MatrixXcd small = oracle::random_density(6, 1 + trial % 6, rng);
        CMatrix rho = CMatrix::Zero(10, 10);
        std::vector<Eigen::Index> idx;
        for (Spin sp : {Spin::plus, Spin::minus})
            for (int ell = -1; ell <= 1; ++ell)
                idx.push_back(PureState::index(sp, ell, 2));
        for (int i = 0; i < 6; ++i)
            for (int j = 0; j < 6; ++j)
                rho(idx[i], idx[j]) = small(i, j);
        GpmSpec spec;
        spec.flipped = trial % 2;
        spec.efficiency = u(rng);
        auto const out = gpm_channel(spec, DensityMatrix(rho, PureState::product_labels(2)));
        EXPECT_NEAR(out.matrix().trace().real(), 1.0, 1e-10);
        Eigen::SelfAdjointEigenSolver<CMatrix> es(out.matrix());
        EXPECT_GE(es.eigenvalues().minCoeff(), -1e-12);
    }
}

TEST(Slm, ProjectionKets)
{
    auto const up = slm_projection_ket(SlmProfile::ell_plus_one);
    EXPECT_EQ(up.amplitude(1), Complex(1.0));
    auto const plus = slm_projection_ket(SlmProfile::plus);
    EXPECT_NEAR(plus.amplitudes().squaredNorm(), 1.0, 1e-15);
    EXPECT_NEAR(plus.amplitude(1).real(), 1.0 / std::sqrt(2.0), 1e-15);
    auto const r = slm_projection_ket(SlmProfile::r);
    Complex const ip = r.amplitudes().dot(plus.amplitudes());  // <r|plus>
    EXPECT_NEAR(std::abs(ip - Complex(0.5, -0.5)), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(ip), 1.0 / std::sqrt(2.0), 1e-15);
}
