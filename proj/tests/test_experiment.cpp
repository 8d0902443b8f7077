#include <cmath>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "spinorbit/experiment.hpp"

using namespace spinorbit;

namespace {

struct TableRow
{
    int id;
    double qwp;
    double hwp;
    Eigen::Vector2cd pol;  // (H, V)
    Eigen::Vector3cd oam;  // (ell = -1, 0, +1)
};

//! The QST measurement table, transcribed independently of the library.
std::vector<TableRow> table_one()
{
    using oracle::d;
    using oracle::h;
    using oracle::sigma_plus;
    using oracle::v;
    double const s = 1.0 / std::sqrt(2.0);
    Eigen::Vector3cd const up(0.0, 0.0, 1.0);
    Eigen::Vector3cd const down(1.0, 0.0, 0.0);
    Eigen::Vector3cd const plus(s, 0.0, s);
    Eigen::Vector3cd const r(s * oracle::i1, 0.0, s);
    return {{1, 0, 0, h(), up},          {2, 0, 45, v(), up},
            {3, 0, 22.5, sigma_plus(), up}, {4, 45, 22.5, d(), up},
            {5, 45, 22.5, d(), down},     {6, 0, 22.5, sigma_plus(), down},
            {7, 0, 45, v(), down},        {8, 0, 0, h(), down},
            {9, 0, 0, h(), plus},         {10, 0, 45, v(), plus},
            {11, 0, 22.5, sigma_plus(), plus}, {12, 45, 22.5, d(), plus},
            {13, 45, 22.5, d(), r},       {14, 0, 22.5, sigma_plus(), r},
            {15, 0, 45, v(), r},          {16, 0, 0, h(), r}};
}

ExperimentConfig noiseless(BellState b, double n = 1000.0)
{
    ExperimentConfig c;
    c.target = b;
    c.n_total = n;
    c.noise = NoiseModel::none;
    return c;
}

}  // namespace

TEST(MeasurementSet, MatchesTable)
{
    auto const set = standard_measurement_set();
    ASSERT_EQ(set.size(), 17u);
    EXPECT_EQ(set[0].label, "Intensity");
    EXPECT_FALSE(set[0].is_projection());
    EXPECT_EQ(set[3].label, "σ+ ⊗ ℓ=1");
    EXPECT_EQ(set[13].label, "D ⊗ r");
    for (auto const& row : table_one())
    {
        auto const& s = set[row.id];
        EXPECT_EQ(s.id, row.id);
        EXPECT_EQ(*s.qwp_deg, row.qwp) << row.id;
        EXPECT_EQ(*s.hwp_deg, row.hwp) << row.id;
        EXPECT_NEAR(std::abs(s.pol->linear().dot(row.pol)), 1.0, 1e-12) << row.id;
        // OamKet amplitudes are indexed ell = -1, 0, +1 at L = 1
        EXPECT_NEAR(std::abs(s.oam->amplitudes().dot(row.oam)), 1.0, 1e-12) << row.id;
    }
}

TEST(MeasurementSet, WaveplateAnglesReproduceLabels)
{
    for (auto const& row : table_one())
    {
        auto const p = polarization_projector_from_waveplates(row.qwp, row.hwp);
        EXPECT_GE(std::abs(p.linear().dot(row.pol)), 1.0 - 1e-9) << "row " << row.id;
    }
}

TEST(MeasurementSet, ProjectorsAreTomographicallyComplete)
{
    auto const set = standard_measurement_set();
    auto const labels = block_labels();
    std::vector<Eigen::Vector4cd> kets;
    for (int k = 1; k <= 16; ++k)
        kets.push_back(projector_ket(set[k], labels));
    // Gram matrix of the rank-1 projectors: Tr(P_i P_j) = |<k_i|k_j>|^2
    Eigen::Matrix<double, 16, 16> gram;
    for (int i = 0; i < 16; ++i)
        for (int j = 0; j < 16; ++j)
            gram(i, j) = std::norm(kets[i].dot(kets[j]));
    double const det = gram.determinant();
    EXPECT_GT(std::abs(det), 1e-12);
    Eigen::JacobiSVD<Eigen::Matrix<double, 16, 16>> svd(gram);
    double const cond = svd.singularValues()(0) / svd.singularValues()(15);
    EXPECT_TRUE(std::isfinite(cond));
    EXPECT_LT(cond, 1e6);
}

TEST(SourceState, ZeroAngularMomentum)
{
    for (auto pol : {SourcePolarization::h, SourcePolarization::v})
    {
        auto const psi = prepare_source_state(pol);
        auto const j = angular_momentum_expectations(psi);
        EXPECT_NEAR(j.spin, 0.0, 1e-15);
        EXPECT_NEAR(j.orbital, 0.0, 1e-15);
    }
    auto const h = prepare_source_state(SourcePolarization::h);
    EXPECT_NEAR(overlap_modulus(h, tensor(SpinKet::horizontal(), OamKet::basis(0))), 1.0, 1e-15);
}

TEST(ExpectedProbability, Examples)
{
    auto const set = standard_measurement_set();
    auto const psi = bell_density(BellState::psi_plus);
    EXPECT_NEAR(expected_probability(psi, set[1]), 0.25, 1e-12);
    EXPECT_NEAR(expected_probability(psi, set[3]), 0.0, 1e-12);
    auto const mixed = DensityMatrix::maximally_mixed(block_labels());
    for (int k = 1; k <= 16; ++k)
        EXPECT_NEAR(expected_probability(mixed, set[k]), 0.25, 1e-12);
    EXPECT_THROW(expected_probability(psi, set[0]), InvalidArgument);
}

TEST(ExpectedProbability, MatchesDirectMatrixArithmetic)
{
    // independent 4x4 evaluation in the (s+,-1), (s+,+1), (s-,-1), (s-,+1) basis
    auto const set = standard_measurement_set();
    std::mt19937_64 rng(9);
    auto const rows = table_one();
    for (int trial = 0; trial < 50; ++trial)
    {
        Eigen::MatrixXcd rho = oracle::random_density(4, 1 + trial % 4, rng);
        DensityMatrix const dm(rho, block_labels());
        for (auto const& row : rows)
        {
            // convert the (H, V) polarization to (s+, s-) amplitudes
            Complex const a_plus = oracle::sigma_plus().dot(row.pol);
            Complex const a_minus = oracle::sigma_minus().dot(row.pol);
            Eigen::Vector4cd k(a_plus * row.oam[0], a_plus * row.oam[2], a_minus * row.oam[0],
                               a_minus * row.oam[2]);
            double const p = k.dot(rho * k).real();
            double const got = expected_probability(dm, set[row.id]);
            EXPECT_NEAR(got, p, 1e-12);
            EXPECT_GE(got, 0.0);
            EXPECT_LE(got, 1.0);
        }
    }
}

TEST(ExpectedProbability, CompleteBasisSumsToOne)
{
    auto const set = standard_measurement_set();
    std::mt19937_64 rng(10);
    for (int trial = 0; trial < 100; ++trial)
    {
        DensityMatrix const rho(oracle::random_density(4, 1 + trial % 4, rng), block_labels());
        double const sum = expected_probability(rho, set[1]) + expected_probability(rho, set[2]) +
                           expected_probability(rho, set[7]) + expected_probability(rho, set[8]);
        EXPECT_NEAR(sum, 1.0, 1e-10);
    }
}

TEST(SimulateCounts, NoiselessExamples)
{
    auto const counts = simulate_counts(bell_state(BellState::psi_plus), noiseless(BellState::psi_plus));
    ASSERT_EQ(counts.size(), 17u);
    EXPECT_EQ(counts[0].counts, 1000);
    EXPECT_EQ(counts[1].counts, 250);
    EXPECT_EQ(counts[3].counts, 0);
    for (auto const& r : counts)
        EXPECT_EQ(r.duration_s, 10.0);
}

TEST(SimulateCounts, DeterministicPerSeed)
{
    ExperimentConfig c;
    c.rng_seed = 42;
    auto const a = run_bell_pipeline(c).counts;
    auto const b = run_bell_pipeline(c).counts;
    EXPECT_EQ(a, b);
    c.rng_seed = 43;
    EXPECT_NE(run_bell_pipeline(c).counts, a);
}

TEST(SimulateCounts, PoissonConvergesWithinFiveSigma)
{
    auto const set = standard_measurement_set();
    ExperimentConfig c;
    c.n_total = 1e6;
    c.rng_seed = 5;
    auto const rho = bell_density(BellState::phi_minus);
    auto const counts = simulate_counts(rho, c);
    for (int k = 0; k < 17; ++k)
    {
        double const mean = k == 0 ? c.n_total : c.n_total * expected_probability(rho, set[k]);
        double const sigma = std::sqrt(std::max(mean, 1.0));
        EXPECT_LE(std::abs(counts[k].counts - mean), 5.0 * sigma) << "setting " << k;
    }
}

TEST(SimulateCounts, RejectsInvalidConfig)
{
    ExperimentConfig c;
    c.n_total = 0.0;
    EXPECT_THROW(run_bell_pipeline(c), InvalidArgument);
    c.n_total = 10.0;
    c.efficiency = -0.1;
    EXPECT_THROW(run_bell_pipeline(c), InvalidArgument);
    EXPECT_THROW(parse_noise_model("gauss"), InvalidArgument);
}

TEST(Pipeline, RecipesProduceTargets)
{
    for (BellState b : all_bell_states)
    {
        ExperimentConfig c = noiseless(b);
        c.efficiency = 1.0;
        auto const run = run_bell_pipeline(c);
        EXPECT_NEAR(fidelity(run.measured_state, bell_density(b)), 1.0, 1e-9);
    }
    EXPECT_TRUE(bell_recipe(BellState::phi_plus).second);
    EXPECT_FALSE(bell_recipe(BellState::psi_minus).second);
}

TEST(Pipeline, EfficiencyIsRemovedByPostSelection)
{
    auto const set = standard_measurement_set();
    for (BellState b : all_bell_states)
    {
        ExperimentConfig lossy = noiseless(b);
        ExperimentConfig ideal = noiseless(b);
        ideal.efficiency = 1.0;
        auto const a = run_bell_pipeline(lossy).measured_state;
        auto const c = run_bell_pipeline(ideal).measured_state;
        for (int k = 1; k <= 16; ++k)
            EXPECT_NEAR(expected_probability(a, set[k]), expected_probability(c, set[k]), 1e-10);
    }
}

TEST(Pipeline, WithoutPostSelectionKeepsZeroOrder)
{
    ExperimentConfig c = noiseless(BellState::psi_plus);
    c.post_select = false;
    auto const run = run_bell_pipeline(c);
    EXPECT_EQ(run.measured_state.dim(), 6);
    // only 72% of the light reaches the ell = +-1 projections
    EXPECT_EQ(run.counts[1].counts, 180);
}

TEST(CountsCsv, RoundTrip)
{
    ExperimentConfig c;
    c.rng_seed = 3;
    auto const counts = run_bell_pipeline(c).counts;
    std::stringstream ss;
    write_counts_csv(ss, counts);
    EXPECT_EQ(ss.str().substr(0, ss.str().find('\n')), counts_csv_header);
    auto const back = read_counts_csv(ss);
    EXPECT_EQ(back, counts);
}

TEST(CountsCsv, ErrorsNameTheOffendingRow)
{
    auto expect_error = [](std::string const& text, std::string const& fragment) {
        std::istringstream is(text);
        try
        {
            read_counts_csv(is);
            ADD_FAILURE() << "accepted: " << text;
        }
        catch (InvalidArgument const& e)
        {
            EXPECT_NE(std::string(e.what()).find(fragment), std::string::npos) << e.what();
        }
    };
    std::string const header = std::string(counts_csv_header) + "\n";
    std::string body;
    for (int k = 1; k < 17; ++k)
        body += std::to_string(k) + ",x," + std::to_string(10 * k) + ",10\n";
    expect_error(header + body, "setting 0");
    expect_error("id,label\n", "header");
    expect_error(header + "0,Intensity,1000,10\n1,x,-5,10\n", "line 3");
    expect_error(header + "0,Intensity,abc,10\n", "line 2");
    expect_error(header + "0,Intensity,1000\n", "line 2");
    expect_error(header + "0,Intensity,1000,0\n", "line 2");
    expect_error(header + "0,Intensity,1000,10\n0,Intensity,1000,10\n", "line 3");
    expect_error(header + "0,Intensity,1000,10\n17,x,1,10\n", "line 3");
}
