#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "optics.hpp"
#include "quantum.hpp"

namespace spinorbit {

inline constexpr int num_settings = 17;  //!< intensity row plus 16 projections

//---------------------------------------------------------------------------//
//! One row of the tomography table. Row 0 (intensity) carries no projector.
struct MeasurementSetting
{
    int id = 0;
    std::string label;
    std::optional<SpinKet> pol;
    std::optional<OamKet> oam;
    std::optional<double> qwp_deg;
    std::optional<double> hwp_deg;
    std::optional<SlmProfile> slm;

    bool is_projection() const { return pol.has_value() && oam.has_value(); }
};

namespace detail {
enum class PolLabel
{
    h,
    v,
    sigma_plus,
    d
};

struct PolRow
{
    PolLabel label;
    double qwp_deg;
    double hwp_deg;
};

inline SpinKet pol_ket(PolLabel p)
{
    switch (p)
    {
        case PolLabel::h: return SpinKet::horizontal();
        case PolLabel::v: return SpinKet::vertical();
        case PolLabel::sigma_plus: return SpinKet::sigma_plus();
        case PolLabel::d: return SpinKet::diagonal();
    }
    return SpinKet::horizontal();
}

inline char const* pol_name(PolLabel p)
{
    switch (p)
    {
        case PolLabel::h: return "H";
        case PolLabel::v: return "V";
        case PolLabel::sigma_plus: return "σ+";
        case PolLabel::d: return "D";
    }
    return "?";
}
}  // namespace detail

/*!
 * The 17-row tomography table: intensity, then four OAM groups
 * (ell=1, ell=-1, |+>, |r>) each scanning the polarization analyzer through
 * H, V, sigma+, D (alternate groups in reverse order).
 */
inline std::vector<MeasurementSetting> standard_measurement_set()
{
    using detail::PolLabel;
    using detail::PolRow;
    static constexpr PolRow forward[] = {{PolLabel::h, 0.0, 0.0},
                                         {PolLabel::v, 0.0, 45.0},
                                         {PolLabel::sigma_plus, 0.0, 22.5},
                                         {PolLabel::d, 45.0, 22.5}};
    static constexpr SlmProfile groups[] = {SlmProfile::ell_plus_one, SlmProfile::ell_minus_one,
                                            SlmProfile::plus, SlmProfile::r};

    std::vector<MeasurementSetting> out;
    out.push_back({0, "Intensity", std::nullopt, std::nullopt, std::nullopt, std::nullopt,
                   std::nullopt});
    int id = 1;
    for (int g = 0; g < 4; ++g)
    {
        for (int k = 0; k < 4; ++k)
        {
            PolRow const& row = forward[g % 2 == 0 ? k : 3 - k];
            MeasurementSetting s;
            s.id = id++;
            s.label = std::string(detail::pol_name(row.label)) + " ⊗ " +
                      std::string(to_string(groups[g]));
            s.pol = detail::pol_ket(row.label);
            s.oam = slm_projection_ket(groups[g]);
            s.qwp_deg = row.qwp_deg;
            s.hwp_deg = row.hwp_deg;
            s.slm = groups[g];
            out.push_back(std::move(s));
        }
    }
    return out;
}

//! Projector ket of a setting expressed in the given basis.
inline CVector projector_ket(MeasurementSetting const& setting, BasisLabels const& labels)
{
    if (!setting.is_projection())
        throw InvalidArgument("setting " + std::to_string(setting.id) +
                              " (intensity) has no projector");
    CVector k(static_cast<Eigen::Index>(labels.size()));
    for (std::size_t i = 0; i < labels.size(); ++i)
    {
        auto const& l = labels[i];
        if (l.spin != 1 && l.spin != -1)
            throw InvalidArgument("projector_ket: basis lacks a spin factor");
        k[static_cast<Eigen::Index>(i)] =
            (*setting.pol)[l.spin > 0 ? Spin::plus : Spin::minus] * setting.oam->amplitude(l.ell);
    }
    return k;
}

//! p = <pol (x) oam| rho |pol (x) oam>, clamped to [0, 1].
inline double expected_probability(DensityMatrix const& rho, MeasurementSetting const& setting)
{
    CVector const k = projector_ket(setting, rho.labels());
    double const p = k.dot(rho.matrix() * k).real();
    return std::clamp(p, 0.0, 1.0);
}

//---------------------------------------------------------------------------//
struct CountRecord
{
    int setting_id = 0;
    std::string label;
    std::int64_t counts = 0;
    double duration_s = 10.0;

    friend bool operator==(CountRecord const&, CountRecord const&) = default;
};

enum class NoiseModel
{
    none,
    poisson
};

inline NoiseModel parse_noise_model(std::string_view s)
{
    if (s == "none")
        return NoiseModel::none;
    if (s == "poisson")
        return NoiseModel::poisson;
    throw InvalidArgument("unknown noise model '" + std::string(s) + "'");
}

struct ExperimentConfig
{
    BellState target = BellState::psi_plus;
    double n_total = 1000.0;  //!< expected unprojected coincidences per window
    double efficiency = 0.72;
    NoiseModel noise = NoiseModel::poisson;
    std::uint64_t rng_seed = 0;
    bool post_select = true;
    double duration_s = 10.0;
    int truncation = 1;

    void validate() const
    {
        if (!(n_total > 0.0) || !std::isfinite(n_total))
            throw InvalidArgument("ExperimentConfig: n_total must be positive");
        if (!(efficiency >= 0.0 && efficiency <= 1.0))
            throw InvalidArgument("ExperimentConfig: efficiency must lie in [0, 1]");
        if (!(duration_s > 0.0))
            throw InvalidArgument("ExperimentConfig: duration must be positive");
        if (truncation < 1 || truncation > max_oam_truncation)
            throw InvalidArgument("ExperimentConfig: OAM truncation must lie in [1, 8]");
    }
};

enum class SourcePolarization
{
    h,
    v
};

//! Heralded signal photon |pol>|ell=0>.
inline PureState prepare_source_state(SourcePolarization pol, int truncation = 1)
{
    SpinKet const p = pol == SourcePolarization::h ? SpinKet::horizontal() : SpinKet::vertical();
    return tensor(p, OamKet::basis(0, truncation));
}

/*!
 * Coincidence counts for all 17 settings, each drawn independently.
 *
 * Row 0 has mean n_total; row k has mean n_total * p_k. With noise=none the
 * means are rounded to the nearest integer.
 */
inline std::vector<CountRecord> simulate_counts(DensityMatrix const& rho,
                                                ExperimentConfig const& config)
{
    config.validate();
    std::mt19937_64 rng(config.rng_seed);
    auto draw = [&](double mean) -> std::int64_t {
        if (config.noise == NoiseModel::none)
            return std::llround(mean);
        if (!(mean > 0.0))
            return 0;
        return std::poisson_distribution<std::int64_t>(mean)(rng);
    };

    std::vector<CountRecord> out;
    for (auto const& s : standard_measurement_set())
    {
        double const p = s.is_projection() ? expected_probability(rho, s) : 1.0;
        out.push_back({s.id, s.label, draw(config.n_total * p), config.duration_s});
    }
    return out;
}

inline std::vector<CountRecord> simulate_counts(PureState const& psi,
                                                ExperimentConfig const& config)
{
    return simulate_counts(density_from_pure(psi), config);
}

//---------------------------------------------------------------------------//
struct BellRun
{
    PureState ideal_state;
    DensityMatrix measured_state;  //!< state the counts are drawn from
    std::vector<CountRecord> counts;
};

//! Source polarization and metasurface orientation producing each Bell state.
inline std::pair<SourcePolarization, bool> bell_recipe(BellState b)
{
    switch (b)
    {
        case BellState::psi_plus: return {SourcePolarization::h, false};
        case BellState::psi_minus: return {SourcePolarization::v, false};
        case BellState::phi_plus: return {SourcePolarization::h, true};
        case BellState::phi_minus: return {SourcePolarization::v, true};
    }
    return {SourcePolarization::h, false};
}

/*!
 * Source -> metasurface channel -> optional ell=+-1 post-selection -> counts.
 */
inline BellRun run_bell_pipeline(ExperimentConfig const& config)
{
    config.validate();
    auto const [pol, flipped] = bell_recipe(config.target);
    GpmSpec const gpm{1, flipped, config.efficiency};
    DensityMatrix rho =
        gpm_channel(gpm, density_from_pure(prepare_source_state(pol, config.truncation)));
    if (config.post_select)
        rho = restrict_to_block(rho, block_labels());
    auto counts = simulate_counts(rho, config);
    return {bell_state(config.target, config.truncation), std::move(rho), std::move(counts)};
}

//---------------------------------------------------------------------------//
// Counts CSV: setting_id,label,counts,duration_s
//---------------------------------------------------------------------------//

inline constexpr char const* counts_csv_header = "setting_id,label,counts,duration_s";

inline std::string format_double(double v)
{
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline void write_counts_csv(std::ostream& os, std::vector<CountRecord> const& records)
{
    os << counts_csv_header << '\n';
    for (auto const& r : records)
        os << r.setting_id << ',' << r.label << ',' << r.counts << ','
           << format_double(r.duration_s) << '\n';
}

namespace detail {
inline std::vector<std::string> split_csv_line(std::string const& line)
{
    std::vector<std::string> fields;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ','))
        fields.push_back(field);
    if (!line.empty() && line.back() == ',')
        fields.emplace_back();
    return fields;
}

template<class T>
bool parse_number(std::string const& s, T& out)
{
    auto const* first = s.data();
    auto const* last = s.data() + s.size();
    auto res = std::from_chars(first, last, out);
    return res.ec == std::errc{} && res.ptr == last;
}
}  // namespace detail

/*!
 * Parse and validate a counts file. Returns the 17 records ordered by id.
 *
 * Throws ParseError naming the offending line, or InvalidArgument naming a
 * missing or duplicated setting.
 */
inline std::vector<CountRecord> read_counts_csv(std::istream& is)
{
    std::string line;
    int lineno = 0;
    if (!std::getline(is, line))
        throw ParseError("counts CSV: empty input", 1);
    ++lineno;
    if (!line.empty() && line.back() == '\r')
        line.pop_back();
    if (line != counts_csv_header)
        throw ParseError("counts CSV line 1: expected header '" +
                             std::string(counts_csv_header) + "'",
                         1);

    std::vector<std::optional<CountRecord>> by_id(num_settings);
    while (std::getline(is, line))
    {
        ++lineno;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty())
            continue;
        auto const where = "counts CSV line " + std::to_string(lineno) + ": ";
        auto const f = detail::split_csv_line(line);
        if (f.size() != 4)
            throw ParseError(where + "expected 4 fields", lineno);
        CountRecord r;
        if (!detail::parse_number(f[0], r.setting_id) || r.setting_id < 0 ||
            r.setting_id >= num_settings)
            throw ParseError(where + "setting_id must be an integer in [0, 16]", lineno);
        r.label = f[1];
        if (!detail::parse_number(f[2], r.counts) || r.counts < 0)
            throw ParseError(where + "counts must be a non-negative integer (setting " +
                                 std::to_string(r.setting_id) + ")",
                             lineno);
        if (!detail::parse_number(f[3], r.duration_s) || !(r.duration_s > 0.0) ||
            !std::isfinite(r.duration_s))
            throw ParseError(where + "duration_s must be positive (setting " +
                                 std::to_string(r.setting_id) + ")",
                             lineno);
        if (by_id[r.setting_id])
            throw ParseError(where + "duplicate setting " + std::to_string(r.setting_id),
                             lineno);
        by_id[r.setting_id] = std::move(r);
    }

    std::vector<CountRecord> out;
    for (int id = 0; id < num_settings; ++id)
    {
        if (!by_id[id])
            throw InvalidArgument("counts CSV: missing setting " + std::to_string(id));
        out.push_back(std::move(*by_id[id]));
    }
    return out;
}

}  // namespace spinorbit
