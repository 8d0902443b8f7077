#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <istream>
#include <numbers>
#include <ostream>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "error.hpp"
#include "fft.hpp"

namespace spinorbit {

inline constexpr double two_pi = 2.0 * std::numbers::pi;

//! Wrap to [0, 2pi).
inline double wrap_phase(double phi)
{
    double w = std::fmod(phi, two_pi);
    if (w < 0.0)
        w += two_pi;
    return w >= two_pi ? 0.0 : w;
}

//! Wrap to [0, pi).
inline double wrap_orientation(double theta)
{
    double w = std::fmod(theta, std::numbers::pi);
    if (w < 0.0)
        w += std::numbers::pi;
    return w >= std::numbers::pi ? 0.0 : w;
}

//---------------------------------------------------------------------------//
/*!
 * Nanoantenna geometry. Lengths in nanometres.
 *
 * Each block_size square holds parallel rods at rod_pitch; the rod length is
 * rod_length_fraction * block_size.
 */
struct LayoutSpec
{
    int winding = 1;
    double aperture_diameter_nm = 200000.0;
    double block_size_nm = 700.0;
    double rod_width_nm = 105.0;
    double rod_depth_nm = 300.0;
    double rod_pitch_nm = 233.0;
    double rod_length_fraction = 0.9;

    double aperture_radius_nm() const { return 0.5 * aperture_diameter_nm; }
    double rod_length_nm() const { return rod_length_fraction * block_size_nm; }

    void validate() const
    {
        for (double v : {aperture_diameter_nm, block_size_nm, rod_width_nm, rod_depth_nm,
                         rod_pitch_nm, rod_length_fraction})
            if (!(v > 0.0) || !std::isfinite(v))
                throw InvalidArgument("LayoutSpec: all lengths must be positive");
        if (block_size_nm < rod_pitch_nm)
            throw InvalidArgument("LayoutSpec: rod pitch exceeds block size");
        if (rod_width_nm > rod_pitch_nm)
            throw InvalidArgument("LayoutSpec: rod width exceeds rod pitch");
        if (rod_length_fraction > 1.0)
            throw InvalidArgument("LayoutSpec: rods longer than the block");
        if (aperture_diameter_nm < 10.0 * block_size_nm)
            throw InvalidArgument("LayoutSpec: aperture must span many blocks");
    }
};

/*!
 * Antenna orientation theta = winding * atan2(y, x) / 2, reported in [0, pi).
 *
 * The azimuth is singular at the origin; callers sample on grids offset by
 * half a pixel.
 */
inline double orientation_field(double x, double y, int winding)
{
    if (x == 0.0 && y == 0.0)
        throw InvalidArgument("orientation_field: azimuth undefined at the origin");
    return wrap_orientation(0.5 * winding * std::atan2(y, x));
}

struct Rod
{
    double x_nm = 0.0;
    double y_nm = 0.0;
    double angle = 0.0;  //!< rod axis angle in [0, pi), counterclockwise from +x
};

namespace detail {
//! True if every corner of every rod in the block lies inside it.
inline bool rods_fit(LayoutSpec const& spec, double angle, int count)
{
    double const half_block = 0.5 * spec.block_size_nm;
    double const c = std::cos(angle);
    double const s = std::sin(angle);
    double const hl = 0.5 * spec.rod_length_nm();
    double const hw = 0.5 * spec.rod_width_nm;
    double const ex = hl * std::abs(c) + hw * std::abs(s);
    double const ey = hl * std::abs(s) + hw * std::abs(c);
    double const off_max = 0.5 * (count - 1) * spec.rod_pitch_nm;
    // Offsets run along the rod normal (-s, c).
    return off_max * std::abs(s) + ex <= half_block + 1e-9 &&
           off_max * std::abs(c) + ey <= half_block + 1e-9;
}
}  // namespace detail

/*!
 * Rods per block at a given orientation: floor(block / pitch), reduced until
 * the rotated rods stay inside the block.
 */
inline int rods_per_block(LayoutSpec const& spec, double angle)
{
    int n = static_cast<int>(std::floor(spec.block_size_nm / spec.rod_pitch_nm));
    while (n > 1 && !detail::rods_fit(spec, angle, n))
        --n;
    return n;
}

//! Block index range [-m, m) covering the aperture.
inline int block_half_count(LayoutSpec const& spec)
{
    return static_cast<int>(std::ceil(spec.aperture_radius_nm() / spec.block_size_nm)) + 1;
}

/*!
 * Tile the aperture with blocks whose centers lie inside the disk. Each
 * block's rods share the orientation at the block center. Rods are returned
 * sorted by (y, x).
 */
inline std::vector<Rod> generate_layout(LayoutSpec const& spec)
{
    spec.validate();
    double const b = spec.block_size_nm;
    double const r2 = spec.aperture_radius_nm() * spec.aperture_radius_nm();
    int const m = block_half_count(spec);
    std::vector<Rod> rods;
    for (int j = -m; j < m; ++j)
    {
        double const cy = (j + 0.5) * b;
        for (int i = -m; i < m; ++i)
        {
            double const cx = (i + 0.5) * b;
            if (cx * cx + cy * cy > r2)
                continue;
            double const angle = orientation_field(cx, cy, spec.winding);
            int const count = rods_per_block(spec, angle);
            double const nx = -std::sin(angle);
            double const ny = std::cos(angle);
            for (int k = 0; k < count; ++k)
            {
                double const off = (k - 0.5 * (count - 1)) * spec.rod_pitch_nm;
                rods.push_back({cx + off * nx, cy + off * ny, angle});
            }
        }
    }
    std::sort(rods.begin(), rods.end(), [](Rod const& a, Rod const& b) {
        return std::tie(a.y_nm, a.x_nm) < std::tie(b.y_nm, b.x_nm);
    });
    return rods;
}

//! Number of blocks generate_layout places.
inline std::size_t count_blocks(LayoutSpec const& spec)
{
    double const b = spec.block_size_nm;
    double const r2 = spec.aperture_radius_nm() * spec.aperture_radius_nm();
    int const m = block_half_count(spec);
    std::size_t n = 0;
    for (int j = -m; j < m; ++j)
        for (int i = -m; i < m; ++i)
        {
            double const cx = (i + 0.5) * b;
            double const cy = (j + 0.5) * b;
            n += cx * cx + cy * cy <= r2;
        }
    return n;
}

//! Layout CSV `x_nm,y_nm,angle_mrad` with integer values, sorted by (y, x).
inline void write_layout_csv(std::ostream& os, std::vector<Rod> const& rods)
{
    struct Row
    {
        long long x, y, mrad;
    };
    std::vector<Row> rows;
    rows.reserve(rods.size());
    for (auto const& r : rods)
        rows.push_back({std::llround(r.x_nm), std::llround(r.y_nm), std::llround(r.angle * 1000.0)});
    std::stable_sort(rows.begin(), rows.end(),
                     [](Row const& a, Row const& b) { return std::tie(a.y, a.x) < std::tie(b.y, b.x); });
    os << "x_nm,y_nm,angle_mrad\n";
    for (auto const& r : rows)
        os << r.x << ',' << r.y << ',' << r.mrad << '\n';
}

inline nlohmann::json layout_sidecar(LayoutSpec const& spec, std::size_t rod_count)
{
    return {{"winding", spec.winding},
            {"aperture_diameter_nm", spec.aperture_diameter_nm},
            {"block_size_nm", spec.block_size_nm},
            {"rod_width_nm", spec.rod_width_nm},
            {"rod_depth_nm", spec.rod_depth_nm},
            {"rod_pitch_nm", spec.rod_pitch_nm},
            {"rod_length_nm", spec.rod_length_nm()},
            {"blocks", count_blocks(spec)},
            {"rods", rod_count}};
}

//---------------------------------------------------------------------------//
// Phase masks
//---------------------------------------------------------------------------//

enum class MaskSampling
{
    ideal,  //!< orientation evaluated at every pixel
    block   //!< orientation held constant over each antenna block
};

/*!
 * Square grid of geometric phases in [0, 2pi) for one spin branch.
 *
 * Pixel (row, col) sits at x = (col - n/2 + 1/2) p, y = (n/2 - 1/2 - row) p,
 * so no pixel center falls on the optical axis. Pixels outside the aperture
 * disk are opaque and carry phase 0.
 */
struct PhaseMask
{
    int grid_n = 0;
    double pixel_pitch_nm = 0.0;
    double aperture_radius_nm = 0.0;
    int spin = 1;
    std::vector<double> values;
    std::vector<std::uint8_t> opaque;

    std::size_t index(int row, int col) const
    {
        return static_cast<std::size_t>(row) * static_cast<std::size_t>(grid_n) +
               static_cast<std::size_t>(col);
    }
    double x_nm(int col) const { return (col - 0.5 * grid_n + 0.5) * pixel_pitch_nm; }
    double y_nm(int row) const { return (0.5 * grid_n - 0.5 - row) * pixel_pitch_nm; }
    double at(int row, int col) const { return values[index(row, col)]; }
    bool is_opaque(int row, int col) const { return opaque[index(row, col)] != 0; }
};

//! Pixel pitch leaving a 12.5% zero-padding margin around the aperture.
inline double default_pixel_pitch_nm(LayoutSpec const& spec, int grid_n)
{
    return spec.aperture_diameter_nm / (0.875 * grid_n);
}

/*!
 * Geometric phase -2 * spin * theta(x, y) on a grid_n x grid_n grid.
 *
 * For spin = +1 and winding 1 the transmitted factor is exp(-i phi): one
 * descending 2pi ramp per loop around the axis.
 */
inline PhaseMask phase_mask(LayoutSpec const& spec, int spin, int grid_n,
                            MaskSampling sampling = MaskSampling::ideal)
{
    spec.validate();
    if (spin != 1 && spin != -1)
        throw InvalidArgument("phase_mask: spin must be +1 or -1");
    if (grid_n < 64 || grid_n % 2 != 0)
        throw InvalidArgument("phase_mask: grid must be even and at least 64");
    PhaseMask mask;
    mask.grid_n = grid_n;
    mask.pixel_pitch_nm = default_pixel_pitch_nm(spec, grid_n);
    mask.aperture_radius_nm = spec.aperture_radius_nm();
    mask.spin = spin;
    std::size_t const total = static_cast<std::size_t>(grid_n) * static_cast<std::size_t>(grid_n);
    mask.values.assign(total, 0.0);
    mask.opaque.assign(total, 0);
    double const r2 = mask.aperture_radius_nm * mask.aperture_radius_nm;
    double const b = spec.block_size_nm;
    for (int row = 0; row < grid_n; ++row)
    {
        double const y = mask.y_nm(row);
        for (int col = 0; col < grid_n; ++col)
        {
            double const x = mask.x_nm(col);
            std::size_t const k = mask.index(row, col);
            if (x * x + y * y > r2)
            {
                mask.opaque[k] = 1;
                continue;
            }
            double theta = 0.0;
            if (sampling == MaskSampling::ideal)
            {
                theta = orientation_field(x, y, spec.winding);
            }
            else
            {
                double const cx = (std::floor(x / b) + 0.5) * b;
                double const cy = (std::floor(y / b) + 0.5) * b;
                theta = orientation_field(cx, cy, spec.winding);
            }
            mask.values[k] = wrap_phase(-2.0 * spin * theta);
        }
    }
    return mask;
}

/*!
 * Net phase winding (in units of 2pi) along a circle of the given radius,
 * from the unwrapped nearest-pixel phase.
 */
inline int azimuthal_winding(PhaseMask const& mask, double radius_nm, int samples = 4096)
{
    double total = 0.0;
    double prev = 0.0;
    for (int k = 0; k <= samples; ++k)
    {
        double const phi = two_pi * k / samples;
        double const x = radius_nm * std::cos(phi);
        double const y = radius_nm * std::sin(phi);
        int const col = static_cast<int>(std::floor(x / mask.pixel_pitch_nm + 0.5 * mask.grid_n));
        int const row = static_cast<int>(std::floor(0.5 * mask.grid_n - y / mask.pixel_pitch_nm));
        if (row < 0 || col < 0 || row >= mask.grid_n || col >= mask.grid_n)
            throw InvalidArgument("azimuthal_winding: circle exits the grid");
        double const v = mask.at(row, col);
        if (k > 0)
        {
            double d = v - prev;
            d -= two_pi * std::round(d / two_pi);
            total += d;
        }
        prev = v;
    }
    return static_cast<int>(std::lround(total / two_pi));
}

//---------------------------------------------------------------------------//
// Scalar diffraction
//---------------------------------------------------------------------------//

struct ComplexGrid
{
    int n = 0;
    double pixel_pitch_nm = 0.0;
    std::vector<std::complex<double>> data;

    std::complex<double> at(int row, int col) const
    {
        return data[static_cast<std::size_t>(row) * static_cast<std::size_t>(n) +
                    static_cast<std::size_t>(col)];
    }
    double power() const
    {
        double p = 0.0;
        for (auto const& v : data)
            p += std::norm(v);
        return p;
    }
};

struct Beam
{
    enum class Kind
    {
        gaussian,
        uniform
    };

    Kind kind = Kind::gaussian;
    double waist_nm = 50000.0;  //!< 1/e amplitude radius

    static Beam gaussian(double waist_nm) { return {Kind::gaussian, waist_nm}; }
    static Beam uniform() { return {Kind::uniform, 0.0}; }
};

//! Field just behind the mask: beam amplitude x exp(i mask) x aperture.
inline ComplexGrid near_field(PhaseMask const& mask, Beam const& beam)
{
    if (beam.kind == Beam::Kind::gaussian)
    {
        if (!(beam.waist_nm < mask.aperture_radius_nm))
            throw InvalidArgument("near_field: waist must be smaller than the aperture radius");
        if (beam.waist_nm < 4.0 * mask.pixel_pitch_nm)
            throw InvalidArgument("near_field: grid too coarse for beam (waist under 4 pixels)");
    }
    ComplexGrid g;
    g.n = mask.grid_n;
    g.pixel_pitch_nm = mask.pixel_pitch_nm;
    g.data.assign(mask.values.size(), {0.0, 0.0});
    double const w2 = beam.waist_nm * beam.waist_nm;
    for (int row = 0; row < g.n; ++row)
    {
        double const y = mask.y_nm(row);
        for (int col = 0; col < g.n; ++col)
        {
            std::size_t const k = mask.index(row, col);
            if (mask.opaque[k])
                continue;
            double const x = mask.x_nm(col);
            double const amp =
                beam.kind == Beam::Kind::gaussian ? std::exp(-(x * x + y * y) / w2) : 1.0;
            g.data[k] = std::polar(amp, mask.values[k]);
        }
    }
    return g;
}

struct IntensityGrid
{
    int n = 0;
    std::vector<double> values;

    double at(int row, int col) const
    {
        return values[static_cast<std::size_t>(row) * static_cast<std::size_t>(n) +
                      static_cast<std::size_t>(col)];
    }
    double total() const
    {
        double t = 0.0;
        for (double v : values)
            t += v;
        return t;
    }
    double peak() const { return *std::max_element(values.begin(), values.end()); }
    //! Zero spatial frequency sits at (n/2, n/2).
    double on_axis() const { return at(n / 2, n / 2); }
};

/*!
 * Far-field intensity |DFT(field)|^2 with unitary scaling, zero frequency
 * at the grid center. Total power equals the input power.
 */
inline IntensityGrid far_field(ComplexGrid field)
{
    int const n = field.n;
    if (n % 2 != 0)
        throw InvalidArgument("far_field: grid size must be even");
    // (-1)^(row+col) moves zero frequency to (n/2, n/2).
    for (int row = 0; row < n; ++row)
        for (int col = 0; col < n; ++col)
            if ((row + col) % 2 != 0)
                field.data[static_cast<std::size_t>(row) * n + col] *= -1.0;
    fft2_unitary(field.data, n);
    IntensityGrid out;
    out.n = n;
    out.values.resize(field.data.size());
    for (std::size_t k = 0; k < field.data.size(); ++k)
        out.values[k] = std::norm(field.data[k]);
    return out;
}

inline IntensityGrid far_field(PhaseMask const& mask, Beam const& beam)
{
    return far_field(near_field(mask, beam));
}

//---------------------------------------------------------------------------//
//! Normalized azimuthal-mode powers for ell in [-max_ell, max_ell].
struct OamSpectrum
{
    int max_ell = 0;
    std::vector<double> power;

    double at(int ell) const
    {
        return std::abs(ell) > max_ell ? 0.0 : power[static_cast<std::size_t>(ell + max_ell)];
    }
    int dominant() const
    {
        auto it = std::max_element(power.begin(), power.end());
        return static_cast<int>(it - power.begin()) - max_ell;
    }
    double dominant_power() const { return at(dominant()); }
    double sum() const
    {
        double s = 0.0;
        for (double p : power)
            s += p;
        return s;
    }
};

/*!
 * Sample the field on a circle (bilinear interpolation) and return
 * |c_ell|^2 / <|f|^2>, with c_ell the azimuthal Fourier coefficients.
 * Powers sum to at most 1; the remainder sits in |ell| > max_ell.
 */
inline OamSpectrum oam_spectrum(ComplexGrid const& field, double radius_nm, int max_ell = 8,
                                int samples = 4096)
{
    if (max_ell < 0 || samples < 2 * max_ell + 2)
        throw InvalidArgument("oam_spectrum: need more samples than azimuthal orders");
    if (!(radius_nm > 0.0))
        throw InvalidArgument("oam_spectrum: radius must be positive");
    int const n = field.n;
    std::vector<std::complex<double>> f(static_cast<std::size_t>(samples));
    for (int k = 0; k < samples; ++k)
    {
        double const phi = two_pi * k / samples;
        double const col = radius_nm * std::cos(phi) / field.pixel_pitch_nm + 0.5 * n - 0.5;
        double const row = 0.5 * n - 0.5 - radius_nm * std::sin(phi) / field.pixel_pitch_nm;
        int const c0 = static_cast<int>(std::floor(col));
        int const r0 = static_cast<int>(std::floor(row));
        if (c0 < 0 || r0 < 0 || c0 + 1 >= n || r0 + 1 >= n)
            throw InvalidArgument("oam_spectrum: circle exits the grid");
        double const fc = col - c0;
        double const fr = row - r0;
        f[static_cast<std::size_t>(k)] =
            (1.0 - fr) * ((1.0 - fc) * field.at(r0, c0) + fc * field.at(r0, c0 + 1)) +
            fr * ((1.0 - fc) * field.at(r0 + 1, c0) + fc * field.at(r0 + 1, c0 + 1));
    }
    double mean_power = 0.0;
    for (auto const& v : f)
        mean_power += std::norm(v);
    mean_power /= samples;
    if (!(mean_power > 0.0))
        throw InvalidArgument("oam_spectrum: field vanishes on the circle");

    OamSpectrum s;
    s.max_ell = max_ell;
    s.power.assign(static_cast<std::size_t>(2 * max_ell + 1), 0.0);
    for (int ell = -max_ell; ell <= max_ell; ++ell)
    {
        std::complex<double> c{};
        for (int k = 0; k < samples; ++k)
            c += f[static_cast<std::size_t>(k)] * std::polar(1.0, -ell * two_pi * k / samples);
        c /= static_cast<double>(samples);
        s.power[static_cast<std::size_t>(ell + max_ell)] = std::norm(c) / mean_power;
    }
    return s;
}

//---------------------------------------------------------------------------//
// 16-bit PGM I/O
//---------------------------------------------------------------------------//

inline void write_pgm16(std::ostream& os, int n, std::vector<std::uint16_t> const& pixels)
{
    os << "P5\n" << n << ' ' << n << "\n65535\n";
    for (std::uint16_t v : pixels)
    {
        char const bytes[2] = {static_cast<char>(v >> 8), static_cast<char>(v & 0xff)};
        os.write(bytes, 2);
    }
}

//! Returns (n, pixels). Only square 16-bit binary PGM is accepted.
inline std::pair<int, std::vector<std::uint16_t>> read_pgm16(std::istream& is)
{
    std::string magic;
    int w = 0;
    int h = 0;
    int maxval = 0;
    is >> magic >> w >> h >> maxval;
    if (!is || magic != "P5" || w <= 0 || w != h || maxval != 65535)
        throw InvalidArgument("PGM: expected a square 16-bit P5 image");
    is.get();
    std::vector<std::uint16_t> px(static_cast<std::size_t>(w) * static_cast<std::size_t>(h));
    for (auto& v : px)
    {
        unsigned char bytes[2];
        if (!is.read(reinterpret_cast<char*>(bytes), 2))
            throw InvalidArgument("PGM: truncated pixel data");
        v = static_cast<std::uint16_t>((bytes[0] << 8) | bytes[1]);
    }
    return {w, std::move(px)};
}

//! 0 -> phase 0, 65535 -> 2pi * 65535/65536. Opaque pixels map to 0.
inline std::vector<std::uint16_t> quantize_phase(PhaseMask const& mask)
{
    std::vector<std::uint16_t> out(mask.values.size(), 0);
    for (std::size_t k = 0; k < out.size(); ++k)
    {
        if (mask.opaque[k])
            continue;
        double const level = std::floor(mask.values[k] / two_pi * 65536.0);
        out[k] = static_cast<std::uint16_t>(std::clamp(level, 0.0, 65535.0));
    }
    return out;
}

//! Linear scale with the maximum mapped to 65535.
inline std::vector<std::uint16_t> quantize_intensity(IntensityGrid const& g)
{
    double const peak = g.peak();
    std::vector<std::uint16_t> out(g.values.size(), 0);
    if (!(peak > 0.0))
        return out;
    for (std::size_t k = 0; k < out.size(); ++k)
        out[k] = static_cast<std::uint16_t>(std::lround(g.values[k] / peak * 65535.0));
    return out;
}

//! Aperture description accompanying a mask PGM.
inline nlohmann::json mask_sidecar(PhaseMask const& mask, int winding)
{
    double const c = 0.5 * mask.grid_n - 0.5;
    return {{"grid_n", mask.grid_n},
            {"center_px", {c, c}},
            {"radius_px", mask.aperture_radius_nm / mask.pixel_pitch_nm},
            {"radius_nm", mask.aperture_radius_nm},
            {"pixel_pitch_nm", mask.pixel_pitch_nm},
            {"spin", mask.spin},
            {"winding", winding}};
}

//! Rebuild a mask from its PGM levels and sidecar.
inline PhaseMask mask_from_pgm(int n, std::vector<std::uint16_t> const& levels,
                               nlohmann::json const& sidecar)
{
    PhaseMask mask;
    try
    {
        mask.grid_n = n;
        mask.pixel_pitch_nm = sidecar.at("pixel_pitch_nm").get<double>();
        mask.aperture_radius_nm = sidecar.at("radius_nm").get<double>();
        mask.spin = sidecar.value("spin", 1);
        if (sidecar.at("grid_n").get<int>() != n)
            throw InvalidArgument("mask sidecar: grid_n does not match the PGM");
    }
    catch (nlohmann::json::exception const& e)
    {
        throw InvalidArgument(std::string("mask sidecar: ") + e.what());
    }
    if (!(mask.pixel_pitch_nm > 0.0) || !(mask.aperture_radius_nm > 0.0))
        throw InvalidArgument("mask sidecar: pitch and radius must be positive");
    mask.values.assign(levels.size(), 0.0);
    mask.opaque.assign(levels.size(), 0);
    double const r2 = mask.aperture_radius_nm * mask.aperture_radius_nm;
    for (int row = 0; row < n; ++row)
        for (int col = 0; col < n; ++col)
        {
            std::size_t const k = mask.index(row, col);
            double const x = mask.x_nm(col);
            double const y = mask.y_nm(row);
            if (x * x + y * y > r2)
                mask.opaque[k] = 1;
            else
                mask.values[k] = two_pi * levels[k] / 65536.0;
        }
    return mask;
}

}  // namespace spinorbit
