// Command-line front end: simulate Bell-state tomography runs, reconstruct
// density matrices from counts files, and generate metasurface designs.
//
// Exit codes: 0 success, 1 numerical or convergence failure, 2 usage or
// validation failure.

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "spinorbit/spinorbit.hpp"

namespace fs = std::filesystem;
using namespace spinorbit;

namespace {

constexpr int exit_numerical = 1;
constexpr int exit_usage = 2;

//! Collects outputs and refuses to clobber existing files unless forced.
class OutputDir
{
  public:
    OutputDir(fs::path dir, bool force) : dir_(std::move(dir)), force_(force) {}

    fs::path claim(std::string const& name)
    {
        fs::path p = dir_ / name;
        if (fs::exists(p) && !force_)
            throw InvalidArgument("refusing to overwrite " + p.string() + " (use --force)");
        return p;
    }

    void write(std::string const& name, std::string const& contents)
    {
        fs::path const p = claim(name);
        fs::create_directories(dir_);
        std::ofstream os(p, std::ios::binary | std::ios::trunc);
        if (!os)
            throw InvalidArgument("cannot open " + p.string() + " for writing");
        os << contents;
        if (!os)
            throw InvalidArgument("failed writing " + p.string());
    }

  private:
    fs::path dir_;
    bool force_;
};

std::string dump(nlohmann::json const& j) { return j.dump(2) + "\n"; }

//! The resolved options of one subcommand as flat `sub.key=value` lines.
std::string manifest(CLI::App const& app, std::string const& sub)
{
    std::istringstream all(app.config_to_str(true, false));
    std::ostringstream out;
    out << "# spinorbit run manifest; replay with: spinorbit --config <this file> " << sub
        << " --force\n";
    std::string const prefix = sub + ".";
    std::string line;
    while (std::getline(all, line))
    {
        if (line.rfind(prefix, 0) != 0)
            continue;
        if (line.rfind(prefix + "force=", 0) == 0)
            continue;
        out << line << '\n';
    }
    return out.str();
}

double median(std::vector<double> v)
{
    std::sort(v.begin(), v.end());
    std::size_t const n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string fmt(double v)
{
    std::ostringstream os;
    os.precision(6);
    os << std::fixed << v;
    return os.str();
}

//---------------------------------------------------------------------------//
struct BellArgs
{
    std::string target = "psi+";
    double counts = 1000.0;
    double eta = 0.72;
    std::string noise = "poisson";
    std::uint64_t seed = 0;
    int trials = 1;
    bool post_select = true;
    double duration = 10.0;
    int truncation = 1;
    std::string init = "linear";
};

int run_bell(CLI::App const& app, BellArgs const& a, OutputDir& out)
{
    if (a.trials < 1)
        throw InvalidArgument("--trials must be at least 1");
    ExperimentConfig cfg;
    cfg.target = parse_bell_state(a.target);
    cfg.n_total = a.counts;
    cfg.efficiency = a.eta;
    cfg.noise = parse_noise_model(a.noise);
    cfg.post_select = a.post_select;
    cfg.duration_s = a.duration;
    cfg.truncation = a.truncation;
    cfg.validate();
    MleOptions mopts;
    if (a.init == "identity")
        mopts.init = MleInit::identity;
    else if (a.init != "linear")
        throw InvalidArgument("--init must be linear or identity");

    // Claim names up front so a refused overwrite happens before any work.
    out.claim("counts.csv");
    out.claim("rho_mle.json");
    out.claim("manifest.ini");
    if (a.trials > 1)
        out.claim("trials.csv");

    std::vector<double> fids;
    int n_converged = 0;
    std::ostringstream trials_csv;
    trials_csv << "trial,seed,fidelity,converged\n";
    std::string first_counts;
    std::string first_rho;
    for (int i = 0; i < a.trials; ++i)
    {
        cfg.rng_seed = a.seed + static_cast<std::uint64_t>(i);
        BellRun run = run_bell_pipeline(cfg);
        TomographyResult res = mle_reconstruct(run.counts, mopts);
        double const f = fidelity_report(res, cfg.target);
        res.fidelity_vs_target = f;
        fids.push_back(f);
        n_converged += res.converged;
        trials_csv << i << ',' << cfg.rng_seed << ',' << format_double(f) << ','
                   << (res.converged ? "true" : "false") << '\n';
        if (i == 0)
        {
            std::ostringstream cs;
            write_counts_csv(cs, run.counts);
            first_counts = cs.str();
            first_rho = dump(to_json(res));
        }
    }

    out.write("counts.csv", first_counts);
    out.write("rho_mle.json", first_rho);
    if (a.trials > 1)
        out.write("trials.csv", trials_csv.str());
    out.write("manifest.ini", manifest(app, "bell"));

    if (a.trials == 1)
    {
        std::cout << "target=" << a.target << " fidelity=" << fmt(fids[0])
                  << " converged=" << (n_converged ? "true" : "false") << '\n';
    }
    else
    {
        auto const [lo, hi] = std::minmax_element(fids.begin(), fids.end());
        std::cout << "target=" << a.target << " trials=" << a.trials << " min=" << fmt(*lo)
                  << " median=" << fmt(median(fids)) << " max=" << fmt(*hi)
                  << " converged=" << n_converged << '/' << a.trials << '\n';
    }
    return n_converged == 0 ? exit_numerical : 0;
}

//---------------------------------------------------------------------------//
struct TomoArgs
{
    std::string counts_file;
    std::string target;
};

int run_tomo(CLI::App const& app, TomoArgs const& a, OutputDir& out)
{
    std::optional<BellState> target;
    if (!a.target.empty())
        target = parse_bell_state(a.target);
    std::ifstream is(a.counts_file, std::ios::binary);
    if (!is)
        throw InvalidArgument("cannot open counts file " + a.counts_file);
    auto const records = read_counts_csv(is);

    out.claim("rho_linear.json");
    out.claim("rho_mle.json");
    out.claim("manifest.ini");

    TomographyResult lin = linear_inversion(records);
    TomographyResult mle = mle_reconstruct(records);
    if (target)
    {
        lin.fidelity_vs_target = fidelity_report(lin, *target);
        mle.fidelity_vs_target = fidelity_report(mle, *target);
    }
    out.write("rho_linear.json", dump(to_json(lin)));
    out.write("rho_mle.json", dump(to_json(mle)));
    out.write("manifest.ini", manifest(app, "tomo"));

    auto fid = [](TomographyResult const& r) {
        return r.fidelity_vs_target ? fmt(*r.fidelity_vs_target) : std::string("n/a");
    };
    std::cout << "linear fidelity=" << fid(lin) << " physical=" << (lin.physical ? "true" : "false")
              << (lin.clamped ? " (clamped)" : "") << '\n';
    std::cout << "mle fidelity=" << fid(mle) << " converged=" << (mle.converged ? "true" : "false")
              << " iterations=" << mle.iterations << '\n';
    std::cout << "trace_distance=" << format_double(trace_distance(lin.rho, mle.rho)) << '\n';
    return mle.converged ? 0 : exit_numerical;
}

//---------------------------------------------------------------------------//
struct DesignArgs
{
    int winding = 1;
    int spin = 1;
    int grid = 1024;
    double aperture_um = 200.0;
    double block_nm = 700.0;
    double rod_width_nm = 105.0;
    double rod_depth_nm = 300.0;
    double pitch_nm = 233.0;
    double waist_um = 50.0;
    double radius_um = 50.0;
    int max_ell = 8;
};

std::string pgm_bytes(int n, std::vector<std::uint16_t> const& px)
{
    std::ostringstream os(std::ios::binary);
    write_pgm16(os, n, px);
    return os.str();
}

int run_design(CLI::App const& app, DesignArgs const& a, OutputDir& out)
{
    if (a.spin != 1 && a.spin != -1)
        throw InvalidArgument("--spin must be +1 or -1");
    LayoutSpec spec;
    spec.winding = a.winding;
    spec.aperture_diameter_nm = a.aperture_um * 1000.0;
    spec.block_size_nm = a.block_nm;
    spec.rod_width_nm = a.rod_width_nm;
    spec.rod_depth_nm = a.rod_depth_nm;
    spec.rod_pitch_nm = a.pitch_nm;
    spec.validate();

    for (char const* name : {"layout.csv", "layout.json", "mask_spin+1.pgm", "mask_spin+1.json",
                             "mask_spin-1.pgm", "mask_spin-1.json", "farfield.pgm",
                             "oam_spectrum.json", "manifest.ini"})
        out.claim(name);

    auto const rods = generate_layout(spec);
    std::ostringstream layout;
    write_layout_csv(layout, rods);
    out.write("layout.csv", layout.str());
    out.write("layout.json", dump(layout_sidecar(spec, rods.size())));

    PhaseMask selected;
    for (int s : {1, -1})
    {
        PhaseMask mask = phase_mask(spec, s, a.grid, MaskSampling::block);
        std::string const stem = s > 0 ? "mask_spin+1" : "mask_spin-1";
        out.write(stem + ".pgm", pgm_bytes(mask.grid_n, quantize_phase(mask)));
        out.write(stem + ".json", dump(mask_sidecar(mask, spec.winding)));
        if (s == a.spin)
            selected = std::move(mask);
    }

    ComplexGrid const field = near_field(selected, Beam::gaussian(a.waist_um * 1000.0));
    IntensityGrid const ff = far_field(field);
    out.write("farfield.pgm", pgm_bytes(ff.n, quantize_intensity(ff)));

    OamSpectrum const spectrum = oam_spectrum(field, a.radius_um * 1000.0, a.max_ell);
    nlohmann::json sj = nlohmann::json::object();
    for (int ell = -a.max_ell; ell <= a.max_ell; ++ell)
        sj[std::to_string(ell)] = spectrum.at(ell);
    out.write("oam_spectrum.json", dump(sj));
    out.write("manifest.ini", manifest(app, "design"));

    std::cout << "winding=" << a.winding << " spin=" << (a.spin > 0 ? "+1" : "-1")
              << " rods=" << rods.size() << " dominant_ell=" << spectrum.dominant()
              << " dominant_power=" << fmt(spectrum.dominant_power())
              << " on_axis_over_peak=" << format_double(ff.on_axis() / ff.peak()) << '\n';
    return 0;
}

//---------------------------------------------------------------------------//
struct FarfieldArgs
{
    std::string mask;
    std::string sidecar;
    std::string beam = "gaussian";
    double waist_um = 50.0;
    std::string output = "farfield.pgm";
};

int run_farfield(CLI::App const& app, FarfieldArgs const& a, OutputDir& out)
{
    std::ifstream is(a.mask, std::ios::binary);
    if (!is)
        throw InvalidArgument("cannot open mask " + a.mask);
    auto [n, levels] = read_pgm16(is);
    std::string const side =
        a.sidecar.empty() ? fs::path(a.mask).replace_extension(".json").string() : a.sidecar;
    std::ifstream ss(side);
    if (!ss)
        throw InvalidArgument("cannot open mask sidecar " + side);
    nlohmann::json sidecar;
    try
    {
        ss >> sidecar;
    }
    catch (nlohmann::json::exception const& e)
    {
        throw InvalidArgument("mask sidecar " + side + ": " + e.what());
    }
    PhaseMask const mask = mask_from_pgm(n, levels, sidecar);

    Beam beam;
    if (a.beam == "gaussian")
        beam = Beam::gaussian(a.waist_um * 1000.0);
    else if (a.beam == "uniform")
        beam = Beam::uniform();
    else
        throw InvalidArgument("--beam must be gaussian or uniform");

    out.claim(a.output);
    out.claim("manifest.ini");
    IntensityGrid const ff = far_field(mask, beam);
    out.write(a.output, pgm_bytes(ff.n, quantize_intensity(ff)));
    out.write("manifest.ini", manifest(app, "farfield"));
    std::cout << "grid=" << ff.n << " on_axis_over_peak=" << format_double(ff.on_axis() / ff.peak())
              << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Spin-orbit entanglement simulator: metasurface Bell states and tomography"};
    app.set_config("--config", "", "Flat key=value file, keys prefixed by subcommand (bell.seed=7)");
    app.require_subcommand(1);

    std::string out_dir = ".";
    bool force = false;
    auto add_common = [&](CLI::App* sub) {
        sub->fallthrough();
        sub->add_option("--out", out_dir, "Output directory")
            ->envname("SPINORBIT_OUT_DIR")
            ->capture_default_str();
        sub->add_flag("--force", force, "Overwrite existing output files");
    };

    BellArgs bell;
    auto* bell_cmd = app.add_subcommand("bell", "Simulate, reconstruct and score one Bell state");
    add_common(bell_cmd);
    bell_cmd->add_option("--target", bell.target, "psi+, psi-, phi+ or phi-")->capture_default_str();
    bell_cmd->add_option("--counts", bell.counts, "Expected unprojected coincidences")
        ->capture_default_str();
    bell_cmd->add_option("--eta", bell.eta, "Metasurface conversion efficiency")
        ->capture_default_str();
    bell_cmd->add_option("--noise", bell.noise, "none or poisson")->capture_default_str();
    bell_cmd->add_option("--seed", bell.seed, "Base RNG seed; trial i uses seed + i")
        ->capture_default_str();
    bell_cmd->add_option("--trials", bell.trials, "Independent repetitions")->capture_default_str();
    bell_cmd->add_option("--post-select", bell.post_select, "Keep only the ell=+-1 block")
        ->capture_default_str();
    bell_cmd->add_option("--duration", bell.duration, "Integration window per setting [s]")
        ->capture_default_str();
    bell_cmd->add_option("--truncation", bell.truncation, "OAM truncation L")->capture_default_str();
    bell_cmd->add_option("--init", bell.init, "MLE seed: linear or identity")->capture_default_str();

    TomoArgs tomo;
    auto* tomo_cmd = app.add_subcommand("tomo", "Reconstruct a density matrix from a counts CSV");
    add_common(tomo_cmd);
    tomo_cmd->add_option("--counts-file,counts_file", tomo.counts_file, "Counts CSV")->required();
    tomo_cmd->add_option("--target", tomo.target, "Bell state to score against (optional)");

    DesignArgs design;
    auto* design_cmd = app.add_subcommand("design", "Generate layout, phase masks and diffraction");
    add_common(design_cmd);
    design_cmd->add_option("--winding", design.winding, "Orientation winding number")
        ->capture_default_str();
    design_cmd->add_option("--spin", design.spin, "Spin branch for diffraction: +1 or -1")
        ->capture_default_str();
    design_cmd->add_option("--grid", design.grid, "Mask grid size")->capture_default_str();
    design_cmd->add_option("--aperture-um", design.aperture_um)->capture_default_str();
    design_cmd->add_option("--block-nm", design.block_nm)->capture_default_str();
    design_cmd->add_option("--rod-width-nm", design.rod_width_nm)->capture_default_str();
    design_cmd->add_option("--rod-depth-nm", design.rod_depth_nm)->capture_default_str();
    design_cmd->add_option("--pitch-nm", design.pitch_nm)->capture_default_str();
    design_cmd->add_option("--waist-um", design.waist_um, "Gaussian beam waist")
        ->capture_default_str();
    design_cmd->add_option("--radius-um", design.radius_um, "OAM analysis circle radius")
        ->capture_default_str();
    design_cmd->add_option("--max-ell", design.max_ell)->capture_default_str();

    FarfieldArgs farfield;
    auto* ff_cmd = app.add_subcommand("farfield", "Far-field intensity of a mask PGM");
    add_common(ff_cmd);
    ff_cmd->add_option("--mask", farfield.mask, "Mask PGM")->required();
    ff_cmd->add_option("--sidecar", farfield.sidecar, "Mask sidecar JSON (default: mask.json)");
    ff_cmd->add_option("--beam", farfield.beam, "gaussian or uniform")->capture_default_str();
    ff_cmd->add_option("--waist-um", farfield.waist_um)->capture_default_str();
    ff_cmd->add_option("--output", farfield.output, "Output PGM name")->capture_default_str();

    try
    {
        app.parse(argc, argv);
    }
    catch (CLI::ParseError const& e)
    {
        int const code = app.exit(e);
        return code == 0 ? 0 : exit_usage;
    }

    try
    {
        OutputDir out(out_dir, force);
        if (*bell_cmd)
            return run_bell(app, bell, out);
        if (*tomo_cmd)
            return run_tomo(app, tomo, out);
        if (*design_cmd)
            return run_design(app, design, out);
        if (*ff_cmd)
            return run_farfield(app, farfield, out);
    }
    catch (InvalidArgument const& e)
    {
        std::cerr << "error: " << e.what() << '\n';
        return exit_usage;
    }
    catch (NumericalError const& e)
    {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return exit_numerical;
    }
    catch (std::exception const& e)
    {
        std::cerr << "error: " << e.what() << '\n';
        return exit_usage;
    }
    return exit_usage;
}
