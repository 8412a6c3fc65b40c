// Command-line front end for the deflection-spectrum toolkit.
//
// Workflow: simulate -> calibrate -> reconstruct / centroid -> plot.
// Exit codes: 0 success, 1 usage or config error, 2 data error
// (missing/corrupt files), 3 numerical failure.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "dflect/calibrate.hpp"
#include "dflect/experiment.hpp"
#include "dflect/sensing.hpp"
#include "dflect/svg_plot.hpp"

namespace fs = std::filesystem;
using dflect::data_error;
using dflect::numeric_error;
using ordered_json = nlohmann::ordered_json;

namespace {

constexpr const char* kDatasetFile = "dataset.json";
constexpr std::uint64_t kSnapPlan = 0x736e6170;   // per-lens showcase plans
constexpr std::uint64_t kSnapNoise = 0x736e6d64;  // and their noise draws

std::string num_tag(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

struct Overrides {
    std::uint64_t seed = 0;
    std::vector<double> ratios;
    int trials = 0;
    double lens_power = 0.0;
    double target_isnr = 0.0;
    double rho = 0.0;
    int max_iters = 0;
    double tol = 0.0;
    int threads = -1;

    CLI::Option* seed_opt = nullptr;
    CLI::Option* ratios_opt = nullptr;
    CLI::Option* trials_opt = nullptr;
    CLI::Option* lens_opt = nullptr;
    CLI::Option* isnr_opt = nullptr;
    CLI::Option* rho_opt = nullptr;
    CLI::Option* iters_opt = nullptr;
    CLI::Option* tol_opt = nullptr;
    CLI::Option* threads_opt = nullptr;

    void attach(CLI::App* cmd) {
        seed_opt = cmd->add_option("--seed", seed, "master seed");
        ratios_opt = cmd->add_option("--ratios", ratios,
                                     "comma-separated M/N ratios in (0,1]")
                         ->delimiter(',');
        trials_opt = cmd->add_option("--trials", trials,
                                     "trials per lens/ratio/location");
        lens_opt = cmd->add_option("--lens-power", lens_power,
                                   "restrict the run to one lens (diopters)");
        isnr_opt = cmd->add_option("--target-isnr", target_isnr,
                                   "input SNR to tune the noise to (dB)");
        rho_opt = cmd->add_option("--rho", rho, "matched-filter width (pixels)");
        iters_opt = cmd->add_option("--max-iters", max_iters,
                                    "solver iteration cap");
        tol_opt = cmd->add_option("--tol", tol, "solver relative tolerance");
        threads_opt = cmd->add_option("--threads", threads,
                                      "worker threads (0 = hardware)");
    }

    // --ratios is applied by the command since reconstruct and centroid
    // sweeps own different ratio lists
    void apply(dflect::ExperimentConfig& cfg) const {
        if (seed_opt && seed_opt->count()) cfg.seed = seed;
        if (trials_opt && trials_opt->count()) cfg.trials = trials;
        if (lens_opt && lens_opt->count()) cfg.lens_powers = {lens_power};
        if (isnr_opt && isnr_opt->count()) cfg.target_isnr_db = target_isnr;
        if (rho_opt && rho_opt->count()) cfg.rho = rho;
        if (iters_opt && iters_opt->count()) cfg.max_iters = max_iters;
        if (tol_opt && tol_opt->count()) cfg.tol = tol;
        if (threads_opt && threads_opt->count()) cfg.threads = threads;
    }
};

ordered_json read_dataset_json(const std::string& dir) {
    auto path = dir + "/" + kDatasetFile;
    std::ifstream in(path, std::ios::binary);
    if (!in.good()) throw data_error("cannot open " + path);
    ordered_json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw data_error(path + ": " + e.what());
    }
    if (j.value("format", "") != "dflect-experiment")
        throw data_error(path + ": not a dataset manifest");
    return j;
}

void write_dataset_json(const std::string& dir, const ordered_json& j) {
    auto path = dir + "/" + kDatasetFile;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out.good()) throw data_error("cannot open " + path);
    out << j.dump(2) << '\n';
    if (!out.good()) throw data_error("short write to " + path);
}

dflect::ExperimentConfig dataset_config(const ordered_json& j,
                                        const std::string& dir) {
    if (!j.contains("config"))
        throw data_error(dir + "/" + kDatasetFile + ": missing config block");
    return dflect::config_from_json_text(j.at("config").dump(),
                                         dir + "/" + kDatasetFile);
}

int cmd_simulate(const std::string& config_path, const std::string& out,
                 const Overrides& ov) {
    auto cfg = config_path.empty() ? dflect::default_config()
                                   : dflect::load_config(config_path);
    ov.apply(cfg);
    dflect::validate_config(cfg);

    fs::create_directories(out);
    fs::create_directories(out + "/no_object");

    ordered_json ds;
    ds["format"] = "dflect-experiment";
    ds["version"] = 1;
    ds["config"] = ordered_json::parse(dflect::config_to_json_text(cfg));
    ds["lenses"] = ordered_json::array();

    std::size_t n = static_cast<std::size_t>(cfg.width) * cfg.height;
    std::size_t m_snap = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::lround(0.1 * static_cast<double>(n))));

    for (std::size_t li = 0; li < cfg.lens_powers.size(); ++li) {
        double power = cfg.lens_powers[li];
        auto shot = dflect::calibration_shot(cfg, li);

        std::string no_obj = "no_object/bundle_p" + num_tag(power) + ".dfcm";
        dflect::write_bundle(out + "/" + no_obj, shot.bundle, shot.plan);

        dflect::PhantomSpec spec;
        spec.power_diopters = power;
        spec.spot_sigma = dflect::lens_spot_sigma(cfg, power);
        spec.width = cfg.width;
        spec.height = cfg.height;
        spec.pixel_pitch = cfg.pixel_pitch;
        auto plan = dflect::make_plan(
            n, m_snap, dflect::mix_seed(dflect::mix_seed(cfg.seed, kSnapPlan), li),
            false);
        auto model = dflect::make_instrument(
            cfg, shot.noise.sigma_s, shot.noise.sigma_y,
            dflect::mix_seed(dflect::mix_seed(cfg.seed, kSnapNoise), li));
        std::string lens_dir = "lens_" + num_tag(power);
        auto paths = dflect::snapshot_dataset(spec, plan, model, out + "/" + lens_dir);

        ordered_json lens;
        lens["power"] = power;
        lens["spot_sigma"] = spec.spot_sigma;
        lens["dir"] = lens_dir;
        lens["no_object_bundle"] = no_obj;
        lens["noise"] = {{"sigma_s", shot.noise.sigma_s},
                         {"sigma_y", shot.noise.sigma_y},
                         {"achieved_isnr_db", shot.noise.achieved_isnr_db}};
        ds["lenses"].push_back(lens);

        std::printf("lens %s D: %zu bundles, iSNR %.3f dB\n", num_tag(power).c_str(),
                    paths.bundles.size(), shot.noise.achieved_isnr_db);
    }
    write_dataset_json(out, ds);
    std::printf("wrote %s/%s\n", out.c_str(), kDatasetFile);
    return 0;
}

int cmd_calibrate(const std::string& out) {
    auto ds = read_dataset_json(out);
    auto cfg = dataset_config(ds, out);
    if (!ds.contains("lenses") || ds["lenses"].empty())
        throw data_error(out + "/" + kDatasetFile + ": no lenses recorded");

    for (auto& lens : ds["lenses"]) {
        std::string rel = lens.value("no_object_bundle", "");
        auto path = out + "/" + rel;
        if (rel.empty() || !fs::exists(path))
            throw data_error("missing no-object bundle for lens " +
                             num_tag(lens.value("power", 0.0)) + ": " + path);
        dflect::SensingPlan plan;
        auto bundle = dflect::read_bundle(path, plan);
        auto y_no = dflect::debias(bundle, plan);
        auto est = dflect::fit_reference(y_no, plan, cfg.width, cfg.height,
                                         cfg.pinhole_radius);
        lens["noise_estimate"] = {
            {"eps_full", est.eps_full},
            {"disk_height", est.disk_height},
            {"origin_offset",
             ordered_json::array({est.origin_offset[0], est.origin_offset[1]})}};
        std::printf("lens %s D: eps_full %.6g, disk height %.6g, origin (%+.2f, %+.2f)\n",
                    num_tag(lens.value("power", 0.0)).c_str(), est.eps_full,
                    est.disk_height, est.origin_offset[0], est.origin_offset[1]);
    }
    write_dataset_json(out, ds);
    return 0;
}

void require_calibrated(const ordered_json& ds, const std::string& out) {
    if (!ds.contains("lenses") || ds["lenses"].empty())
        throw data_error(out + "/" + kDatasetFile + ": no lenses recorded");
    for (const auto& lens : ds["lenses"])
        if (!lens.contains("noise_estimate"))
            throw data_error("dataset is not calibrated; run 'dflect calibrate' first");
}

int cmd_reconstruct(const std::string& out, const Overrides& ov) {
    auto ds = read_dataset_json(out);
    require_calibrated(ds, out);
    auto cfg = dataset_config(ds, out);
    ov.apply(cfg);
    if (ov.ratios_opt && ov.ratios_opt->count()) cfg.reconstruct_ratios = ov.ratios;
    dflect::validate_config(cfg);

    auto spectra_dir = out + "/reconstructions";
    fs::create_directories(spectra_dir);
    auto rows = dflect::run_reconstruct_sweep(cfg, &spectra_dir);
    dflect::write_reconstruct_csv(out + "/reconstruct.csv", rows);
    auto sums = dflect::summarize_reconstruct(rows);
    dflect::write_summary_csv(out + "/reconstruct_summary.csv", "osnr_db", sums);

    for (const auto& s : sums)
        std::printf("lens %s D  M/N %5.3g  mean oSNR %7.3f dB  (se %.3f, n=%d)\n",
                    num_tag(s.lens_power).c_str(), s.ratio, s.mean, s.se, s.count);
    std::printf("wrote %s/reconstruct.csv\n", out.c_str());
    return 0;
}

int cmd_centroid(const std::string& out, const Overrides& ov) {
    auto ds = read_dataset_json(out);
    require_calibrated(ds, out);
    auto cfg = dataset_config(ds, out);
    ov.apply(cfg);
    if (ov.ratios_opt && ov.ratios_opt->count()) cfg.centroid_ratios = ov.ratios;
    dflect::validate_config(cfg);

    auto rows = dflect::run_centroid_sweep(cfg);
    dflect::write_centroid_csv(out + "/centroid.csv", rows);
    auto sums = dflect::summarize_centroid(rows);
    dflect::write_summary_csv(out + "/centroid_summary.csv", "error_px", sums);

    for (const auto& s : sums)
        std::printf("lens %s D  M/N %6.4g  mean error %7.4f px  (se %.4f, n=%d)\n",
                    num_tag(s.lens_power).c_str(), s.ratio, s.mean, s.se, s.count);
    std::printf("wrote %s/centroid.csv\n", out.c_str());
    return 0;
}

int cmd_plot(const std::vector<std::string>& csvs, const std::string& out,
             double guide, bool have_guide) {
    for (const auto& csv : csvs) {
        std::ifstream in(csv, std::ios::binary);
        if (!in.good()) throw data_error("cannot open " + csv);
        std::string first;
        std::getline(in, first);
        in.close();

        dflect::PlotSpec spec;
        spec.log_x = true;
        spec.x_label = "M/N (%)";
        std::vector<dflect::RatioSummary> sums;
        if (first == "# dflect-reconstruct v1") {
            auto rows = dflect::read_reconstruct_csv(csv);
            if (rows.empty()) throw data_error(csv + ": no data rows");
            sums = dflect::summarize_reconstruct(rows);
            spec.title = "reconstruction quality against sampling ratio";
            spec.y_label = "oSNR (dB)";
            spec.guide_y = have_guide ? guide : 4.34;
            spec.guide_label = "iSNR";
        } else if (first == "# dflect-centroid v1") {
            auto rows = dflect::read_centroid_csv(csv);
            if (rows.empty()) throw data_error(csv + ": no data rows");
            sums = dflect::summarize_centroid(rows);
            spec.title = "centroid error against sampling ratio";
            spec.y_label = "mean centroid error (px)";
            spec.guide_y = have_guide ? guide : 1.0;
            spec.guide_label = "1 px";
        } else {
            throw data_error(csv + ": unrecognized schema tag");
        }

        // one series per lens, points in ratio order
        for (const auto& s : sums) {
            dflect::PlotSeries* series = nullptr;
            std::string label = num_tag(s.lens_power) + " D";
            for (auto& existing : spec.series)
                if (existing.label == label) series = &existing;
            if (!series) {
                spec.series.push_back({label, {}});
                series = &spec.series.back();
            }
            series->points.push_back({100.0 * s.ratio, s.mean});
        }

        fs::path src(csv);
        fs::path dst = out.empty() ? src.parent_path() / src.stem()
                                   : fs::path(out) / src.stem();
        auto svg = dst.string() + ".svg";
        if (!out.empty()) fs::create_directories(out);
        dflect::write_svg_plot(svg, spec);
        std::printf("wrote %s\n", svg.c_str());
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"compressive deflection-spectrum experiment runner"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::vector<std::string> csvs;
    double guide = 0.0;

    auto* sim = app.add_subcommand("simulate",
                                   "synthesize phantom spectra and measurement bundles");
    sim->add_option("--config", config_path, "experiment config JSON");
    sim->add_option("--out", out_dir, "dataset directory")->required();
    Overrides sim_ov;
    sim_ov.attach(sim);

    auto* cal = app.add_subcommand("calibrate",
                                   "fit the no-object reference and store the noise estimate");
    cal->add_option("--out", out_dir, "dataset directory")->required();

    auto* rec = app.add_subcommand("reconstruct",
                                   "sweep sampling ratios and report oSNR against the full reference");
    rec->add_option("--out", out_dir, "dataset directory")->required();
    Overrides rec_ov;
    rec_ov.attach(rec);

    auto* cen = app.add_subcommand("centroid",
                                   "sweep sampling ratios and report centroid error");
    cen->add_option("--out", out_dir, "dataset directory")->required();
    Overrides cen_ov;
    cen_ov.attach(cen);

    auto* plt = app.add_subcommand("plot", "render sweep CSVs as SVG charts");
    plt->add_option("csv", csvs, "sweep CSV files")->required()->expected(-1);
    plt->add_option("--out", out_dir, "output directory (default: beside the CSV)");
    auto* guide_opt = plt->add_option("--guide", guide, "override the reference line");

    try {
        app.parse(argc, argv);
        if (sim->parsed()) return cmd_simulate(config_path, out_dir, sim_ov);
        if (cal->parsed()) return cmd_calibrate(out_dir);
        if (rec->parsed()) return cmd_reconstruct(out_dir, rec_ov);
        if (cen->parsed()) return cmd_centroid(out_dir, cen_ov);
        if (plt->parsed())
            return cmd_plot(csvs, plt->count("--out") ? out_dir : "", guide,
                            guide_opt->count() > 0);
        return 1;
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    } catch (const data_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const numeric_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const fs::filesystem_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
}
