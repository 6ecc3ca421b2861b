#pragma once

// Command implementations behind the `vfs` executable. Each command takes a
// parsed option struct and two streams and returns its exit code; flag
// parsing lives in tools/vfs.cpp.

#include <chrono>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "vfs/error.hpp"
#include "vfs/evaluation.hpp"
#include "vfs/io.hpp"
#include "vfs/metaimage.hpp"
#include "vfs/phantom.hpp"
#include "vfs/registration.hpp"
#include "vfs/representations.hpp"
#include "vfs/resample.hpp"

namespace vfs::cli {

enum ExitCode : int { kSuccess = 0, kUsage = 1, kData = 2, kNumerical = 3 };

inline int exit_code_for(ErrorKind k) {
    switch (k) {
        case ErrorKind::Parameter: return kUsage;
        case ErrorKind::Numerical: return kNumerical;
        case ErrorKind::Geometry:
        case ErrorKind::UndefinedMetric:
        case ErrorKind::Io: return kData;
    }
    return kData;
}

struct CommandOutcome {
    int exit_code = kSuccess;
    std::string summary;
    std::string report_path;
};

/// Runs `body`, turning library errors into exit codes with a diagnostic
/// line on `err`.
template <typename Body>
CommandOutcome run_guarded(const char* name, std::ostream& err, Body&& body) {
    try {
        return body();
    } catch (const Error& e) {
        err << "vfs " << name << ": error: " << e.what() << "\n";
        return {exit_code_for(e.kind()), e.what(), ""};
    } catch (const std::exception& e) {
        err << "vfs " << name << ": error: " << e.what() << "\n";
        return {kData, e.what(), ""};
    }
}

inline std::string decimals(double v, int digits) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(digits) << v;
    return s.str();
}

inline std::vector<double> parse_list(const std::string& text, const char* what) {
    std::vector<double> out;
    std::string item;
    std::istringstream in(text);
    while (std::getline(in, item, ',')) {
        item = detail::trim(item);
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw ParameterError(std::string(what) + ": not a number: '" + item + "'");
        }
    }
    if (out.empty()) throw ParameterError(std::string(what) + ": empty list");
    return out;
}

inline std::vector<std::string> split_names(const std::string& text) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(text);
    while (std::getline(in, item, ',')) {
        item = detail::trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

// ---------------------------------------------------------------- vfc-field

struct VfcFieldOptions {
    std::string input;
    std::string output;
    double gamma = 3.0;
    std::string preset;
    int radius = kDefaultKernelRadius;
    bool normalize = true;
    std::string method = "auto";
    std::string report;
};

inline CommandOutcome cmd_vfc_field(const VfcFieldOptions& o, std::ostream& out, std::ostream& err) {
    return run_guarded("vfc-field", err, [&]() -> CommandOutcome {
        const double gamma = o.preset.empty() ? o.gamma : preset_gamma(o.preset);
        ConvolutionMethod method = ConvolutionMethod::Automatic;
        if (o.method == "fourier") {
            method = ConvolutionMethod::Fourier;
        } else if (o.method == "direct") {
            method = ConvolutionMethod::Direct;
        } else if (o.method != "auto") {
            throw ParameterError("--method must be auto, fourier or direct");
        }
        const ScalarVolume image = read_scalar_volume(o.input);
        const VectorFieldKernel k = build_vfc_kernel(o.radius, gamma, kDefaultKernelEpsilon, image.geometry().ndim());
        VectorField f = vfc_field(edge_map_squared_gradient(image), k, method);
        if (f.max_magnitude() == 0.0) err << "vfs vfc-field: warning: input has no edges, field is zero\n";
        if (o.normalize) f = normalize_field_relative(f);
        const double r = roughness(f);
        if (!o.output.empty()) write_metaimage(o.output, f);

        CommandOutcome c;
        c.summary = "gamma=" + format_number(gamma) + " radius=" + std::to_string(o.radius) +
                    " roughness=" + format_number(r);
        out << c.summary << "\n";
        if (!o.report.empty()) {
            Json j;
            j["schema_version"] = kReportSchemaVersion;
            j["kind"] = "vfc_field";
            j["input"] = o.input;
            j["gamma"] = gamma;
            j["kernel_radius"] = o.radius;
            j["normalize"] = o.normalize;
            j["roughness"] = r;
            j["max_magnitude"] = f.max_magnitude();
            write_report(o.report, j);
            c.report_path = o.report;
        }
        return c;
    });
}

// ----------------------------------------------------------------- register

struct RegisterCommandOptions {
    std::string fixed;
    std::string moving;
    std::string config;
    std::string out_transform;
    std::string out_warped;
    std::string report;
    std::string preset;       // overrides gamma in every stage
    std::string truth;        // known transform; adds recovery error to the report
    std::string truth_roi;    // label image restricting the recovery error
    bool quiet = false;
};

inline CommandOutcome cmd_register(const RegisterCommandOptions& o, std::ostream& out, std::ostream& err) {
    return run_guarded("register", err, [&]() -> CommandOutcome {
        std::vector<StageConfig> pipeline = read_config(o.config);
        if (!o.preset.empty()) {
            const double g = preset_gamma(o.preset);
            for (auto& s : pipeline) s.representation.gamma = g;
        }
        const ScalarVolume fixed = read_scalar_volume(o.fixed);
        const ScalarVolume moving = read_scalar_volume(o.moving);
        RegisterOptions ro;
        ro.progress = o.quiet ? nullptr : &err;
        const RegistrationResult r = register_images(pipeline, fixed, moving, ro);

        Json report = registration_report(pipeline, r);
        std::optional<double> recovery;
        if (!o.truth.empty()) {
            const TransformPtr truth = read_transform(o.truth);
            std::optional<LabelVolume> roi;
            if (!o.truth_roi.empty()) roi = read_label_volume(o.truth_roi);
            recovery = mean_displacement_error(r.transform, *truth, fixed.geometry(), roi ? &*roi : nullptr);
            report["recovery_error_voxels"] = *recovery;
        }
        if (!o.out_transform.empty()) write_transform(o.out_transform, r.transform);
        if (!o.out_warped.empty()) write_metaimage(o.out_warped, resample(moving, r.transform, fixed.geometry()));

        CommandOutcome c;
        std::ostringstream s;
        for (const auto& t : r.traces) {
            s << "stage " << t.stage << " level " << t.level << " (factor " << t.factor << "): metric "
              << format_number(t.metric.front()) << " -> " << format_number(t.metric.back()) << " in " << t.iterations
              << " iterations" << (t.converged ? "" : " (not converged)") << "\n";
        }
        if (recovery) s << "recovery error: " << decimals(*recovery, 3) << " voxels\n";
        s << "wall time: " << decimals(r.wall_seconds, 2) << " s\n";
        c.summary = s.str();
        out << c.summary;
        if (!o.report.empty()) {
            write_report(o.report, report);
            c.report_path = o.report;
        }
        if (r.failed) {
            err << "vfs register: error: " << r.failure << "\n";
            c.exit_code = exit_code_for(r.failure_kind);
        }
        return c;
    });
}

// -------------------------------------------------------- translate-study

struct TranslateStudyOptions {
    std::string fixed;
    std::string moving;                 // defaults to the fixed image
    std::string representation = "vfc"; // comma-separated list
    std::string metric;                 // default: mdp for vector fields, ssd for intensity
    std::string gamma_list = "3";
    std::string preset;
    int radius = kDefaultKernelRadius;
    double noise = 0.0;                 // percent of dynamic range
    std::uint64_t seed = 0;
    int axis = 1;
    int range = 30;
    std::string out_csv;                // output prefix
    std::string report;
};

inline CommandOutcome cmd_translate_study(const TranslateStudyOptions& o, std::ostream& out, std::ostream& err) {
    return run_guarded("translate-study", err, [&]() -> CommandOutcome {
        if (o.range < 2) throw ParameterError("--range must be >= 2");
        const ScalarVolume fixed_clean = read_scalar_volume(o.fixed);
        const ScalarVolume moving_clean = o.moving.empty() ? fixed_clean : read_scalar_volume(o.moving);
        // Independent noise realisations for the two images.
        const ScalarVolume fixed = add_gaussian_noise(fixed_clean, o.noise, o.seed);
        const ScalarVolume moving = add_gaussian_noise(moving_clean, o.noise, o.seed + 1);

        std::vector<double> gammas =
            o.preset.empty() ? parse_list(o.gamma_list, "--gamma-list") : std::vector<double>{preset_gamma(o.preset)};
        Json all = Json::array();
        CommandOutcome c;
        std::ostringstream s;
        for (const std::string& rep_name : split_names(o.representation)) {
            ProfileConfig cfg;
            cfg.representation.kind = parse_representation(rep_name);
            cfg.representation.kernel_radius = o.radius;
            cfg.metric = !o.metric.empty()                                         ? parse_metric(o.metric)
                         : cfg.representation.kind == RepresentationKind::Intensity ? MetricKind::Ssd
                                                                                    : MetricKind::MeanDotProduct;
            cfg.axis = o.axis;
            cfg.min_shift = -o.range;
            cfg.max_shift = o.range;
            const bool sweep = cfg.representation.kind == RepresentationKind::Vfc;
            for (std::size_t gi = 0; gi < (sweep ? gammas.size() : 1); ++gi) {
                if (sweep) cfg.representation.gamma = gammas[gi];
                SimilarityProfile p = translation_profile(fixed, moving, cfg);
                p.noise_percent = o.noise;
                p.seed = o.seed;
                const BasinReport b = basin_analysis(p);
                const std::string tag = rep_name + (sweep ? "_g" + format_number(gammas[gi]) : "");
                Json j = basin_json(p, b);
                if (!o.out_csv.empty()) {
                    const std::string csv = o.out_csv + "_" + tag + ".csv";
                    write_profile_csv(csv, p);
                    write_report(o.out_csv + "_" + tag + ".json", j);
                    j["csv"] = std::filesystem::path(csv).filename().string();
                }
                all.push_back(j);
                s << tag << ": global_min=" << b.global_min_shift << " local_minima=" << b.local_minima_count
                  << " capture_range=" << b.capture_range << "\n";
            }
        }
        c.summary = s.str();
        out << c.summary;
        if (!o.report.empty()) {
            Json j;
            j["schema_version"] = kReportSchemaVersion;
            j["kind"] = "translation_study";
            j["profiles"] = all;
            write_report(o.report, j);
            c.report_path = o.report;
        }
        return c;
    });
}

// ------------------------------------------------------------------ eval-tre

struct EvalTreOptions {
    std::string fixed_lms;
    std::string moving_lms;
    std::string transform;   // identity when empty
    std::string geometry;    // image whose grid the landmark indices refer to
    std::string spacing;     // alternative to --geometry: "sx,sy[,sz]", origin 0
    int index_base = 0;
    std::string out;         // per-point CSV
    std::string report;
    std::string label;       // case name for the summary line
};

inline GridGeometry landmark_geometry(const EvalTreOptions& o) {
    if (!o.geometry.empty() && !o.spacing.empty()) throw ParameterError("give either --geometry or --spacing");
    if (!o.geometry.empty()) return read_metaimage_data(o.geometry).header.geometry;
    if (o.spacing.empty()) throw ParameterError("one of --geometry or --spacing is required");
    const std::vector<double> sp = parse_list(o.spacing, "--spacing");
    if (sp.size() != 2 && sp.size() != 3) throw ParameterError("--spacing needs 2 or 3 values");
    return GridGeometry(std::vector<std::size_t>(sp.size(), 1), sp);
}

inline CommandOutcome cmd_eval_tre(const EvalTreOptions& o, std::ostream& out, std::ostream& err) {
    return run_guarded("eval-tre", err, [&]() -> CommandOutcome {
        if (o.index_base != 0 && o.index_base != 1) throw ParameterError("--index-base must be 0 or 1");
        const GridGeometry g = landmark_geometry(o);
        const LandmarkSet fixed = read_landmarks_dirlab(o.fixed_lms, g, o.index_base);
        const LandmarkSet moving = read_landmarks_dirlab(o.moving_lms, g, o.index_base);
        const TransformPtr t =
            o.transform.empty() ? TransformPtr(std::make_unique<TranslationTransform>(g.ndim())) : read_transform(o.transform);
        if (t->ndim() != g.ndim()) throw GeometryError("transform dimensionality does not match the landmarks");
        const TreResult before = tre(fixed, moving, TranslationTransform(g.ndim()));
        const TreResult after = tre(fixed, moving, *t);

        CommandOutcome c;
        const std::string name = o.label.empty() ? "case" : o.label;
        c.summary = name + ": " + std::to_string(fixed.size()) + " landmarks, initial " + decimals(before.mean, 2) +
                    " (" + decimals(before.std, 2) + ") mm, registered " + decimals(after.mean, 2) + " (" +
                    decimals(after.std, 2) + ") mm";
        out << c.summary << "\n";
        out << "mean TRE: " << decimals(after.mean, 2) << " ± " << decimals(after.std, 2) << " mm\n";
        if (!o.out.empty()) write_tre_csv(o.out, after);
        if (!o.report.empty()) {
            Json j;
            j["schema_version"] = kReportSchemaVersion;
            j["kind"] = "tre";
            j["case"] = name;
            j["landmarks"] = fixed.size();
            j["index_base"] = o.index_base;
            j["initial"] = {{"mean_mm", before.mean}, {"std_mm", before.std}};
            j["registered"] = {{"mean_mm", after.mean}, {"std_mm", after.std}};
            j["per_point_mm"] = after.per_point;
            write_report(o.report, j);
            c.report_path = o.report;
        }
        return c;
    });
}

// ----------------------------------------------------------------- eval-dice

struct EvalDiceOptions {
    std::string labels_a;
    std::string labels_b;
    std::string label_list;  // default: every label present in either map
    std::string transform;   // optional; warps labels_b onto the grid of labels_a
    std::string out;
};

inline CommandOutcome cmd_eval_dice(const EvalDiceOptions& o, std::ostream& out, std::ostream& err) {
    return run_guarded("eval-dice", err, [&]() -> CommandOutcome {
        const LabelVolume a = read_label_volume(o.labels_a);
        LabelVolume b = read_label_volume(o.labels_b);
        if (!o.transform.empty()) b = warp_labels(b, *read_transform(o.transform), a.geometry());
        require_same_geometry(a.geometry(), b.geometry(), "eval-dice");

        std::vector<LabelVolume::Label> labels;
        if (o.label_list.empty()) {
            std::set<LabelVolume::Label> present;
            for (auto l : a.labels()) if (l) present.insert(l);
            for (auto l : b.labels()) if (l) present.insert(l);
            labels.assign(present.begin(), present.end());
            if (labels.empty()) throw UndefinedMetricError("eval-dice: both label maps are empty");
        } else {
            for (double v : parse_list(o.label_list, "--label-list")) {
                if (v < 1.0 || v != std::floor(v)) throw ParameterError("--label-list: labels are positive integers");
                labels.push_back(LabelVolume::Label(v));
            }
        }
        std::vector<double> scores;
        std::ostringstream s;
        for (auto l : labels) {
            scores.push_back(dice(a, b, l));
            s << "label " << l << ": " << decimals(scores.back(), 4) << "\n";
        }
        double mean = 0.0;
        for (double d : scores) mean += d;
        mean /= double(scores.size());
        double var = 0.0;
        for (double d : scores) var += (d - mean) * (d - mean);
        const double sd = std::sqrt(var / double(scores.size()));
        s << "mean Dice: " << decimals(mean, 4) << " ± " << decimals(sd, 4) << "\n";

        CommandOutcome c;
        c.summary = s.str();
        out << c.summary;
        if (!o.out.empty()) {
            Json j;
            j["schema_version"] = kReportSchemaVersion;
            j["kind"] = "dice";
            Json per = Json::array();
            for (std::size_t i = 0; i < labels.size(); ++i) per.push_back({{"label", labels[i]}, {"dice", scores[i]}});
            j["labels"] = per;
            j["mean"] = mean;
            j["std"] = sd;
            write_report(o.out, j);
            c.report_path = o.out;
        }
        return c;
    });
}

// ------------------------------------------------------------------ phantom

struct PhantomOptions {
    std::string kind = "body";     // body | brain-t1 | brain-t2 | dirlab-case
    std::string out;               // image path, or directory for dirlab-case
    std::size_t size = 64;
    double max_displacement = 0.0; // voxels; > 0 also writes a warped copy
    double grid_spacing = 16.0;    // control spacing of the synthetic warp, voxels
    std::uint64_t seed = 1;
    std::size_t landmarks = 300;
};

namespace detail {

/// A small case laid out like a DIR-Lab download: int16 .img payloads with
/// hand-style .mhd headers, 1-based integer landmark index files and a
/// pipeline config.
inline void write_dirlab_case(const PhantomOptions& o, std::ostream& out) {
    namespace fs = std::filesystem;
    const fs::path dir = o.out;
    fs::create_directories(dir / "Images");
    fs::create_directories(dir / "ExtremePhases");
    const GridGeometry g({o.size, o.size, o.size / 2}, {1.0, 1.0, 2.5});
    const phantom::Field f = phantom::body_field(phantom::extent_of(g), 800.0);
    const BSplineTransform warp = phantom::smooth_warp(g, o.grid_spacing, o.max_displacement, o.seed);
    const ScalarVolume fixed = phantom::rasterize(f, g);
    const ScalarVolume moving = phantom::warped_image(f, warp, g);

    auto write_image = [&](const std::string& stem, const ScalarVolume& v) {
        std::string header = "ObjectType = Image\nNDims = 3\nBinaryData = True\nBinaryDataByteOrderMSB = False\n";
        header += "ElementSpacing = 1 1 2.5\nDimSize = " + std::to_string(g.dim(0)) + " " + std::to_string(g.dim(1)) +
                  " " + std::to_string(g.dim(2)) + "\nElementType = MET_SHORT\nElementDataFile = " + stem + ".img\n";
        vfs::detail::write_file(dir / "Images" / (stem + ".mhd"), header);
        std::string payload;
        vfs::detail::encode<std::int16_t>(v.values(), payload);
        vfs::detail::write_file(dir / "Images" / (stem + ".img"), payload);
    };
    write_image("case1_T00", fixed);
    write_image("case1_T50", moving);

    // Landmarks on well-structured voxels inside the body: integer indices,
    // the moving partner is the true correspondence rounded to the grid.
    std::mt19937_64 rng(o.seed + 7);
    std::uniform_int_distribution<std::size_t> ux(0, g.dim(0) - 1), uy(0, g.dim(1) - 1), uz(0, g.dim(2) - 1);
    const VectorField grad = gradient(fixed);
    double gmax = 0.0;
    for (std::size_t i = 0; i < grad.size(); ++i) gmax = std::max(gmax, grad.magnitude(i));
    std::string lf, lm;
    std::size_t placed = 0;
    std::set<std::size_t> used;
    for (int attempt = 0; placed < o.landmarks && attempt < 1000000; ++attempt) {
        const Index3 p{ux(rng), uy(rng), uz(rng)};
        const std::size_t idx = g.linear(p[0], p[1], p[2]);
        if (used.count(idx) || fixed[idx] < 400.0 || grad.magnitude(idx) < 0.05 * gmax) continue;
        const Vec3 q = g.physical_to_index(warp.apply(g.voxel_to_physical(p[0], p[1], p[2])));
        Index3 r{};
        bool ok = true;
        for (int a = 0; a < 3; ++a) {
            const double v = std::round(q[a]);
            ok = ok && v >= 0.0 && v <= double(g.dim(a) - 1);
            r[a] = std::size_t(std::max(0.0, v));
        }
        if (!ok) continue;
        used.insert(idx);
        lf += std::to_string(p[0] + 1) + "\t" + std::to_string(p[1] + 1) + "\t" + std::to_string(p[2] + 1) + "\n";
        lm += std::to_string(r[0] + 1) + "\t" + std::to_string(r[1] + 1) + "\t" + std::to_string(r[2] + 1) + "\n";
        ++placed;
    }
    if (placed < o.landmarks) throw NumericalError("phantom: could not place all landmarks");
    vfs::detail::write_file(dir / "ExtremePhases" / "Case1_300_T00_xyz.txt", lf);
    vfs::detail::write_file(dir / "ExtremePhases" / "Case1_300_T50_xyz.txt", lm);
    vfs::detail::write_file(dir / "pipeline.cfg",
               "# affine then B-spline, VFC representation with the lung preset\n"
               "[stage]\ntransform = affine\nmetric = ssd\nrepresentation = vfc\npreset = lung\nlevels = 4,2\n"
               "\n[stage]\ntransform = bspline\nmetric = ssd\nrepresentation = vfc\npreset = lung\nlevels = 2,1\n"
               "grid_spacing = 8\n");
    write_transform(dir / "truth.json", warp);
    out << "wrote DIR-Lab style case to " << dir.string() << " (" << placed << " landmarks)\n";
}

}  // namespace detail

inline CommandOutcome cmd_phantom(const PhantomOptions& o, std::ostream& out, std::ostream& err) {
    return run_guarded("phantom", err, [&]() -> CommandOutcome {
        if (o.out.empty()) throw ParameterError("--out is required");
        if (o.size < 8) throw ParameterError("--size must be >= 8");
        if (o.kind == "dirlab-case") {
            detail::write_dirlab_case(o, out);
            return {};
        }
        phantom::Field f;
        GridGeometry g;
        if (o.kind == "body") {
            g = GridGeometry::cube(3, o.size);
            f = phantom::body_field(phantom::extent_of(g));
        } else if (o.kind == "brain-t1" || o.kind == "brain-t2") {
            g = GridGeometry::cube(2, o.size);
            f = phantom::brain_slice_field(o.size, o.kind == "brain-t1" ? phantom::Weighting::T1 : phantom::Weighting::T2);
        } else {
            throw ParameterError("--kind must be body, brain-t1, brain-t2 or dirlab-case");
        }
        write_metaimage(o.out, phantom::rasterize(f, g));
        if (o.max_displacement > 0.0) {
            const BSplineTransform warp = phantom::smooth_warp(g, o.grid_spacing, o.max_displacement, o.seed);
            const std::filesystem::path p = o.out;
            const std::filesystem::path base = p.parent_path() / p.stem();
            write_metaimage(base.string() + "_warped" + p.extension().string(), phantom::warped_image(f, warp, g));
            write_transform(base.string() + "_truth.json", warp);
        }
        out << "wrote " << o.out << "\n";
        return {};
    });
}

}  // namespace vfs::cli
