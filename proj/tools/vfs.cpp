// vfs: command-line front end. Flag parsing only; the commands live in
// include/vfs/cli.hpp.

#include <iostream>

#include <CLI11.hpp>

#include "vfs/cli.hpp"

int main(int argc, char** argv) {
    using namespace vfs::cli;
    CLI::App app{"Volumetric registration with vector field similarity"};
    app.require_subcommand(1);
    const std::vector<std::string> presets{"lung", "brain", "abdomen"};

    VfcFieldOptions vf;
    auto* c_vfc = app.add_subcommand("vfc-field", "Compute the VFC field of an image");
    c_vfc->add_option("--input", vf.input, "Input image (.mhd/.mha)")->required();
    c_vfc->add_option("--output", vf.output, "Output vector field (.mhd/.mha)");
    c_vfc->add_option("--gamma", vf.gamma, "Kernel exponent")->capture_default_str();
    c_vfc->add_option("--preset", vf.preset, "Anatomy preset for gamma")->check(CLI::IsMember(presets));
    c_vfc->add_option("--radius", vf.radius, "Kernel support radius in voxels")->capture_default_str();
    c_vfc->add_flag("--normalize,!--no-normalize", vf.normalize, "Normalise vector magnitudes (default on)");
    c_vfc->add_option("--method", vf.method, "auto, fourier or direct")->capture_default_str();
    c_vfc->add_option("--report", vf.report, "JSON report");

    RegisterCommandOptions rg;
    auto* c_reg = app.add_subcommand("register", "Register a moving image to a fixed image");
    c_reg->add_option("--fixed", rg.fixed, "Fixed image")->required();
    c_reg->add_option("--moving", rg.moving, "Moving image")->required();
    c_reg->add_option("--config", rg.config, "Pipeline config")->required();
    c_reg->add_option("--out-transform", rg.out_transform, "Transform file (JSON)");
    c_reg->add_option("--out-warped", rg.out_warped, "Moving image resampled onto the fixed grid");
    c_reg->add_option("--report", rg.report, "JSON report with per-level metric traces");
    c_reg->add_option("--preset", rg.preset, "Override gamma in every stage")->check(CLI::IsMember(presets));
    c_reg->add_option("--truth", rg.truth, "Known transform; reports the recovery error");
    c_reg->add_option("--truth-roi", rg.truth_roi, "Label image restricting the recovery error");
    c_reg->add_flag("--quiet", rg.quiet, "No progress lines");

    TranslateStudyOptions ts;
    auto* c_ts = app.add_subcommand("translate-study", "Similarity profiles under whole-voxel translations");
    c_ts->add_option("--fixed", ts.fixed, "Fixed image")->required();
    c_ts->add_option("--moving", ts.moving, "Moving image (default: the fixed image)");
    c_ts->add_option("--representation", ts.representation, "Comma-separated: vfc, ngf, intensity")
        ->capture_default_str();
    c_ts->add_option("--metric", ts.metric, "ssd, ncc, nmi or mean_dot_product");
    c_ts->add_option("--gamma-list", ts.gamma_list, "Comma-separated gamma values for vfc")->capture_default_str();
    c_ts->add_option("--preset", ts.preset, "Use the preset gamma")->check(CLI::IsMember(presets));
    c_ts->add_option("--radius", ts.radius, "Kernel support radius in voxels")->capture_default_str();
    c_ts->add_option("--noise", ts.noise, "Gaussian noise, percent of dynamic range")->capture_default_str();
    c_ts->add_option("--seed", ts.seed, "Noise seed")->capture_default_str();
    c_ts->add_option("--axis", ts.axis, "Shift axis")->capture_default_str();
    c_ts->add_option("--range", ts.range, "Shifts from -range to +range voxels")->capture_default_str();
    c_ts->add_option("--out-csv", ts.out_csv, "Output prefix; writes <prefix>_<setting>.csv and .json");
    c_ts->add_option("--report", ts.report, "Combined JSON report");

    EvalTreOptions et;
    auto* c_tre = app.add_subcommand("eval-tre", "Target registration error on landmark pairs");
    c_tre->add_option("--fixed-lms", et.fixed_lms, "Fixed landmark file")->required();
    c_tre->add_option("--moving-lms", et.moving_lms, "Moving landmark file")->required();
    c_tre->add_option("--transform", et.transform, "Transform file (default: identity)");
    c_tre->add_option("--geometry", et.geometry, "Image header the landmark indices refer to");
    c_tre->add_option("--spacing", et.spacing, "Voxel spacing sx,sy[,sz] instead of --geometry");
    c_tre->add_option("--index-base", et.index_base, "0 or 1")->capture_default_str();
    c_tre->add_option("--out", et.out, "Per-point CSV");
    c_tre->add_option("--report", et.report, "JSON report");
    c_tre->add_option("--label", et.label, "Case name for the summary");

    EvalDiceOptions ed;
    auto* c_dice = app.add_subcommand("eval-dice", "Dice overlap per label");
    c_dice->add_option("--labels-a", ed.labels_a, "Reference label image")->required();
    c_dice->add_option("--labels-b", ed.labels_b, "Second label image")->required();
    c_dice->add_option("--label-list", ed.label_list, "Comma-separated labels (default: all present)");
    c_dice->add_option("--transform", ed.transform, "Warp --labels-b onto --labels-a first");
    c_dice->add_option("--out", ed.out, "JSON report");

    PhantomOptions ph;
    auto* c_ph = app.add_subcommand("phantom", "Write synthetic test images");
    c_ph->add_option("--kind", ph.kind, "body, brain-t1, brain-t2 or dirlab-case")->capture_default_str();
    c_ph->add_option("--out", ph.out, "Output image, or directory for dirlab-case")->required();
    c_ph->add_option("--size", ph.size, "Grid size per axis")->capture_default_str();
    c_ph->add_option("--max-displacement", ph.max_displacement, "Synthetic warp size in voxels")->capture_default_str();
    c_ph->add_option("--grid-spacing", ph.grid_spacing, "Warp control spacing in voxels")->capture_default_str();
    c_ph->add_option("--seed", ph.seed, "Random seed")->capture_default_str();
    c_ph->add_option("--landmarks", ph.landmarks, "Landmark count for dirlab-case")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kSuccess : kUsage;
    }

    CommandOutcome r;
    if (*c_vfc) r = cmd_vfc_field(vf, std::cout, std::cerr);
    else if (*c_reg) r = cmd_register(rg, std::cout, std::cerr);
    else if (*c_ts) r = cmd_translate_study(ts, std::cout, std::cerr);
    else if (*c_tre) r = cmd_eval_tre(et, std::cout, std::cerr);
    else if (*c_dice) r = cmd_eval_dice(ed, std::cout, std::cerr);
    else if (*c_ph) r = cmd_phantom(ph, std::cout, std::cerr);
    return r.exit_code;
}
