#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include <gtest/gtest.h>

#include "vfs/cli.hpp"

using namespace vfs;
using namespace vfs::cli;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    auto dir = fs::temp_directory_path() / "vfs_test_cli";
    fs::create_directories(dir);
    return dir / name;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(VFS_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

const fs::path& brain_t1() {
    static const fs::path p = [] {
        const fs::path out = scratch("brain_t1.mhd");
        std::ostringstream o, e;
        cmd_phantom({"brain-t1", out.string(), 64}, o, e);
        return out;
    }();
    return p;
}

}  // namespace

TEST(ExitCodes, ErrorKindMapping) {
    EXPECT_EQ(exit_code_for(ErrorKind::Parameter), 1);
    EXPECT_EQ(exit_code_for(ErrorKind::Geometry), 2);
    EXPECT_EQ(exit_code_for(ErrorKind::UndefinedMetric), 2);
    EXPECT_EQ(exit_code_for(ErrorKind::Io), 2);
    EXPECT_EQ(exit_code_for(ErrorKind::Numerical), 3);
}

TEST(ExitCodes, Binary) {
    EXPECT_EQ(run_cli("--help"), 0);
    EXPECT_EQ(run_cli(""), 1);
    EXPECT_EQ(run_cli("frobnicate"), 1);
    EXPECT_EQ(run_cli("vfc-field"), 1);
    EXPECT_EQ(run_cli("vfc-field --input " + brain_t1().string() + " --preset knee"), 1);
    EXPECT_EQ(run_cli("vfc-field --input " + scratch("absent.mhd").string()), 2);
    EXPECT_EQ(run_cli("vfc-field --input " + brain_t1().string() + " --gamma -2"), 1);
    EXPECT_EQ(run_cli("vfc-field --input " + brain_t1().string() + " --radius 8"), 0);
}

TEST(VfcField, WritesFieldAndReport) {
    std::ostringstream out, err;
    VfcFieldOptions o;
    o.input = brain_t1().string();
    o.output = scratch("field.mhd").string();
    o.report = scratch("field.json").string();
    o.preset = "brain";
    o.radius = 12;
    const auto r = cmd_vfc_field(o, out, err);
    ASSERT_EQ(r.exit_code, 0) << err.str();
    EXPECT_NE(out.str().find("gamma=4"), std::string::npos);
    const VectorField f = read_vector_field(o.output);
    EXPECT_EQ(f.ncomponents(), 2);
    EXPECT_LE(f.max_magnitude(), 1.0 + 1e-6);
    const Json j = read_report(o.report);
    EXPECT_EQ(j.at("schema_version"), 1);
}

TEST(VfcField, FlatImageWarns) {
    const auto p = scratch("flat.mhd");
    write_metaimage(p, ScalarVolume(GridGeometry({16, 16}), 5.0));
    std::ostringstream out, err;
    VfcFieldOptions o;
    o.input = p.string();
    o.radius = 4;
    EXPECT_EQ(cmd_vfc_field(o, out, err).exit_code, 0);
    EXPECT_NE(err.str().find("warning"), std::string::npos);
}

TEST(TranslateStudy, WritesProfilesPerSetting) {
    std::ostringstream out, err;
    TranslateStudyOptions o;
    o.fixed = brain_t1().string();
    o.representation = "vfc,ngf,intensity";
    o.gamma_list = "2.5,4";
    o.radius = 16;
    o.range = 5;
    o.noise = 2.0;
    o.seed = 3;
    o.out_csv = scratch("study").string();
    o.report = scratch("study.json").string();
    const auto r = cmd_translate_study(o, out, err);
    ASSERT_EQ(r.exit_code, 0) << err.str();
    for (const char* tag : {"vfc_g2.5", "vfc_g4", "ngf", "intensity"}) {
        const fs::path csv = scratch(std::string("study_") + tag + ".csv");
        ASSERT_TRUE(fs::exists(csv)) << csv;
        const std::string text = slurp(csv);
        EXPECT_EQ(text.rfind("shift,value\n-5,", 0), 0u);
        const Json j = read_report(scratch(std::string("study_") + tag + ".json"));
        EXPECT_EQ(j.at("basin").at("global_min_shift"), 0);
    }
    EXPECT_EQ(read_report(o.report).at("profiles").size(), 4u);
    o.metric = "jaccard";
    EXPECT_EQ(cmd_translate_study(o, out, err).exit_code, 1);
}

TEST(EvalTre, SpacingAndIndexBase) {
    vfs::detail::write_file(scratch("f.txt"), "1 1 1\n2 2 2\n");
    vfs::detail::write_file(scratch("m.txt"), "1 1 2\n2 5 2\n");
    std::ostringstream out, err;
    EvalTreOptions o;
    o.fixed_lms = scratch("f.txt").string();
    o.moving_lms = scratch("m.txt").string();
    o.spacing = "1,1,2.5";
    o.index_base = 1;
    o.label = "toy";
    o.out = scratch("tre.csv").string();
    ASSERT_EQ(cmd_eval_tre(o, out, err).exit_code, 0) << err.str();
    EXPECT_NE(out.str().find("toy: 2 landmarks, initial 2.75 (0.25) mm, registered 2.75 (0.25) mm"), std::string::npos);
    EXPECT_NE(out.str().find("mean TRE: 2.75 ± 0.25 mm"), std::string::npos);
    EXPECT_EQ(slurp(o.out), "landmark,tre_mm\n0,2.5\n1,3\n");

    o.index_base = 2;
    EXPECT_EQ(cmd_eval_tre(o, out, err).exit_code, 1);
    o.index_base = 0;
    vfs::detail::write_file(scratch("m3.txt"), "1 1 2\n");
    o.moving_lms = scratch("m3.txt").string();
    EXPECT_EQ(cmd_eval_tre(o, out, err).exit_code, 2);
}

TEST(EvalDice, PerLabelAndMean) {
    const GridGeometry g({4, 4});
    LabelVolume a(g), b(g);
    for (std::size_t i = 0; i < 8; ++i) a[i] = 1;
    for (std::size_t i = 4; i < 12; ++i) b[i] = 1;
    a[15] = b[15] = 2;
    write_metaimage(scratch("a.mhd"), a);
    write_metaimage(scratch("b.mhd"), b);
    std::ostringstream out, err;
    EvalDiceOptions o{scratch("a.mhd").string(), scratch("b.mhd").string(), "", "", scratch("dice.json").string()};
    ASSERT_EQ(cmd_eval_dice(o, out, err).exit_code, 0) << err.str();
    EXPECT_NE(out.str().find("label 1: 0.5000"), std::string::npos);
    EXPECT_NE(out.str().find("label 2: 1.0000"), std::string::npos);
    EXPECT_NE(out.str().find("mean Dice: 0.7500 ± 0.2500"), std::string::npos);
    o.label_list = "3";
    EXPECT_EQ(cmd_eval_dice(o, out, err).exit_code, 2);
}

TEST(Register, ConfigErrorsAreUsageErrors) {
    vfs::detail::write_file(scratch("bad.cfg"), "transform=affine speed=fast\n");
    std::ostringstream out, err;
    RegisterCommandOptions o;
    o.fixed = o.moving = brain_t1().string();
    o.config = scratch("bad.cfg").string();
    EXPECT_EQ(cmd_register(o, out, err).exit_code, 1);
    EXPECT_NE(err.str().find("unknown key 'speed'"), std::string::npos);
}

TEST(Register, WritesTransformReportAndRecovery) {
    const fs::path img = scratch("body.mhd");
    std::ostringstream out, err;
    PhantomOptions ph;
    ph.kind = "body";
    ph.out = img.string();
    ph.size = 24;
    ph.max_displacement = 1.0;
    ph.grid_spacing = 8;
    ASSERT_EQ(cmd_phantom(ph, out, err).exit_code, 0) << err.str();
    vfs::detail::write_file(scratch("affine.cfg"), "transform=affine metric=ssd representation=vfc kernel_radius=12 levels=2,1\n");
    RegisterCommandOptions o;
    o.fixed = img.string();
    o.moving = scratch("body_warped.mhd").string();
    o.config = scratch("affine.cfg").string();
    o.out_transform = scratch("reg.json").string();
    o.out_warped = scratch("reg_warped.mhd").string();
    o.report = scratch("reg_report.json").string();
    o.truth = scratch("body_truth.json").string();
    o.quiet = true;
    ASSERT_EQ(cmd_register(o, out, err).exit_code, 0) << err.str();
    EXPECT_NE(out.str().find("recovery error:"), std::string::npos);
    const Json rep = read_report(o.report);
    EXPECT_EQ(rep.at("levels").size(), 2u);
    EXPECT_TRUE(rep.contains("recovery_error_voxels"));
    EXPECT_EQ(read_transform(o.out_transform)->kind(), "composite");
    EXPECT_TRUE(fs::exists(o.out_warped));
    // Same inputs, same report bytes.
    const std::string first = slurp(o.report);
    ASSERT_EQ(cmd_register(o, out, err).exit_code, 0);
    EXPECT_EQ(slurp(o.report), first);
}

TEST(Phantom, DirlabCaseLayout) {
    const fs::path dir = scratch("case");
    fs::remove_all(dir);
    std::ostringstream out, err;
    PhantomOptions o;
    o.kind = "dirlab-case";
    o.out = dir.string();
    o.size = 24;
    o.max_displacement = 2.0;
    o.landmarks = 20;
    ASSERT_EQ(cmd_phantom(o, out, err).exit_code, 0) << err.str();
    const ScalarVolume t00 = read_scalar_volume(dir / "Images" / "case1_T00.mhd");
    EXPECT_EQ(t00.geometry(), GridGeometry({24, 24, 12}, {1.0, 1.0, 2.5}));
    const LandmarkSet lm = read_landmarks_dirlab(dir / "ExtremePhases" / "Case1_300_T00_xyz.txt", t00.geometry(), 1);
    EXPECT_EQ(lm.size(), 20u);
    EXPECT_NO_THROW(read_config(dir / "pipeline.cfg"));
    o.kind = "torus";
    EXPECT_EQ(cmd_phantom(o, out, err).exit_code, 1);
}
