#pragma once

// Text formats: DIR-Lab landmark lists, pipeline configs, transform files and
// JSON/CSV reports. Every writer is deterministic.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "vfs/error.hpp"
#include "vfs/evaluation.hpp"
#include "vfs/metaimage.hpp"
#include "vfs/registration.hpp"
#include "vfs/transforms.hpp"

namespace vfs {

using Json = nlohmann::ordered_json;

inline constexpr int kReportSchemaVersion = 1;

// ---------------------------------------------------------------- landmarks

/// One point per non-empty line, `ndim` whitespace-separated numbers.
/// `index_base` is subtracted so stored points are 0-based voxel indices.
inline LandmarkSet parse_landmarks(std::istream& in, const GridGeometry& geometry, int index_base = 0,
                                   const std::string& source = "landmarks") {
    LandmarkSet set;
    set.geometry = geometry;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::istringstream ls(line);
        std::vector<double> v;
        std::string tok;
        while (ls >> tok) {
            try {
                std::size_t used = 0;
                v.push_back(std::stod(tok, &used));
                if (used != tok.size()) throw std::invalid_argument(tok);
            } catch (const std::exception&) {
                throw IoError(source + ":" + std::to_string(line_no) + ": not a number: '" + tok + "'");
            }
        }
        if (int(v.size()) != geometry.ndim()) {
            throw IoError(source + ":" + std::to_string(line_no) + ": expected " + std::to_string(geometry.ndim()) +
                          " coordinates, found " + std::to_string(v.size()));
        }
        Vec3 p{0.0, 0.0, 0.0};
        for (int a = 0; a < geometry.ndim(); ++a) {
            if (!std::isfinite(v[a])) throw IoError(source + ":" + std::to_string(line_no) + ": non-finite coordinate");
            p[a] = v[a] - double(index_base);
        }
        set.points.push_back(p);
    }
    return set;
}

inline LandmarkSet read_landmarks_dirlab(const std::filesystem::path& path, const GridGeometry& geometry,
                                         int index_base = 0) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    return parse_landmarks(in, geometry, index_base, path.string());
}

inline void write_landmarks(const std::filesystem::path& path, const LandmarkSet& set, int index_base = 0) {
    std::string out;
    for (const Vec3& p : set.points) {
        for (int a = 0; a < set.geometry.ndim(); ++a) {
            out += (a ? "\t" : "") + format_number(p[a] + double(index_base));
        }
        out += "\n";
    }
    detail::write_file(path, out);
}

// ------------------------------------------------------------------ configs

/// Anatomy presets for the VFC exponent.
inline double preset_gamma(const std::string& name) {
    if (name == "lung") return 3.0;
    if (name == "brain") return 4.0;
    if (name == "abdomen") return 2.5;
    throw ParameterError("unknown preset '" + name + "' (expected lung, brain or abdomen)");
}

namespace detail {

inline double parse_double(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used != v.size() || !std::isfinite(d)) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ParameterError("config: invalid value for '" + key + "': '" + v + "'");
    }
}

inline long parse_int(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const long d = std::stol(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ParameterError("config: invalid value for '" + key + "': '" + v + "'");
    }
}

inline bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "yes" || v == "1") return true;
    if (v == "false" || v == "no" || v == "0") return false;
    throw ParameterError("config: invalid value for '" + key + "': '" + v + "'");
}

template <typename Fn>
auto with_key(const std::string& key, Fn&& fn) {
    try {
        return fn();
    } catch (const ParameterError& e) {
        const std::string what = e.what();
        if (what.find("'" + key + "'") != std::string::npos) throw;
        throw ParameterError("config: invalid value for '" + key + "': " + what);
    }
}

}  // namespace detail

/// Pipeline config: `[stage]` sections of `key = value` lines. Lines before
/// the first section open an implicit stage; `#` starts a comment.
///
/// Keys (defaults): transform (translation), metric (ssd), representation
/// (vfc), gamma (3.0), preset (lung|brain|abdomen, sets gamma),
/// kernel_radius (50), epsilon_center (1e-8), normalize (true), eta (0.1),
/// levels (4,2,1), iterations (250), step (1.0), min_step (0.01),
/// gradient (analytic|finite_difference), grid_spacing (8 voxels, doubled for
/// every later B-spline stage when not given), bins (32), mask (label image
/// path, relative to the config file).
inline std::vector<StageConfig> parse_config(const std::string& text, const std::filesystem::path& base_dir = {}) {
    std::vector<StageConfig> stages;
    std::vector<bool> spacing_given;
    std::istringstream in(text);
    std::string raw;
    int line_no = 0;
    bool in_stage = false;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string line = raw.substr(0, raw.find('#'));
        line = detail::trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line != "[stage]") throw ParameterError("config:" + std::to_string(line_no) + ": unknown section " + line);
            stages.emplace_back();
            spacing_given.push_back(false);
            in_stage = true;
            continue;
        }
        // Whitespace-separated key=value pairs may share a line.
        std::vector<std::pair<std::string, std::string>> pairs;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ParameterError("config:" + std::to_string(line_no) + ": expected key = value");
        if (line.find('=', eq + 1) == std::string::npos) {
            pairs.emplace_back(detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
        } else {
            std::istringstream ls(line);
            std::string tok;
            while (ls >> tok) {
                const auto e = tok.find('=');
                if (e == std::string::npos || e == 0) {
                    throw ParameterError("config:" + std::to_string(line_no) + ": expected key=value, got '" + tok + "'");
                }
                pairs.emplace_back(tok.substr(0, e), tok.substr(e + 1));
            }
        }
        if (!in_stage) {
            stages.emplace_back();
            spacing_given.push_back(false);
            in_stage = true;
        }
        StageConfig& s = stages.back();
        for (const auto& [key, value] : pairs) {
            if (value.empty()) throw ParameterError("config: empty value for '" + key + "'");
            if (key == "transform") {
                s.transform = detail::with_key(key, [&] { return parse_transform_kind(value); });
            } else if (key == "metric") {
                s.metric = detail::with_key(key, [&] { return parse_metric(value); });
            } else if (key == "representation") {
                s.representation.kind = detail::with_key(key, [&] { return parse_representation(value); });
            } else if (key == "gamma") {
                s.representation.gamma = detail::parse_double(key, value);
                if (!(s.representation.gamma > 0.0)) throw ParameterError("config: invalid value for 'gamma': must be > 0");
            } else if (key == "preset") {
                s.representation.gamma = detail::with_key(key, [&] { return preset_gamma(value); });
            } else if (key == "kernel_radius") {
                const long r = detail::parse_int(key, value);
                if (r < 1) throw ParameterError("config: invalid value for 'kernel_radius': must be >= 1");
                s.representation.kernel_radius = int(r);
            } else if (key == "epsilon_center") {
                s.representation.epsilon_center = detail::parse_double(key, value);
                if (!(s.representation.epsilon_center > 0.0)) throw ParameterError("config: invalid value for 'epsilon_center'");
            } else if (key == "normalize") {
                s.representation.normalize = detail::parse_bool(key, value);
            } else if (key == "eta") {
                s.representation.eta = detail::parse_double(key, value);
                if (!(s.representation.eta > 0.0)) throw ParameterError("config: invalid value for 'eta'");
            } else if (key == "levels") {
                s.levels.clear();
                std::string item;
                std::istringstream ls(value);
                while (std::getline(ls, item, ',')) {
                    const long f = detail::parse_int(key, detail::trim(item));
                    if (f < 1) throw ParameterError("config: invalid value for 'levels': factors must be >= 1");
                    s.levels.push_back(std::size_t(f));
                }
            } else if (key == "iterations") {
                const long it = detail::parse_int(key, value);
                if (it < 1) throw ParameterError("config: invalid value for 'iterations': must be >= 1");
                s.optimizer.iterations = int(it);
            } else if (key == "step") {
                s.optimizer.initial_step = detail::parse_double(key, value);
                if (!(s.optimizer.initial_step > 0.0)) throw ParameterError("config: invalid value for 'step'");
            } else if (key == "min_step") {
                s.optimizer.min_step = detail::parse_double(key, value);
                if (!(s.optimizer.min_step > 0.0)) throw ParameterError("config: invalid value for 'min_step'");
            } else if (key == "gradient") {
                if (value == "analytic") {
                    s.optimizer.gradient = GradientMode::Analytic;
                } else if (value == "finite_difference") {
                    s.optimizer.gradient = GradientMode::FiniteDifference;
                } else {
                    throw ParameterError("config: invalid value for 'gradient': '" + value + "'");
                }
            } else if (key == "grid_spacing") {
                s.grid_spacing = detail::parse_double(key, value);
                if (!(s.grid_spacing > 0.0)) throw ParameterError("config: invalid value for 'grid_spacing'");
                spacing_given.back() = true;
            } else if (key == "bins") {
                const long b = detail::parse_int(key, value);
                if (b < 2) throw ParameterError("config: invalid value for 'bins': must be >= 2");
                s.bins = int(b);
            } else if (key == "mask") {
                std::filesystem::path p = value;
                if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
                s.mask_path = p.string();
                s.mask = std::make_shared<const LabelVolume>(read_label_volume(p));
            } else {
                throw ParameterError("config: unknown key '" + key + "'");
            }
        }
    }
    if (stages.empty()) throw ParameterError("config: no stages defined");
    for (std::size_t i = 0; i < stages.size(); ++i) {
        if (stages[i].transform != TransformKind::BSpline || spacing_given[i]) continue;
        int later = 0;
        for (std::size_t j = i + 1; j < stages.size(); ++j) later += stages[j].transform == TransformKind::BSpline;
        stages[i].grid_spacing = kDefaultGridSpacing * std::pow(2.0, later);
    }
    for (const auto& s : stages) s.validate();
    return stages;
}

inline std::vector<StageConfig> read_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path.parent_path());
}

// --------------------------------------------------------------- transforms

namespace detail {

inline Json vec_json(const Vec3& v, int n) {
    Json a = Json::array();
    for (int i = 0; i < n; ++i) a.push_back(v[i]);
    return a;
}

inline Vec3 json_vec(const Json& j, int n) {
    if (!j.is_array() || int(j.size()) != n) throw IoError("transform file: expected " + std::to_string(n) + "-vector");
    Vec3 v{0.0, 0.0, 0.0};
    for (int i = 0; i < n; ++i) v[i] = j[i].get<double>();
    return v;
}

inline Json geometry_json(const GridGeometry& g) {
    Json j;
    Json dims = Json::array();
    for (int a = 0; a < g.ndim(); ++a) dims.push_back(g.dim(a));
    j["dims"] = dims;
    j["spacing"] = vec_json(g.spacing(), g.ndim());
    j["origin"] = vec_json(g.origin(), g.ndim());
    return j;
}

inline GridGeometry json_geometry(const Json& j) {
    const auto dims = j.at("dims").get<std::vector<std::size_t>>();
    return GridGeometry(dims, j.at("spacing").get<std::vector<double>>(), j.at("origin").get<std::vector<double>>());
}

inline Json transform_json(const Transform& t) {
    Json j;
    j["kind"] = std::string(t.kind());
    j["ndim"] = t.ndim();
    const int n = t.ndim();
    if (const auto* tr = dynamic_cast<const TranslationTransform*>(&t)) {
        j["offset"] = vec_json(tr->offset(), n);
    } else if (const auto* af = dynamic_cast<const AffineTransform*>(&t)) {
        Json m = Json::array();
        for (int r = 0; r < n; ++r) m.push_back(vec_json(af->matrix()[r], n));
        j["matrix"] = m;
        j["offset"] = vec_json(af->offset(), n);
        j["center"] = vec_json(af->center(), n);
    } else if (const auto* bs = dynamic_cast<const BSplineTransform*>(&t)) {
        j["control_grid"] = geometry_json(bs->control_grid());
        j["coefficients"] = bs->coefficients();
    } else if (const auto* c = dynamic_cast<const CompositeTransform*>(&t)) {
        Json items = Json::array();
        for (std::size_t i = 0; i < c->size(); ++i) items.push_back(transform_json(c->at(i)));
        j["transforms"] = items;
    } else {
        throw IoError("transform file: unsupported transform kind");
    }
    return j;
}

inline TransformPtr json_transform(const Json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    const int n = j.at("ndim").get<int>();
    if (kind == "translation") return std::make_unique<TranslationTransform>(n, json_vec(j.at("offset"), n));
    if (kind == "affine") {
        AffineTransform::Matrix m{};
        const Json& rows = j.at("matrix");
        if (!rows.is_array() || int(rows.size()) != n) throw IoError("transform file: bad affine matrix");
        for (int r = 0; r < n; ++r) m[r] = json_vec(rows[r], n);
        return std::make_unique<AffineTransform>(n, m, json_vec(j.at("offset"), n), json_vec(j.at("center"), n));
    }
    if (kind == "bspline") {
        auto t = std::make_unique<BSplineTransform>(json_geometry(j.at("control_grid")));
        t->set_parameters(j.at("coefficients").get<std::vector<double>>());
        return t;
    }
    if (kind == "composite") {
        auto c = std::make_unique<CompositeTransform>();
        for (const Json& item : j.at("transforms")) c->append(*json_transform(item));
        return c;
    }
    throw IoError("transform file: unknown kind '" + kind + "'");
}

inline void write_json_file(const std::filesystem::path& path, const Json& j) {
    write_file(path, j.dump(2) + "\n");
}

}  // namespace detail

inline void write_transform(const std::filesystem::path& path, const Transform& t) {
    Json j;
    j["schema_version"] = kReportSchemaVersion;
    j["transform"] = detail::transform_json(t);
    detail::write_json_file(path, j);
}

inline TransformPtr read_transform(const std::filesystem::path& path) {
    try {
        const Json j = Json::parse(detail::read_file(path));
        return detail::json_transform(j.at("transform"));
    } catch (const nlohmann::json::exception& e) {
        throw IoError("transform file '" + path.string() + "': " + e.what());
    }
}

// ------------------------------------------------------------------ reports

inline Json stage_json(const StageConfig& s) {
    Json j;
    j["transform"] = to_string(s.transform);
    j["metric"] = to_string(s.metric);
    j["representation"] = to_string(s.representation.kind);
    if (s.representation.kind == RepresentationKind::Vfc) {
        j["gamma"] = s.representation.gamma;
        j["kernel_radius"] = s.representation.kernel_radius;
        j["normalize"] = s.representation.normalize;
    }
    j["levels"] = s.levels;
    j["iterations"] = s.optimizer.iterations;
    if (s.transform == TransformKind::BSpline) j["grid_spacing"] = s.grid_spacing;
    if (s.metric == MetricKind::Nmi) j["bins"] = s.bins;
    if (!s.mask_path.empty()) j["mask"] = s.mask_path;
    return j;
}

/// Registration report. Wall time is left out so that reruns are
/// byte-identical.
inline Json registration_report(const std::vector<StageConfig>& pipeline, const RegistrationResult& r) {
    Json j;
    j["schema_version"] = kReportSchemaVersion;
    j["kind"] = "registration";
    Json stages = Json::array();
    for (const auto& s : pipeline) stages.push_back(stage_json(s));
    j["stages"] = stages;
    Json levels = Json::array();
    for (const auto& t : r.traces) {
        Json l;
        l["stage"] = t.stage;
        l["level"] = t.level;
        l["factor"] = t.factor;
        l["iterations"] = t.iterations;
        l["converged"] = t.converged;
        l["initial_metric"] = t.metric.front();
        l["final_metric"] = t.metric.back();
        l["trace"] = t.metric;
        levels.push_back(l);
    }
    j["levels"] = levels;
    j["converged"] = r.converged;
    j["failed"] = r.failed;
    if (r.failed) j["failure"] = r.failure;
    j["transform"] = detail::transform_json(r.transform);
    return j;
}

inline void write_report(const std::filesystem::path& path, const Json& report) { detail::write_json_file(path, report); }

inline Json read_report(const std::filesystem::path& path) {
    try {
        return Json::parse(detail::read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw IoError("report '" + path.string() + "': " + e.what());
    }
}

inline std::string profile_csv(const SimilarityProfile& p) {
    std::string s = "shift,value\n";
    for (std::size_t i = 0; i < p.shifts.size(); ++i) {
        s += std::to_string(p.shifts[i]) + "," + format_number(p.values[i]) + "\n";
    }
    return s;
}

inline void write_profile_csv(const std::filesystem::path& path, const SimilarityProfile& p) {
    detail::write_file(path, profile_csv(p));
}

inline Json basin_json(const SimilarityProfile& p, const BasinReport& b) {
    Json j;
    j["schema_version"] = kReportSchemaVersion;
    j["kind"] = "translation_profile";
    j["metric"] = p.metric;
    j["representation"] = p.representation;
    if (p.representation == "vfc") j["gamma"] = p.gamma;
    j["noise_percent"] = p.noise_percent;
    j["seed"] = p.seed;
    j["axis"] = p.axis;
    j["shift_min"] = p.shifts.front();
    j["shift_max"] = p.shifts.back();
    j["support_voxels"] = p.support_voxels;
    Json basin;
    basin["global_min_shift"] = b.global_min_shift;
    basin["local_minima_count"] = b.local_minima_count;
    basin["capture_range"] = b.capture_range;
    basin["capture_left"] = b.capture_left;
    basin["capture_right"] = b.capture_right;
    j["basin"] = basin;
    return j;
}

inline std::string tre_csv(const TreResult& r) {
    std::string s = "landmark,tre_mm\n";
    for (std::size_t i = 0; i < r.per_point.size(); ++i) {
        s += std::to_string(i) + "," + format_number(r.per_point[i]) + "\n";
    }
    return s;
}

inline void write_tre_csv(const std::filesystem::path& path, const TreResult& r) { detail::write_file(path, tre_csv(r)); }

}  // namespace vfs
