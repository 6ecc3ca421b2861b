#pragma once

// Multi-stage, multi-resolution registration. Each stage optimises one
// transform model; its representation (intensity, VFC or NGF channels) only
// changes what is fed to the metric.

#include <chrono>
#include <cmath>
#include <cstddef>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "vfs/error.hpp"
#include "vfs/interpolate.hpp"
#include "vfs/metrics.hpp"
#include "vfs/representations.hpp"
#include "vfs/resample.hpp"
#include "vfs/transforms.hpp"
#include "vfs/volume.hpp"

namespace vfs {

enum class TransformKind { Translation, Affine, BSpline };

inline std::string to_string(TransformKind k) {
    switch (k) {
        case TransformKind::Translation: return "translation";
        case TransformKind::Affine: return "affine";
        case TransformKind::BSpline: return "bspline";
    }
    return "?";
}

inline TransformKind parse_transform_kind(const std::string& s) {
    if (s == "translation") return TransformKind::Translation;
    if (s == "affine") return TransformKind::Affine;
    if (s == "bspline") return TransformKind::BSpline;
    throw ParameterError("unknown transform '" + s + "' (expected translation, affine or bspline)");
}

enum class GradientMode { Analytic, FiniteDifference };

struct OptimizerSettings {
    int iterations = 250;             // per level
    double initial_step = 1.0;        // voxels of the current level
    double min_step = 0.01;           // voxels of the current level
    double grow = 1.2;
    double shrink = 0.5;
    double relative_tolerance = 1e-6;
    int tolerance_window = 10;
    GradientMode gradient = GradientMode::Analytic;
    double fd_step = 0.05;            // voxels, finite-difference probe size
};

inline constexpr double kDefaultGridSpacing = 8.0;

struct StageConfig {
    TransformKind transform = TransformKind::Translation;
    MetricKind metric = MetricKind::Ssd;
    RepresentationConfig representation;
    std::vector<std::size_t> levels{4, 2, 1};  // downsample factors, coarse to fine
    OptimizerSettings optimizer;
    double grid_spacing = kDefaultGridSpacing;  // B-spline control spacing, fixed-image voxels
    int bins = kDefaultHistogramBins;
    std::shared_ptr<const LabelVolume> mask;    // fixed-image mask; metric only
    std::string mask_path;                      // provenance of `mask`, if loaded from disk

    void validate() const {
        if (levels.empty()) throw ParameterError("stage: at least one pyramid level required");
        for (std::size_t i = 0; i < levels.size(); ++i) {
            if (levels[i] < 1) throw ParameterError("stage: level factors must be >= 1");
            if (i > 0 && levels[i] > levels[i - 1]) throw ParameterError("stage: levels must go coarse to fine");
        }
        if (optimizer.iterations < 1) throw ParameterError("stage: iterations must be >= 1");
        if (!(grid_spacing > 0.0)) throw ParameterError("stage: grid_spacing must be > 0");
        if (bins < 2) throw ParameterError("stage: bins must be >= 2");
    }
};

/// Everything needed to evaluate the objective at one pyramid level.
struct LevelProblem {
    GridGeometry fixed_geometry;
    GridGeometry moving_geometry;
    std::vector<ScalarVolume> fixed;   // representation channels on the fixed grid
    std::vector<ScalarVolume> moving;  // representation channels on the moving grid (unwarped)
    std::vector<std::size_t> voxels;   // fixed-grid voxels entering the metric
    ChannelMetricOptions metric;
};

inline LevelProblem make_level_problem(std::vector<ScalarVolume> fixed_channels,
                                       std::vector<ScalarVolume> moving_channels, MetricKind metric,
                                       const LabelVolume* mask = nullptr, int bins = kDefaultHistogramBins) {
    if (fixed_channels.empty() || fixed_channels.size() != moving_channels.size()) {
        throw GeometryError("objective: fixed and moving representations need the same channel count");
    }
    LevelProblem p;
    p.fixed_geometry = fixed_channels.front().geometry();
    p.moving_geometry = moving_channels.front().geometry();
    if (p.fixed_geometry.ndim() != p.moving_geometry.ndim()) throw GeometryError("objective: dimensionality mismatch");
    p.fixed = std::move(fixed_channels);
    p.moving = std::move(moving_channels);
    p.voxels = selected_voxels(p.fixed_geometry, mask);
    p.metric.kind = metric;
    p.metric.bins = bins;
    if (metric == MetricKind::Nmi) {
        // Histogram ranges come from the unwarped inputs and stay fixed.
        std::vector<std::size_t> all(p.moving_geometry.voxel_count());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
        for (std::size_t c = 0; c < p.fixed.size(); ++c) {
            p.metric.fixed_ranges.push_back(range_of(p.fixed[c].values(), p.voxels));
            p.metric.moving_ranges.push_back(range_of(p.moving[c].values(), all));
        }
    }
    return p;
}

/// Oriented metric of the moving channels warped by `t` onto the fixed grid.
/// Points mapped outside the moving grid take the nearest border value.
/// With `gradient` non-null, also d(value)/d(parameters of t).
inline double evaluate_objective(const LevelProblem& p, const Transform& t, std::vector<double>* gradient = nullptr) {
    const std::size_t n = p.fixed_geometry.voxel_count();
    const std::size_t nc = p.fixed.size();
    const std::vector<Vec3> mapped = t.apply_to_grid(p.fixed_geometry);
    std::vector<std::vector<double>> warped(nc, std::vector<double>(n, 0.0));
    std::vector<std::vector<Vec3>> spatial;
    if (gradient != nullptr) spatial.assign(nc, std::vector<Vec3>(n, Vec3{0.0, 0.0, 0.0}));
    for (std::size_t i : p.voxels) {
        const LinearStencil st = make_stencil(p.moving_geometry, mapped[i], Boundary::Clamp);
        if (!st.inside) continue;
        for (std::size_t c = 0; c < nc; ++c) {
            warped[c][i] = apply_stencil(st, p.moving[c].values(), 0.0);
            if (gradient != nullptr) spatial[c][i] = apply_stencil_gradient(st, p.moving[c].values());
        }
    }
    std::vector<const std::vector<double>*> fptr, wptr;
    for (std::size_t c = 0; c < nc; ++c) {
        fptr.push_back(&p.fixed[c].values());
        wptr.push_back(&warped[c]);
    }
    std::vector<std::vector<double>> deriv;
    const double value = evaluate_channels(fptr, wptr, p.voxels, p.metric, gradient != nullptr ? &deriv : nullptr);
    if (!std::isfinite(value)) throw NumericalError("objective is not finite");
    if (gradient != nullptr) {
        std::vector<Vec3> forces(n, Vec3{0.0, 0.0, 0.0});
        for (std::size_t i : p.voxels) {
            Vec3 f{0.0, 0.0, 0.0};
            for (std::size_t c = 0; c < nc; ++c) f = f + deriv[c][i] * spatial[c][i];
            forces[i] = f;
        }
        *gradient = t.parameter_gradient(p.fixed_geometry, forces);
    }
    return value;
}

/// Metric between precomputed representations after warping the moving one
/// by `t` onto the fixed grid (component-wise for fields).
inline MetricValue objective(const VectorField& fixed_rep, const VectorField& moving_rep, const Transform& t,
                             MetricKind metric, const LabelVolume* mask = nullptr, int bins = kDefaultHistogramBins) {
    const LevelProblem p = make_level_problem(fixed_rep.components(), moving_rep.components(), metric, mask, bins);
    const double v = evaluate_objective(p, t);
    const Orientation o = orientation_of(metric);
    return {o == Orientation::Minimize ? v : -v, o};
}

inline MetricValue objective(const ScalarVolume& fixed, const ScalarVolume& moving, const Transform& t,
                             MetricKind metric, const LabelVolume* mask = nullptr, int bins = kDefaultHistogramBins) {
    const LevelProblem p = make_level_problem({fixed}, {moving}, metric, mask, bins);
    const double v = evaluate_objective(p, t);
    const Orientation o = orientation_of(metric);
    return {o == Orientation::Minimize ? v : -v, o};
}

enum class FiniteDifferenceStencil { Central, FivePoint };

/// Finite-difference gradient of the objective; probe size `step_mm`
/// divided by each parameter's scale.
inline std::vector<double> finite_difference_gradient(const LevelProblem& p, const Transform& t, double step_mm,
                                                      FiniteDifferenceStencil stencil = FiniteDifferenceStencil::Central) {
    const std::vector<double> theta = t.parameters();
    const std::vector<double> scales = t.parameter_scales(p.fixed_geometry);
    std::vector<double> g(theta.size(), 0.0);
    TransformPtr probe = t.clone();
    auto at = [&](std::size_t k, double delta) {
        std::vector<double> q = theta;
        q[k] += delta;
        probe->set_parameters(q);
        return evaluate_objective(p, *probe);
    };
    for (std::size_t k = 0; k < theta.size(); ++k) {
        const double h = step_mm / scales[k];
        if (stencil == FiniteDifferenceStencil::Central) {
            g[k] = (at(k, h) - at(k, -h)) / (2.0 * h);
        } else {
            g[k] = (-at(k, 2.0 * h) + 8.0 * at(k, h) - 8.0 * at(k, -h) + at(k, -2.0 * h)) / (12.0 * h);
        }
    }
    return g;
}

struct LevelOutcome {
    std::vector<double> trace;  // oriented metric after every accepted step (first entry: start)
    int iterations = 0;
    bool converged = false;
};

/// Adaptive-gain gradient descent on the parameters of `t` (updated in
/// place). Steps are measured in millimetres of displacement: the scaled
/// gradient is normalised by its largest entry. A step that does not lower
/// the objective is rejected and the gain halved; accepted steps grow it.
inline LevelOutcome optimize_level(const LevelProblem& p, Transform& t, const OptimizerSettings& opt,
                                   std::ostream* progress = nullptr, int level_index = 0) {
    LevelOutcome out;
    const double voxel = p.fixed_geometry.min_spacing();
    double step = opt.initial_step * voxel;
    const double min_step = opt.min_step * voxel;
    const std::vector<double> scales = t.parameter_scales(p.fixed_geometry);

    std::vector<double> theta = t.parameters();
    std::vector<double> grad;
    auto compute_gradient = [&] {
        if (opt.gradient == GradientMode::Analytic) {
            evaluate_objective(p, t, &grad);
        } else {
            grad = finite_difference_gradient(p, t, opt.fd_step * voxel);
        }
        for (double v : grad) {
            if (!std::isfinite(v)) throw NumericalError("objective gradient is not finite");
        }
    };

    double value = evaluate_objective(p, t);
    out.trace.push_back(value);
    compute_gradient();
    TransformPtr trial = t.clone();
    for (int iter = 0; iter < opt.iterations; ++iter) {
        out.iterations = iter + 1;
        double gmax = 0.0;
        for (std::size_t k = 0; k < grad.size(); ++k) gmax = std::max(gmax, std::abs(grad[k] / scales[k]));
        if (gmax == 0.0) {
            out.converged = true;
            break;
        }
        std::vector<double> candidate = theta;
        for (std::size_t k = 0; k < theta.size(); ++k) {
            candidate[k] -= step * (grad[k] / scales[k]) / gmax / scales[k];
        }
        double trial_value = 0.0;
        bool valid = true;
        try {
            trial->set_parameters(candidate);
            trial_value = evaluate_objective(p, *trial);
        } catch (const ParameterError&) {
            valid = false;  // e.g. a singular affine matrix
        }
        if (valid && trial_value < value) {
            theta = std::move(candidate);
            value = trial_value;
            t.set_parameters(theta);
            out.trace.push_back(value);
            step *= opt.grow;
            if (progress != nullptr) *progress << "level=" << level_index << " iter=" << iter << " metric=" << value << "\n";
            const std::size_t m = out.trace.size();
            if (m > std::size_t(opt.tolerance_window)) {
                const double old = out.trace[m - 1 - std::size_t(opt.tolerance_window)];
                const double denom = std::max(std::abs(value), 1e-300);
                if (std::abs(old - value) / denom < opt.relative_tolerance) {
                    out.converged = true;
                    break;
                }
            }
            compute_gradient();
        } else {
            step *= opt.shrink;
            if (step < min_step) {
                out.converged = true;
                break;
            }
        }
    }
    return out;
}

inline TransformPtr initial_transform(TransformKind kind, const GridGeometry& fixed, double grid_spacing) {
    switch (kind) {
        case TransformKind::Translation: return std::make_unique<TranslationTransform>(fixed.ndim());
        case TransformKind::Affine: return std::make_unique<AffineTransform>(fixed.ndim(), fixed.center());
        case TransformKind::BSpline:
            return std::make_unique<BSplineTransform>(BSplineTransform::covering(fixed, grid_spacing));
    }
    throw ParameterError("unknown transform kind");
}

struct LevelTrace {
    int stage = 0;
    int level = 0;
    std::size_t factor = 1;
    std::vector<double> metric;
    int iterations = 0;
    bool converged = false;
};

struct RegistrationResult {
    CompositeTransform transform;  // completed stages, first stage outermost
    std::vector<LevelTrace> traces;
    double wall_seconds = 0.0;
    bool converged = false;
    bool failed = false;
    ErrorKind failure_kind = ErrorKind::Numerical;
    std::string failure;
};

struct RegisterOptions {
    std::ostream* progress = nullptr;  // receives "level=<k> iter=<i> metric=<v>" lines
};

/// Level inputs: both images downsampled, representations computed on the
/// downsampled images, mask decimated.
inline LevelProblem prepare_level(const ScalarVolume& fixed, const ScalarVolume& moving, const StageConfig& stage,
                                  std::size_t factor, std::optional<LabelVolume>& level_mask) {
    const ScalarVolume f = downsample(fixed, factor);
    const ScalarVolume m = downsample(moving, factor);
    level_mask.reset();
    if (stage.mask) {
        require_same_geometry(stage.mask->geometry(), fixed.geometry(), "stage mask");
        level_mask = downsample_labels(*stage.mask, factor);
    }
    return make_level_problem(representation_channels(f, stage.representation),
                              representation_channels(m, stage.representation), stage.metric,
                              level_mask ? &*level_mask : nullptr, stage.bins);
}

/// Runs the stages in order. Stage k optimises a new transform on the moving
/// image pre-warped by the stages before it; the result composes them with
/// the newest transform applied first. A failing stage stops the pipeline and
/// keeps the completed stages.
inline RegistrationResult register_images(const std::vector<StageConfig>& pipeline, const ScalarVolume& fixed,
                                          const ScalarVolume& moving, const RegisterOptions& options = {}) {
    const auto start = std::chrono::steady_clock::now();
    RegistrationResult result;
    if (pipeline.empty()) throw ParameterError("register: pipeline has no stages");
    if (fixed.geometry().ndim() != moving.geometry().ndim()) throw GeometryError("register: dimensionality mismatch");
    for (const auto& s : pipeline) s.validate();

    bool all_converged = true;
    int level_counter = 0;
    for (std::size_t si = 0; si < pipeline.size(); ++si) {
        const StageConfig& stage = pipeline[si];
        try {
            const ScalarVolume stage_moving =
                result.transform.empty() ? moving
                                         : resample(moving, result.transform, fixed.geometry(), 0.0, Boundary::Clamp);
            TransformPtr t = initial_transform(stage.transform, fixed.geometry(), stage.grid_spacing);
            for (std::size_t li = 0; li < stage.levels.size(); ++li) {
                std::optional<LabelVolume> level_mask;
                const LevelProblem problem = prepare_level(fixed, stage_moving, stage, stage.levels[li], level_mask);
                const LevelOutcome lo = optimize_level(problem, *t, stage.optimizer, options.progress, level_counter);
                result.traces.push_back({int(si), int(li), stage.levels[li], lo.trace, lo.iterations, lo.converged});
                all_converged = all_converged && lo.converged;
                ++level_counter;
            }
            CompositeTransform next;
            for (std::size_t k = 0; k < result.transform.size(); ++k) next.append(result.transform.at(k));
            next.append(*t);
            result.transform = std::move(next);
        } catch (const Error& e) {
            result.failed = true;
            result.failure_kind = e.kind();
            result.failure = "stage " + std::to_string(si) + ": " + e.what();
            break;
        }
    }
    result.converged = !result.failed && all_converged;
    result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
}

}  // namespace vfs
