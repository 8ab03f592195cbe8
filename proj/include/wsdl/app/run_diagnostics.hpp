#pragma once

// Diagnostics over a finished run directory. Everything here reads the manifest
// and checkpoint files only, so results are reproducible from disk.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "wsdl/core/csv.hpp"
#include "wsdl/core/error.hpp"
#include "wsdl/diag/landscape.hpp"
#include "wsdl/diag/pca.hpp"
#include "wsdl/diag/stats.hpp"
#include "wsdl/diag/trajectory.hpp"
#include "wsdl/models/model.hpp"
#include "wsdl/train/checkpoint.hpp"
#include "wsdl/train/trainer.hpp"

namespace wsdl {

inline constexpr std::size_t kDefaultInterpPoints = 25;

class RunView {
 public:
  explicit RunView(const std::filesystem::path& dir)
      : dir_(dir), ctx_(load_manifest(dir)), steps_(list_checkpoints(dir)),
        phases_(phase_steps(ctx_.config().schedule_spec())), objective_(ctx_.model(), ctx_.probe()) {}

  const std::filesystem::path& dir() const noexcept { return dir_; }
  const RunContext& context() const noexcept { return ctx_; }
  const PhaseSteps& phases() const noexcept { return phases_; }
  const std::vector<std::uint64_t>& steps() const noexcept { return steps_; }
  const BatchObjective& objective() const noexcept { return objective_; }

  bool has(std::uint64_t step) const { return std::binary_search(steps_.begin(), steps_.end(), step); }

  const std::vector<double>& params(std::uint64_t step) const {
    if (auto it = cache_.find(step); it != cache_.end()) return it->second;
    const auto path = dir_ / checkpoint_filename(step);
    if (!has(step)) throw MissingCheckpointError("missing checkpoint for step " + std::to_string(step) + ": " + path.string(), step);
    const Checkpoint c = load_checkpoint(path, ctx_.model().spec().digest());
    return cache_.emplace(step, c.params.to_double()).first->second;
  }

  /// Checkpoints with first ≤ step ≤ last, ascending.
  std::vector<Iterate> iterates(std::uint64_t first, std::uint64_t last) const {
    std::vector<Iterate> out;
    for (auto s : steps_)
      if (s >= first && s <= last) out.push_back({s, params(s)});
    return out;
  }

  double probe_loss(std::uint64_t step) const { return objective_.value(params(step)); }

 private:
  std::filesystem::path dir_;
  RunContext ctx_;
  std::vector<std::uint64_t> steps_;
  PhaseSteps phases_;
  BatchObjective objective_;
  mutable std::map<std::uint64_t, std::vector<double>> cache_;
};

inline std::vector<std::vector<double>> points_of(const std::vector<Iterate>& its) {
  std::vector<std::vector<double>> p;
  p.reserve(its.size());
  for (const auto& it : its) p.push_back(it.x);
  return p;
}

struct InterpResult {
  std::vector<InterpPoint> stable;    // 80%-of-stable checkpoint → decay start
  std::vector<InterpPoint> cooldown;  // decay start → final
};

inline void write_interp(const std::filesystem::path& path, const std::vector<InterpPoint>& pts) {
  CsvWriter w(path, "alpha,loss");
  for (const auto& p : pts) w.row({format_real(p.alpha), format_real(p.loss)});
}

inline InterpResult diag_interp(const RunView& run, const std::filesystem::path& out, std::size_t n_points = kDefaultInterpPoints) {
  const auto& p = run.phases();
  InterpResult r;
  const auto& x80 = run.params(p.stable80);
  const auto& xc = run.params(p.decay_start);
  const auto& xe = run.params(p.total);
  r.stable = interpolate_loss(run.objective(), x80, xc, n_points);
  r.cooldown = interpolate_loss(run.objective(), xc, xe, n_points);
  write_interp(out / "interp_stable.csv", r.stable);
  write_interp(out / "interp_cooldown.csv", r.cooldown);
  return r;
}

struct SharpnessRow {
  std::uint64_t step = 0;
  SharpnessResult result;
};

/// Top Hessian eigenvalue at every cooldown checkpoint.
inline std::vector<SharpnessRow> diag_sharpness(const RunView& run, const std::filesystem::path& out, SharpnessOptions opt = {}) {
  opt.seed = run.context().config().seed;
  std::vector<SharpnessRow> rows;
  CsvWriter w(out / "sharpness.csv", "step,lambda_max,iters,converged");
  for (const auto& it : run.iterates(run.phases().decay_start, run.phases().total)) {
    rows.push_back({it.step, sharpness(run.objective(), it.x, opt)});
    const auto& s = rows.back().result;
    w.row({std::to_string(it.step), format_real(s.lambda_max), std::to_string(s.iterations), s.converged ? "1" : "0"});
  }
  if (rows.empty()) throw MissingCheckpointError("no cooldown checkpoints", run.phases().decay_start);
  return rows;
}

struct PcaPair {
  PcaResult stable;  // checkpoints in [T_w, T_c]
  PcaResult decay;   // checkpoints in [T_c, T_end]
};

inline PcaResult phase_pca(const RunView& run, const StepWindow& w) {
  const auto its = run.iterates(w.first, w.last);
  if (its.size() < 2)
    throw MissingCheckpointError(w.name + " phase [" + std::to_string(w.first) + ", " + std::to_string(w.last) + "] has " +
                                     std::to_string(its.size()) + " checkpoint(s); PCA needs at least 2",
                                 w.first);
  return trajectory_pca(points_of(its), std::min<std::size_t>(its.size() - 1, kMaxPcaDenominator));
}

inline void write_pca(const std::filesystem::path& path, const PcaResult& r) {
  CsvWriter w(path, "component,eigenvalue,rho");
  for (std::size_t i = 0; i < r.eigenvalues.size(); ++i)
    w.row({std::to_string(i + 1), format_real(r.eigenvalues[i]), format_real(r.ratios[i])});
}

inline PcaPair diag_pca(const RunView& run, const std::filesystem::path& out) {
  const auto& p = run.phases();
  PcaPair r{phase_pca(run, {"stable", p.warmup, p.decay_start}), phase_pca(run, {"decay", p.decay_start, p.total})};
  write_pca(out / "pca_stable.csv", r.stable);
  write_pca(out / "pca_decay.csv", r.decay);
  return r;
}

struct AlignResult {
  double hv_stable = 0.0;  // ‖∇²L(x̂)v_s‖
  double hv_decay = 0.0;   // ‖∇²L(x̂)v_d‖
};

/// Curvature along the phase directions, measured at the decay-start checkpoint.
inline AlignResult diag_align(const RunView& run, const std::filesystem::path& out) {
  const auto& p = run.phases();
  const auto sw = stable_tail_window(p.warmup, p.decay_start);
  const auto dw = decay_head_window(p.decay_start, p.total);
  const auto dirs = phase_directions(points_of(run.iterates(sw.first, sw.last)), sw, points_of(run.iterates(dw.first, dw.last)), dw);
  const auto& x_hat = run.params(p.decay_start);
  AlignResult r{curvature_alignment(run.objective(), x_hat, dirs.v_s), curvature_alignment(run.objective(), x_hat, dirs.v_d)};
  CsvWriter w(out / "align.csv", "direction,hv_norm");
  w.row({"v_s", format_real(r.hv_stable)});
  w.row({"v_d", format_real(r.hv_decay)});
  return r;
}

inline void write_series(const std::filesystem::path& path, std::string_view header, const std::vector<SeriesRecord>& rows) {
  CsvWriter w(path, header);
  for (const auto& r : rows) w.row({std::to_string(r.step), format_optional(r.value), std::string(to_string(r.flag))});
}

/// τ for every post-warmup checkpoint before the end, with x* the final checkpoint.
inline std::vector<SeriesRecord> diag_tau(const RunView& run, const std::filesystem::path& out) {
  const auto& p = run.phases();
  const auto& x_star = run.params(p.total);
  auto its = run.iterates(p.warmup, p.total - 1);
  auto rows = tau_series(run.objective(), its, x_star);
  write_series(out / "tau.csv", "step,tau,flag", rows);
  return rows;
}

inline std::vector<SeriesRecord> diag_cosine(const RunView& run, const std::filesystem::path& out) {
  const auto& p = run.phases();
  auto rows = update_cosine_series(run.objective(), run.iterates(p.warmup, p.total));
  write_series(out / "cosine.csv", "step,cos_sim,flag", rows);
  return rows;
}

inline std::vector<NormRecord> diag_norms(const RunView& run, const std::filesystem::path& out) {
  if (run.steps().empty()) throw MissingCheckpointError("run has no checkpoints", 0);
  auto rows = param_norm_series(run.iterates(0, run.steps().back()));
  CsvWriter w(out / "norms.csv", "step,param_norm,update_norm");
  for (const auto& r : rows) w.row({std::to_string(r.step), format_real(r.param_norm), format_optional(r.update_norm)});
  return rows;
}

/// Scalar summaries of one run, as written to summary.csv by `report`.
struct RunSummary {
  double stable_window_drop = 0.0;     // probe loss drop over the last stable window as long as the cooldown
  double cooldown_drop = 0.0;          // probe loss drop over the cooldown
  std::size_t interp_cooldown_violations = 0;
  std::size_t interp_points = 0;
  double interp_stable_argmin_alpha = 0.0;
  double sharpness_spearman = 0.0;     // rank correlation of cooldown step and λ_max
  double align_stable = 0.0;
  double align_decay = 0.0;
  double rho1_stable = 0.0;
  double rho1_decay = 0.0;
  double tau_positive_fraction = 0.0;
  double cosine_positive_fraction = 0.0;
  double stable_displacement_per_step = 0.0;
  double cooldown_displacement_per_step = 0.0;
  std::optional<double> final_heldout_loss;
};

inline std::size_t count_increases(const std::vector<InterpPoint>& pts) {
  std::size_t n = 0;
  for (std::size_t i = 1; i < pts.size(); ++i)
    if (pts[i].loss > pts[i - 1].loss) ++n;
  return n;
}

inline double positive_fraction(const std::vector<SeriesRecord>& rows) {
  std::size_t valued = 0, positive = 0;
  for (const auto& r : rows)
    if (r.value) {
      ++valued;
      if (*r.value > 0.0) ++positive;
    }
  return valued ? static_cast<double>(positive) / static_cast<double>(valued) : 0.0;
}

/// Mean of ‖x_{i+1} − x_i‖ / (t_{i+1} − t_i) over consecutive checkpoint pairs inside [first, last].
inline double displacement_per_step(const std::vector<NormRecord>& rows, std::uint64_t first, std::uint64_t last) {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i + 1 < rows.size(); ++i) {
    if (rows[i].step < first || rows[i + 1].step > last) continue;
    sum += *rows[i].update_norm / static_cast<double>(rows[i + 1].step - rows[i].step);
    ++n;
  }
  return n ? sum / static_cast<double>(n) : 0.0;
}

inline void write_summary(const std::filesystem::path& path, const RunSummary& s) {
  CsvWriter w(path, "metric,value");
  auto put = [&](const char* k, double v) { w.row({k, format_real(v)}); };
  put("stable_window_drop", s.stable_window_drop);
  put("cooldown_drop", s.cooldown_drop);
  put("interp_cooldown_violations", static_cast<double>(s.interp_cooldown_violations));
  put("interp_points", static_cast<double>(s.interp_points));
  put("interp_stable_argmin_alpha", s.interp_stable_argmin_alpha);
  put("sharpness_spearman", s.sharpness_spearman);
  put("align_v_s", s.align_stable);
  put("align_v_d", s.align_decay);
  put("rho1_stable", s.rho1_stable);
  put("rho1_decay", s.rho1_decay);
  put("tau_positive_fraction", s.tau_positive_fraction);
  put("cosine_positive_fraction", s.cosine_positive_fraction);
  put("stable_displacement_per_step", s.stable_displacement_per_step);
  put("cooldown_displacement_per_step", s.cooldown_displacement_per_step);
  if (s.final_heldout_loss) put("final_heldout_loss", *s.final_heldout_loss);
}

struct ReportOptions {
  std::size_t interp_points = kDefaultInterpPoints;
  SharpnessOptions sharpness;
};

/// Runs every diagnostic into `out` and writes the manifest copy and summary.csv.
inline RunSummary run_report(const RunView& run, const std::filesystem::path& out, const ReportOptions& opt = {}) {
  std::filesystem::create_directories(out);
  std::filesystem::copy_file(run.dir() / "manifest", out / "manifest", std::filesystem::copy_options::overwrite_existing);
  const auto& p = run.phases();
  RunSummary s;

  s.cooldown_drop = run.probe_loss(p.decay_start) - run.probe_loss(p.total);
  s.stable_window_drop = run.probe_loss(p.window_start) - run.probe_loss(p.decay_start);

  const auto interp = diag_interp(run, out, opt.interp_points);
  s.interp_points = interp.cooldown.size();
  s.interp_cooldown_violations = count_increases(interp.cooldown);
  s.interp_stable_argmin_alpha =
      std::min_element(interp.stable.begin(), interp.stable.end(), [](auto& a, auto& b) { return a.loss < b.loss; })->alpha;

  const auto sharp = diag_sharpness(run, out, opt.sharpness);
  if (sharp.size() >= 2) {
    std::vector<double> steps, lambdas;
    for (const auto& r : sharp) {
      steps.push_back(static_cast<double>(r.step));
      lambdas.push_back(r.result.lambda_max);
    }
    s.sharpness_spearman = spearman(steps, lambdas);
  }

  const auto align = diag_align(run, out);
  s.align_stable = align.hv_stable;
  s.align_decay = align.hv_decay;

  const auto pca = diag_pca(run, out);
  s.rho1_stable = pca.stable.ratios.at(0);
  s.rho1_decay = pca.decay.ratios.at(0);

  s.tau_positive_fraction = positive_fraction(diag_tau(run, out));
  s.cosine_positive_fraction = positive_fraction(diag_cosine(run, out));

  const auto norms = diag_norms(run, out);
  s.stable_displacement_per_step = displacement_per_step(norms, p.warmup, p.decay_start);
  s.cooldown_displacement_per_step = displacement_per_step(norms, p.decay_start, p.total);

  if (const auto& h = run.context().heldout()) s.final_heldout_loss = loss(run.context().model(), ParamVector::from_double(run.params(p.total)), *h);
  write_summary(out / "summary.csv", s);
  return s;
}

}  // namespace wsdl
