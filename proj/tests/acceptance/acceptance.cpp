// Acceptance run: one PASS/FAIL line per criterion. Exit status is the number of
// failed criteria (capped at 100).
//
//   acceptance [work_dir]

#include <fmt/core.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <numbers>
#include <string>
#include <vector>

#include "../unit/dense_oracle.hpp"
#include "../unit/gradient_oracle.hpp"
#include "wsdl/app/run_diagnostics.hpp"
#include "wsdl/app/sweep.hpp"
#include "wsdl/wsdl.hpp"

namespace {

using namespace wsdl;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(const std::string& id, const std::string& title, const Outcome& o, double seconds, double budget) {
  const bool in_time = seconds < budget;
  const bool ok = o.pass && in_time;
  if (!ok) ++failures;
  fmt::print("{} {:<3} {:<36} {} [{:.2f} s{}]\n", ok ? "PASS" : "FAIL", id, title, o.detail, seconds,
             in_time ? "" : fmt::format(" > {:.0f} s budget", budget));
  std::fflush(stdout);
}

template <class F>
void criterion(const std::string& id, const std::string& title, double budget, F&& body) {
  const auto t0 = Clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, fmt::format("exception: {}", e.what())};
  }
  report(id, title, o, std::chrono::duration<double>(Clock::now() - t0).count(), budget);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<std::string> lines_of(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

// Files that differ between two run directories (either side missing counts).
std::vector<std::string> differing_files(const fs::path& a, const fs::path& b) {
  std::vector<std::string> names, diff;
  for (const auto& dir : {a, b})
    for (const auto& e : fs::directory_iterator(dir))
      if (e.is_regular_file()) names.push_back(e.path().filename().string());
  std::sort(names.begin(), names.end());
  names.erase(std::unique(names.begin(), names.end()), names.end());
  for (const auto& n : names)
    if (!fs::exists(a / n) || !fs::exists(b / n) || slurp(a / n) != slurp(b / n)) diff.push_back(n);
  return diff;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string join(const std::vector<double>& v, const char* fmt_spec = "{:.3g}") {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "/" : "") + fmt::format(fmt::runtime(fmt_spec), v[i]);
  return s;
}

// ---- 1. schedules -------------------------------------------------------------------

Outcome schedules() {
  // Closed forms written out again here rather than calling into the library.
  const double pk = 3e-3, tw = 200, tc = 6500, te = 10000;
  auto wsd = [&](double t) { return t <= tw ? pk * t / tw : t <= tc ? pk : pk * (te - t) / (te - tc); };
  auto cosine = [&](double t) { return t <= tw ? pk * t / tw : 0.5 * pk * (1 + std::cos(std::numbers::pi * (t - tw) / (te - tw))); };
  const ScheduleSpec w{ScheduleKind::wsd, 200, 6500, 10000, pk};
  const ScheduleSpec c{ScheduleKind::warmup_cosine, 200, 0, 10000, pk};
  double err = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const double t = te * i / 9999.0;
    err = std::max({err, std::abs(lr_wsd(t, w) - wsd(t)), std::abs(lr_cosine(t, c) - cosine(t))});
  }
  const bool continuous = lr_wsd(tw, w) == pk && lr_wsd(tc, w) == pk && lr_cosine(tw, c) == pk &&
                          lr_wsd(std::nextafter(tw, 0.0), w) <= pk && lr_wsd(std::nextafter(tc, te), w) <= pk;
  const bool zero_end = lr_wsd(te, w) == 0.0 && std::abs(lr_cosine(te, c)) <= 1e-18;
  return {err <= 1e-12 && continuous && zero_end,
          fmt::format("max |err| {:.1e}, continuity {}, lr(T_end) = {}/{:.1e}", err, continuous ? "exact" : "broken",
                      lr_wsd(te, w), lr_cosine(te, c))};
}

// ---- 2. parameter count -------------------------------------------------------------------

Outcome parameter_count() {
  // conv: (in*9 + 1)*out, linear: (in + 1)*out
  const std::size_t oracle =
      (3 * 9 + 1) * 32 + (32 * 9 + 1) * 128 + (128 * 9 + 1) * 128 + (128 * 9 + 1) * 128 + (128 + 1) * 10;
  const std::size_t got = build_model(ModelSpec::cifarcnn2_spec()).dimension();
  return {got == oracle && got == 334346, fmt::format("{} (per-layer oracle {})", got, oracle)};
}

// ---- 3. gradients --------------------------------------------------------------------------

ParamVector jittered(const Model& model, std::uint64_t seed) {
  ParamVector p = init_params(model, seed);
  Rng rng(seed, "jitter");
  for (const auto& b : model.layout().blocks())
    if (b.role != ParamRole::weight && b.role != ParamRole::embedding)
      for (std::size_t i = 0; i < b.size(); ++i) p[b.offset + i] += static_cast<float>(rng.uniform(-0.1, 0.1));
  return p;
}

Batch random_batch(std::vector<std::size_t> shape, std::size_t n, int classes, bool tokens, std::uint64_t seed) {
  Rng rng(seed, "acceptance-batch");
  Batch b;
  b.feature_shape = std::move(shape);
  for (std::size_t i = 0; i < n * b.feature_size(); ++i)
    b.inputs.push_back(tokens ? static_cast<float>(rng.below(static_cast<std::uint64_t>(classes)))
                              : static_cast<float>(rng.uniform(-0.5, 0.5)));
  for (std::size_t i = 0; i < n; ++i) b.labels.push_back(static_cast<int>(rng.below(static_cast<std::uint64_t>(classes))));
  return b;
}

Outcome gradients() {
  struct Case {
    std::string name;
    ModelSpec spec;
    Batch batch;
    std::size_t per_block;
  };
  std::vector<Case> cases;
  cases.push_back({"mlp", ModelSpec::mlp_spec({10, 32, 32, 4}, 1), random_batch({10}, 8, 4, false, 1), 6});
  cases.push_back({"cifarcnn2", ModelSpec::cifarcnn2_spec(32, 2), random_batch({3, 32, 32}, 1, 10, false, 2), 3});
#ifdef WSDL_ENABLE_TINYDECODER
  cases.push_back({"tinydecoder", ModelSpec::tinydecoder_spec(27, 16, 128, 2, 4, 3), random_batch({16}, 2, 27, true, 3), 1});
#endif
  bool ok = true;
  std::string detail;
  for (const auto& c : cases) {
    const Model m = build_model(c.spec);
    const ParamVector p = jittered(m, 7);
    const auto coords = testing::per_block_coordinates(m, p, c.batch, c.per_block, 11, 1e-3);
    double worst = 0.0;
    for (const auto& r : testing::check_gradient_float(m, p, c.batch, coords, 1e-3)) worst = std::max(worst, r.rel_error);
    ok = ok && coords.size() >= 20 && worst < 1e-3;
    detail += fmt::format("{}{} {} coords max rel {:.1e}", detail.empty() ? "" : "; ", c.name, coords.size(), worst);
  }
  return {ok, detail};
}

// ---- 4. curvature oracles ------------------------------------------------------------------

Outcome curvature() {
  double worst_sharp = 0.0, worst_lin = 0.0, worst_sym = 0.0;
  for (std::size_t n = 1; n <= 8; ++n)
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const oracle::Quadratic q{oracle::random_psd(n, 1000 * n + seed)};
      const double top = oracle::jacobi_eigen(q.a).values[0];
      Rng r(seed, "acceptance-curvature");
      std::vector<double> x(n), u(n), v(n);
      for (std::size_t i = 0; i < n; ++i) {
        x[i] = r.normal();
        u[i] = r.normal();
        v[i] = r.normal();
      }
      SharpnessOptions opt;
      opt.seed = seed;
      opt.tol = 1e-7;
      opt.max_iter = 5000;
      const auto s = sharpness(q, x, opt);
      worst_sharp = std::max(worst_sharp, std::abs(s.lambda_max - top) / top);

      const double a = 0.7, b = -1.3;
      std::vector<double> mix(n);
      for (std::size_t i = 0; i < n; ++i) mix[i] = a * u[i] + b * v[i];
      const auto hm = hvp(q, x, mix), hu = hvp(q, x, u), hv = hvp(q, x, v);
      std::vector<double> lin(n);
      for (std::size_t i = 0; i < n; ++i) lin[i] = a * hu[i] + b * hv[i];
      worst_lin = std::max(worst_lin, distance(hm, lin) / std::max(norm(lin), 1e-12));
      const double uhv = dot(u, hv), vhu = dot(v, hu);
      worst_sym = std::max(worst_sym, std::abs(uhv - vhu) / std::max({std::abs(uhv), std::abs(vhu), 1e-12}));
    }
  return {worst_sharp <= 1e-3 && worst_lin <= 1e-2 && worst_sym <= 1e-2,
          fmt::format("sharpness rel {:.1e}, linearity {:.1e}, symmetry {:.1e} (n = 1..8, 40 quadratics)", worst_sharp,
                      worst_lin, worst_sym)};
}

// ---- 5. PCA -------------------------------------------------------------------------------

Outcome pca() {
  double worst_eig = 0.0, worst_angle = 0.0;
  for (std::size_t m = 2; m <= 10; ++m)
    for (std::size_t d : {2u, 5u, 12u, 20u}) {
      Rng r(100 * m + d, "acceptance-cloud");
      std::vector<std::vector<double>> pts(m, std::vector<double>(d));
      for (auto& p : pts)
        for (std::size_t j = 0; j < d; ++j) p[j] = r.normal() * (1.0 + static_cast<double>(j % 4));
      const std::size_t k = std::min(m - 1, d);
      const auto got = trajectory_pca(pts, k);
      const auto ref = oracle::jacobi_eigen(oracle::covariance(pts));
      if (got.components.size() != k) return {false, fmt::format("{} points in {} dims: {} components", m, d, got.components.size())};
      for (std::size_t i = 0; i < k; ++i) worst_eig = std::max(worst_eig, std::abs(got.eigenvalues[i] - ref.values[i]));
      const std::vector<std::vector<double>> top(ref.vectors.begin(), ref.vectors.begin() + static_cast<std::ptrdiff_t>(k));
      worst_angle = std::max(worst_angle, oracle::max_principal_angle(top, got.components));
    }
  return {worst_eig <= 1e-8 && worst_angle < 1e-4,
          fmt::format("max eigenvalue err {:.1e}, max principal angle {:.1e} rad", worst_eig, worst_angle)};
}

// ---- desk-scale runs ------------------------------------------------------------------------

struct Desk {
  RunConfig base;
  fs::path work;
  std::vector<std::uint64_t> seeds{0, 1, 2};

  RunConfig seeded(std::uint64_t s) const {
    RunConfig c = base;
    c.seed = s;
    c.resolve();
    return c;
  }
  fs::path run_dir(std::uint64_t s) const { return work / fmt::format("desk_seed{}", s); }
};

Outcome determinism_and_resume(const Desk& desk) {
  const RunConfig cfg = desk.seeded(0);
  train(cfg, desk.run_dir(0));
  const fs::path twin = desk.work / "desk_seed0_twin";
  train(cfg, twin);
  const auto twin_diff = differing_files(desk.run_dir(0), twin);

  // Shorter run, resumed at its own decay start into the full schedule.
  RunConfig short_cfg = cfg;
  short_cfg.total_steps = 2000;
  short_cfg.decay_start.reset();
  short_cfg.resolve();
  const fs::path short_dir = desk.work / "short_seed0";
  train(short_cfg, short_dir);
  const auto t_resume = *short_cfg.decay_start;
  const fs::path resumed = desk.work / "resumed_seed0";
  resume(short_cfg, short_dir / checkpoint_filename(t_resume), cfg.schedule_spec(), resumed);
  const auto resume_diff = differing_files(desk.run_dir(0), resumed);

  // Stable phase on its own: log rows and checkpoints up to the long run's T_c.
  const auto t_c = *cfg.decay_start;
  const auto a = lines_of(desk.run_dir(0) / "losses.csv"), b = lines_of(resumed / "losses.csv");
  bool stable_equal = a.size() > t_c + 1 && b.size() > t_c + 1 && std::equal(a.begin(), a.begin() + static_cast<std::ptrdiff_t>(t_c + 2), b.begin());
  for (auto s : list_checkpoints(desk.run_dir(0)))
    if (s <= t_c) stable_equal = stable_equal && slurp(desk.run_dir(0) / checkpoint_filename(s)) == slurp(resumed / checkpoint_filename(s));

  return {twin_diff.empty() && stable_equal,
          fmt::format("rerun: {} differing files; resume at {} -> T_end {}: stable phase {}, whole run {} differing files",
                      twin_diff.size(), t_resume, cfg.total_steps, stable_equal ? "bitwise equal" : "DIFFERS",
                      resume_diff.size())};
}

struct SeedSummaries {
  std::vector<RunSummary> runs;
  template <class F>
  std::vector<double> collect(F f) const {
    std::vector<double> out;
    for (const auto& r : runs) out.push_back(f(r));
    return out;
  }
};

SeedSummaries desk_reports(const Desk& desk) {
  SeedSummaries s;
  for (auto seed : desk.seeds) {
    if (!fs::exists(desk.run_dir(seed) / checkpoint_filename(desk.seeded(seed).total_steps))) train(desk.seeded(seed), desk.run_dir(seed));
    s.runs.push_back(run_report(RunView(desk.run_dir(seed)), desk.run_dir(seed) / "diag"));
  }
  return s;
}

void qualitative(const Desk& desk) {
  const auto t0 = Clock::now();
  SeedSummaries s;
  std::string setup_error;
  try {
    s = desk_reports(desk);
  } catch (const std::exception& e) {
    setup_error = e.what();
  }
  const double setup = std::chrono::duration<double>(Clock::now() - t0).count();
  auto item = [&](const std::string& id, const std::string& title, auto check) {
    if (!setup_error.empty()) return report(id, title, {false, "desk runs failed: " + setup_error}, setup, 1800);
    report(id, title, check(), setup, 1800);
  };
  const auto all = [](const std::vector<bool>& v) { return std::all_of(v.begin(), v.end(), [](bool b) { return b; }); };

  item("7a", "cooldown drop >= stable-window drop", [&] {
    const auto cd = s.collect([](auto& r) { return r.cooldown_drop; });
    const auto st = s.collect([](auto& r) { return r.stable_window_drop; });
    std::vector<bool> ok;
    for (std::size_t i = 0; i < cd.size(); ++i) ok.push_back(cd[i] >= st[i]);
    return Outcome{all(ok), fmt::format("cooldown {} vs stable window {}", join(cd), join(st))};
  });
  item("7b", "interpolation shape", [&] {
    std::vector<bool> ok;
    std::vector<double> frac, argmin;
    for (const auto& r : s.runs) {
      frac.push_back(static_cast<double>(r.interp_cooldown_violations) / static_cast<double>(r.interp_points));
      argmin.push_back(r.interp_stable_argmin_alpha);
      ok.push_back(frac.back() <= 0.10 && argmin.back() > 0.0 && argmin.back() < 1.0);
    }
    return Outcome{all(ok), fmt::format("cooldown increase fraction {}, stable argmin alpha {}", join(frac), join(argmin))};
  });
  item("7c", "sharpness rises in cooldown", [&] {
    const auto rho = s.collect([](auto& r) { return r.sharpness_spearman; });
    return Outcome{std::all_of(rho.begin(), rho.end(), [](double x) { return x > 0.0; }), fmt::format("spearman {}", join(rho))};
  });
  item("7d", "curvature alignment v_d > v_s", [&] {
    const auto vd = s.collect([](auto& r) { return r.align_decay; });
    const auto vs = s.collect([](auto& r) { return r.align_stable; });
    return Outcome{median(vd) > median(vs), fmt::format("median |Hv_d| {:.3g} vs |Hv_s| {:.3g}", median(vd), median(vs))};
  });
  item("7e", "PCA rho_1 >= 0.4", [&] {
    const auto a = s.collect([](auto& r) { return r.rho1_stable; });
    const auto b = s.collect([](auto& r) { return r.rho1_decay; });
    const bool ok = *std::min_element(a.begin(), a.end()) >= 0.4 && *std::min_element(b.begin(), b.end()) >= 0.4;
    return Outcome{ok, fmt::format("stable {} decay {}", join(a), join(b))};
  });
  item("7f", "tau and update cosine positive", [&] {
    const auto tau = s.collect([](auto& r) { return r.tau_positive_fraction; });
    const auto cs = s.collect([](auto& r) { return r.cosine_positive_fraction; });
    const bool ok = *std::min_element(tau.begin(), tau.end()) >= 0.9 && *std::min_element(cs.begin(), cs.end()) >= 0.9;
    return Outcome{ok, fmt::format("tau>0 fraction {}, cos>0 fraction {}", join(tau), join(cs))};
  });
  item("7g", "displacement stable > cooldown", [&] {
    const auto st = s.collect([](auto& r) { return r.stable_displacement_per_step; });
    const auto cd = s.collect([](auto& r) { return r.cooldown_displacement_per_step; });
    std::vector<bool> ok;
    for (std::size_t i = 0; i < st.size(); ++i) ok.push_back(st[i] > cd[i]);
    return Outcome{all(ok), fmt::format("per-step displacement stable {} vs cooldown {}", join(st), join(cd))};
  });
}

Outcome cooldown_sweep(const Desk& desk) {
  SweepOptions opt;
  opt.seeds = desk.seeds;
  const fs::path out = desk.work / "sweep";
  const SweepResult res = run_sweep(desk.base, out, opt);

  std::vector<double> eval;
  for (const auto& row : res.rows)
    if (row.label != "cosine") eval.push_back(row.final_eval_loss);
  const bool monotone = eval.size() == 3 && eval[0] >= eval[1] && eval[1] >= eval[2];

  // Every fraction of a seed shares its stable prefix byte for byte.
  bool shared = true;
  std::size_t compared = 0;
  for (auto seed : desk.seeds) {
    std::vector<const SweepRun*> runs;
    for (const auto& r : res.runs)
      if (r.seed == seed && r.fraction) runs.push_back(&r);
    std::uint64_t prefix_end = desk.seeded(seed).total_steps;
    for (const auto* r : runs) prefix_end = std::min(prefix_end, *load_manifest(r->dir).decay_start);
    const auto ref = lines_of(runs.front()->dir / "losses.csv");
    for (const auto* r : runs) {
      const auto l = lines_of(r->dir / "losses.csv");
      shared = shared && l.size() > prefix_end && std::equal(ref.begin(), ref.begin() + static_cast<std::ptrdiff_t>(prefix_end + 2), l.begin());
      for (auto s : list_checkpoints(runs.front()->dir))
        if (s <= prefix_end) {
          // Headers carry each run's own schedule; the training state must match exactly.
          Checkpoint a = load_checkpoint(r->dir / checkpoint_filename(s));
          Checkpoint b = load_checkpoint(runs.front()->dir / checkpoint_filename(s));
          a.schedule = b.schedule;
          shared = shared && a == b;
          ++compared;
        }
    }
  }
  std::string cosine;
  for (const auto& row : res.rows)
    if (row.label == "cosine") cosine = fmt::format(", cosine {:.4f}", row.final_eval_loss);
  return {monotone && shared, fmt::format("final eval 0.10/0.20/0.35 = {}{}; shared stable prefix {} ({} checkpoint states compared)",
                                          join(eval, "{:.4f}"), cosine, shared ? "bitwise equal" : "DIFFERS", compared)};
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path work = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "wsdl_acceptance";
  fs::remove_all(work);
  fs::create_directories(work);

  // Left unresolved so that init_seed follows each run's seed.
  Desk desk{load_config(WSDL_DESK_CONFIG), work};
  fmt::print("desk config: {} (work dir {})\n", WSDL_DESK_CONFIG, work.string());

  criterion("1", "scheduler exactness", 1, schedules);
  criterion("2", "CIFARCNN2 parameter count", 1, parameter_count);
  criterion("3", "gradient finite differences", 60, gradients);
  criterion("4", "HVP and sharpness oracles", 60, curvature);
  criterion("5", "PCA oracle", 1, pca);
  criterion("6", "determinism and resume", 300, [&] { return determinism_and_resume(desk); });
  qualitative(desk);
  criterion("8", "cooldown sweep", 2700, [&] { return cooldown_sweep(desk); });

  fmt::print("{} criteria failed\n", failures);
  return std::min(failures, 100);
}
