#pragma once

#include <algorithm>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>

#include "wsdl/app/run_diagnostics.hpp"
#include "wsdl/app/sweep.hpp"
#include "wsdl/core/error.hpp"
#include "wsdl/train/config.hpp"
#include "wsdl/train/trainer.hpp"

namespace wsdl::app {

enum ExitCode : int { kOk = 0, kFailure = 1, kConfig = 2, kData = 3, kNumeric = 4 };

/// Runs `body`, reporting any error on `err` and mapping its class to an exit code.
inline int guarded(const std::function<void()>& body, std::ostream& err) {
  try {
    body();
    return kOk;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const MissingCheckpointError& e) {
    err << "missing checkpoint (step " << e.step() << "): " << e.what() << '\n';
    return kData;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kData;
  } catch (const CheckpointError& e) {
    err << "checkpoint error: " << e.what() << '\n';
    return kData;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << '\n';
    return kNumeric;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }
}

inline RunConfig build_config(const std::optional<std::filesystem::path>& file, const std::vector<std::string>& overrides) {
  RunConfig cfg = file ? load_config(*file) : RunConfig{};
  for (const auto& o : overrides) apply_override(cfg, o);
  return cfg;
}

struct TrainArgs {
  std::optional<std::filesystem::path> config;
  std::vector<std::string> overrides;
  std::filesystem::path out;
};

inline void cmd_train(const TrainArgs& a) { train(build_config(a.config, a.overrides), a.out); }

struct ResumeArgs {
  std::filesystem::path checkpoint;
  std::vector<std::string> overrides;  // typically total_steps, cooldown_fraction or decay_start
  std::filesystem::path out;
};

/// Extended config for a resume: the source manifest with `overrides` applied. A
/// change of length or cooldown fraction recomputes the decay start unless it
/// is given explicitly.
inline RunConfig resume_config(const RunConfig& source, const std::vector<std::string>& overrides) {
  RunConfig cfg = source;
  const bool explicit_decay = std::any_of(overrides.begin(), overrides.end(), [](const std::string& o) {
    return detail::trim(std::string_view(o).substr(0, o.find('='))) == "decay_start";
  });
  if (!explicit_decay) cfg.decay_start.reset();
  for (const auto& o : overrides) apply_override(cfg, o);
  cfg.resolve();
  return cfg;
}

inline void cmd_resume(const ResumeArgs& a) {
  const auto src_dir = a.checkpoint.parent_path();
  const RunConfig source = load_manifest(src_dir.empty() ? std::filesystem::path(".") : src_dir);
  const RunConfig extended = resume_config(source, a.overrides);
  resume(source, a.checkpoint, extended.schedule_spec(), a.out);
}

struct SweepArgs {
  std::optional<std::filesystem::path> config;
  std::vector<std::string> overrides;
  std::filesystem::path out;
  std::vector<double> fractions{0.10, 0.20, 0.35};
  std::vector<std::uint64_t> seeds;  // empty: the config's seed
  std::size_t parallel = 1;
};

inline SweepResult cmd_sweep(const SweepArgs& a) {
  const RunConfig cfg = build_config(a.config, a.overrides);
  SweepOptions opt;
  opt.fractions = a.fractions;
  opt.seeds = a.seeds.empty() ? std::vector<std::uint64_t>{cfg.seed} : a.seeds;
  opt.parallel = a.parallel;
  for (double f : opt.fractions)
    if (!(f > 0.0 && f < 1.0)) throw ConfigError(fmt::format("sweep: cooldown fraction {} is outside (0, 1)", f));
  return run_sweep(cfg, a.out, opt);
}

inline constexpr std::string_view kDiagnostics[] = {"interp", "sharpness", "pca", "align", "tau", "cosine", "norms"};

struct DiagArgs {
  std::string which;
  std::filesystem::path run;
  std::optional<std::filesystem::path> out;  // default: <run>/diag
  std::size_t points = kDefaultInterpPoints;
};

inline void cmd_diag(const DiagArgs& a) {
  if (std::find(std::begin(kDiagnostics), std::end(kDiagnostics), a.which) == std::end(kDiagnostics))
    throw ConfigError("unknown diagnostic '" + a.which + "'");
  const RunView run(a.run);
  const auto out = a.out.value_or(a.run / "diag");
  std::filesystem::create_directories(out);
  if (a.which == "interp") diag_interp(run, out, a.points);
  else if (a.which == "sharpness") diag_sharpness(run, out);
  else if (a.which == "pca") diag_pca(run, out);
  else if (a.which == "align") diag_align(run, out);
  else if (a.which == "tau") diag_tau(run, out);
  else if (a.which == "cosine") diag_cosine(run, out);
  else diag_norms(run, out);
}

struct ReportArgs {
  std::filesystem::path run;
  std::optional<std::filesystem::path> out;  // default: <run>/diag
  std::size_t points = kDefaultInterpPoints;
};

inline RunSummary cmd_report(const ReportArgs& a) {
  const RunView run(a.run);
  ReportOptions opt;
  opt.interp_points = a.points;
  return run_report(run, a.out.value_or(a.run / "diag"), opt);
}

}  // namespace wsdl::app
