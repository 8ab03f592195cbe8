#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "wsdl/core/csv.hpp"
#include "wsdl/core/error.hpp"
#include "wsdl/models/spec.hpp"
#include "wsdl/optim/adamw.hpp"
#include "wsdl/optim/schedule.hpp"

#ifndef WSDL_VERSION
#define WSDL_VERSION "0.0.0"
#endif

namespace wsdl {

inline constexpr std::string_view kToolkitVersion = WSDL_VERSION;

enum class DatasetKind { blobs, cifar10, chars };

inline std::string_view to_string(DatasetKind k) {
  switch (k) {
    case DatasetKind::blobs: return "blobs";
    case DatasetKind::cifar10: return "cifar10";
    case DatasetKind::chars: return "chars";
  }
  return "?";
}

/// Everything that determines a run. Fields left unset in a config file take
/// model-dependent defaults in resolve(); the manifest always lists every field.
struct RunConfig {
  // model
  ModelKind model = ModelKind::mlp;
  std::vector<std::size_t> mlp_hidden{64, 64};
  std::size_t decoder_width = 128;
  std::size_t decoder_blocks = 2;
  std::size_t decoder_heads = 4;
  std::optional<std::uint64_t> init_seed;

  // data
  DatasetKind dataset = DatasetKind::blobs;
  std::string data_dir;  // empty: $WSDL_DATA_DIR
  std::size_t cifar_train_subset = 0;
  int blobs_classes = 10;
  std::size_t blobs_per_class = 500;
  std::size_t blobs_dim = 32;
  double blobs_separation = 3.0;
  std::size_t blobs_heldout_per_class = 100;
  std::string chars_file;
  std::size_t chars_context = 64;

  // schedule
  ScheduleKind schedule = ScheduleKind::wsd;
  std::uint64_t total_steps = 3000;
  std::optional<std::uint64_t> warmup_steps;
  std::optional<std::uint64_t> decay_start;
  std::optional<double> cooldown_fraction;
  std::optional<double> peak_lr;

  // optimizer
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::optional<double> weight_decay;
  double grad_clip = 0.0;  // 0 disables global-norm clipping

  // loop
  std::size_t batch_size = 128;
  std::optional<std::uint64_t> checkpoint_every;
  std::optional<std::uint64_t> eval_every;
  std::size_t probe_size = 1024;
  std::uint64_t seed = 0;

  /// Fills every unset optional and validates the result.
  void resolve() {
    if (!init_seed) init_seed = seed;
    const bool lm = model == ModelKind::tinydecoder;
    if (!peak_lr) peak_lr = lm ? 3e-4 : 1e-3;
    if (!weight_decay) weight_decay = lm ? 0.1 : 5e-4;
    if (total_steps < 2) throw ConfigError("total_steps must be >= 2");
    if (!warmup_steps) warmup_steps = std::max<std::uint64_t>(1, total_steps / 20);
    if (schedule == ScheduleKind::wsd) {
      if (decay_start) {
        if (*decay_start >= total_steps) throw ConfigError("decay_start must be < total_steps");
        cooldown_fraction = static_cast<double>(total_steps - *decay_start) / static_cast<double>(total_steps);
      } else {
        if (!cooldown_fraction) cooldown_fraction = lm ? 0.20 : 0.35;
        if (!(*cooldown_fraction > 0.0 && *cooldown_fraction < 1.0))
          throw ConfigError("cooldown_fraction must be in (0, 1)");
        decay_start = total_steps - cooldown_steps(total_steps, *cooldown_fraction);
      }
    } else {
      // Cosine decays from the end of warmup.
      decay_start = *warmup_steps;
      cooldown_fraction = static_cast<double>(total_steps - *warmup_steps) / static_cast<double>(total_steps);
    }
    if (!checkpoint_every) checkpoint_every = std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::llround(0.02 * static_cast<double>(total_steps))));
    if (!eval_every) eval_every = *checkpoint_every;
    if (*checkpoint_every == 0) throw ConfigError("checkpoint_every must be > 0");
    if (*eval_every == 0) throw ConfigError("eval_every must be > 0");
    if (batch_size == 0) throw ConfigError("batch_size must be > 0");
    if (probe_size == 0) throw ConfigError("probe_size must be > 0");
    if (grad_clip < 0.0) throw ConfigError("grad_clip must be >= 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("betas must be in [0, 1)");
    if (!(adam_eps > 0.0)) throw ConfigError("adam_eps must be > 0");
    if (!(*weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
    schedule_spec().validate();
  }

  static std::uint64_t cooldown_steps(std::uint64_t total, double fraction) {
    return static_cast<std::uint64_t>(std::llround(fraction * static_cast<double>(total)));
  }

  ScheduleSpec schedule_spec() const {
    return {schedule, warmup_steps.value_or(0), decay_start.value_or(0), total_steps, peak_lr.value_or(0.0)};
  }

  AdamWHyper hyper() const { return {beta1, beta2, adam_eps, weight_decay.value_or(0.0)}; }

  /// Replaces the schedule fields with `s` (used by resume and sweeps).
  void set_schedule(const ScheduleSpec& s) {
    schedule = s.kind;
    warmup_steps = s.warmup;
    total_steps = s.total;
    peak_lr = s.peak_lr;
    decay_start = s.decay_start;
    cooldown_fraction = static_cast<double>(s.total - s.decay_start) / static_cast<double>(s.total);
  }

  std::filesystem::path resolved_data_dir() const {
    if (!data_dir.empty()) return data_dir;
    if (const char* env = std::getenv("WSDL_DATA_DIR")) return env;
    return ".";
  }

  void set(std::string_view key, std::string_view value);
  std::string to_manifest() const;

  static bool is_known_key(std::string_view key) {
    static constexpr std::string_view keys[] = {
        "toolkit_version", "model", "mlp_hidden", "decoder_width", "decoder_blocks", "decoder_heads", "init_seed",
        "dataset", "data_dir", "cifar_train_subset", "blobs_classes", "blobs_per_class", "blobs_dim",
        "blobs_separation", "blobs_heldout_per_class", "chars_file", "chars_context", "schedule", "total_steps",
        "warmup_steps", "decay_start", "cooldown_fraction", "peak_lr", "beta1", "beta2", "adam_eps", "weight_decay",
        "grad_clip", "batch_size", "checkpoint_every", "eval_every", "probe_size", "seed"};
    for (auto k : keys)
      if (k == key) return true;
    return false;
  }
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <class T>
T parse_number(std::string_view key, std::string_view text) {
  T value{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end || text.empty())
    throw ConfigError("bad value '" + std::string(text) + "' for key '" + std::string(key) + "'");
  if constexpr (std::is_floating_point_v<T>) {
    if (!std::isfinite(value)) throw ConfigError("non-finite value for key '" + std::string(key) + "'");
  }
  return value;
}

inline std::vector<std::size_t> parse_size_list(std::string_view key, std::string_view text) {
  std::vector<std::size_t> out;
  if (trim(text).empty()) return out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    const auto piece = trim(text.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    out.push_back(parse_number<std::size_t>(key, piece));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace detail

inline void RunConfig::set(std::string_view key, std::string_view raw) {
  using detail::parse_number;
  const std::string value = detail::trim(raw);
  const std::string_view v = value;
  // An empty value means "unset" (manifests spell unresolved optionals that way).
  if (v.empty()) {
    if (key == "init_seed") init_seed.reset();
    else if (key == "warmup_steps") warmup_steps.reset();
    else if (key == "decay_start") decay_start.reset();
    else if (key == "cooldown_fraction") cooldown_fraction.reset();
    else if (key == "peak_lr") peak_lr.reset();
    else if (key == "weight_decay") weight_decay.reset();
    else if (key == "checkpoint_every") checkpoint_every.reset();
    else if (key == "eval_every") eval_every.reset();
    else if (key == "data_dir") data_dir.clear();
    else if (key == "chars_file") chars_file.clear();
    else if (key == "mlp_hidden") mlp_hidden.clear();
    else if (key != "toolkit_version") {
      if (!is_known_key(key)) throw ConfigError("unknown config key '" + std::string(key) + "'");
      throw ConfigError("missing value for key '" + std::string(key) + "'");
    }
    return;
  }
  auto u64 = [&] { return parse_number<std::uint64_t>(key, v); };
  auto sz = [&] { return parse_number<std::size_t>(key, v); };
  auto real = [&] { return parse_number<double>(key, v); };

  if (key == "model") model = parse_model_kind(v);
  else if (key == "mlp_hidden") mlp_hidden = detail::parse_size_list(key, v);
  else if (key == "decoder_width") decoder_width = sz();
  else if (key == "decoder_blocks") decoder_blocks = sz();
  else if (key == "decoder_heads") decoder_heads = sz();
  else if (key == "init_seed") init_seed = u64();
  else if (key == "dataset") {
    if (v == "blobs") dataset = DatasetKind::blobs;
    else if (v == "cifar10") dataset = DatasetKind::cifar10;
    else if (v == "chars") dataset = DatasetKind::chars;
    else throw ConfigError("unknown dataset '" + value + "'");
  }
  else if (key == "data_dir") data_dir = value;
  else if (key == "cifar_train_subset") cifar_train_subset = sz();
  else if (key == "blobs_classes") blobs_classes = parse_number<int>(key, v);
  else if (key == "blobs_per_class") blobs_per_class = sz();
  else if (key == "blobs_dim") blobs_dim = sz();
  else if (key == "blobs_separation") blobs_separation = real();
  else if (key == "blobs_heldout_per_class") blobs_heldout_per_class = sz();
  else if (key == "chars_file") chars_file = value;
  else if (key == "chars_context") chars_context = sz();
  else if (key == "schedule") schedule = parse_schedule_kind(v);
  else if (key == "total_steps") total_steps = u64();
  else if (key == "warmup_steps") warmup_steps = u64();
  else if (key == "decay_start") decay_start = u64();
  else if (key == "cooldown_fraction") cooldown_fraction = real();
  else if (key == "peak_lr") peak_lr = real();
  else if (key == "beta1") beta1 = real();
  else if (key == "beta2") beta2 = real();
  else if (key == "adam_eps") adam_eps = real();
  else if (key == "weight_decay") weight_decay = real();
  else if (key == "grad_clip") grad_clip = real();
  else if (key == "batch_size") batch_size = sz();
  else if (key == "checkpoint_every") checkpoint_every = u64();
  else if (key == "eval_every") eval_every = u64();
  else if (key == "probe_size") probe_size = sz();
  else if (key == "seed") seed = u64();
  else if (key == "toolkit_version") {
    // Written into manifests; accepted so a manifest can be replayed as a config.
  }
  else throw ConfigError("unknown config key '" + std::string(key) + "'");
}

/// key=value lines in a fixed order; parse_config(to_manifest()) reproduces the config.
inline std::string RunConfig::to_manifest() const {
  std::ostringstream o;
  auto opt_u = [](const std::optional<std::uint64_t>& x) { return x ? std::to_string(*x) : std::string(); };
  auto opt_r = [](const std::optional<double>& x) { return format_optional(x); };
  std::string hidden;
  for (std::size_t i = 0; i < mlp_hidden.size(); ++i) hidden += (i ? "," : "") + std::to_string(mlp_hidden[i]);
  o << "toolkit_version=" << kToolkitVersion << '\n'
    << "model=" << to_string(model) << '\n'
    << "mlp_hidden=" << hidden << '\n'
    << "decoder_width=" << decoder_width << '\n'
    << "decoder_blocks=" << decoder_blocks << '\n'
    << "decoder_heads=" << decoder_heads << '\n'
    << "init_seed=" << opt_u(init_seed) << '\n'
    << "dataset=" << to_string(dataset) << '\n'
    << "data_dir=" << data_dir << '\n'
    << "cifar_train_subset=" << cifar_train_subset << '\n'
    << "blobs_classes=" << blobs_classes << '\n'
    << "blobs_per_class=" << blobs_per_class << '\n'
    << "blobs_dim=" << blobs_dim << '\n'
    << "blobs_separation=" << format_real(blobs_separation) << '\n'
    << "blobs_heldout_per_class=" << blobs_heldout_per_class << '\n'
    << "chars_file=" << chars_file << '\n'
    << "chars_context=" << chars_context << '\n'
    << "schedule=" << to_string(schedule) << '\n'
    << "total_steps=" << total_steps << '\n'
    << "warmup_steps=" << opt_u(warmup_steps) << '\n'
    << "decay_start=" << opt_u(decay_start) << '\n'
    << "cooldown_fraction=" << opt_r(cooldown_fraction) << '\n'
    << "peak_lr=" << opt_r(peak_lr) << '\n'
    << "beta1=" << format_real(beta1) << '\n'
    << "beta2=" << format_real(beta2) << '\n'
    << "adam_eps=" << format_real(adam_eps) << '\n'
    << "weight_decay=" << opt_r(weight_decay) << '\n'
    << "grad_clip=" << format_real(grad_clip) << '\n'
    << "batch_size=" << batch_size << '\n'
    << "checkpoint_every=" << opt_u(checkpoint_every) << '\n'
    << "eval_every=" << opt_u(eval_every) << '\n'
    << "probe_size=" << probe_size << '\n'
    << "seed=" << seed << '\n';
  return o.str();
}

/// Applies "key=value" to `cfg`.
inline void apply_override(RunConfig& cfg, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) throw ConfigError("expected key=value, got '" + std::string(assignment) + "'");
  const auto key = detail::trim(assignment.substr(0, eq));
  if (key.empty()) throw ConfigError("empty key in '" + std::string(assignment) + "'");
  cfg.set(key, assignment.substr(eq + 1));
}

/// Parses line-based key=value text; '#' starts a comment. Unknown keys are errors.
inline RunConfig parse_config(std::string_view text) {
  RunConfig cfg;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    auto nl = text.find('\n', start);
    if (nl == std::string_view::npos) nl = text.size();
    std::string line(text.substr(start, nl - start));
    start = nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (detail::trim(line).empty()) continue;
    try {
      apply_override(cfg, line);
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return cfg;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace wsdl
