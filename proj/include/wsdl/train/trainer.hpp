#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "wsdl/core/csv.hpp"
#include "wsdl/core/error.hpp"
#include "wsdl/core/param_vector.hpp"
#include "wsdl/core/rng.hpp"
#include "wsdl/core/vector_ops.hpp"
#include "wsdl/data/batching.hpp"
#include "wsdl/data/chars.hpp"
#include "wsdl/data/cifar10.hpp"
#include "wsdl/data/dataset.hpp"
#include "wsdl/data/synthetic.hpp"
#include "wsdl/models/model.hpp"
#include "wsdl/optim/adamw.hpp"
#include "wsdl/optim/schedule.hpp"
#include "wsdl/train/checkpoint.hpp"
#include "wsdl/train/config.hpp"

namespace wsdl {

inline constexpr std::string_view kLossHeader = "step,lr,train_loss,eval_loss";
inline constexpr std::string_view kHeldoutHeader = "step,heldout_loss";

struct LossRecord {
  std::uint64_t step = 0;
  double lr = 0.0;
  std::optional<double> train_loss;
  std::optional<double> eval_loss;
};

struct RunArtifacts {
  std::vector<LossRecord> losses;  // rows produced by this invocation
  std::vector<std::filesystem::path> checkpoints;
  Checkpoint final_checkpoint;
};

struct TrainOptions {
  /// Stop after this many steps instead of running to the schedule's end.
  std::optional<std::uint64_t> stop_at;
  /// Additional steps at which to write checkpoints.
  std::vector<std::uint64_t> extra_checkpoints;
};

/// Marked steps of a schedule: end of warmup, 80% through the stable phase, the
/// start of the last stable window as long as the cooldown (clamped to warmup),
/// decay start and end. For warmup-cosine the stable phase is empty.
struct PhaseSteps {
  std::uint64_t warmup = 0;
  std::uint64_t stable80 = 0;
  std::uint64_t window_start = 0;
  std::uint64_t decay_start = 0;
  std::uint64_t total = 0;
};

inline PhaseSteps phase_steps(const ScheduleSpec& s) {
  PhaseSteps p;
  p.warmup = s.warmup;
  p.decay_start = s.kind == ScheduleKind::wsd ? s.decay_start : s.warmup;
  p.total = s.total;
  p.stable80 = p.warmup + static_cast<std::uint64_t>(std::llround(0.8 * static_cast<double>(p.decay_start - p.warmup)));
  const std::uint64_t cooldown = p.total - p.decay_start;
  p.window_start = p.decay_start >= p.warmup + cooldown ? p.decay_start - cooldown : p.warmup;
  return p;
}

/// Checkpoint steps: every `checkpoint_every` steps plus 0 and the marked phase steps.
inline std::vector<std::uint64_t> checkpoint_steps(const RunConfig& cfg) {
  std::set<std::uint64_t> steps;
  const std::uint64_t every = cfg.checkpoint_every.value_or(1);
  for (std::uint64_t t = 0; t <= cfg.total_steps; t += every) steps.insert(t);
  const auto p = phase_steps(cfg.schedule_spec());
  steps.insert({p.warmup, p.stable80, p.window_start, p.decay_start, p.total});
  return {steps.begin(), steps.end()};
}

struct RunData {
  Dataset train;
  std::optional<Dataset> heldout;
};

inline RunData load_run_data(const RunConfig& cfg) {
  RunData d;
  switch (cfg.dataset) {
    case DatasetKind::blobs: {
      const BlobsSpec spec{cfg.blobs_classes, cfg.blobs_per_class, cfg.blobs_dim, cfg.blobs_separation, cfg.seed};
      d.train = synthetic_blobs(spec, 0);
      if (cfg.blobs_heldout_per_class > 0) {
        BlobsSpec h = spec;
        h.per_class = cfg.blobs_heldout_per_class;
        d.heldout = synthetic_blobs(h, 1);
      }
      break;
    }
    case DatasetKind::cifar10:
      d.train = load_cifar10(cfg.resolved_data_dir(), Split::train, cfg.cifar_train_subset);
      d.heldout = load_cifar10(cfg.resolved_data_dir(), Split::test);
      break;
    case DatasetKind::chars: {
      if (cfg.chars_file.empty()) throw ConfigError("dataset=chars needs chars_file");
      std::filesystem::path f = cfg.chars_file;
      if (f.is_relative() && !std::filesystem::exists(f)) f = cfg.resolved_data_dir() / f;
      if (!std::filesystem::exists(f)) throw DataError(DataError::Kind::missing, "corpus not found: " + f.string());
      d.train = load_chars(f, cfg.chars_context);
      break;
    }
  }
  d.train.validate();
  if (d.heldout) d.heldout->validate();
  return d;
}

inline ModelSpec model_spec_for(const RunConfig& cfg, const Dataset& data) {
  const auto seed = cfg.init_seed.value_or(cfg.seed);
  switch (cfg.model) {
    case ModelKind::mlp: {
      std::vector<std::size_t> layers{data.feature_size()};
      layers.insert(layers.end(), cfg.mlp_hidden.begin(), cfg.mlp_hidden.end());
      layers.push_back(static_cast<std::size_t>(data.num_classes));
      return ModelSpec::mlp_spec(layers, seed);
    }
    case ModelKind::cifarcnn2: {
      const auto& s = data.feature_shape;
      if (s.size() != 3 || s[0] != 3 || s[1] != s[2]) throw ConfigError("cifarcnn2 needs 3xSxS image data");
      auto spec = ModelSpec::cifarcnn2_spec(s[1], seed);
      spec.num_classes = static_cast<std::size_t>(data.num_classes);
      return spec;
    }
    case ModelKind::tinydecoder:
      if (data.provenance != Provenance::chars) throw ConfigError("tinydecoder needs dataset=chars");
      return ModelSpec::tinydecoder_spec(static_cast<std::size_t>(data.num_classes), data.feature_shape[0],
                                         cfg.decoder_width, cfg.decoder_blocks, cfg.decoder_heads, seed);
  }
  throw ConfigError("unknown model");
}

/// Resolved config with its data, model and probe batch. Immutable.
class RunContext {
 public:
  explicit RunContext(RunConfig cfg) : config_(resolved(std::move(cfg))), data_(load_run_data(config_)),
                                       model_(model_spec_for(config_, data_.train)),
                                       probe_(probe_batch(data_.train, config_.probe_size, config_.seed)) {
    if (config_.batch_size > data_.train.size())
      throw ConfigError("batch_size " + std::to_string(config_.batch_size) + " exceeds dataset size " +
                        std::to_string(data_.train.size()));
    model_.check_batch(probe_);
    if (data_.heldout) heldout_ = whole(*data_.heldout);
  }

  const RunConfig& config() const noexcept { return config_; }
  const Dataset& train_data() const noexcept { return data_.train; }
  const Model& model() const noexcept { return model_; }
  const Batch& probe() const noexcept { return probe_; }
  const std::optional<Batch>& heldout() const noexcept { return heldout_; }

  /// Minibatch consumed at step t: batch (t mod E) of epoch floor(t / E), where E is
  /// the number of batches per epoch. A pure function of (seed, t).
  std::vector<std::size_t> batch_indices(std::uint64_t t) const {
    const std::size_t per_epoch = batches_per_epoch(data_.train.size(), config_.batch_size);
    const std::uint64_t epoch = t / per_epoch;
    if (epoch != cached_epoch_) {
      cached_ = epoch_batches(data_.train.size(), config_.batch_size, epoch, config_.seed);
      cached_epoch_ = epoch;
    }
    return cached_[t % per_epoch];
  }

  double probe_loss(const ParamVector& params) const { return loss(model_, params, probe_); }

 private:
  static RunConfig resolved(RunConfig c) {
    c.resolve();
    return c;
  }

  RunConfig config_;
  RunData data_;
  Model model_;
  Batch probe_;
  std::optional<Batch> heldout_;
  mutable std::uint64_t cached_epoch_ = ~std::uint64_t{0};
  mutable std::vector<std::vector<std::size_t>> cached_;
};

/// Identifier of the data-order stream recorded in checkpoints; its counter is the
/// number of minibatches consumed.
inline RngState data_rng_state(std::uint64_t seed, std::uint64_t step) { return {seed, fnv1a64("data"), step}; }

namespace detail {

struct LoopState {
  std::uint64_t step = 0;
  ParamVector params;
  AdamWState optimizer;
};

inline Checkpoint make_checkpoint(const RunContext& ctx, const LoopState& s) {
  Checkpoint c;
  c.model_digest = ctx.model().spec().digest();
  c.step = s.step;
  c.schedule = ctx.config().schedule_spec();
  c.params = s.params;
  c.optimizer = s.optimizer;
  c.rng = data_rng_state(ctx.config().seed, s.step);
  c.loss_log_offset = s.step;
  return c;
}

/// Data lines (header excluded) of `path` whose leading step is < `before`.
inline std::vector<std::string> log_prefix(const std::filesystem::path& path, std::uint64_t before) {
  std::vector<std::string> out;
  std::ifstream in(path);
  if (!in) return out;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    const std::uint64_t step = std::stoull(line.substr(0, comma));
    if (step >= before) break;
    out.push_back(line);
  }
  return out;
}

inline RunArtifacts run_loop(const RunContext& ctx, LoopState state, const std::filesystem::path& out_dir,
                             const TrainOptions& opts, const std::vector<std::string>& loss_prefix,
                             const std::vector<std::string>& heldout_prefix, bool skip_first_checkpoint) {
  const RunConfig& cfg = ctx.config();
  const ScheduleSpec sched = cfg.schedule_spec();
  const std::uint64_t end = std::min(opts.stop_at.value_or(sched.total), sched.total);

  std::set<std::uint64_t> ckpt_steps;
  for (auto t : checkpoint_steps(cfg)) ckpt_steps.insert(t);
  ckpt_steps.insert(opts.extra_checkpoints.begin(), opts.extra_checkpoints.end());

  std::filesystem::create_directories(out_dir);
  {
    std::ofstream manifest(out_dir / "manifest", std::ios::binary | std::ios::trunc);
    manifest << cfg.to_manifest();
  }
  CsvWriter losses(out_dir / "losses.csv", kLossHeader);
  for (const auto& line : loss_prefix) losses.raw_line(line);
  std::optional<CsvWriter> heldout;
  if (ctx.heldout()) {
    heldout.emplace(out_dir / "heldout.csv", kHeldoutHeader);
    for (const auto& line : heldout_prefix) heldout->raw_line(line);
  }

  RunArtifacts art;
  auto save = [&](const LoopState& s) {
    const auto path = out_dir / checkpoint_filename(s.step);
    art.final_checkpoint = make_checkpoint(ctx, s);
    save_checkpoint(art.final_checkpoint, path);
    art.checkpoints.push_back(path);
  };
  auto log_heldout = [&](const LoopState& s) {
    if (heldout) heldout->row({std::to_string(s.step), format_real(loss(ctx.model(), s.params, *ctx.heldout()))});
  };

  const Model& model = ctx.model();
  for (; state.step < end; ++state.step) {
    const std::uint64_t t = state.step;
    if (ckpt_steps.contains(t) && !(skip_first_checkpoint && art.checkpoints.empty() && t == loss_prefix.size()))
      save(state);
    const double lr = learning_rate(static_cast<double>(t), sched);
    const Batch batch = gather(ctx.train_data(), ctx.batch_indices(t));

    Evaluation ev;
    std::optional<double> eval_loss;
    try {
      ev = loss_and_gradient(model, state.params, batch);
      if (t % *cfg.eval_every == 0) eval_loss = ctx.probe_loss(state.params);
    } catch (const NumericError& e) {
      losses.flush();
      throw NumericError(std::string("training aborted: ") + e.what() + "; checkpoints up to the last cadence step are kept", t);
    }
    LossRecord rec{t, lr, ev.loss, eval_loss};
    losses.row({std::to_string(t), format_real(lr), format_real(ev.loss), format_optional(eval_loss)});
    art.losses.push_back(rec);
    if (eval_loss) log_heldout(state);

    if (cfg.grad_clip > 0.0) {
      const double gn = norm(ev.grad);
      if (gn > cfg.grad_clip) {
        const double s = cfg.grad_clip / gn;
        for (float& g : ev.grad) g = static_cast<float>(g * s);
      }
    }
    adamw_step(state.params, state.optimizer, ev.grad, lr);
    if (!state.params.all_finite()) throw NumericError("training aborted: non-finite parameters after update", t);
  }

  if (ckpt_steps.contains(end) || end == opts.stop_at.value_or(~std::uint64_t{0})) {
    save(state);
  } else {
    art.final_checkpoint = make_checkpoint(ctx, state);
  }
  if (end == sched.total) {
    const double final_eval = ctx.probe_loss(state.params);
    losses.row({std::to_string(end), format_real(learning_rate(static_cast<double>(end), sched)), "", format_real(final_eval)});
    art.losses.push_back({end, learning_rate(static_cast<double>(end), sched), std::nullopt, final_eval});
    log_heldout(state);
  }
  return art;
}

}  // namespace detail

/// Fresh run from init_params(init_seed) to the end of the schedule (or opts.stop_at).
/// Writes manifest, losses.csv, heldout.csv (when a held-out split exists) and
/// ckpt_*.bin into `out_dir`.
inline RunArtifacts train(const RunContext& ctx, const std::filesystem::path& out_dir, const TrainOptions& opts = {}) {
  detail::LoopState s;
  s.params = init_params(ctx.model(), *ctx.config().init_seed);
  s.optimizer = AdamWState::fresh(ctx.model().dimension(), ctx.config().hyper());
  return detail::run_loop(ctx, std::move(s), out_dir, opts, {}, {}, false);
}

inline RunArtifacts train(const RunConfig& cfg, const std::filesystem::path& out_dir, const TrainOptions& opts = {}) {
  return train(RunContext(cfg), out_dir, opts);
}

/// Checks that a WSD run can continue from `ckpt` under `extended`.
inline void check_resume_compatible(const Checkpoint& ckpt, const ScheduleSpec& original, const ScheduleSpec& extended) {
  extended.validate();
  if (original.kind != ScheduleKind::wsd || extended.kind != ScheduleKind::wsd)
    throw ConfigError("resume: only WSD runs can be continued");
  if (extended.warmup != original.warmup) throw ConfigError("resume: warmup differs from the original run");
  if (extended.peak_lr != original.peak_lr) throw ConfigError("resume: peak learning rate differs from the original run");
  if (ckpt.step < original.warmup && ckpt.step != 0) throw ConfigError("resume: checkpoint lies inside warmup");
  if (ckpt.step > extended.decay_start)
    throw ConfigError("resume: checkpoint step " + std::to_string(ckpt.step) + " is past the new decay start " +
                      std::to_string(extended.decay_start));
  if (ckpt.step > original.decay_start)
    throw ConfigError("resume: checkpoint was taken after the original run started decaying");
}

/// Continues the run that wrote `checkpoint_path` (configured by `base`) under the
/// schedule `extended`. The new run directory is self-contained: its manifest has
/// the extended schedule, and its logs and checkpoints up to the resume step are
/// copied from the source run, so it is byte-identical to a fresh run of its manifest.
inline RunArtifacts resume(const RunConfig& base, const std::filesystem::path& checkpoint_path, const ScheduleSpec& extended,
                           const std::filesystem::path& out_dir, const TrainOptions& opts = {}) {
  RunConfig original = base;
  original.resolve();
  RunConfig cfg = original;
  cfg.set_schedule(extended);
  const RunContext ctx(cfg);

  const auto digest = ctx.model().spec().digest();
  const Checkpoint ckpt = load_checkpoint(checkpoint_path, digest);
  check_resume_compatible(ckpt, original.schedule_spec(), extended);
  if (ckpt.rng.seed != cfg.seed) throw ConfigError("resume: checkpoint seed differs from the run config");
  if (ckpt.optimizer.hyper != cfg.hyper()) throw ConfigError("resume: optimizer settings differ from the checkpoint");

  const auto src_dir = checkpoint_path.parent_path();
  if (std::filesystem::exists(out_dir) && std::filesystem::equivalent(src_dir, out_dir))
    throw ConfigError("resume: output directory must differ from the source run");
  std::filesystem::create_directories(out_dir);

  // Earlier checkpoints that the extended run would have written, re-stamped with its schedule.
  std::set<std::uint64_t> wanted;
  for (auto t : checkpoint_steps(cfg)) wanted.insert(t);
  wanted.insert(opts.extra_checkpoints.begin(), opts.extra_checkpoints.end());
  for (auto t : wanted) {
    if (t > ckpt.step) break;
    const auto src = src_dir / checkpoint_filename(t);
    if (!std::filesystem::exists(src)) continue;
    Checkpoint c = t == ckpt.step ? ckpt : load_checkpoint(src, digest);
    c.schedule = extended;
    save_checkpoint(c, out_dir / checkpoint_filename(t));
  }

  const auto loss_prefix = detail::log_prefix(src_dir / "losses.csv", ckpt.step);
  const auto heldout_prefix = detail::log_prefix(src_dir / "heldout.csv", ckpt.step);
  if (loss_prefix.size() != ckpt.loss_log_offset)
    throw ConfigError("resume: source losses.csv has " + std::to_string(loss_prefix.size()) +
                      " rows before the checkpoint, expected " + std::to_string(ckpt.loss_log_offset));

  detail::LoopState s{ckpt.step, ckpt.params, ckpt.optimizer};
  auto art = detail::run_loop(ctx, std::move(s), out_dir, opts, loss_prefix, heldout_prefix, true);
  if (wanted.contains(ckpt.step)) art.checkpoints.insert(art.checkpoints.begin(), out_dir / checkpoint_filename(ckpt.step));
  return art;
}

/// Reads a run directory's manifest back into a config.
inline RunConfig load_manifest(const std::filesystem::path& run_dir) {
  const auto path = run_dir / "manifest";
  if (!std::filesystem::exists(path)) throw DataError(DataError::Kind::missing, "no manifest in " + run_dir.string());
  return load_config(path);
}

/// Steps of every ckpt_*.bin in `run_dir`, ascending.
inline std::vector<std::uint64_t> list_checkpoints(const std::filesystem::path& run_dir) {
  std::vector<std::uint64_t> steps;
  if (!std::filesystem::exists(run_dir)) return steps;
  for (const auto& e : std::filesystem::directory_iterator(run_dir)) {
    const auto name = e.path().filename().string();
    if (name.size() == 17 && name.starts_with("ckpt_") && name.ends_with(".bin"))
      steps.push_back(std::stoull(name.substr(5, 8)));
  }
  std::sort(steps.begin(), steps.end());
  return steps;
}

}  // namespace wsdl
