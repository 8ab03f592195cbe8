#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <functional>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <fmt/format.h>

#include "wsdl/core/csv.hpp"
#include "wsdl/core/error.hpp"
#include "wsdl/data/dataset.hpp"
#include "wsdl/models/model.hpp"
#include "wsdl/train/config.hpp"
#include "wsdl/train/trainer.hpp"

namespace wsdl {

struct SweepOptions {
  std::vector<double> fractions{0.10, 0.20, 0.35};
  std::vector<std::uint64_t> seeds{0};
  std::size_t parallel = 1;
  bool cosine_baseline = true;
};

struct SweepRun {
  std::string label;  // "0.1", "cosine", ...
  std::optional<double> fraction;
  std::uint64_t seed = 0;
  std::filesystem::path dir;
  double final_train_loss = 0.0;  // whole training set
  double final_eval_loss = 0.0;   // probe set
  std::optional<double> final_heldout_loss;
};

struct SweepResult {
  std::vector<SweepRun> runs;
  struct Row {
    std::string label;
    double final_train_loss = 0.0;
    double final_eval_loss = 0.0;
  };
  std::vector<Row> rows;  // seed-averaged, fractions ascending then cosine
};

namespace detail {

inline std::string fraction_label(double f) { return fmt::format("{}", f); }

inline void run_parallel(std::vector<std::function<void()>>& jobs, std::size_t parallel) {
  if (parallel <= 1) {
    for (auto& j : jobs) j();
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < std::min(parallel, jobs.size()); ++w)
    pool.emplace_back([&] {
      for (std::size_t i; (i = next++) < jobs.size();) {
        try {
          jobs[i]();
        } catch (...) {
          std::lock_guard lock(mu);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

inline void finish_run(SweepRun& r, const RunContext& ctx, const RunArtifacts& art) {
  const auto& params = art.final_checkpoint.params;
  r.final_train_loss = loss(ctx.model(), params, whole(ctx.train_data()));
  r.final_eval_loss = ctx.probe_loss(params);
  if (ctx.heldout()) r.final_heldout_loss = loss(ctx.model(), params, *ctx.heldout());
}

}  // namespace detail

/// For each seed: one WSD prefix run through the latest decay start, one resumed
/// continuation per cooldown fraction, and optionally a fresh warmup-cosine run.
/// Writes sweep.csv (seed means) and sweep_runs.csv (per run) into `out`.
inline SweepResult run_sweep(const RunConfig& base, const std::filesystem::path& out, const SweepOptions& opt) {
  if (opt.fractions.empty()) throw ConfigError("sweep: no cooldown fractions");
  if (opt.seeds.empty()) throw ConfigError("sweep: no seeds");
  std::vector<double> fractions = opt.fractions;
  std::sort(fractions.begin(), fractions.end());
  fractions.erase(std::unique(fractions.begin(), fractions.end()), fractions.end());
  std::filesystem::create_directories(out);

  SweepResult result;
  std::mutex mu;
  std::vector<std::function<void()>> jobs;
  for (const auto seed : opt.seeds) {
    RunConfig cfg = base;
    cfg.seed = seed;
    cfg.schedule = ScheduleKind::wsd;
    cfg.decay_start.reset();

    std::vector<RunConfig> per_fraction;
    for (double f : fractions) {
      RunConfig c = cfg;
      c.cooldown_fraction = f;
      c.resolve();
      per_fraction.push_back(c);
    }
    jobs.push_back([=, &result, &mu] {
      // The prefix shares the first fraction's schedule and stops at its decay
      // start; it also records every pre-decay checkpoint the other runs need.
      const RunConfig& latest = per_fraction.front();
      std::set<std::uint64_t> extra;
      for (const auto& c : per_fraction)
        for (auto t : checkpoint_steps(c))
          if (t <= *c.decay_start) extra.insert(t);
      TrainOptions prefix_opts;
      prefix_opts.stop_at = *latest.decay_start;
      prefix_opts.extra_checkpoints.assign(extra.begin(), extra.end());
      const auto prefix_dir = out / fmt::format("prefix_seed{}", seed);
      train(RunContext(latest), prefix_dir, prefix_opts);

      for (std::size_t i = 0; i < per_fraction.size(); ++i) {
        const RunConfig& c = per_fraction[i];
        SweepRun r;
        r.label = detail::fraction_label(fractions[i]);
        r.fraction = fractions[i];
        r.seed = seed;
        r.dir = out / fmt::format("wsd_{}_seed{}", r.label, seed);
        const auto art = resume(latest, prefix_dir / checkpoint_filename(*c.decay_start), c.schedule_spec(), r.dir);
        detail::finish_run(r, RunContext(c), art);
        std::lock_guard lock(mu);
        result.runs.push_back(r);
      }
    });
    if (opt.cosine_baseline) {
      jobs.push_back([=, &result, &mu] {
        RunConfig c = cfg;
        c.schedule = ScheduleKind::warmup_cosine;
        c.cooldown_fraction.reset();
        const RunContext ctx(c);
        SweepRun r;
        r.label = "cosine";
        r.seed = seed;
        r.dir = out / fmt::format("cosine_seed{}", seed);
        const auto art = train(ctx, r.dir);
        detail::finish_run(r, ctx, art);
        std::lock_guard lock(mu);
        result.runs.push_back(r);
      });
    }
  }
  detail::run_parallel(jobs, opt.parallel);

  std::stable_sort(result.runs.begin(), result.runs.end(), [](const SweepRun& a, const SweepRun& b) {
    const double fa = a.fraction.value_or(2.0), fb = b.fraction.value_or(2.0);
    return fa != fb ? fa < fb : a.seed < b.seed;
  });

  CsvWriter runs_csv(out / "sweep_runs.csv", "fraction,seed,final_train_loss,final_eval_loss,final_heldout_loss,dir");
  for (const auto& r : result.runs)
    runs_csv.row({r.label, std::to_string(r.seed), format_real(r.final_train_loss), format_real(r.final_eval_loss),
                  format_optional(r.final_heldout_loss), r.dir.filename().string()});

  CsvWriter sweep_csv(out / "sweep.csv", "fraction,final_train_loss,final_eval_loss");
  for (std::size_t i = 0; i < result.runs.size();) {
    std::size_t j = i;
    SweepResult::Row row{result.runs[i].label, 0.0, 0.0};
    while (j < result.runs.size() && result.runs[j].label == row.label) {
      row.final_train_loss += result.runs[j].final_train_loss;
      row.final_eval_loss += result.runs[j].final_eval_loss;
      ++j;
    }
    row.final_train_loss /= static_cast<double>(j - i);
    row.final_eval_loss /= static_cast<double>(j - i);
    sweep_csv.row({row.label, format_real(row.final_train_loss), format_real(row.final_eval_loss)});
    result.rows.push_back(row);
    i = j;
  }
  return result;
}

}  // namespace wsdl
