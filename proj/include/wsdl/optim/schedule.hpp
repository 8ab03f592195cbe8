#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <string_view>

#include "wsdl/core/error.hpp"

namespace wsdl {

enum class ScheduleKind { wsd, warmup_cosine };

inline std::string_view to_string(ScheduleKind k) { return k == ScheduleKind::wsd ? "wsd" : "cosine"; }

inline ScheduleKind parse_schedule_kind(std::string_view s) {
  if (s == "wsd") return ScheduleKind::wsd;
  if (s == "cosine" || s == "warmup_cosine") return ScheduleKind::warmup_cosine;
  throw ConfigError("unknown schedule '" + std::string(s) + "'");
}

/// Learning-rate schedule over integer steps [0, total].
///   wsd:    linear warmup to peak over [0, warmup], constant on (warmup, decay_start],
///           linear decay to 0 at total.
///   cosine: linear warmup, then half-cosine from peak to 0 at total.
struct ScheduleSpec {
  ScheduleKind kind = ScheduleKind::wsd;
  std::uint64_t warmup = 0;       // T_w
  std::uint64_t decay_start = 0;  // T_c (wsd only)
  std::uint64_t total = 0;        // T_end
  double peak_lr = 1.0;

  void validate() const {
    if (!(peak_lr > 0.0) || !std::isfinite(peak_lr)) throw ConfigError("schedule: peak learning rate must be > 0");
    if (warmup == 0) throw ConfigError("schedule: warmup must be > 0 steps");
    if (kind == ScheduleKind::wsd) {
      if (!(warmup <= decay_start && decay_start < total))
        throw ConfigError("schedule: wsd needs 0 < warmup <= decay_start < total (got " + std::to_string(warmup) +
                          ", " + std::to_string(decay_start) + ", " + std::to_string(total) + ")");
    } else if (!(warmup < total)) {
      throw ConfigError("schedule: cosine needs 0 < warmup < total");
    }
  }

  friend bool operator==(const ScheduleSpec&, const ScheduleSpec&) = default;
};

namespace detail {

inline void check_step(double t, const ScheduleSpec& s) {
  if (!(t >= 0.0)) throw ConfigError("schedule: negative step");
  if (t > static_cast<double>(s.total))
    throw ConfigError("schedule exhausted: step " + std::to_string(t) + " > total " + std::to_string(s.total));
}

}  // namespace detail

inline double lr_wsd(double t, const ScheduleSpec& s) {
  detail::check_step(t, s);
  const auto tw = static_cast<double>(s.warmup);
  const auto tc = static_cast<double>(s.decay_start);
  const auto te = static_cast<double>(s.total);
  if (t <= tw) return s.peak_lr * (t / tw);
  if (t <= tc) return s.peak_lr;
  return s.peak_lr * (1.0 - (t - tc) / (te - tc));
}

inline double lr_cosine(double t, const ScheduleSpec& s) {
  detail::check_step(t, s);
  const auto tw = static_cast<double>(s.warmup);
  const auto te = static_cast<double>(s.total);
  if (t <= tw) return s.peak_lr * (t / tw);
  return s.peak_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * (t - tw) / (te - tw)));
}

inline double learning_rate(double t, const ScheduleSpec& s) {
  return s.kind == ScheduleKind::wsd ? lr_wsd(t, s) : lr_cosine(t, s);
}

}  // namespace wsdl
