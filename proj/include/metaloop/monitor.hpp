#pragma once

#include <cstddef>
#include <string>

#include "metaloop/lexicon.hpp"

namespace metaloop {

struct MonitorConfig {
  double tau_fact = 0.08;          // anomaly threshold for fact-token frequency, in (0,1)
  double tau_think = 0.06;         // anomaly threshold for think-token frequency, in (0,1)
  std::size_t safety_interval = 3; // max chunks allowed without any trigger, >= 1
};

/// Per-trace trigger bookkeeping. One pipeline owns one state; both
/// operations below are pure and return values instead of mutating.
struct MonitorState {
  std::size_t last_trigger_index = 0; // 1-based ordinal of the last chunk that fired
  std::size_t chunks_seen = 0;        // chunks already evaluated
};

enum class TriggerAction { None, Fact, Think, All };

const char* to_string(TriggerAction action);

/// Trigger policy for one chunk, first match wins:
///   fact_freq  > tau_fact            -> Fact
///   think_freq > tau_think           -> Think
///   gap since last trigger > safety  -> All
///   otherwise                        -> None
/// Comparisons are strict. The chunk under evaluation counts toward the
/// safety gap: its 1-based ordinal is chunks_seen + 1, so the gap is
/// (chunks_seen + 1) - last_trigger_index.
TriggerAction evaluate_trigger(const ChunkStats& stats, const MonitorState& state,
                               const MonitorConfig& config);

/// Counts the evaluated chunk and records the firing point: chunks_seen
/// increments; last_trigger_index moves to the new chunks_seen iff the
/// action was not None.
MonitorState advance_monitor(const MonitorState& state, TriggerAction fired);

}  // namespace metaloop
