#include "metaloop/monitor.hpp"

namespace metaloop {

const char* to_string(TriggerAction action) {
  switch (action) {
    case TriggerAction::None: return "none";
    case TriggerAction::Fact: return "fact";
    case TriggerAction::Think: return "think";
    case TriggerAction::All: return "all";
  }
  return "none";
}

TriggerAction evaluate_trigger(const ChunkStats& stats, const MonitorState& state,
                               const MonitorConfig& config) {
  if (stats.fact_freq > config.tau_fact) return TriggerAction::Fact;
  if (stats.think_freq > config.tau_think) return TriggerAction::Think;
  // The chunk under evaluation has ordinal chunks_seen + 1.
  if (state.chunks_seen + 1 - state.last_trigger_index > config.safety_interval) {
    return TriggerAction::All;
  }
  return TriggerAction::None;
}

MonitorState advance_monitor(const MonitorState& state, TriggerAction fired) {
  MonitorState next{state.last_trigger_index, state.chunks_seen + 1};
  if (fired != TriggerAction::None) {
    next.last_trigger_index = next.chunks_seen;
  }
  return next;
}

}  // namespace metaloop
