/*
 * metaloop C API: a two-level reasoning orchestrator behind a flat
 * shared-library surface.
 *
 * All functions return a metaloop_status; METALOOP_OK means success. On
 * failure, metaloop_last_error() returns a human-readable message for the
 * calling thread. Out-parameters are written only on success unless noted
 * otherwise. Strings returned through char** out-parameters are owned by
 * the caller and must be released with metaloop_string_free(); handles are
 * released with their matching *_free() function.
 */

#ifndef METALOOP_H
#define METALOOP_H

#ifdef __cplusplus
extern "C" {
#endif

typedef enum metaloop_status {
  METALOOP_OK = 0,
  METALOOP_ERR_INVALID_ARGUMENT = 1,
  METALOOP_ERR_CONFIG = 2,
  METALOOP_ERR_PARSE = 3,
  METALOOP_ERR_IO = 4,
  METALOOP_ERR_BACKEND = 5,
  METALOOP_ERR_RUN_ABORTED = 6,
  METALOOP_ERR_INTERNAL = 7
} metaloop_status;

/* Opaque handles. */
typedef struct metaloop_config metaloop_config;
typedef struct metaloop_engine metaloop_engine;

const char* metaloop_version(void);

/* Message for the most recent failure on this thread ("" if none). */
const char* metaloop_last_error(void);

/* ---- configuration ---------------------------------------------------- */

/* Built-in defaults. */
metaloop_status metaloop_config_default(metaloop_config** out_config);

/* Reads a JSON config file and merges it over the defaults. Relative paths
 * inside the file resolve against the file's directory. */
metaloop_status metaloop_config_load(const char* path, metaloop_config** out_config);

/* Sets one field by dotted path, e.g. ("monitor.tau_fact", "0.1") or
 * ("ablation.disable_regulation", "true"). The value is parsed as JSON when
 * possible, else taken as a string. */
metaloop_status metaloop_config_set(metaloop_config* config, const char* dotted_key,
                                    const char* value);

/* Full validation: ranges, mappings, referenced files. Performs no network
 * operations. */
metaloop_status metaloop_config_validate(const metaloop_config* config);

/* Normalized JSON with all defaults explicit. */
metaloop_status metaloop_config_dump(const metaloop_config* config, char** out_json);

void metaloop_config_free(metaloop_config* config);

/* ---- engine ------------------------------------------------------------ */

/* Validates the config and builds the backend handles. */
metaloop_status metaloop_engine_new(const metaloop_config* config,
                                    metaloop_engine** out_engine);

void metaloop_engine_free(metaloop_engine* engine);

/* Runs one query end to end and returns the serialized trace document.
 * Returns METALOOP_ERR_RUN_ABORTED when the run aborted mid-way; the
 * partial trace is still written to out_trace_json in that case. */
metaloop_status metaloop_solve(metaloop_engine* engine, const char* query,
                               char** out_trace_json);

/* Runs a JSONL benchmark ("gsm8k", "math" or "aime"). When traces_out_path
 * is non-NULL, one trace document per sample is appended there as JSONL.
 * out_report_json receives {"summary": {...}, "summary_line": "...",
 * "per_sample": [...], "table": "...", "csv": "..."}. */
metaloop_status metaloop_eval(metaloop_engine* engine, const char* benchmark_path,
                              const char* format, const char* method_name,
                              const char* traces_out_path, char** out_report_json);

/* Sweeps the difficulty assessor over a leveled MATH-format benchmark and
 * tallies predicted vs tiered source difficulty. out_summary_json receives
 * {"matrix": [[..],[..],[..]], "csv": "...", "probe_errors": n}. */
metaloop_status metaloop_probe_difficulty(metaloop_engine* engine, const char* benchmark_path,
                                          char** out_summary_json);

/* Re-runs the trigger policy over a recorded trace file under optional
 * monitor overrides (JSON object with any of tau_fact, tau_think,
 * safety_interval; NULL keeps the recorded values). out_timeline_json
 * receives {"entries": [...], "matches_recording": bool}. */
metaloop_status metaloop_replay(const char* trace_path, const char* monitor_overrides_json,
                                char** out_timeline_json);

void metaloop_string_free(char* s);

#ifdef __cplusplus
}
#endif

#endif /* METALOOP_H */
