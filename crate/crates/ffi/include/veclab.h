#ifndef VECLAB_H
#define VECLAB_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

#define VL_AGREEMENT 1

#define VL_VALIDITY (1 << 1)

#define VL_TERMINATION (1 << 2)

#define VL_SAME_NULL_INDEX (1 << 3)

#define VL_NOT_EXACTLY_ONE_FULL (1 << 4)

typedef enum VlStatus {
  VL_STATUS_OK = 0,
  VL_STATUS_NULL_ARGUMENT = 1,
  VL_STATUS_INVALID_UTF8 = 2,
  VL_STATUS_CONFIG = 3,
  VL_STATUS_PROTOCOL = 4,
  VL_STATUS_TRACE_FORMAT = 5,
  VL_STATUS_REPLAY_MISMATCH = 6,
  VL_STATUS_BINARY = 7,
  VL_STATUS_PANIC = 8,
} VlStatus;

/**
 * A recorded run.
 */
typedef struct VlTrace VlTrace;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread. Empty after a success.
 * Valid until the next call on the same thread.
 */
const char *vl_last_error(void);

/**
 * Static, nul-terminated crate version.
 */
const char *vl_version(void);

/**
 * Run a scenario given as TOML or JSON text.
 *
 * # Safety
 * `scenario` must be a nul-terminated string and `out` a valid pointer.
 */
enum VlStatus vl_run_scenario(const char *scenario, struct VlTrace **out);

/**
 * Parse a JSONL trace.
 *
 * # Safety
 * `jsonl` must be a nul-terminated string and `out` a valid pointer.
 */
enum VlStatus vl_trace_from_jsonl(const char *jsonl, struct VlTrace **out);

/**
 * Serialize to JSONL. Release the string with [`vl_string_free`].
 *
 * # Safety
 * `trace` must be a live handle and `out` a valid pointer.
 */
enum VlStatus vl_trace_to_jsonl(const struct VlTrace *trace, char **out);

/**
 * Re-execute and check the recorded verdict; `ReplayMismatch` if it differs.
 *
 * # Safety
 * `trace` must be a live handle.
 */
enum VlStatus vl_trace_replay(const struct VlTrace *trace);

/**
 * Recorded 64-bit configuration hash of the final configuration.
 *
 * # Safety
 * `trace` must be a live handle and `out` a valid pointer.
 */
enum VlStatus vl_trace_config_hash(const struct VlTrace *trace, uint64_t *out);

/**
 * Number of recorded events.
 *
 * # Safety
 * `trace` must be a live handle and `out` a valid pointer.
 */
enum VlStatus vl_trace_event_count(const struct VlTrace *trace, uint64_t *out);

/**
 * Replay and evaluate every property; `failed` gets one `VL_*` bit per
 * failing property.
 *
 * # Safety
 * `trace` must be a live handle and `failed` a valid pointer.
 */
enum VlStatus vl_trace_check(const struct VlTrace *trace, uint32_t *failed);

/**
 * Binary decision of an agreeing trace whose initial values are bits.
 *
 * # Safety
 * `trace` must be a live handle and `bit` a valid pointer.
 */
enum VlStatus vl_trace_binary(const struct VlTrace *trace, uint8_t tie_rule, uint8_t *bit);

/**
 * # Safety
 * `trace` must be null or a handle not yet freed.
 */
void vl_trace_free(struct VlTrace *trace);

/**
 * # Safety
 * `s` must be null or a string returned by this library, not yet freed.
 */
void vl_string_free(char *s);

/**
 * Run the scripted cases; `failed` counts cases that did not match.
 *
 * # Safety
 * Both pointers must be valid.
 */
enum VlStatus vl_case_suite(uint32_t *cases, uint32_t *failed);

/**
 * Compare both termination paradigms over every instance for `n` in 5..=7.
 *
 * # Safety
 * Both pointers must be valid.
 */
enum VlStatus vl_commute(uint32_t n, uint8_t tie_rule, uint64_t *instances, uint64_t *mismatches);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* VECLAB_H */
