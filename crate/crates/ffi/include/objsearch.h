#ifndef OBJSEARCH_H
#define OBJSEARCH_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum ObjsStatus {
  OBJS_STATUS_OK = 0,
  OBJS_STATUS_NULL_POINTER = 1,
  OBJS_STATUS_INVALID_UTF8 = 2,
  OBJS_STATUS_INVALID_ARGUMENT = 3,
  OBJS_STATUS_SCENE = 4,
  OBJS_STATUS_CONFIG = 5,
  OBJS_STATUS_METRICS = 6,
  OBJS_STATUS_IO = 7,
  OBJS_STATUS_PANIC = 8,
} ObjsStatus;

typedef enum ObjsStrategy {
  OBJS_STRATEGY_GODHS = 0,
  OBJS_STRATEGY_COVERAGE = 1,
  OBJS_STRATEGY_RANDOM = 2,
} ObjsStrategy;

typedef enum ObjsSorting {
  OBJS_SORTING_NONE = 0,
  OBJS_SORTING_EE = 1,
  OBJS_SORTING_CH = 2,
  OBJS_SORTING_BOTH = 3,
} ObjsSorting;

/**
 * A validated scene with its derived geometry.
 */
typedef struct ObjsScene ObjsScene;

/**
 * The event trace of one search, bound to the scene it ran in.
 */
typedef struct ObjsTrace ObjsTrace;

/**
 * Search options; start from [`objs_search_options_default`].
 */
typedef struct ObjsSearchOptions {
  enum ObjsStrategy strategy;
  enum ObjsSorting sorting;
  uint64_t seed;
  /**
   * Probability that a visible target is missed, in [0, 1).
   */
  double noise;
} ObjsSearchOptions;

/**
 * Search rates in percent with their counts.
 */
typedef struct ObjsRates {
  double r_r;
  double r_c;
  double r_i;
  size_t rooms_num;
  size_t rooms_den;
  size_t carriers_num;
  size_t carriers_den;
  size_t placements_num;
  size_t placements_den;
  bool found;
} ObjsRates;

/**
 * Totals and path-optimality ratios of one trace; a ratio is NaN when there is no tour.
 */
typedef struct ObjsTraceStats {
  size_t events;
  double time;
  double chassis_length;
  double ee_length;
  size_t ee_poses;
  double ee_ratio;
  double ch_ratio;
} ObjsTraceStats;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the next call.
 */
const char *objs_last_error(void);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not be freed twice.
 */
void objs_string_free(char *s);

/**
 * The bundled seven-room flat.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum ObjsStatus objs_scene_flat(struct ObjsScene **out);

/**
 * Loads and validates a scene file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum ObjsStatus objs_scene_load(const char *path, struct ObjsScene **out);

/**
 * Parses and validates scene JSON.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum ObjsStatus objs_scene_parse(const char *json, struct ObjsScene **out);

/**
 * Generates a scene with default parameters; its target is read with [`objs_scene_target`].
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum ObjsStatus objs_scene_generate(uint64_t seed, struct ObjsScene **out);

/**
 * Releases a scene. Null is ignored.
 *
 * # Safety
 * `scene` must come from this library and not be freed twice.
 */
void objs_scene_free(struct ObjsScene *scene);

/**
 * Scene name as an owned string.
 *
 * # Safety
 * `scene` and `out` must be valid pointers.
 */
enum ObjsStatus objs_scene_name(const struct ObjsScene *scene, char **out);

/**
 * Generator target as an owned string; empty for loaded scenes.
 *
 * # Safety
 * `scene` and `out` must be valid pointers.
 */
enum ObjsStatus objs_scene_target(const struct ObjsScene *scene, char **out);

/**
 * Room, carrier and item counts. Any output pointer may be null.
 *
 * # Safety
 * `scene` must be a valid pointer; non-null outputs must be writable.
 */
enum ObjsStatus objs_scene_counts(const struct ObjsScene *scene,
                                  size_t *rooms,
                                  size_t *carriers,
                                  size_t *items);

/**
 * Defaults: hierarchical strategy, both sortings, seed 0, no detection noise.
 */
struct ObjsSearchOptions objs_search_options_default(void);

/**
 * Runs one search for `target` with the knowledge-base ranker.
 *
 * # Safety
 * `scene`, `options` and `out` must be valid pointers; `target` NUL-terminated.
 */
enum ObjsStatus objs_search_run(const struct ObjsScene *scene,
                                const char *target,
                                const struct ObjsSearchOptions *options,
                                struct ObjsTrace **out);

/**
 * Releases a trace. Null is ignored.
 *
 * # Safety
 * `trace` must come from this library and not be freed twice.
 */
void objs_trace_free(struct ObjsTrace *trace);

/**
 * Whether the search ended with a detection.
 *
 * # Safety
 * `trace` and `found` must be valid pointers.
 */
enum ObjsStatus objs_trace_found(const struct ObjsTrace *trace, bool *found);

/**
 * Search rates of a finished trace.
 *
 * # Safety
 * `trace` and `out` must be valid pointers.
 */
enum ObjsStatus objs_trace_rates(const struct ObjsTrace *trace, struct ObjsRates *out);

/**
 * Object search rate of a trace; `weights` may be null for the defaults.
 *
 * # Safety
 * `trace` and `out` must be valid pointers; non-null `weights` must point to 3 doubles.
 */
enum ObjsStatus objs_trace_osr(const struct ObjsTrace *trace, const double *weights, double *out);

/**
 * Totals and path-optimality ratios of a trace.
 *
 * # Safety
 * `trace` and `out` must be valid pointers.
 */
enum ObjsStatus objs_trace_stats(const struct ObjsTrace *trace, struct ObjsTraceStats *out);

/**
 * The trace as JSON lines (header first), owned by the caller.
 *
 * # Safety
 * `trace` and `out` must be valid pointers.
 */
enum ObjsStatus objs_trace_to_jsonl(const struct ObjsTrace *trace, char **out);

/**
 * Weighted object search rate from three rates in percent; `weights` may be null.
 *
 * # Safety
 * `out` must be a valid pointer; non-null `weights` must point to 3 doubles.
 */
enum ObjsStatus objs_osr(double r_r, double r_c, double r_i, const double *weights, double *out);

/**
 * Shortest open path from `start` through `count` points (xyz triples), at most 10 points.
 *
 * # Safety
 * `start` must point to 3 doubles, `points` to `3 * count` doubles (may be null when
 * `count` is 0), and `out` must be valid.
 */
enum ObjsStatus objs_optimal_tour_length(const double *start,
                                         const double *points,
                                         size_t count,
                                         double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* OBJSEARCH_H */
