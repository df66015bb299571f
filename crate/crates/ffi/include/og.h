#ifndef OG_FFI_H
#define OG_FFI_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum OgStatus {
  OG_STATUS_OK = 0,
  /**
   * A required pointer argument was NULL.
   */
  OG_STATUS_NULL_ARGUMENT = 1,
  /**
   * Not UTF-8, not JSON of the expected shape, or out of range.
   */
  OG_STATUS_INVALID_ARGUMENT = 2,
  OG_STATUS_NOT_FOUND = 3,
  /**
   * A record, model or output failed its contract.
   */
  OG_STATUS_CONTRACT_VIOLATION = 4,
  /**
   * Another writer holds the store lock.
   */
  OG_STATUS_BUSY = 5,
  OG_STATUS_IO = 6,
  /**
   * Not enough data for the operation (e.g. fewer than two fixes).
   */
  OG_STATUS_INSUFFICIENT_DATA = 7,
  OG_STATUS_INTERNAL = 8,
  /**
   * A panic was caught at the boundary.
   */
  OG_STATUS_PANIC = 9,
} OgStatus;

/**
 * Which trainer [`og_train`] runs.
 */
typedef enum OgTrainer {
  OG_TRAINER_RULE = 0,
  OG_TRAINER_ML = 1,
} OgTrainer;

/**
 * An installation's data directory.
 */
typedef struct OgDataDir OgDataDir;

/**
 * A loaded, contract-checked detector.
 */
typedef struct OgDetector OgDetector;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version, a static string.
 */
const char *og_version(void);

/**
 * Message of the last failed call on this thread, or NULL after a
 * success. Valid until the next call on the same thread.
 */
const char *og_last_error(void);

/**
 * Release a string handed out by this library. NULL is ignored.
 *
 * # Safety
 * `s` is NULL or was returned by this library and not yet freed.
 */
void og_string_free(char *s);

/**
 * Great-circle distance in km. Returns NaN for coordinates out of range.
 */
double og_haversine_km(double lat1, double lon1, double lat2, double lon2);

/**
 * Open (without creating) a data directory.
 *
 * # Safety
 * `path` is a NUL-terminated string; `out` is valid for one write.
 */
enum OgStatus og_data_dir_open(const char *path, bool break_stale_locks, struct OgDataDir **out);

/**
 * # Safety
 * `dir` is NULL or a handle from [`og_data_dir_open`], not yet freed.
 */
void og_data_dir_free(struct OgDataDir *dir);

/**
 * Generate a seeded synthetic snapshot; writes its id to `out_snapshot_id`.
 *
 * # Safety
 * `dir` is a live handle; `out_snapshot_id` is valid for one write.
 */
enum OgStatus og_generate(const struct OgDataDir *dir,
                          uint64_t seed,
                          uint32_t n_objects,
                          int64_t duration_s,
                          char **out_snapshot_id);

/**
 * Train and register a model.
 *
 * `hyperparams_json` is NULL or a JSON object; `created_ts` is NULL (wall
 * clock) or a fixed creation time. Writes `name:version` to `out_model_id`.
 *
 * # Safety
 * Pointers are NULL where allowed or valid as described.
 */
enum OgStatus og_train(const struct OgDataDir *dir,
                       enum OgTrainer trainer,
                       const char *snapshot_id,
                       const char *hyperparams_json,
                       const int64_t *created_ts,
                       char **out_model_id);

/**
 * Batch prediction into the Prediction Store over a snapshot, or over the
 * raw store when `snapshot_id` is NULL. Writes the JSON report.
 *
 * # Safety
 * Pointers are NULL where allowed or valid as described.
 */
enum OgStatus og_batch_predict(const struct OgDataDir *dir,
                               const char *model_ref,
                               const char *snapshot_id,
                               char **out_report_json);

/**
 * Load a registered model (`name[:version|latest]`), checking its
 * registry entry against the model contract.
 *
 * # Safety
 * `dir` is a live handle; `model_ref` a string; `out` valid for one write.
 */
enum OgStatus og_detector_open(const struct OgDataDir *dir,
                               const char *model_ref,
                               struct OgDetector **out);

/**
 * `name:version` of a loaded detector, owned by the handle.
 *
 * # Safety
 * `detector` is NULL or a live handle.
 */
const char *og_detector_model_id(const struct OgDetector *detector);

/**
 * Detect over a JSON array of fixes (any objects, any order). Writes a
 * JSON array of anomalies; nothing is persisted.
 *
 * # Safety
 * `detector` is a live handle; `fixes_json` a string; `out` valid for one write.
 */
enum OgStatus og_detector_detect(const struct OgDetector *detector,
                                 const char *fixes_json,
                                 char **out_anomalies_json);

/**
 * # Safety
 * `detector` is NULL or a live handle, not yet freed.
 */
void og_detector_free(struct OgDetector *detector);

/**
 * Run an `og` command line (without the program name) in-process.
 * Writes the exit code and captured stdout; stderr goes to
 * `og_last_error` when the exit code is non-zero.
 *
 * # Safety
 * `argv` holds `argc` NUL-terminated strings; outputs are valid for one write.
 */
enum OgStatus og_cli_run(size_t argc,
                         const char *const *argv,
                         int32_t *out_exit_code,
                         char **out_stdout);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* OG_FFI_H */
