#ifndef SLATBP_H
#define SLATBP_H

#include <stddef.h>
#include <stdint.h>

/**
 * Result code of every fallible call.
 */
typedef enum SlatStatus {
  SLAT_STATUS_OK = 0,
  SLAT_STATUS_NULL_POINTER = 1,
  SLAT_STATUS_INVALID_ARGUMENT = 2,
  SLAT_STATUS_INVALID_CELL = 3,
  SLAT_STATUS_INVALID_MODEL = 4,
  SLAT_STATUS_INVALID_INPUT = 5,
  SLAT_STATUS_BELIEF_COLLAPSE = 6,
  SLAT_STATUS_PARSE = 7,
  SLAT_STATUS_IO = 8,
  SLAT_STATUS_BUFFER_TOO_SMALL = 9,
  SLAT_STATUS_PANIC = 10,
} SlatStatus;

typedef enum SlatMode {
  SLAT_MODE_SLAT = 0,
  SLAT_MODE_TRACKING = 1,
  SLAT_MODE_LOCALIZATION = 2,
} SlatMode;

/**
 * An engine with its beliefs.
 */
typedef struct SlatEngine SlatEngine;

/**
 * A cell map.
 */
typedef struct SlatMap SlatMap;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the last failed call on this thread, or null. The
 * pointer stays valid until the next call into this library on the same thread.
 */
const char *slat_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *slat_version(void);

/**
 * Parses a cell map from its JSON text. `default_extent` applies to records
 * without an extent; pass a negative value for none.
 */
enum SlatStatus slat_map_from_json(const char *json, double default_extent, struct SlatMap **out);

/**
 * Builds a map from `n_cells` centers (`3 * n_cells` doubles, x y z per cell)
 * with the same extent in every dimension.
 */
enum SlatStatus slat_map_from_centers(const double *centers,
                                      size_t n_cells,
                                      double extent,
                                      struct SlatMap **out);

/**
 * Number of cells, or 0 for a null map.
 */
size_t slat_map_num_cells(const struct SlatMap *map);

/**
 * Cell size D, or NaN for a null map.
 */
double slat_map_quantization(const struct SlatMap *map);

void slat_map_free(struct SlatMap *map);

/**
 * Creates an engine.
 *
 * `models_json` is `{"imu": {...}, "ranging": {...}}`. `target_prior` has
 * one weight per cell; `sensor_priors` holds `n_sensors` such rows back to
 * back. The map may be freed afterwards.
 */
enum SlatStatus slat_engine_new(const struct SlatMap *map,
                                const char *models_json,
                                const double *target_prior,
                                const double *sensor_priors,
                                size_t n_sensors,
                                enum SlatMode mode,
                                double epsilon_m,
                                size_t k,
                                struct SlatEngine **out);

void slat_engine_free(struct SlatEngine *engine);

/**
 * Advances one slot. `velocity` is 3 doubles or null when the IMU did not
 * report; `sensors[i]` measured distance `distances[i]` for `i < n_ranges`.
 * `work` (may be null) receives the number of summed terms. On failure the
 * engine is unchanged.
 */
enum SlatStatus slat_engine_step(struct SlatEngine *engine,
                                 const double *velocity,
                                 const size_t *sensors,
                                 const double *distances,
                                 size_t n_ranges,
                                 uint64_t *work);

/**
 * Advances one slot from a JSON object `{"velocity": [..] | null, "ranges": [{"sensor", "d"}]}`.
 */
enum SlatStatus slat_engine_step_json(struct SlatEngine *engine, const char *slot_json);

/**
 * Slots processed so far, or 0 for a null engine.
 */
size_t slat_engine_time(const struct SlatEngine *engine);

size_t slat_engine_num_cells(const struct SlatEngine *engine);

size_t slat_engine_num_sensors(const struct SlatEngine *engine);

/**
 * Summed work over all steps, or 0 for a null engine.
 */
uint64_t slat_engine_total_work(const struct SlatEngine *engine);

/**
 * Copies the normalized target belief into `out` (at least one slot per cell).
 */
enum SlatStatus slat_engine_target_belief(const struct SlatEngine *engine, double *out, size_t len);

/**
 * Copies the normalized belief of sensor `n` into `out`.
 */
enum SlatStatus slat_engine_sensor_belief(const struct SlatEngine *engine,
                                          size_t n,
                                          double *out,
                                          size_t len);

/**
 * Writes the kNN target position estimate (3 doubles) to `out`.
 */
enum SlatStatus slat_engine_target_estimate(const struct SlatEngine *engine, double *out);

/**
 * Writes the kNN position estimate of sensor `n` (3 doubles) to `out`.
 */
enum SlatStatus slat_engine_sensor_estimate(const struct SlatEngine *engine, size_t n, double *out);

/**
 * All beliefs as JSON `{"t", "target", "sensors"}`. Release with [`slat_string_free`].
 */
enum SlatStatus slat_engine_snapshot_json(const struct SlatEngine *engine, char **out);

void slat_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SLATBP_H */
