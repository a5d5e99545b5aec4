#ifndef GRAPHREC_H
#define GRAPHREC_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define GR_GRAPH_BIP 0

#define GR_GRAPH_STG 1

#define GR_GRAPH_LSG 2

#define GR_CONTENT_NONE 0

#define GR_CONTENT_CI 1

#define GR_CONTENT_CIU 2

#define GR_DECAY_NONE 0

#define GR_DECAY_EDF 1

#define GR_DECAY_LDF 2

#define GR_TRUST_NONE 0

#define GR_TRUST_ET 1

#define GR_TRUST_IT 2

typedef enum GrStatus {
  GR_STATUS_OK = 0,
  GR_STATUS_NULL_POINTER = 1,
  GR_STATUS_INVALID_ARGUMENT = 2,
  GR_STATUS_IO = 3,
  GR_STATUS_PARSE = 4,
  GR_STATUS_VALIDATION = 5,
  GR_STATUS_EMPTY_DATA = 6,
  GR_STATUS_COLD_USER = 7,
  GR_STATUS_NOT_FOUND = 8,
  GR_STATUS_INTERNAL = 99,
} GrStatus;

typedef struct GrDataset GrDataset;

typedef struct GrRanking GrRanking;

typedef struct GrRecommender GrRecommender;

/**
 * Recommender settings. Durations (`delta`, `tau0`) are in timestamp
 * units, `ldf_k` per timestamp unit.
 */
typedef struct GrSettings {
  uint32_t graph;
  uint32_t content;
  uint32_t decay;
  uint32_t trust;
  double alpha;
  double beta;
  double gamma;
  double delta;
  double tau0;
  double ldf_k;
  double tol;
  size_t max_iter;
  size_t n;
  size_t min_overlap;
} GrSettings;

/**
 * Time-averaged scores at one list length.
 */
typedef struct GrMetrics {
  double f1;
  double hit;
  double map;
  size_t evaluated_users;
  size_t cold_users;
} GrMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *gr_version(void);

/**
 * Message of the last failed call on this thread, or NULL. Valid until the
 * next call into the library from the same thread.
 */
const char *gr_last_error_message(void);

/**
 * Default settings with Unix-second timestamps.
 */
struct GrSettings gr_settings_default(void);

/**
 * Seconds per day, for converting day-based parameters.
 */
double gr_seconds_per_day(void);

/**
 * Loads and filters a review file. `trust_path` and `delimiter` may be
 * NULL; `delimiter` accepts "whitespace", "tab", "comma" or one character.
 *
 * # Safety
 * String arguments must be NUL-terminated or NULL; `out` must be writable.
 */
enum GrStatus gr_dataset_load(const char *reviews_path,
                              const char *trust_path,
                              const char *delimiter,
                              struct GrDataset **out);

/**
 * # Safety
 * `dataset` must come from [`gr_dataset_load`] or be NULL.
 */
void gr_dataset_free(struct GrDataset *dataset);

/**
 * Positive links after filtering; 0 for NULL.
 *
 * # Safety
 * `dataset` must be a live handle or NULL.
 */
size_t gr_dataset_link_count(const struct GrDataset *dataset);

/**
 * # Safety
 * `dataset` must be a live handle or NULL.
 */
size_t gr_dataset_user_count(const struct GrDataset *dataset);

/**
 * # Safety
 * `dataset` must be a live handle or NULL.
 */
size_t gr_dataset_item_count(const struct GrDataset *dataset);

/**
 * First and last timestamp of the filtered stream.
 *
 * # Safety
 * `dataset` must be a live handle; `t_min` and `t_max` must be writable.
 */
enum GrStatus gr_dataset_time_range(const struct GrDataset *dataset,
                                    int64_t *t_min,
                                    int64_t *t_max);

/**
 * Trains on all links with timestamp at most `now`.
 *
 * # Safety
 * `dataset` and `settings` must be valid; `out` must be writable.
 */
enum GrStatus gr_recommender_new(const struct GrDataset *dataset,
                                 const struct GrSettings *settings,
                                 int64_t now,
                                 struct GrRecommender **out);

/**
 * # Safety
 * `rec` must come from [`gr_recommender_new`] or be NULL.
 */
void gr_recommender_free(struct GrRecommender *rec);

/**
 * Top-`n` unseen items for `user`. Unknown or cold users give
 * `GR_STATUS_NOT_FOUND` / `GR_STATUS_COLD_USER`.
 *
 * # Safety
 * `rec` must be live, `user` NUL-terminated and `out` writable.
 */
enum GrStatus gr_recommend(const struct GrRecommender *rec,
                           const char *user,
                           size_t n,
                           struct GrRanking **out);

/**
 * # Safety
 * `ranking` must be live or NULL.
 */
size_t gr_ranking_len(const struct GrRanking *ranking);

/**
 * Item name at `index`, or NULL when out of range. Owned by the ranking.
 *
 * # Safety
 * `ranking` must be live or NULL.
 */
const char *gr_ranking_item(const struct GrRanking *ranking, size_t index);

/**
 * Score at `index`, or NaN when out of range.
 *
 * # Safety
 * `ranking` must be live or NULL.
 */
double gr_ranking_score(const struct GrRanking *ranking, size_t index);

/**
 * # Safety
 * `ranking` must come from [`gr_recommend`] or be NULL.
 */
void gr_ranking_free(struct GrRanking *ranking);

/**
 * Runs the `k`-round evaluation at list length `settings->n`.
 *
 * # Safety
 * `dataset` and `settings` must be valid; `out` must be writable.
 */
enum GrStatus gr_evaluate(const struct GrDataset *dataset,
                          const struct GrSettings *settings,
                          size_t k,
                          struct GrMetrics *out);

/**
 * Same protocol with the most-popular-item baseline.
 *
 * # Safety
 * `dataset` must be valid; `out` must be writable.
 */
enum GrStatus gr_evaluate_mpi(const struct GrDataset *dataset,
                              size_t k,
                              size_t n,
                              struct GrMetrics *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GRAPHREC_H */
