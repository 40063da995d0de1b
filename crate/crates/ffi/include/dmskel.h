#ifndef DMSKEL_H
#define DMSKEL_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DmStatus {
  DM_STATUS_OK = 0,
  DM_STATUS_NULL_POINTER = 1,
  DM_STATUS_INVALID_UTF8 = 2,
  DM_STATUS_IO = 3,
  DM_STATUS_PARSE = 4,
  DM_STATUS_STRUCTURE = 5,
  DM_STATUS_INVALID_ARGUMENT = 6,
  DM_STATUS_LOOKUP = 7,
  DM_STATUS_NO_SIGNAL = 8,
  DM_STATUS_CONFIG = 9,
  DM_STATUS_OUT_OF_RANGE = 10,
  DM_STATUS_PANIC = 11,
} DmStatus;

/**
 * A density volume.
 */
typedef struct DmField DmField;

/**
 * Skeleton trees produced by [`dm_skeletonize`].
 */
typedef struct DmSkeleton DmSkeleton;

/**
 * One tree node. `parent` is -1 for the root.
 */
typedef struct DmNode {
  double x;
  double y;
  double z;
  int64_t parent;
  double score;
  double weight;
  double radius;
} DmNode;

typedef struct DmMatchReport {
  size_t true_positives;
  size_t false_positives;
  size_t false_negatives;
  double precision;
  double recall;
  double f1;
  double bound;
} DmMatchReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread (empty if none). The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *dm_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *dm_version(void);

/**
 * Read a legacy VTK structured-points volume.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum DmStatus dm_field_read_vtk(const char *path, struct DmField **out);

/**
 * Copy `nx*ny*nz` values (x fastest) into a new volume. `spacing` may be
 * null for unit spacing.
 *
 * # Safety
 * `dims` must point to 3 values, `spacing` to 3 values or be null, and
 * `values` to `len` floats.
 */
enum DmStatus dm_field_from_buffer(const size_t *dims,
                                   const double *spacing,
                                   const float *values,
                                   size_t len,
                                   struct DmField **out);

/**
 * Write the volume dimensions into `dims[0..3]`.
 *
 * # Safety
 * `field` must come from this library; `dims` must hold 3 values.
 */
enum DmStatus dm_field_dims(const struct DmField *field, size_t *dims);

/**
 * # Safety
 * `field` must come from this library (or be null) and not be used again.
 */
void dm_field_free(struct DmField *field);

/**
 * Run the full pipeline. `config_toml` may be null for the single-neuron
 * defaults; otherwise it uses the same keys as the CLI's config file.
 *
 * # Safety
 * `field` must come from this library; `config_toml` must be null or a
 * NUL-terminated string; `out` must be writable.
 */
enum DmStatus dm_skeletonize(const struct DmField *field,
                             const char *config_toml,
                             struct DmSkeleton **out);

/**
 * Number of trees (one per root).
 *
 * # Safety
 * `sk` must come from this library; `out` must be writable.
 */
enum DmStatus dm_skeleton_tree_count(const struct DmSkeleton *sk, size_t *out);

/**
 * Number of nodes in tree `tree`.
 *
 * # Safety
 * `sk` must come from this library; `out` must be writable.
 */
enum DmStatus dm_skeleton_node_count(const struct DmSkeleton *sk, size_t tree, size_t *out);

/**
 * Node `node` of tree `tree`; node 0 is the root and parents precede
 * children.
 *
 * # Safety
 * `sk` must come from this library; `out` must be writable.
 */
enum DmStatus dm_skeleton_node(const struct DmSkeleton *sk,
                               size_t tree,
                               size_t node,
                               struct DmNode *out);

/**
 * Write all trees as SWC.
 *
 * # Safety
 * `sk` must come from this library; `path` must be NUL-terminated.
 */
enum DmStatus dm_skeleton_write_swc(const struct DmSkeleton *sk, const char *path);

/**
 * Write the per-node weight sidecar.
 *
 * # Safety
 * `sk` must come from this library; `path` must be NUL-terminated.
 */
enum DmStatus dm_skeleton_write_weights(const struct DmSkeleton *sk, const char *path);

/**
 * # Safety
 * `sk` must come from this library (or be null) and not be used again.
 */
void dm_skeleton_free(struct DmSkeleton *sk);

/**
 * Compare two SWC files at one distance bound after discretising both at
 * `unit`.
 *
 * # Safety
 * Paths must be NUL-terminated; `out` must be writable.
 */
enum DmStatus dm_evaluate_swc(const char *predicted,
                              const char *truth,
                              double bound,
                              double unit,
                              struct DmMatchReport *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DMSKEL_H */
