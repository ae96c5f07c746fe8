#ifndef SPONGE_H
#define SPONGE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SpongeStatus {
  SPONGE_STATUS_OK = 0,
  SPONGE_STATUS_NULL_POINTER = 1,
  SPONGE_STATUS_INVALID_UTF8 = 2,
  SPONGE_STATUS_CONFIG = 3,
  SPONGE_STATUS_CORRUPT = 4,
  SPONGE_STATUS_MISSING_STAGE = 5,
  SPONGE_STATUS_UNKNOWN_FORMAT = 6,
  SPONGE_STATUS_SURFACE = 7,
  SPONGE_STATUS_CONSTRUCTION = 8,
  SPONGE_STATUS_PROBE = 9,
  SPONGE_STATUS_IO = 10,
  SPONGE_STATUS_JSON = 11,
  /**
   * The report was produced and at least one certificate failed.
   */
  SPONGE_STATUS_VERIFY_FAILED = 12,
  SPONGE_STATUS_PANIC = 13,
} SpongeStatus;

/**
 * Opaque bundle handle.
 */
typedef struct SpongeBundle SpongeBundle;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty when none. The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *sponge_last_error(void);

/**
 * Build the tower described by a JSON config (an empty object gives the
 * defaults) and write the bundle into `out_dir`.
 *
 * # Safety
 * Both arguments must be null or valid NUL-terminated strings.
 */
enum SpongeStatus sponge_build(const char *config_json, const char *out_dir);

/**
 * Read a bundle directory into a new handle stored in `*out`.
 *
 * # Safety
 * `dir` must be null or a valid NUL-terminated string; `out` must be null
 * or point to writable storage for a pointer.
 */
enum SpongeStatus sponge_bundle_open(const char *dir, struct SpongeBundle **out);

/**
 * # Safety
 * `h` must be null or a handle from [`sponge_bundle_open`] not yet freed.
 */
void sponge_bundle_free(struct SpongeBundle *h);

/**
 * Number of stages in the bundle, 0 for a null handle.
 *
 * # Safety
 * `h` must be null or a live handle.
 */
size_t sponge_bundle_stage_count(const struct SpongeBundle *h);

/**
 * Cell, vertex and ambient-dimension counts of stage `j`.
 *
 * # Safety
 * `h` must be null or a live handle; the output pointers must be null or
 * writable.
 */
enum SpongeStatus sponge_bundle_stage_info(const struct SpongeBundle *h,
                                           uint32_t j,
                                           size_t *cells,
                                           size_t *vertices,
                                           size_t *ambient_dim);

/**
 * Verify the bundle. The JSON-lines report goes to `*report` and the number
 * of failed certificates to `*failures`; the status is `VerifyFailed` when
 * that number is positive.
 *
 * # Safety
 * `h` must be null or a live handle; the output pointers must be null or
 * writable.
 */
enum SpongeStatus sponge_verify(const struct SpongeBundle *h, char **report, uint32_t *failures);

/**
 * Probe every stage j ≥ 1 with the surface described by a JSON spec; the
 * per-stage certificates and the summary go to `*out` as JSON lines.
 *
 * # Safety
 * `h` must be null or a live handle, `spec_json` null or a valid string,
 * `out` null or writable.
 */
enum SpongeStatus sponge_probe(const struct SpongeBundle *h, const char *spec_json, char **out);

/**
 * Mesh of stage `j` in `format` ("off" or "obj"). `project` is null or
 * points to three ambient coordinate indices.
 *
 * # Safety
 * `h` must be null or a live handle, `format` null or a valid string,
 * `project` null or readable for three values, `out` null or writable.
 */
enum SpongeStatus sponge_export(const struct SpongeBundle *h,
                                uint32_t j,
                                const char *format,
                                const size_t *project,
                                char **out);

/**
 * # Safety
 * `s` must be null or a string returned by this library, not yet freed.
 */
void sponge_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SPONGE_H */
