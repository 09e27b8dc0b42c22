#ifndef GRAVPANEL_H
#define GRAVPANEL_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes. Zero is success.
typedef enum GpStatus {
  GP_STATUS_OK = 0,
  // A required pointer argument was NULL.
  GP_STATUS_NULL_ARGUMENT = 1,
  // A string argument was not valid UTF-8.
  GP_STATUS_INVALID_UTF8 = 2,
  // Bad input: config, schema, data or argument values.
  GP_STATUS_VALIDATION = 3,
  // Numerical failure during estimation or testing.
  GP_STATUS_ESTIMATION = 4,
  // Index or key out of range.
  GP_STATUS_NOT_FOUND = 5,
  // Internal panic caught at the boundary.
  GP_STATUS_PANIC = 6,
} GpStatus;

// Cross-sectional dependence test selector for [`gp_cd_test`].
typedef enum GpCdTest {
  GP_CD_TEST_PESARAN = 0,
  GP_CD_TEST_FRIEDMAN = 1,
  GP_CD_TEST_FREES = 2,
} GpCdTest;

// Loaded bilateral panels, one per reporter.
typedef struct GpPanel GpPanel;

// Result of a full pipeline run.
typedef struct GpReport GpReport;

// Statistic and p-value; `p_value` is NaN when the test has none (Frees).
typedef struct GpTestOutput {
  double statistic;
  double p_value;
} GpTestOutput;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *gp_version(void);

// Message of the last failed call on this thread, or NULL. Valid until the
// next call into the library from the same thread.
const char *gp_last_error(void);

// Releases a string returned by this library. NULL is ignored.
//
// # Safety
// `s` is NULL or came from this library and has not been freed.
void gp_string_free(char *s);

// Loads a long-format bilateral CSV.
//
// # Safety
// `path` is a NUL-terminated string; `out` is writable.
enum GpStatus gp_panel_load(const char *path, struct GpPanel **out);

// Number of reporters in the panel; 0 for NULL.
//
// # Safety
// `panel` is NULL or a live handle.
size_t gp_panel_reporter_count(const struct GpPanel *panel);

// Reporter code, partner count, year count and missing cells of reporter `i`.
//
// # Safety
// `panel` is a live handle; every out pointer is writable.
enum GpStatus gp_panel_describe(const struct GpPanel *panel,
                                size_t i,
                                char **reporter,
                                size_t *n_partners,
                                size_t *n_years,
                                size_t *n_missing);

// Releases a panel handle. NULL is ignored.
//
// # Safety
// `panel` is NULL or a live handle not used afterwards.
void gp_panel_free(struct GpPanel *panel);

// Runs every stage for the config file at `config_path`. When `has_seed`
// is true, `seed` replaces the configured master seed.
//
// # Safety
// `config_path` is a NUL-terminated string; `out` is writable.
enum GpStatus gp_pipeline_run(const char *config_path,
                              bool has_seed,
                              uint64_t seed,
                              struct GpReport **out);

// Number of tables in the report; 0 for NULL.
//
// # Safety
// `report` is NULL or a live handle.
size_t gp_report_table_count(const struct GpReport *report);

// Key (CSV file stem) of table `i`, e.g. `cd_tests` or `reg_exports_outfdi`.
//
// # Safety
// `report` is a live handle; `out` is writable.
enum GpStatus gp_report_table_key(const struct GpReport *report, size_t i, char **out);

// Long-format CSV of the table with the given key.
//
// # Safety
// `report` is a live handle; `key` is a NUL-terminated string; `out` is writable.
enum GpStatus gp_report_table_csv(const struct GpReport *report, const char *key, char **out);

// The full Markdown report.
//
// # Safety
// `report` is a live handle; `out` is writable.
enum GpStatus gp_report_markdown(const struct GpReport *report, char **out);

// Writes every CSV plus `report.md` into `dir`, creating it if needed.
//
// # Safety
// `report` is a live handle; `dir` is a NUL-terminated string.
enum GpStatus gp_report_write(const struct GpReport *report, const char *dir);

// Releases a report handle. NULL is ignored.
//
// # Safety
// `report` is NULL or a live handle not used afterwards.
void gp_report_free(struct GpReport *report);

// Cross-sectional dependence test on an `n x t` residual matrix stored
// row-major (one row per entity).
//
// # Safety
// `residuals` points to `n * t` readable doubles; `out` is writable.
enum GpStatus gp_cd_test(enum GpCdTest test,
                         const double *residuals,
                         size_t n,
                         size_t t,
                         struct GpTestOutput *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GRAVPANEL_H */
