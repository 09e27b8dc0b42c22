/* Loads the bundled panel, runs a CD test and the pipeline through the C ABI. */
#include <math.h>
#include <stdio.h>
#include <string.h>

#include "gravpanel.h"

static int check(GpStatus s, const char *what) {
    if (s != GP_STATUS_OK) {
        const char *msg = gp_last_error();
        fprintf(stderr, "%s failed (%d): %s\n", what, (int)s, msg ? msg : "");
        return 1;
    }
    return 0;
}

int main(int argc, char **argv) {
    if (argc != 3) {
        fprintf(stderr, "usage: smoke PANEL_CSV CONFIG\n");
        return 2;
    }
    GpPanel *panel = NULL;
    if (check(gp_panel_load(argv[1], &panel), "gp_panel_load")) return 1;
    size_t reporters = gp_panel_reporter_count(panel);
    for (size_t i = 0; i < reporters; i++) {
        char *code = NULL;
        size_t n, t, missing;
        if (check(gp_panel_describe(panel, i, &code, &n, &t, &missing), "gp_panel_describe")) return 1;
        printf("%s %zu %zu %zu\n", code, n, t, missing);
        gp_string_free(code);
    }
    gp_panel_free(panel);

    double r[2 * 14];
    for (int k = 0; k < 14; k++) {
        r[k] = sin(k + 1.0);
        r[14 + k] = sin(k + 1.0);
    }
    GpTestOutput cd;
    if (check(gp_cd_test(GP_CD_TEST_PESARAN, r, 2, 14, &cd), "gp_cd_test")) return 1;
    printf("pesaran %.6f\n", cd.statistic);

    if (gp_panel_load("/nonexistent.csv", &panel) == GP_STATUS_OK || gp_last_error() == NULL) return 1;

    GpReport *report = NULL;
    if (check(gp_pipeline_run(argv[2], false, 0, &report), "gp_pipeline_run")) return 1;
    printf("tables %zu\n", gp_report_table_count(report));
    char *csv = NULL;
    if (check(gp_report_table_csv(report, "reg_exports_outfdi", &csv), "gp_report_table_csv")) return 1;
    printf("csv %s\n", strncmp(csv, "section,row,reporter,column", 27) == 0 ? "ok" : "bad");
    gp_string_free(csv);
    gp_report_free(report);
    printf("version %s\n", gp_version());
    return 0;
}
