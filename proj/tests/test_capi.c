/* Exercises the shared library through its C header only. */
#include "pjf/pjf.h"

#include <math.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>

static int failures = 0;

#define EXPECT(cond)                                              \
  do {                                                            \
    if (!(cond)) {                                                \
      fprintf(stderr, "%s:%d: expected %s\n", __FILE__, __LINE__, #cond); \
      ++failures;                                                 \
    }                                                             \
  } while (0)

static const char* kTwoDim =
    "{\"horizon\": 1.0, \"dt\": 0.001, \"seed\": 1,"
    " \"model\": {\"m\": 2, \"n\": 1, \"x0\": [1.0, 0.0],"
    "  \"drift\": {\"kind\": \"linear\", \"matrix\": [[-1.0, 0.0], [0.0, -1.0]]},"
    "  \"diffusion\": {\"kind\": \"constant\", \"value\": [[0.5, 0.0], [0.0, 0.5]]},"
    "  \"jump\": {\"kind\": \"additive\"},"
    "  \"observation\": {\"kind\": \"linear\", \"A\": [[1.0, 0.0]]},"
    "  \"jump_law\": {\"kind\": \"gaussian_product\", \"Q\": [[0.04, 0.0], [0.0, 0.04]], \"R\": [[0.01]]}},"
    " \"schedule\": {\"kind\": \"deterministic\", \"times\": [0.5]}}";

static void test_status_mapping(void) {
  EXPECT(strcmp(pjf_version(), "0.1.0") == 0);
  EXPECT(pjf_exit_code(PJF_OK) == 0);
  EXPECT(pjf_exit_code(PJF_CHECK_FAILED) == 1);
  EXPECT(pjf_exit_code(PJF_WEIGHT_COLLAPSE) == 1);
  EXPECT(pjf_exit_code(PJF_NON_PSD_COVARIANCE) == 2);
  EXPECT(pjf_exit_code(PJF_IO) == 2);
  EXPECT(pjf_exit_code(PJF_INCOMPATIBLE_METHOD) == 3);
  EXPECT(pjf_exit_code(PJF_UNSUPPORTED_SCENARIO) == 3);
  EXPECT(strcmp(pjf_status_name(PJF_SINGULAR_S), "SingularS") == 0);
}

static void test_scenarios(void) {
  pjf_scenario* s = NULL;
  EXPECT(pjf_scenario_preset("nope", &s) == PJF_INVALID_CONFIG);
  EXPECT(s == NULL);
  EXPECT(strlen(pjf_last_error()) > 0);

  EXPECT(pjf_scenario_preset("ou_kalman", &s) == PJF_OK);
  char* text = NULL;
  EXPECT(pjf_scenario_to_json(s, &text) == PJF_OK);
  pjf_scenario* back = NULL;
  EXPECT(pjf_scenario_parse(text, &back) == PJF_OK);
  char* again = NULL;
  EXPECT(pjf_scenario_to_json(back, &again) == PJF_OK);
  EXPECT(strcmp(text, again) == 0);
  pjf_string_free(again);
  pjf_scenario_free(back);

  /* Break R and the times: both violations are listed. */
  char* broken = (char*)malloc(strlen(text) + 16);
  strcpy(broken, text);
  char* r = strstr(broken, "\"R\"");
  EXPECT(r != NULL);
  if (r) {
    char* v = strstr(r, "0.01");
    memmove(v + 1, v, strlen(v) + 1);
    v[0] = '-';
  }
  char* report = NULL;
  EXPECT(pjf_validate_json(broken, &report) == PJF_NON_PSD_COVARIANCE);
  EXPECT(report != NULL && strstr(report, "NonPSDCovariance") != NULL);
  pjf_string_free(report);
  EXPECT(pjf_validate_json(text, NULL) == PJF_OK);
  EXPECT(pjf_validate_json("{not json", NULL) == PJF_INVALID_CONFIG);
  free(broken);
  pjf_string_free(text);
  pjf_scenario_free(s);

  EXPECT(pjf_scenario_load("/nonexistent/scenario.json", &s) == PJF_IO);
  pjf_scenario_free(NULL);
}

static void test_filtering(void) {
  pjf_scenario* s = NULL;
  pjf_events* ev = NULL;
  EXPECT(pjf_scenario_preset("ou_kalman", &s) == PJF_OK);
  EXPECT(pjf_simulate(s, 7, 0, &ev) == PJF_OK);
  EXPECT(pjf_events_count(ev) == 3);
  EXPECT(pjf_events_time(ev, 0) == 0.5);
  EXPECT(isfinite(pjf_events_dy(ev, 2, 0)));

  pjf_filter_options o;
  pjf_filter_options_init(&o);
  pjf_table* kal = NULL;
  pjf_table* grid = NULL;
  EXPECT(pjf_filter(s, ev, PJF_METHOD_KALMAN, &o, &kal) == PJF_OK);
  EXPECT(pjf_filter(s, ev, PJF_METHOD_GRID, &o, &grid) == PJF_OK);
  EXPECT(pjf_table_rows(kal) == pjf_table_rows(grid));
  EXPECT(strcmp(pjf_table_column(kal, 0), "t") == 0);
  EXPECT(strcmp(pjf_table_column(kal, 3), "m_1") == 0);
  EXPECT(strcmp(pjf_table_column(grid, 3), "mean") == 0);
  double worst = 0.0;
  for (size_t i = 0; i < pjf_table_rows(kal); ++i) {
    double d = fabs(pjf_table_value(kal, i, 3) - pjf_table_value(grid, i, 3));
    if (d > worst) worst = d;
  }
  EXPECT(worst <= 1e-3);

  o.particles = 2000;
  o.seed = 3;
  pjf_table* ks = NULL;
  EXPECT(pjf_filter(s, ev, PJF_METHOD_KS_PARTICLE, &o, &ks) == PJF_OK);
  EXPECT(pjf_table_cols(ks) == 6);
  EXPECT(pjf_table_column(ks, 99) == NULL);
  EXPECT(isnan(pjf_table_value(ks, 0, 99)));
  pjf_table_free(ks);
  pjf_table_free(kal);
  pjf_table_free(grid);
  pjf_events_free(ev);
  pjf_scenario_free(s);

  EXPECT(pjf_scenario_preset("medical", &s) == PJF_OK);
  EXPECT(pjf_simulate(s, 1, 0, &ev) == PJF_OK);
  EXPECT(pjf_filter(s, ev, PJF_METHOD_KALMAN, &o, &kal) == PJF_INCOMPATIBLE_METHOD);
  EXPECT(pjf_exit_code(PJF_INCOMPATIBLE_METHOD) == 3);
  pjf_events_free(ev);
  pjf_scenario_free(s);

  EXPECT(pjf_scenario_parse(kTwoDim, &s) == PJF_OK);
  EXPECT(pjf_simulate(s, 1, 0, &ev) == PJF_OK);
  EXPECT(pjf_filter(s, ev, PJF_METHOD_GRID, &o, &grid) == PJF_INCOMPATIBLE_METHOD);
  EXPECT(pjf_filter(s, ev, PJF_METHOD_KALMAN, &o, &kal) == PJF_OK);
  EXPECT(strcmp(pjf_table_column(kal, 5), "P_11") == 0);
  pjf_table_free(kal);
  pjf_events_free(ev);
  pjf_scenario_free(s);
}

static void test_runs(const char* dir) {
  pjf_scenario* s = NULL;
  EXPECT(pjf_scenario_preset("ou_kalman", &s) == PJF_OK);
  pjf_run_options o;
  pjf_run_options_init(&o);
  o.out_dir = dir;
  o.paths = 2;
  EXPECT(pjf_run_simulate(s, &o) == PJF_OK);
  char path[4096];
  snprintf(path, sizeof path, "%s/events_0001.csv", dir);
  FILE* f = fopen(path, "r");
  EXPECT(f != NULL);
  if (f) fclose(f);

  o.checks = "compensator";
  o.paths = 300;
  char* table = NULL;
  EXPECT(pjf_run_diagnose(s, &o, &table) == PJF_OK);
  EXPECT(table != NULL && strstr(table, "W=y") != NULL);
  pjf_string_free(table);
  o.negative_control = 1;
  o.paths = 3000;
  EXPECT(pjf_run_diagnose(s, &o, NULL) == PJF_CHECK_FAILED);

  o.checks = "bogus";
  EXPECT(pjf_run_diagnose(s, &o, NULL) == PJF_INVALID_CONFIG);
  EXPECT(pjf_run_filter(s, "nope", &o) == PJF_INVALID_CONFIG);
  pjf_scenario_free(s);
}

int main(int argc, char** argv) {
  test_status_mapping();
  test_scenarios();
  test_filtering();
  test_runs(argc > 1 ? argv[1] : "capi_out");
  if (failures) fprintf(stderr, "%d failure(s)\n", failures);
  else printf("all C interface checks passed\n");
  return failures ? 1 : 0;
}
