#include <math.h>
#include <stdio.h>
#include <string.h>

#include "og.h"

#define CHECK(cond)                                                        \
  do {                                                                     \
    if (!(cond)) {                                                         \
      const char *why = og_last_error();                                   \
      fprintf(stderr, "%s:%d: %s (%s)\n", __FILE__, __LINE__, #cond,       \
              why ? why : "no error");                                     \
      return 1;                                                            \
    }                                                                      \
  } while (0)

int main(int argc, char **argv) {
  CHECK(argc == 2);
  CHECK(strlen(og_version()) > 0);
  CHECK(fabs(og_haversine_km(0, 0, 0, 1) - 111.195) < 1e-3);
  CHECK(isnan(og_haversine_km(91, 0, 0, 0)));

  OgDataDir *dir = NULL;
  CHECK(og_data_dir_open(argv[1], false, &dir) == OG_STATUS_OK);

  char *snapshot = NULL;
  CHECK(og_generate(dir, 42, 3, 86400, &snapshot) == OG_STATUS_OK);

  int64_t created = 1700000000;
  char *model = NULL;
  CHECK(og_train(dir, OG_TRAINER_RULE, snapshot, "{\"max_speed_kn\":\"calibrate\"}",
                 &created, &model) == OG_STATUS_OK);
  CHECK(strcmp(model, "rule-detector:1") == 0);

  char *report = NULL;
  CHECK(og_batch_predict(dir, model, snapshot, &report) == OG_STATUS_OK);
  CHECK(strstr(report, "\"model_id\":\"rule-detector:1\"") != NULL);

  OgDetector *det = NULL;
  CHECK(og_detector_open(dir, "rule-detector", &det) == OG_STATUS_OK);
  CHECK(strcmp(og_detector_model_id(det), "rule-detector:1") == 0);
  char *found = NULL;
  CHECK(og_detector_detect(det, "[]", &found) == OG_STATUS_OK);
  CHECK(strcmp(found, "[]") == 0);

  CHECK(og_detector_open(dir, "missing-model", &det) == OG_STATUS_NOT_FOUND);
  CHECK(og_last_error() != NULL);
  CHECK(og_train(dir, OG_TRAINER_ML, NULL, NULL, NULL, &model) == OG_STATUS_NULL_ARGUMENT);

  og_string_free(found);
  og_detector_free(det);
  og_string_free(report);
  og_string_free(model);
  og_string_free(snapshot);
  og_data_dir_free(dir);
  og_string_free(NULL);
  puts("ok");
  return 0;
}
