#include <math.h>
#include <stdio.h>
#include <string.h>

#include "indi.h"

#define CHECK(cond)                                                  \
  do {                                                               \
    if (!(cond)) {                                                   \
      const char *msg = indi_last_error_message();                   \
      fprintf(stderr, "line %d: %s (%s)\n", __LINE__, #cond,         \
              msg ? msg : "no error message");                       \
      return 1;                                                      \
    }                                                                \
  } while (0)

int main(void) {
  CHECK(strlen(indi_version()) > 0);

  IndiSchedule none = {INDI_SCHEDULE_KIND_CONSTANT, 0.0};
  double c[1] = {0.0};
  IndiEstimator *gauss = NULL;
  CHECK(indi_gaussian_oracle_new(c, 1, 1.0, 1.0, none, &gauss) == INDI_STATUS_OK);

  // The shrinkage at t = 1 is 1 / (1 + 1).
  double x[1] = {2.0}, f[1];
  CHECK(indi_estimator_predict(gauss, x, 1, 1.0, f) == INDI_STATUS_OK);
  CHECK(fabs(f[0] - 1.0) < 1e-12);

  double y[1] = {2.0}, out[1];
  CHECK(indi_restore(gauss, INDI_SAMPLER_INDI, y, 1, 1000, none, 7, out) == INDI_STATUS_OK);
  CHECK(fabs(out[0] - 2.0 * sqrt(2.0) / 2.0) < 2e-3);

  double modes[4] = {1.0, 1.0, -1.0, -1.0}, weights[2] = {0.5, 0.5};
  double h[4] = {1.0, 0.0, 0.0, 1.0};
  IndiEstimator *mix = NULL;
  CHECK(indi_mixture_oracle_new(modes, 2, 2, weights, h, 1.0, none, &mix) == INDI_STATUS_OK);
  size_t dim = 0;
  CHECK(indi_estimator_dim(mix, &dim) == INDI_STATUS_OK && dim == 2);

  double wrong[3] = {0.0, 0.0, 0.0}, buf[3];
  CHECK(indi_estimator_predict(mix, wrong, 3, 0.5, buf) == INDI_STATUS_DIMENSION_MISMATCH);
  CHECK(indi_last_error_message() != NULL);

  indi_estimator_free(mix);
  indi_estimator_free(gauss);
  indi_estimator_free(NULL);
  puts("ok");
  return 0;
}
