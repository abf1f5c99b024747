/* Exercises the C interface from C. */
#include <math.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#include "lipflow/lipflow.h"

static int failures = 0;

#define EXPECT(cond)                                                   \
  do {                                                                 \
    if (!(cond)) {                                                     \
      fprintf(stderr, "%s:%d: expected %s (last error: %s)\n", __FILE__, \
              __LINE__, #cond, lipflow_last_error());                  \
      ++failures;                                                      \
    }                                                                  \
  } while (0)

static const char* kConfig =
    "name = \"capi\"\n"
    "[source]\nkind = \"gauss_ball\"\ncenter = [2.0, 0.0]\nsigma = 0.3\nn = 40\nseed = 1\n"
    "[target]\nkind = \"gauss_ball\"\ncenter = [0.0, 0.0]\nsigma = 0.3\nn = 40\nseed = 2\n"
    "[transport]\nn_max = 30\nm_max = 3\n"
    "[output]\ndir = \"capi_out\"\nreplay = true\n"
    "[eval]\nsinkhorn = false\n";

int main(void) {
  EXPECT(strlen(lipflow_version()) > 0);

  /* particles */
  double data[6] = {0, 1, 2, 3, 4, 5};
  lipflow_particles* p = NULL;
  EXPECT(lipflow_particles_create(data, 3, 2, &p) == LIPFLOW_OK);
  EXPECT(lipflow_particles_rows(p) == 3);
  EXPECT(lipflow_particles_cols(p) == 2);
  double back[6];
  EXPECT(lipflow_particles_copy(p, back, 6) == LIPFLOW_OK);
  EXPECT(memcmp(back, data, sizeof data) == 0);
  EXPECT(lipflow_particles_copy(p, back, 5) == LIPFLOW_ERR_INVALID);
  EXPECT(strlen(lipflow_last_error()) > 0);
  EXPECT(lipflow_particles_save_csv(p, "capi_points.csv") == LIPFLOW_OK);
  lipflow_particles* loaded = NULL;
  EXPECT(lipflow_particles_load_csv("capi_points.csv", &loaded) == LIPFLOW_OK);
  EXPECT(lipflow_particles_copy(loaded, back, 6) == LIPFLOW_OK);
  EXPECT(memcmp(back, data, sizeof data) == 0);
  EXPECT(lipflow_particles_load_csv("no_such_file.csv", &loaded) == LIPFLOW_ERR_IO);
  EXPECT(lipflow_particles_create(NULL, 3, 2, &loaded) == LIPFLOW_ERR_INVALID);

  lipflow_particles* roll = NULL;
  EXPECT(lipflow_particles_sample("kind = \"sierpinski\"\nlevel = 2\n", 0, &roll) == LIPFLOW_OK);
  EXPECT(lipflow_particles_rows(roll) == 64);
  EXPECT(lipflow_particles_sample("kind = \"nonsense\"", 10, &roll) == LIPFLOW_ERR_INVALID);

  /* networks */
  int widths[3] = {8, 8, 1};
  lipflow_net* net = NULL;
  EXPECT(lipflow_net_create(2, widths, 3, 1.0, 1, 5, &net) == LIPFLOW_OK);
  double phi[3];
  EXPECT(lipflow_net_forward(net, p, phi, 3) == LIPFLOW_OK);
  double grad[6];
  EXPECT(lipflow_net_gradient(net, p, grad, 6) == LIPFLOW_OK);
  for (int i = 0; i < 3; ++i) EXPECT(sqrt(grad[2 * i] * grad[2 * i] + grad[2 * i + 1] * grad[2 * i + 1]) <= 1.0 + 1e-9);
  EXPECT(lipflow_net_save(net, "capi_net.json") == LIPFLOW_OK);
  lipflow_net* net2 = NULL;
  EXPECT(lipflow_net_load("capi_net.json", &net2) == LIPFLOW_OK);
  double phi2[3];
  EXPECT(lipflow_net_forward(net2, p, phi2, 3) == LIPFLOW_OK);
  EXPECT(memcmp(phi, phi2, sizeof phi) == 0);
  double est = -1.0;
  EXPECT(lipflow_estimate_divergence("kl", 2.0, NULL, net, p, p, 50, &est) == LIPFLOW_OK);
  EXPECT(est <= 1e-3);
  EXPECT(lipflow_estimate_divergence("js", 2.0, NULL, net, p, p, 5, &est) == LIPFLOW_ERR_INVALID);

  /* run, replay, eval */
  lipflow_config* cfg = NULL;
  EXPECT(lipflow_config_parse(kConfig, NULL, &cfg) == LIPFLOW_OK);
  EXPECT(lipflow_config_set_seed(cfg, 9) == LIPFLOW_OK);
  EXPECT(lipflow_config_set_deterministic(cfg, 1) == LIPFLOW_OK);
  lipflow_outcome* run = NULL;
  EXPECT(lipflow_run(cfg, &run) == LIPFLOW_OK);
  EXPECT(run != NULL);
  if (run) {
    EXPECT(lipflow_run_steps(run) == 30);
    EXPECT(strcmp(lipflow_run_termination(run), "n_max") == 0);
    EXPECT(isfinite(lipflow_run_final_divergence(run)));
    EXPECT(strstr(lipflow_run_summary_json(run), "\"termination\"") != NULL);
    lipflow_particles* out = NULL;
    EXPECT(lipflow_run_particles(run, &out) == LIPFLOW_OK);
    EXPECT(lipflow_particles_rows(out) == 40);
    lipflow_particles_destroy(out);
  }
  EXPECT(lipflow_replay("capi_out/ckpt", cfg, NULL, 40, "capi_replay.csv") == LIPFLOW_OK);
  lipflow_particles* replayed = NULL;
  EXPECT(lipflow_particles_load_csv("capi_replay.csv", &replayed) == LIPFLOW_OK);
  EXPECT(lipflow_particles_load_csv("capi_out/final.csv", &loaded) == LIPFLOW_OK);
  if (replayed && loaded) {
    double* a = malloc(80 * sizeof(double));
    double* b = malloc(80 * sizeof(double));
    EXPECT(lipflow_particles_copy(replayed, a, 80) == LIPFLOW_OK);
    EXPECT(lipflow_particles_copy(loaded, b, 80) == LIPFLOW_OK);
    EXPECT(memcmp(a, b, 80 * sizeof(double)) == 0);
    free(a);
    free(b);
  }
  EXPECT(lipflow_replay("no_such_dir", cfg, NULL, 4, "x.csv") == LIPFLOW_ERR_IO);
  EXPECT(lipflow_eval("capi_out/final.csv", "capi_out/target.csv", NULL, "capi_eval.json") == LIPFLOW_OK);
  EXPECT(lipflow_datagen("kind = \"swiss_roll\"", 25, NULL, "capi_roll.csv") == LIPFLOW_OK);

  lipflow_config* bad = NULL;
  EXPECT(lipflow_config_parse("[source]\nkind = 3\n", NULL, &bad) == LIPFLOW_ERR_INVALID);
  EXPECT(lipflow_config_load("no_such_config.toml", &bad) == LIPFLOW_ERR_IO);

  lipflow_run_destroy(run);
  lipflow_config_destroy(cfg);
  lipflow_particles_destroy(p);
  lipflow_particles_destroy(loaded);
  lipflow_particles_destroy(replayed);
  lipflow_particles_destroy(roll);
  lipflow_net_destroy(net);
  lipflow_net_destroy(net2);
  lipflow_particles_destroy(NULL);

  if (failures) {
    fprintf(stderr, "%d failure(s)\n", failures);
    return 1;
  }
  printf("capi: all checks passed\n");
  return 0;
}
