#ifndef LIPFLOW_LIPFLOW_H
#define LIPFLOW_LIPFLOW_H

/* C interface to the lipflow particle transport engine.
 *
 * Every function returns a lipflow_status. On failure the thread-local
 * message from lipflow_last_error() describes the problem. Handles are
 * opaque; every create or load function has a matching destroy that accepts NULL.
 * Matrices cross the boundary as row-major double arrays. */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define LIPFLOW_API __declspec(dllexport)
#elif defined(LIPFLOW_BUILDING_LIBRARY)
#define LIPFLOW_API __attribute__((visibility("default")))
#else
#define LIPFLOW_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum lipflow_status {
  LIPFLOW_OK = 0,
  LIPFLOW_ERR_INVALID = 1,  /* bad argument or configuration */
  LIPFLOW_DIVERGED = 2,     /* the run ended with a diverged objective */
  LIPFLOW_ERR_IO = 3,       /* file missing, unreadable or malformed */
  LIPFLOW_ERR_INTERNAL = 4
} lipflow_status;

typedef struct lipflow_particles lipflow_particles;
typedef struct lipflow_net lipflow_net;
typedef struct lipflow_config lipflow_config;
typedef struct lipflow_outcome lipflow_outcome;

LIPFLOW_API const char* lipflow_version(void);
LIPFLOW_API const char* lipflow_last_error(void);

/* Particles */
LIPFLOW_API lipflow_status lipflow_particles_create(const double* data, size_t rows, size_t cols,
                                                    lipflow_particles** out);
LIPFLOW_API lipflow_status lipflow_particles_load_csv(const char* path, lipflow_particles** out);
LIPFLOW_API lipflow_status lipflow_particles_save_csv(const lipflow_particles* p, const char* path);
/* Draws n points from a distribution given as TOML text, e.g. "kind = \"swiss_roll\"". */
LIPFLOW_API lipflow_status lipflow_particles_sample(const char* dist_toml, size_t n, lipflow_particles** out);
LIPFLOW_API size_t lipflow_particles_rows(const lipflow_particles* p);
LIPFLOW_API size_t lipflow_particles_cols(const lipflow_particles* p);
/* Copies rows*cols values; fails if capacity is smaller. */
LIPFLOW_API lipflow_status lipflow_particles_copy(const lipflow_particles* p, double* out, size_t capacity);
LIPFLOW_API void lipflow_particles_destroy(lipflow_particles* p);

/* Discriminator networks. `smooth` selects the smooth rectifier. */
LIPFLOW_API lipflow_status lipflow_net_create(int input_dim, const int* widths, size_t depth, double lipschitz,
                                              int smooth, uint64_t seed, lipflow_net** out);
LIPFLOW_API lipflow_status lipflow_net_load(const char* path, lipflow_net** out);
LIPFLOW_API lipflow_status lipflow_net_save(const lipflow_net* net, const char* path);
/* out receives one value per row of x. */
LIPFLOW_API lipflow_status lipflow_net_forward(const lipflow_net* net, const lipflow_particles* x, double* out,
                                               size_t capacity);
/* out receives the row-major input gradient, rows*cols values. */
LIPFLOW_API lipflow_status lipflow_net_gradient(const lipflow_net* net, const lipflow_particles* x, double* out,
                                                size_t capacity);
/* Trains `net` in place for `inner_steps` ascent steps on (p, q). f is
 * "kl", "alpha" or "ipm"; nu_mode may be NULL for the default. */
LIPFLOW_API lipflow_status lipflow_estimate_divergence(const char* f, double alpha, const char* nu_mode,
                                                       lipflow_net* net, const lipflow_particles* p,
                                                       const lipflow_particles* q, int inner_steps,
                                                       double* estimate);
LIPFLOW_API void lipflow_net_destroy(lipflow_net* net);

/* Experiment configuration (TOML). */
LIPFLOW_API lipflow_status lipflow_config_load(const char* path, lipflow_config** out);
/* base_dir resolves relative CSV paths; may be NULL. */
LIPFLOW_API lipflow_status lipflow_config_parse(const char* toml_text, const char* base_dir, lipflow_config** out);
LIPFLOW_API lipflow_status lipflow_config_set_seed(lipflow_config* cfg, uint64_t seed);
LIPFLOW_API lipflow_status lipflow_config_set_output_dir(lipflow_config* cfg, const char* dir);
LIPFLOW_API lipflow_status lipflow_config_set_latent_dim(lipflow_config* cfg, int latent_dim);
LIPFLOW_API lipflow_status lipflow_config_set_deterministic(lipflow_config* cfg, int deterministic);
LIPFLOW_API void lipflow_config_destroy(lipflow_config* cfg);

/* Runs an experiment and writes its artifacts. Returns LIPFLOW_DIVERGED with
 * a valid *out when the run diverged. */
LIPFLOW_API lipflow_status lipflow_run(const lipflow_config* cfg, lipflow_outcome** out);
LIPFLOW_API const char* lipflow_run_termination(const lipflow_outcome* run);
LIPFLOW_API size_t lipflow_run_steps(const lipflow_outcome* run);
LIPFLOW_API double lipflow_run_final_divergence(const lipflow_outcome* run);
LIPFLOW_API double lipflow_run_final_kinetic_energy(const lipflow_outcome* run);
LIPFLOW_API const char* lipflow_run_summary_json(const lipflow_outcome* run);
LIPFLOW_API lipflow_status lipflow_run_particles(const lipflow_outcome* run, lipflow_particles** out);
LIPFLOW_API void lipflow_run_destroy(lipflow_outcome* run);

/* Subcommand entry points. */
/* Writes n samples (n = 0: the distribution's default count) to out_csv.
 * A non-NULL seed replaces the distribution's seed. */
LIPFLOW_API lipflow_status lipflow_datagen(const char* dist_toml, size_t n, const uint64_t* seed, const char* out_csv);
/* Compares two CSVs; cfg (may be NULL) supplies the metric settings. Writes
 * JSON to out_json, or to stdout when out_json is NULL. */
LIPFLOW_API lipflow_status lipflow_eval(const char* a_csv, const char* b_csv, const lipflow_config* cfg,
                                        const char* out_json);
/* Samples n fresh particles from cfg's source law and pushes them through
 * the checkpoints in ckpt_dir. A NULL seed keeps the configured source seed,
 * which reproduces the training particles. */
LIPFLOW_API lipflow_status lipflow_replay(const char* ckpt_dir, const lipflow_config* cfg, const uint64_t* seed,
                                          size_t n, const char* out_csv);
/* threads = 0 uses the hardware count; LIPFLOW_THREADS caps it. */
LIPFLOW_API lipflow_status lipflow_sweep(const lipflow_config* cfg, int threads, const char* out_csv);

#ifdef __cplusplus
}
#endif

#endif /* LIPFLOW_LIPFLOW_H */
