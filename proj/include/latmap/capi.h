/* latmap C API: opaque handles + status codes over the latmap core.
 *
 * All functions return LATMAP_OK on success; on failure the thread-local
 * message from latmap_last_error() describes what went wrong. Handles are
 * created by latmap_*_create/load functions and must be released with the
 * matching *_free. Distinct handles may be used from different threads
 * concurrently; a single handle is single-threaded.
 */
#ifndef LATMAP_CAPI_H
#define LATMAP_CAPI_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define LATMAP_API __declspec(dllexport)
#elif defined(__GNUC__)
#define LATMAP_API __attribute__((visibility("default")))
#else
#define LATMAP_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum latmap_status {
  LATMAP_OK = 0,
  LATMAP_ERR_INVALID_ARGUMENT = 1,
  LATMAP_ERR_INVALID_STATE = 2,
  LATMAP_ERR_NUMERIC = 3,
  LATMAP_ERR_NO_PATH = 4,
  LATMAP_ERR_IO = 5,
  LATMAP_ERR_UNKNOWN = 6
} latmap_status;

/* Thread-local message for the most recent failure on this thread. */
LATMAP_API const char* latmap_last_error(void);

/* ---- configuration ---- */

typedef struct latmap_config latmap_config;

LATMAP_API latmap_status latmap_config_create(latmap_config** out);
LATMAP_API latmap_status latmap_config_load(const char* path, latmap_config** out);
LATMAP_API latmap_status latmap_config_save(const latmap_config* cfg, const char* path);
/* key is "section.key" as in the config file */
LATMAP_API latmap_status latmap_config_set(latmap_config* cfg, const char* key,
                                           const char* value);
LATMAP_API latmap_status latmap_config_apply_paper_preset(latmap_config* cfg);
LATMAP_API void latmap_config_free(latmap_config* cfg);

/* ---- maze / simulator ---- */

typedef struct latmap_maze latmap_maze;

LATMAP_API latmap_status latmap_maze_generate(uint64_t seed, const char* complexity,
                                              int side_cells, latmap_maze** out);
LATMAP_API latmap_status latmap_maze_load(const char* path, latmap_maze** out);
LATMAP_API latmap_status latmap_maze_save(const latmap_maze* maze, const char* path);
LATMAP_API latmap_status latmap_maze_raycast(const latmap_maze* maze, double x, double y,
                                             double theta, double readings_out[20]);
LATMAP_API latmap_status latmap_maze_step(const latmap_maze* maze, const double pose_in[3],
                                          double dtheta, double forward, double pose_out[3]);
LATMAP_API void latmap_maze_free(latmap_maze* maze);

/* ---- incremental online SLAM engine ---- */

typedef struct latmap_slam_engine latmap_slam_engine;

LATMAP_API latmap_status latmap_slam_engine_create(const latmap_config* cfg,
                                                   const double start_pose[3],
                                                   const double first_scan[20], uint64_t seed,
                                                   latmap_slam_engine** out);
/* Feed the control applied since the last scan plus the new scan; writes the
 * filtered pose estimate. */
LATMAP_API latmap_status latmap_slam_engine_step(latmap_slam_engine* engine,
                                                 double dtheta, double forward,
                                                 const double scan[20], double estimate_out[3]);
LATMAP_API latmap_status latmap_slam_engine_train(latmap_slam_engine* engine, int minibatches);
LATMAP_API latmap_status latmap_slam_engine_infogain(const latmap_slam_engine* engine,
                                                     double* out);
LATMAP_API latmap_status latmap_slam_engine_save_model(const latmap_slam_engine* engine,
                                                       const char* path);
LATMAP_API void latmap_slam_engine_free(latmap_slam_engine* engine);

/* ---- whole-experiment runs (write the documented file formats) ---- */

LATMAP_API latmap_status latmap_collect_run(const latmap_config* cfg, const char* maze_path,
                                            int steps, uint64_t seed, const char* out_csv);

/* mode: "online" | "offline". noise_scale multiplies the configured control
 * noise. out_model_json may be NULL. */
LATMAP_API latmap_status latmap_slam_run(const latmap_config* cfg, const char* maze_path,
                                         const char* traj_csv, const char* mode,
                                         double noise_scale, uint64_t seed,
                                         const char* out_result_json,
                                         const char* out_model_json);

/* policy: "mi" | "random" | "pema"; pema_checkpoint required for "pema". */
LATMAP_API latmap_status latmap_explore_run(const latmap_config* cfg, const char* maze_path,
                                            const char* policy, int budget, uint64_t seed,
                                            const char* pema_checkpoint,
                                            const char* out_trace_jsonl);

/* target_obs != 0 runs pose-from-observation targets. max_pairs <= 0 keeps
 * every free grid pair. */
LATMAP_API latmap_status latmap_navigate_run(const latmap_config* cfg, const char* maze_path,
                                             const char* model_json, int target_obs,
                                             int max_pairs, uint64_t seed,
                                             const char* out_report_json);

LATMAP_API latmap_status latmap_pema_train(const latmap_config* cfg, const char* const* maze_paths,
                                           int n_mazes, int hidden, int iterations, uint64_t seed,
                                           const char* out_checkpoint_json,
                                           const char* out_curve_csv);

LATMAP_API latmap_status latmap_report_run(const char* const* result_paths, int n,
                                           const char* out_json, const char* out_csv);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* LATMAP_CAPI_H */
