#ifndef PHIEQ_CAPI_H
#define PHIEQ_CAPI_H

/* C interface to the phieq shared library: opaque handles, integer status
 * codes, JSON strings for structured payloads. Strings returned as char*
 * are heap-allocated and must be released with phieq_string_free. Error
 * details for the calling thread are available via phieq_last_error. */

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

enum phieq_status {
  PHIEQ_OK = 0,
  PHIEQ_ERR = 1,              /* unclassified failure */
  PHIEQ_ERR_INVALID = 2,      /* bad config / argument */
  PHIEQ_ERR_DIMENSION = 3,
  PHIEQ_ERR_NUMERIC = 4,
  PHIEQ_ERR_CAP = 5,          /* iteration cap exceeded */
  PHIEQ_ERR_IO = 6,
  PHIEQ_ERR_NOT_ENDOMORPHISM = 7,
  PHIEQ_ERR_INFEASIBLE = 8,
  PHIEQ_ERR_VERIFICATION = 9
};

const char* phieq_version(void);
const char* phieq_last_error(void);
void phieq_string_free(char* s);

/* ---- convex bodies ---- */
typedef struct phieq_body phieq_body;

phieq_body* phieq_body_create(const char* json_spec);
void phieq_body_destroy(phieq_body* body);
int phieq_body_dim(const phieq_body* body);
/* 1 member, 0 not a member, negative phieq_status on error */
int phieq_body_member(const phieq_body* body, const double* x, int dim, double tol);
/* 0 member (no halfspace), 1 separated (normal_out[dim], offset_out filled),
 * negative phieq_status on error */
int phieq_body_separate(const phieq_body* body, const double* x, int dim, double* normal_out,
                        double* offset_out);
/* fills x_out[dim]; returns phieq_status */
int phieq_body_linopt(const phieq_body* body, const double* u, int dim, double* x_out);

/* ---- feature maps ---- */
typedef struct phieq_features phieq_features;

phieq_features* phieq_features_create(const char* json_spec, const phieq_body* body);
void phieq_features_destroy(phieq_features* features);
int phieq_features_output_dim(const phieq_features* features);
/* fills out[output_dim]; returns phieq_status */
int phieq_features_eval(const phieq_features* features, const double* x, int dim, double* out);

/* ---- solvers; results are JSON strings ---- */

/* Expected fixed point of x -> K m(x) + c (K row-major, dim x output_dim).
 * Result: {"distribution":{...},"l1_error":...,"cuts":...}. */
char* phieq_efp_solve(const phieq_body* body, const phieq_features* features,
                      const double* k_rowmajor, const double* c, double eps, int* status);

/* Semi-separation: {"kind":"efp",...} or {"kind":"witness","point":[...],"image":[...]}. */
char* phieq_semi_separate(const phieq_body* body, const phieq_features* features,
                          const double* k_rowmajor, const double* c, double eps, int* status);

/* Phi^m-equilibrium of a game described in JSON; features_json is a single
 * spec (applied to every player) or an array of per-player specs. */
char* phieq_equilibrium_solve(const char* game_json, const char* features_json, double eps,
                              unsigned long long seed, int* status);

/* Full experiment runner: executes one config object and writes
 * <out_dir>/<name>.report.json (+ .csv). seed_override < 0 keeps the config
 * seed; eps_override <= 0 keeps the config epsilon. Returns the one-line
 * summary. */
char* phieq_run_config(const char* config_json, const char* out_dir, long long seed_override,
                       double eps_override, int* status);

#ifdef __cplusplus
}
#endif

#endif /* PHIEQ_CAPI_H */
