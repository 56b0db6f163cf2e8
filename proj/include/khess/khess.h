/* C interface to the dual k-Hessian solver. Every call returns a status
 * code; on failure khess_last_error() holds the message for the calling
 * thread. Objects are opaque and released with their *_free function.
 * Strings returned through char** are released with khess_string_free. */
#ifndef KHESS_H
#define KHESS_H

#include <stdint.h>

#if defined(KHESS_BUILDING_LIBRARY)
#define KHESS_API __attribute__((visibility("default")))
#else
#define KHESS_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum khess_status {
    KHESS_OK = 0,
    KHESS_E_ARGUMENT = 1,
    KHESS_E_CONFIG = 2,
    KHESS_E_NONCONVERGENCE = 3,
    KHESS_E_INVARIANT = 4,
    KHESS_E_CONE = 5,
    KHESS_E_DOMAIN = 6,
    KHESS_E_IO = 7,
    KHESS_E_CAPABILITY = 8,
    KHESS_E_OUT_OF_IMAGE = 9
} khess_status;

typedef struct khess_config khess_config;
typedef struct khess_result khess_result;
typedef struct khess_verify khess_verify;

KHESS_API const char* khess_last_error(void);
KHESS_API const char* khess_status_name(int status);
KHESS_API void khess_string_free(char* s);

/* Configuration: JSON text or a shipped instance. */
KHESS_API int khess_config_parse(const char* json, khess_config** out);
KHESS_API int khess_config_from_instance(const char* name, khess_config** out);
KHESS_API int khess_config_to_json(const khess_config* cfg, char** out);
KHESS_API void khess_config_free(khess_config* cfg);

KHESS_API int khess_instance_count(void);
/* NULL when index is out of range. */
KHESS_API const char* khess_instance_name(int index);

/* Writes report.json and grid.csv under out_dir. On a solver failure the
 * partial report is still written and *out stays NULL. */
KHESS_API int khess_solve(const khess_config* cfg, const char* out_dir, khess_result** out);
KHESS_API int khess_result_report_json(const khess_result* r, char** out);
KHESS_API double khess_result_c_estimate(const khess_result* r); /* NaN when not computed */
KHESS_API int khess_result_converged(const khess_result* r);
/* Hausdorff distance between Du(boundary of Omega) and the target boundary,
 * and the grid's h. */
KHESS_API double khess_result_hausdorff(const khess_result* r);
KHESS_API double khess_result_grid_h(const khess_result* r);
KHESS_API void khess_result_free(khess_result* r);

/* Suites: identities, rotations, duality, solver, all. Failed invariants
 * are report content; the call itself returns KHESS_OK. */
KHESS_API int khess_verify_run(const char* suite, uint64_t seed, khess_verify** out);
KHESS_API int khess_verify_count(const khess_verify* v);
KHESS_API int khess_verify_failures(const khess_verify* v);
/* Pointers stay valid until khess_verify_free. Any output may be NULL. */
KHESS_API int khess_verify_entry(const khess_verify* v, int index, const char** name, int* passed, double* value,
                                 double* tolerance, const char** detail);
KHESS_API int khess_verify_json(const khess_verify* v, char** out);
KHESS_API void khess_verify_free(khess_verify* v);

/* Rotation field anchored at y0 on the body's boundary with unit tangent xi,
 * sampled over the body and written as CSV (y1, y2, T1, T2). */
KHESS_API int khess_field_dump(const double y0[2], const double xi[2], const char* body_json, const char* out_csv);

/* Report serialization check: parse then serialize. */
KHESS_API int khess_report_normalize(const char* json, char** out);

#ifdef __cplusplus
}
#endif

#endif
