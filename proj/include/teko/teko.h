/* teko — text-rich graph learning with external knowledge.
 *
 * C interface to the pipeline: opaque handles, integer status codes,
 * per-handle error messages. All strings are UTF-8. Handles are not
 * thread-safe; use one handle per thread.
 */
#ifndef TEKO_H
#define TEKO_H

#include <stddef.h>

#if defined(_WIN32)
#define TEKO_API __declspec(dllexport)
#else
#define TEKO_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum teko_status {
  TEKO_OK = 0,
  TEKO_ERR_INTERNAL = 1,
  TEKO_ERR_CONFIG = 2,
  TEKO_ERR_IO = 3,
  TEKO_ERR_PARSE = 4,
  TEKO_ERR_MISSING_ARTIFACT = 5,
  TEKO_ERR_NUMERIC = 6,
  TEKO_ERR_INVALID_ARGUMENT = 7
} teko_status;

typedef struct teko_pipeline teko_pipeline;

TEKO_API const char* teko_version(void);
TEKO_API const char* teko_status_name(int status);

/* Creates a pipeline with default configuration. Returns NULL on allocation
 * failure. */
TEKO_API teko_pipeline* teko_pipeline_new(void);
TEKO_API void teko_pipeline_free(teko_pipeline* p);

/* Loads a `key = value` configuration file into the handle. */
TEKO_API teko_status teko_pipeline_load_config(teko_pipeline* p, const char* path);

/* Sets a single configuration key; unknown keys are rejected. */
TEKO_API teko_status teko_pipeline_set(teko_pipeline* p, const char* key, const char* value);

/* Copies the current value of a key into buf (NUL-terminated, truncated to
 * buflen). */
TEKO_API teko_status teko_pipeline_get(const teko_pipeline* p, const char* key, char* buf,
                                       size_t buflen);

/* Runs one command: link | train-kb | build-graph | train | eval | embed |
 * sweep. On success teko_pipeline_result_json() describes what was produced;
 * on failure teko_pipeline_last_error() carries the reason. */
TEKO_API teko_status teko_pipeline_run(teko_pipeline* p, const char* command);

/* Valid until the next call on the same handle. */
TEKO_API const char* teko_pipeline_last_error(const teko_pipeline* p);
TEKO_API const char* teko_pipeline_result_json(const teko_pipeline* p);

/* Hex hash of the result-affecting configuration. */
TEKO_API teko_status teko_pipeline_config_hash(const teko_pipeline* p, char* buf, size_t buflen);

#ifdef __cplusplus
}
#endif

#endif /* TEKO_H */
