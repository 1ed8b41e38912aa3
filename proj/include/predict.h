#ifndef PREDICT_H
#define PREDICT_H

/* C interface to the prediction library. All entry points return a status
 * code; predict_last_error() describes the most recent failure on the calling
 * thread. Handles are opaque and must be released with their destroy call. */

#ifdef __cplusplus
extern "C" {
#endif

typedef enum predict_status {
  PREDICT_OK = 0,
  PREDICT_ERR_INVALID_INPUT = 1,
  PREDICT_ERR_ILL_CONDITIONED = 2,
  PREDICT_ERR_UNSUPPORTED_ORDER = 3,
  PREDICT_ERR_DEGENERATE_CONSTRAINTS = 4,
  PREDICT_ERR_TUNING = 5,
  PREDICT_ERR_DIVERGENCE = 6,
  PREDICT_ERR_INVALID_PROFILE = 7,
  PREDICT_ERR_IO = 8,
  PREDICT_ERR_CONFIG = 9,
  PREDICT_ERR_UNKNOWN = 10
} predict_status;

/* Library version, static storage. */
const char* predict_version(void);

/* Message for the last failure on this thread; empty string if none. The
 * pointer stays valid until the next failing call on the same thread. */
const char* predict_last_error(void);

/* Newline-separated list of experiment names, static storage. */
const char* predict_experiments(void);

/* Experiment configuration, stored as a JSON document. */
typedef struct predict_config predict_config;

/* Creates a config populated with the built-in defaults. */
predict_status predict_config_create(predict_config** out);

/* Parses a config from JSON text / from a JSON file. */
predict_status predict_config_from_json(const char* text, predict_config** out);
predict_status predict_config_load(const char* path, predict_config** out);

/* Sets one value by dotted key, e.g. ("ensemble.count", "500") or
 * ("experiment", "linear-evolve"). The value is parsed as JSON when possible
 * and stored as a string otherwise. */
predict_status predict_config_set(predict_config* config, const char* key, const char* value);

/* Serializes the config; free the result with predict_free(). */
predict_status predict_config_to_json(const predict_config* config, char** out_text);

void predict_config_destroy(predict_config* config);
void predict_free(char* text);

/* Runs the configured experiment, writing CSV outputs and manifest.json into
 * the configured output directory. */
predict_status predict_run_experiment(const predict_config* config);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* PREDICT_H */
