#include "predict.h"

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <utility>

#include <json.hpp>

#include "predict/errors.hpp"
#include "predict/experiments.hpp"
#include "predict/version.hpp"

using json = nlohmann::ordered_json;

struct predict_config {
  json doc;
};

namespace {

thread_local std::string g_last_error;

predict_status map_code(predict::ErrorCode code) {
  switch (code) {
    case predict::ErrorCode::invalid_input: return PREDICT_ERR_INVALID_INPUT;
    case predict::ErrorCode::ill_conditioned: return PREDICT_ERR_ILL_CONDITIONED;
    case predict::ErrorCode::unsupported_order: return PREDICT_ERR_UNSUPPORTED_ORDER;
    case predict::ErrorCode::degenerate_constraints: return PREDICT_ERR_DEGENERATE_CONSTRAINTS;
    case predict::ErrorCode::tuning: return PREDICT_ERR_TUNING;
    case predict::ErrorCode::divergence: return PREDICT_ERR_DIVERGENCE;
    case predict::ErrorCode::invalid_profile: return PREDICT_ERR_INVALID_PROFILE;
    case predict::ErrorCode::io: return PREDICT_ERR_IO;
    case predict::ErrorCode::config: return PREDICT_ERR_CONFIG;
  }
  return PREDICT_ERR_UNKNOWN;
}

template <typename Fn>
predict_status guarded(Fn&& fn) {
  try {
    fn();
    return PREDICT_OK;
  } catch (const predict::Error& e) {
    g_last_error = e.what();
    return map_code(e.code());
  } catch (const json::exception& e) {
    g_last_error = e.what();
    return PREDICT_ERR_CONFIG;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return PREDICT_ERR_UNKNOWN;
  } catch (...) {
    g_last_error = "unknown error";
    return PREDICT_ERR_UNKNOWN;
  }
}

predict_status invalid_argument(const char* message) {
  g_last_error = message;
  return PREDICT_ERR_INVALID_INPUT;
}

} // namespace

extern "C" {

const char* predict_version(void) { return predict::kVersion; }

const char* predict_last_error(void) { return g_last_error.c_str(); }

const char* predict_experiments(void) {
  static const std::string joined = [] {
    std::string s;
    for (const std::string& name : predict::experiments::experiment_names()) {
      if (!s.empty()) s += '\n';
      s += name;
    }
    return s;
  }();
  return joined.c_str();
}

predict_status predict_config_create(predict_config** out) {
  if (!out) return invalid_argument("out must not be null");
  *out = nullptr;
  return guarded([&] {
    const predict::experiments::Config defaults;
    auto cfg = std::make_unique<predict_config>();
    cfg->doc = json::parse(predict::experiments::config_to_json(defaults));
    *out = cfg.release();
  });
}

predict_status predict_config_from_json(const char* text, predict_config** out) {
  if (!out) return invalid_argument("out must not be null");
  *out = nullptr;
  if (!text) return invalid_argument("text must not be null");
  return guarded([&] {
    // Parse through the typed config so unknown keys and type errors surface
    // immediately, then store the normalized document.
    const predict::experiments::Config parsed = predict::experiments::config_from_json(text);
    auto cfg = std::make_unique<predict_config>();
    cfg->doc = json::parse(predict::experiments::config_to_json(parsed));
    *out = cfg.release();
  });
}

predict_status predict_config_load(const char* path, predict_config** out) {
  if (!out) return invalid_argument("out must not be null");
  *out = nullptr;
  if (!path) return invalid_argument("path must not be null");
  return guarded([&] {
    std::ifstream in(path, std::ios::binary);
    predict::require(in.is_open(), predict::ErrorCode::io,
                     std::string("cannot open config file '") + path + "'");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    predict::require(in.good() || in.eof(), predict::ErrorCode::io,
                     std::string("failed reading config file '") + path + "'");
    const predict::experiments::Config parsed =
        predict::experiments::config_from_json(buffer.str());
    auto cfg = std::make_unique<predict_config>();
    cfg->doc = json::parse(predict::experiments::config_to_json(parsed));
    *out = cfg.release();
  });
}

predict_status predict_config_set(predict_config* config, const char* key, const char* value) {
  if (!config) return invalid_argument("config must not be null");
  if (!key || !*key) return invalid_argument("key must not be empty");
  if (!value) return invalid_argument("value must not be null");
  return guarded([&] {
    json updated = config->doc; // validate on a copy so failures leave the config untouched
    json* node = &updated;
    std::string rest = key;
    for (std::size_t dot = rest.find('.'); dot != std::string::npos; dot = rest.find('.')) {
      const std::string head = rest.substr(0, dot);
      predict::require(!head.empty(), predict::ErrorCode::config,
                       std::string("bad config key '") + key + "'");
      node = &(*node)[head];
      rest = rest.substr(dot + 1);
    }
    predict::require(!rest.empty(), predict::ErrorCode::config,
                     std::string("bad config key '") + key + "'");
    json parsed = json::parse(value, nullptr, false);
    if (parsed.is_discarded() || parsed.is_object() || parsed.is_array()) {
      (*node)[rest] = std::string(value); // treat as a plain string
    } else {
      (*node)[rest] = parsed;
    }
    // Reject unknown keys and type errors right away.
    predict::experiments::config_from_json(updated.dump());
    config->doc = std::move(updated);
  });
}

predict_status predict_config_to_json(const predict_config* config, char** out_text) {
  if (!out_text) return invalid_argument("out_text must not be null");
  *out_text = nullptr;
  if (!config) return invalid_argument("config must not be null");
  return guarded([&] {
    const std::string text = config->doc.dump(2);
    char* copy = static_cast<char*>(std::malloc(text.size() + 1));
    predict::require(copy != nullptr, predict::ErrorCode::io, "out of memory");
    std::memcpy(copy, text.c_str(), text.size() + 1);
    *out_text = copy;
  });
}

void predict_config_destroy(predict_config* config) { delete config; }

void predict_free(char* text) { std::free(text); }

predict_status predict_run_experiment(const predict_config* config) {
  if (!config) return invalid_argument("config must not be null");
  return guarded([&] {
    const predict::experiments::Config parsed =
        predict::experiments::config_from_json(config->doc.dump());
    predict::experiments::run_experiment(parsed);
  });
}

} // extern "C"
