#include "teko/teko.h"

#include <cstring>
#include <new>
#include <string>

#include "common.hpp"
#include "pipeline.hpp"

using teko::Err;

struct teko_pipeline {
  teko::PipelineConfig config;
  std::string last_error;
  std::string last_result;
};

namespace {

teko_status status_of(Err e) {
  switch (e) {
    case Err::ConfigInvalid:
    case Err::RatioOutOfRange:
    case Err::ThresholdOutOfRange:
      return TEKO_ERR_CONFIG;
    case Err::MissingFile:
      return TEKO_ERR_IO;
    case Err::MalformedRecord:
    case Err::DuplicateId:
    case Err::UnknownId:
    case Err::PriorOutOfRange:
    case Err::ScoreOutOfRange:
    case Err::InconsistentIds:
      return TEKO_ERR_PARSE;
    case Err::MissingUpstreamArtifact:
      return TEKO_ERR_MISSING_ARTIFACT;
    case Err::NonFiniteActivation:
    case Err::DivergedLoss:
      return TEKO_ERR_NUMERIC;
    case Err::DimensionMismatch:
    case Err::LengthMismatch:
    case Err::EmptyCorpus:
    case Err::EmptyKnowledgeBase:
    case Err::EmptyDescriptions:
    case Err::EmptyMask:
    case Err::EmptyPairs:
    case Err::EmptyNeighborhood:
    case Err::ZeroVector:
    case Err::TooFewEntities:
    case Err::TooFewLabeled:
    case Err::TooFewPoints:
    case Err::NoEdges:
    case Err::GraphTooDense:
    case Err::UnknownTypePair:
      return TEKO_ERR_INVALID_ARGUMENT;
    default:
      return TEKO_ERR_INTERNAL;
  }
}

template <typename Fn>
teko_status guarded(teko_pipeline* p, Fn&& fn) {
  if (!p) return TEKO_ERR_INVALID_ARGUMENT;
  p->last_error.clear();
  try {
    return fn();
  } catch (const teko::Error& e) {
    p->last_error = e.what();
    return status_of(e.code());
  } catch (const std::exception& e) {
    p->last_error = e.what();
    return TEKO_ERR_INTERNAL;
  }
}

teko_status copy_out(const std::string& s, char* buf, size_t buflen) {
  if (!buf || buflen == 0) return TEKO_ERR_INVALID_ARGUMENT;
  size_t n = std::min(buflen - 1, s.size());
  std::memcpy(buf, s.data(), n);
  buf[n] = '\0';
  return TEKO_OK;
}

}  // namespace

extern "C" {

const char* teko_version(void) { return "1.0.0"; }

const char* teko_status_name(int status) {
  switch (status) {
    case TEKO_OK: return "ok";
    case TEKO_ERR_INTERNAL: return "internal";
    case TEKO_ERR_CONFIG: return "config";
    case TEKO_ERR_IO: return "io";
    case TEKO_ERR_PARSE: return "parse";
    case TEKO_ERR_MISSING_ARTIFACT: return "missing_artifact";
    case TEKO_ERR_NUMERIC: return "numeric";
    case TEKO_ERR_INVALID_ARGUMENT: return "invalid_argument";
    default: return "unknown";
  }
}

teko_pipeline* teko_pipeline_new(void) { return new (std::nothrow) teko_pipeline(); }

void teko_pipeline_free(teko_pipeline* p) { delete p; }

teko_status teko_pipeline_load_config(teko_pipeline* p, const char* path) {
  return guarded(p, [&]() -> teko_status {
    if (!path) return TEKO_ERR_INVALID_ARGUMENT;
    teko::PipelineConfig loaded = teko::PipelineConfig::from_file(path);
    p->config = std::move(loaded);
    return TEKO_OK;
  });
}

teko_status teko_pipeline_set(teko_pipeline* p, const char* key, const char* value) {
  return guarded(p, [&]() -> teko_status {
    if (!key || !value) return TEKO_ERR_INVALID_ARGUMENT;
    p->config.set(key, value);
    return TEKO_OK;
  });
}

teko_status teko_pipeline_get(const teko_pipeline* p, const char* key, char* buf, size_t buflen) {
  if (!p || !key) return TEKO_ERR_INVALID_ARGUMENT;
  try {
    return copy_out(p->config.get(key), buf, buflen);
  } catch (const teko::Error& e) {
    return status_of(e.code());
  }
}

teko_status teko_pipeline_run(teko_pipeline* p, const char* command) {
  return guarded(p, [&]() -> teko_status {
    if (!command) return TEKO_ERR_INVALID_ARGUMENT;
    teko::Pipeline pipeline(p->config);
    p->last_result = pipeline.run(command);
    return TEKO_OK;
  });
}

const char* teko_pipeline_last_error(const teko_pipeline* p) {
  return p ? p->last_error.c_str() : "null handle";
}

const char* teko_pipeline_result_json(const teko_pipeline* p) {
  return p ? p->last_result.c_str() : "";
}

teko_status teko_pipeline_config_hash(const teko_pipeline* p, char* buf, size_t buflen) {
  if (!p) return TEKO_ERR_INVALID_ARGUMENT;
  return copy_out(teko::to_hex(p->config.config_hash()), buf, buflen);
}

}  // extern "C"
