#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace teko {

// Typed failure reasons surfaced by every loader, trainer and metric.
// The C API collapses these into coarse status codes; the message keeps
// the specific reason ("DuplicateId: d17").
enum class Err {
  MissingFile,
  MalformedRecord,
  DuplicateId,
  UnknownId,
  EmptyCorpus,
  RatioOutOfRange,
  TooFewLabeled,
  PriorOutOfRange,
  ThresholdOutOfRange,
  ScoreOutOfRange,
  DimensionMismatch,
  EmptyKnowledgeBase,
  EmptyDescriptions,
  ZeroVector,
  TooFewEntities,
  InconsistentIds,
  UnknownTypePair,
  EmptyMask,
  EmptyPairs,
  NoEdges,
  GraphTooDense,
  EmptyNeighborhood,
  NonFiniteActivation,
  DivergedLoss,
  LengthMismatch,
  TooFewPoints,
  ConfigInvalid,
  MissingUpstreamArtifact,
  Internal,
};

const char* err_name(Err e);

class Error : public std::runtime_error {
 public:
  Error(Err code, const std::string& detail)
      : std::runtime_error(std::string(err_name(code)) + ": " + detail), code_(code) {}
  Err code() const { return code_; }

 private:
  Err code_;
};

[[noreturn]] inline void fail(Err code, const std::string& detail) { throw Error(code, detail); }

// Dense row-major matrix. Everything in the pipeline is small enough that a
// flat vector of doubles is the right tool.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> a;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c, 0.0) {}

  double& at(int r, int c) { return a[static_cast<size_t>(r) * cols + c]; }
  double at(int r, int c) const { return a[static_cast<size_t>(r) * cols + c]; }
  double* row(int r) { return a.data() + static_cast<size_t>(r) * cols; }
  const double* row(int r) const { return a.data() + static_cast<size_t>(r) * cols; }
  void fill(double v) { std::fill(a.begin(), a.end(), v); }
  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
};

// out = A * B
Matrix matmul(const Matrix& A, const Matrix& B);
bool all_finite(const Matrix& m);

// Deterministic RNG used everywhere. The distributions are implemented by
// hand so that a (seed, call sequence) pair always yields the same stream,
// independent of the standard library's distribution internals.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t next_u64() { return gen_(); }
  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform index in [0, n). n must be > 0.
  size_t index(size_t n) { return static_cast<size_t>(gen_() % n); }
  double normal() {
    // Box-Muller; fresh pair per call to keep the stream position obvious.
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }
  bool bernoulli(double p) { return uniform() < p; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = index(i);
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 gen_;
};

struct Token {
  std::string text;
  size_t begin = 0;  // char offsets into the original string
  size_t end = 0;
};

// Lowercases (ASCII), splits on non-alphanumeric runs, drops tokens shorter
// than min_len. Offsets refer to the input string.
std::vector<Token> tokenize(const std::string& text, bool lowercase = true, size_t min_len = 2);

std::string normalize_phrase(const std::string& s);

// 64-bit FNV-1a. Used for artifact stamps and per-entity seed derivation.
uint64_t fnv1a(const void* data, size_t len, uint64_t h = 1469598103934665603ULL);
uint64_t fnv1a(const std::string& s, uint64_t h = 1469598103934665603ULL);
uint64_t fnv1a(const char* s, uint64_t h = 1469598103934665603ULL);
uint64_t fnv1a_file(const std::string& path, uint64_t h = 1469598103934665603ULL);

// Shortest decimal form that round-trips the exact double (%.17g).
std::string fmt_double(double v);
std::string to_hex(uint64_t v);

std::vector<std::string> split(const std::string& s, char sep);
std::string trim(const std::string& s);
bool parse_double(const std::string& s, double* out);
bool parse_long(const std::string& s, long long* out);

std::string read_file(const std::string& path);       // throws MissingFile
void write_file_atomic(const std::string& path, const std::string& content);
bool file_exists(const std::string& path);

}  // namespace teko
