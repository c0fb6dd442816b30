#include "common.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace teko {

const char* err_name(Err e) {
  switch (e) {
    case Err::MissingFile: return "MissingFile";
    case Err::MalformedRecord: return "MalformedRecord";
    case Err::DuplicateId: return "DuplicateId";
    case Err::UnknownId: return "UnknownId";
    case Err::EmptyCorpus: return "EmptyCorpus";
    case Err::RatioOutOfRange: return "RatioOutOfRange";
    case Err::TooFewLabeled: return "TooFewLabeled";
    case Err::PriorOutOfRange: return "PriorOutOfRange";
    case Err::ThresholdOutOfRange: return "ThresholdOutOfRange";
    case Err::ScoreOutOfRange: return "ScoreOutOfRange";
    case Err::DimensionMismatch: return "DimensionMismatch";
    case Err::EmptyKnowledgeBase: return "EmptyKnowledgeBase";
    case Err::EmptyDescriptions: return "EmptyDescriptions";
    case Err::ZeroVector: return "ZeroVector";
    case Err::TooFewEntities: return "TooFewEntities";
    case Err::InconsistentIds: return "InconsistentIds";
    case Err::UnknownTypePair: return "UnknownTypePair";
    case Err::EmptyMask: return "EmptyMask";
    case Err::EmptyPairs: return "EmptyPairs";
    case Err::NoEdges: return "NoEdges";
    case Err::GraphTooDense: return "GraphTooDense";
    case Err::EmptyNeighborhood: return "EmptyNeighborhood";
    case Err::NonFiniteActivation: return "NonFiniteActivation";
    case Err::DivergedLoss: return "DivergedLoss";
    case Err::LengthMismatch: return "LengthMismatch";
    case Err::TooFewPoints: return "TooFewPoints";
    case Err::ConfigInvalid: return "ConfigInvalid";
    case Err::MissingUpstreamArtifact: return "MissingUpstreamArtifact";
    case Err::Internal: return "Internal";
  }
  return "Unknown";
}

Matrix matmul(const Matrix& A, const Matrix& B) {
  if (A.cols != B.rows) fail(Err::DimensionMismatch, "matmul " + std::to_string(A.cols) + " vs " + std::to_string(B.rows));
  Matrix C(A.rows, B.cols);
  for (int i = 0; i < A.rows; ++i) {
    const double* ar = A.row(i);
    double* cr = C.row(i);
    for (int k = 0; k < A.cols; ++k) {
      double v = ar[k];
      if (v == 0.0) continue;
      const double* br = B.row(k);
      for (int j = 0; j < B.cols; ++j) cr[j] += v * br[j];
    }
  }
  return C;
}

bool all_finite(const Matrix& m) {
  for (double v : m.a)
    if (!std::isfinite(v)) return false;
  return true;
}

std::vector<Token> tokenize(const std::string& text, bool lowercase, size_t min_len) {
  std::vector<Token> out;
  size_t i = 0;
  const size_t n = text.size();
  while (i < n) {
    unsigned char c = static_cast<unsigned char>(text[i]);
    if (!std::isalnum(c)) {
      ++i;
      continue;
    }
    size_t start = i;
    std::string tok;
    while (i < n && std::isalnum(static_cast<unsigned char>(text[i]))) {
      char ch = text[i];
      tok.push_back(lowercase ? static_cast<char>(std::tolower(static_cast<unsigned char>(ch))) : ch);
      ++i;
    }
    if (tok.size() >= min_len) out.push_back(Token{std::move(tok), start, i});
  }
  return out;
}

std::string normalize_phrase(const std::string& s) {
  std::string out;
  bool in_space = true;
  for (char ch : s) {
    unsigned char c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      if (!in_space && !out.empty()) out.push_back(' ');
      in_space = true;
    } else {
      out.push_back(static_cast<char>(std::tolower(c)));
      in_space = false;
    }
  }
  while (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

uint64_t fnv1a(const void* data, size_t len, uint64_t h) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

uint64_t fnv1a(const std::string& s, uint64_t h) { return fnv1a(s.data(), s.size(), h); }

uint64_t fnv1a(const char* s, uint64_t h) { return fnv1a(s, std::strlen(s), h); }

uint64_t fnv1a_file(const std::string& path, uint64_t h) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Err::MissingFile, path);
  char buf[4096];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    h = fnv1a(buf, static_cast<size_t>(in.gcount()), h);
    if (!in) break;
  }
  return h;
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string to_hex(uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

std::string trim(const std::string& s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

bool parse_double(const std::string& s, double* out) {
  if (s.empty()) return false;
  char* end = nullptr;
  errno = 0;
  double v = std::strtod(s.c_str(), &end);
  if (errno != 0 || end != s.c_str() + s.size()) return false;
  *out = v;
  return true;
}

bool parse_long(const std::string& s, long long* out) {
  if (s.empty()) return false;
  char* end = nullptr;
  errno = 0;
  long long v = std::strtoll(s.c_str(), &end, 10);
  if (errno != 0 || end != s.c_str() + s.size()) return false;
  *out = v;
  return true;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Err::MissingFile, path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(Err::MissingFile, "cannot write " + tmp);
    out << content;
    if (!out) fail(Err::MissingFile, "short write to " + tmp);
  }
  fs::rename(tmp, p);
}

bool file_exists(const std::string& path) { return std::filesystem::exists(path); }

}  // namespace teko
