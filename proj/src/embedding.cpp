#include "medgrpo/embedding.hpp"

#include <cctype>
#include <cmath>
#include <cstdint>

#include "medgrpo/errors.hpp"

namespace medgrpo::rewards {

namespace {

std::uint64_t fnv1a(const std::string& token) {
  std::uint64_t h = 14695981039346656037ULL;
  for (char c : token) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

std::vector<double> TfBagEmbedder::embed(const std::string& text) {
  std::vector<double> v(dimensions_, 0.0);
  std::string current;
  auto flush = [&] {
    if (!current.empty()) {
      v[fnv1a(current) % dimensions_] += 1.0;
      current.clear();
    }
  };
  for (char c : text) {
    if (std::isalnum(static_cast<unsigned char>(c)) != 0) {
      current.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    } else {
      flush();
    }
  }
  flush();
  return v;
}

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) {
    throw ValidationError("cosine_similarity: vectors must have equal length");
  }
  if (a == b) {
    double norm = 0.0;
    for (double x : a) norm += x * x;
    return norm > 0.0 ? 1.0 : 0.0;
  }
  double dot = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  double cos = dot / (std::sqrt(na) * std::sqrt(nb));
  return std::min(1.0, std::max(0.0, cos));
}

}  // namespace medgrpo::rewards
