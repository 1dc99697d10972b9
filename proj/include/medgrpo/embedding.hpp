#pragma once

#include <string>
#include <vector>

namespace medgrpo::rewards {

// Pluggable caption embedder. embed must be deterministic for the pipeline
// to stay reproducible; a failure here is not recoverable by the reward
// path, so implementations should throw rather than return garbage.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::vector<double> embed(const std::string& text) = 0;
};

// Default offline embedder: lowercase alphanumeric tokens, term-frequency
// weights, hashed into a fixed number of buckets. No model files, no
// network, identical output for identical text.
class TfBagEmbedder : public EmbeddingProvider {
 public:
  explicit TfBagEmbedder(std::size_t dimensions = 256) : dimensions_(dimensions) {}
  std::vector<double> embed(const std::string& text) override;

 private:
  std::size_t dimensions_;
};

// Cosine similarity clamped to [0, 1]. Element-wise identical vectors score
// exactly 1.0; a zero vector scores 0.0 against anything non-identical.
double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace medgrpo::rewards
