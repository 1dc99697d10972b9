#pragma once

#include <stdexcept>
#include <string>

namespace medgrpo {

// Invalid argument values: malformed intervals, unnormalized distributions,
// length mismatches, non-finite inputs.
class ValidationError : public std::invalid_argument {
 public:
  explicit ValidationError(const std::string& what) : std::invalid_argument(what) {}
};

// Percentile fitting rejected its sample (too few scores, non-finite values).
class FittingError : public std::runtime_error {
 public:
  explicit FittingError(const std::string& what) : std::runtime_error(what) {}
};

// A (dataset, task, channel) key has no stats entry.
class LookupError : public std::runtime_error {
 public:
  explicit LookupError(const std::string& what) : std::runtime_error(what) {}
};

// Judge response could not be reduced to five in-range scores.
class ScoreParseError : public std::runtime_error {
 public:
  explicit ScoreParseError(const std::string& what) : std::runtime_error(what) {}
};

// Judge endpoint failed after all retries; callers may fall back.
class JudgeUnavailableError : public std::runtime_error {
 public:
  explicit JudgeUnavailableError(const std::string& what) : std::runtime_error(what) {}
};

// Bad configuration: unknown task kinds, missing fields, non-retriable
// endpoint rejections (auth, bad request).
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Rollouts were produced by a different policy version than the one being
// updated.
class StalenessError : public std::runtime_error {
 public:
  explicit StalenessError(const std::string& what) : std::runtime_error(what) {}
};

// File could not be read, written, or parsed as the expected format.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace medgrpo
