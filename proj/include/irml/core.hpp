#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace irml {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
// Instances are stored one per row; row-major keeps each instance contiguous
// so that a row binds to VecRef without a copy.
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using VecRef = Eigen::Ref<const Vector>;

// Caller violated a documented precondition (dimension mismatch, bad config).
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed or unusable input data.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite values produced during optimization.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require_same_dim(std::ptrdiff_t a, std::ptrdiff_t b, const char* what) {
  if (a != b) {
    throw UsageError(std::string(what) + ": dimension mismatch (" + std::to_string(a) +
                     " vs " + std::to_string(b) + ")");
  }
}

// Independent deterministic stream for (seed, stream) pairs.
inline std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return std::mt19937_64(seq);
}

}  // namespace irml
