#ifndef CONJULAB_COMMON_HPP_
#define CONJULAB_COMMON_HPP_

#include <Eigen/Core>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace conjulab {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Index = Eigen::Index;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct DomainError : std::runtime_error {
  explicit DomainError(const std::string& what) : std::runtime_error(what) {}
};
struct RankError : std::runtime_error {
  explicit RankError(const std::string& what) : std::runtime_error(what) {}
};
struct NewtonDivergence : std::runtime_error {
  explicit NewtonDivergence(const std::string& what) : std::runtime_error(what) {}
};
struct EmptyDataset : std::runtime_error {
  explicit EmptyDataset(const std::string& what) : std::runtime_error(what) {}
};
struct ShapeError : std::runtime_error {
  explicit ShapeError(const std::string& what) : std::runtime_error(what) {}
};
struct RangeError : std::runtime_error {
  explicit RangeError(const std::string& what) : std::runtime_error(what) {}
};
struct MissingKey : std::runtime_error {
  explicit MissingKey(const std::string& what) : std::runtime_error(what) {}
};
struct NonFiniteLoss : std::runtime_error {
  explicit NonFiniteLoss(const std::string& what) : std::runtime_error(what) {}
};
struct NoOutBatch : std::runtime_error {
  explicit NoOutBatch(const std::string& what) : std::runtime_error(what) {}
};
struct TooManyParameters : std::runtime_error {
  explicit TooManyParameters(const std::string& what) : std::runtime_error(what) {}
};
struct NotConverged : std::runtime_error {
  explicit NotConverged(const std::string& what) : std::runtime_error(what) {}
};
struct DegenerateSpectrum : std::runtime_error {
  explicit DegenerateSpectrum(const std::string& what) : std::runtime_error(what) {}
};
struct ZeroOutputViolation : std::runtime_error {
  explicit ZeroOutputViolation(const std::string& what) : std::runtime_error(what) {}
};
struct IoError : std::runtime_error {
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};
struct ParseError : std::runtime_error {
  explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};
struct ValidationError : std::runtime_error {
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};
struct MagicMismatch : std::runtime_error {
  explicit MagicMismatch(const std::string& what) : std::runtime_error(what) {}
};
struct TruncatedFile : std::runtime_error {
  explicit TruncatedFile(const std::string& what) : std::runtime_error(what) {}
};
struct LengthMismatch : std::runtime_error {
  explicit LengthMismatch(const std::string& what) : std::runtime_error(what) {}
};
struct EmptySeries : std::runtime_error {
  explicit EmptySeries(const std::string& what) : std::runtime_error(what) {}
};

// x log x with the 0 log 0 := 0 convention; negative x is the caller's error.
inline double xlogx(double x) { return x > 0.0 ? x * std::log(x) : 0.0; }

}  // namespace conjulab

#endif  // CONJULAB_COMMON_HPP_
