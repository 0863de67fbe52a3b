#ifndef ERSAA_TYPES_HPP
#define ERSAA_TYPES_HPP

#include <Eigen/Dense>

#include <charconv>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <system_error>

namespace ersaa {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Error hierarchy. Every failure mode surfaces as a named exception type so
// callers can distinguish contract violations from numerical trouble.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DimensionMismatch : Error {
  using Error::Error;
};
struct RankDeficient : Error {
  using Error::Error;
};
struct DegenerateDesign : Error {
  using Error::Error;
};
struct KOutOfRange : Error {
  using Error::Error;
};
struct NonpositiveDelta : Error {
  using Error::Error;
};
struct DomainError : Error {
  using Error::Error;
};
struct LeverageOne : Error {
  using Error::Error;
};
struct IndexOutOfRange : Error {
  using Error::Error;
};
struct EmptyGrid : Error {
  using Error::Error;
};
struct EmptyInput : Error {
  using Error::Error;
};
struct NumericalBreakdown : Error {
  using Error::Error;
};
struct RecourseInfeasible : Error {
  using Error::Error;
};
struct SizeCapExceeded : Error {
  using Error::Error;
};
struct TrueModelUnavailable : Error {
  using Error::Error;
};
struct InfeasibleCandidate : Error {
  using Error::Error;
};
struct BadConfig : Error {
  using Error::Error;
};
struct IoError : Error {
  using Error::Error;
};

// Shortest decimal representation that round-trips the exact double.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s) {
  if (s == "inf" || s == "+inf") return kInf;
  if (s == "-inf") return -kInf;
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  double v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw IoError("cannot parse number: '" + std::string(s) + "'");
  return v;
}

inline void require(bool cond, const char* what) {
  if (!cond) throw DimensionMismatch(what);
}

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

}  // namespace ersaa

#endif  // ERSAA_TYPES_HPP
