#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace phieq {

using Vec = std::vector<double>;

// Error hierarchy. Every failure mode surfaced by the library derives from
// Error so the C API can map exceptions onto status codes.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct DimensionMismatch : Error {
  explicit DimensionMismatch(const std::string& msg) : Error(msg) {}
};

struct NumericalBreakdown : Error {
  explicit NumericalBreakdown(const std::string& msg) : Error(msg) {}
};

struct NotPositiveDefinite : Error {
  explicit NotPositiveDefinite(const std::string& msg) : Error(msg) {}
};

struct DegenerateCut : Error {
  explicit DegenerateCut(const std::string& msg) : Error(msg) {}
};

struct BadBounds : Error {
  explicit BadBounds(const std::string& msg) : Error(msg) {}
};

struct SingularMap : Error {
  explicit SingularMap(const std::string& msg) : Error(msg) {}
};

struct IterationCapExceeded : Error {
  explicit IterationCapExceeded(const std::string& msg) : Error(msg) {}
};

struct CertificateInfeasible : Error {
  explicit CertificateInfeasible(const std::string& msg) : Error(msg) {}
};

struct NotEndomorphism : Error {
  NotEndomorphism(const std::string& msg, Vec point, Vec image)
      : Error(msg), witness(std::move(point)), witness_image(std::move(image)) {}
  Vec witness;        // point of X whose image escapes X
  Vec witness_image;  // the offending image
};

struct IdentityUnrepresentable : Error {
  explicit IdentityUnrepresentable(const std::string& msg) : Error(msg) {}
};

struct SweepExhausted : Error {
  explicit SweepExhausted(const std::string& msg) : Error(msg) {}
};

struct ModeUnavailable : Error {
  explicit ModeUnavailable(const std::string& msg) : Error(msg) {}
};

struct ConfigInvalid : Error {
  explicit ConfigInvalid(const std::string& msg) : Error(msg) {}
};

struct VerificationFailed : Error {
  explicit VerificationFailed(const std::string& msg) : Error(msg) {}
};

struct IoError : Error {
  explicit IoError(const std::string& msg) : Error(msg) {}
};

void check_finite(const Vec& v, const char* what);
void check_dim(const Vec& v, std::size_t dim, const char* what);

// Deterministic RNG (xoshiro256++). std::mt19937_64 would do, but the
// standard distributions are implementation-defined and golden CSV files
// must not depend on the standard library build.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next();
  double uniform01();                       // [0, 1)
  double uniform(double lo, double hi);
  double normal();                          // standard normal, Box-Muller
  int uniform_int(int n);                   // [0, n)

  Vec gaussian_vector(int d);
  Vec unit_vector(int d);
  Vec in_ball(int d, double radius);        // uniform over the ball

 private:
  std::uint64_t s_[4];
};

// Minimal stderr logger controlled by the PHIEQ_LOG environment variable
// (error | info | debug; default error).
enum class LogLevel { Error = 0, Info = 1, Debug = 2 };
bool log_enabled(LogLevel level);
void log_line(LogLevel level, const std::string& msg);

}  // namespace phieq
