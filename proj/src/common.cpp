#include "phieq/common.hpp"

#include <cstdio>
#include <cstdlib>
#include <mutex>

namespace phieq {

void check_finite(const Vec& v, const char* what) {
  for (double x : v) {
    if (!std::isfinite(x)) {
      throw DimensionMismatch(std::string(what) + ": non-finite entry");
    }
  }
}

void check_dim(const Vec& v, std::size_t dim, const char* what) {
  if (v.size() != dim) {
    throw DimensionMismatch(std::string(what) + ": expected dim " + std::to_string(dim) +
                            ", got " + std::to_string(v.size()));
  }
}

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

Rng::Rng(std::uint64_t seed) {
  std::uint64_t sm = seed;
  for (auto& s : s_) s = splitmix64(sm);
}

std::uint64_t Rng::next() {
  const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double Rng::uniform01() {
  return static_cast<double>(next() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

double Rng::normal() {
  // Box-Muller, always drawing two uniforms and discarding the spare so the
  // stream position is input-independent.
  double u1 = uniform01();
  double u2 = uniform01();
  while (u1 <= 0) u1 = uniform01();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

int Rng::uniform_int(int n) {
  return static_cast<int>(next() % static_cast<std::uint64_t>(n));
}

Vec Rng::gaussian_vector(int d) {
  Vec v(d);
  for (auto& x : v) x = normal();
  return v;
}

Vec Rng::unit_vector(int d) {
  Vec v = gaussian_vector(d);
  double n = 0;
  for (double x : v) n += x * x;
  n = std::sqrt(n);
  if (n < 1e-300) return unit_vector(d);
  for (auto& x : v) x /= n;
  return v;
}

Vec Rng::in_ball(int d, double radius) {
  Vec v = unit_vector(d);
  double r = radius * std::pow(uniform01(), 1.0 / d);
  for (auto& x : v) x *= r;
  return v;
}

namespace {

LogLevel current_log_level() {
  static LogLevel level = [] {
    const char* env = std::getenv("PHIEQ_LOG");
    if (env == nullptr) return LogLevel::Error;
    std::string s(env);
    if (s == "debug") return LogLevel::Debug;
    if (s == "info") return LogLevel::Info;
    return LogLevel::Error;
  }();
  return level;
}

std::mutex& log_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

bool log_enabled(LogLevel level) {
  return static_cast<int>(level) <= static_cast<int>(current_log_level());
}

void log_line(LogLevel level, const std::string& msg) {
  if (!log_enabled(level)) return;
  std::lock_guard<std::mutex> lock(log_mutex());
  const char* tag = level == LogLevel::Debug ? "debug" : (level == LogLevel::Info ? "info" : "error");
  std::fprintf(stderr, "[phieq %s] %s\n", tag, msg.c_str());
}

}  // namespace phieq
