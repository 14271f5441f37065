#include "phieq/capi.h"

#include <cstring>

#include "phieq/config.hpp"

namespace {

thread_local std::string g_last_error;

int classify(const std::exception& e) {
  using namespace phieq;
  if (dynamic_cast<const ConfigInvalid*>(&e)) return PHIEQ_ERR_INVALID;
  if (dynamic_cast<const DimensionMismatch*>(&e)) return PHIEQ_ERR_DIMENSION;
  if (dynamic_cast<const NotEndomorphism*>(&e)) return PHIEQ_ERR_NOT_ENDOMORPHISM;
  if (dynamic_cast<const IterationCapExceeded*>(&e)) return PHIEQ_ERR_CAP;
  if (dynamic_cast<const CertificateInfeasible*>(&e)) return PHIEQ_ERR_INFEASIBLE;
  if (dynamic_cast<const VerificationFailed*>(&e)) return PHIEQ_ERR_VERIFICATION;
  if (dynamic_cast<const IoError*>(&e)) return PHIEQ_ERR_IO;
  if (dynamic_cast<const NumericalBreakdown*>(&e) ||
      dynamic_cast<const NotPositiveDefinite*>(&e) ||
      dynamic_cast<const DegenerateCut*>(&e) || dynamic_cast<const SingularMap*>(&e) ||
      dynamic_cast<const BadBounds*>(&e)) {
    return PHIEQ_ERR_NUMERIC;
  }
  return PHIEQ_ERR;
}

template <class Fn>
int guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return -classify(e);
  } catch (...) {
    g_last_error = "unknown error";
    return -PHIEQ_ERR;
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) return nullptr;
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

template <class Fn>
char* guarded_string(int* status, Fn&& fn) {
  try {
    std::string s = fn();
    if (status != nullptr) *status = PHIEQ_OK;
    return dup_string(s);
  } catch (const std::exception& e) {
    g_last_error = e.what();
    if (status != nullptr) *status = classify(e);
    return nullptr;
  } catch (...) {
    g_last_error = "unknown error";
    if (status != nullptr) *status = PHIEQ_ERR;
    return nullptr;
  }
}

phieq::Vec to_vec(const double* x, int dim) { return phieq::Vec(x, x + dim); }

}  // namespace

struct phieq_body {
  phieq::BodyPtr body;
};

struct phieq_features {
  phieq::FeatureMap fm;
  int ambient_dim;
};

extern "C" {

const char* phieq_version(void) { return phieq::kLibraryVersion; }

const char* phieq_last_error(void) { return g_last_error.c_str(); }

void phieq_string_free(char* s) { std::free(s); }

phieq_body* phieq_body_create(const char* json_spec) {
  try {
    auto spec = nlohmann::json::parse(json_spec);
    return new phieq_body{phieq::body_from_json(spec)};
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return nullptr;
  }
}

void phieq_body_destroy(phieq_body* body) { delete body; }

int phieq_body_dim(const phieq_body* body) {
  return body == nullptr ? -PHIEQ_ERR_INVALID : body->body->dim();
}

int phieq_body_member(const phieq_body* body, const double* x, int dim, double tol) {
  return guarded([&]() -> int {
    return body->body->member(to_vec(x, dim), tol) ? 1 : 0;
  });
}

int phieq_body_separate(const phieq_body* body, const double* x, int dim, double* normal_out,
                        double* offset_out) {
  return guarded([&]() -> int {
    auto h = body->body->separate(to_vec(x, dim));
    if (!h) return 0;
    std::copy(h->normal.begin(), h->normal.end(), normal_out);
    *offset_out = h->offset;
    return 1;
  });
}

int phieq_body_linopt(const phieq_body* body, const double* u, int dim, double* x_out) {
  return guarded([&]() -> int {
    phieq::Vec x = body->body->linopt(to_vec(u, dim));
    std::copy(x.begin(), x.end(), x_out);
    return PHIEQ_OK;
  });
}

phieq_features* phieq_features_create(const char* json_spec, const phieq_body* body) {
  try {
    auto spec = nlohmann::json::parse(json_spec);
    auto fm = phieq::FeatureMap::from_json(spec, body->body->dim(),
                                           body->body->bounds().outer_radius);
    return new phieq_features{std::move(fm), body->body->dim()};
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return nullptr;
  }
}

void phieq_features_destroy(phieq_features* features) { delete features; }

int phieq_features_output_dim(const phieq_features* features) {
  return features == nullptr ? -PHIEQ_ERR_INVALID : features->fm.output_dim();
}

int phieq_features_eval(const phieq_features* features, const double* x, int dim, double* out) {
  return guarded([&]() -> int {
    phieq::Vec v = features->fm.eval(to_vec(x, dim));
    std::copy(v.begin(), v.end(), out);
    return PHIEQ_OK;
  });
}

namespace {

phieq::DeviationParams params_from_raw(const phieq_features* features, const double* k_rowmajor,
                                       const double* c) {
  phieq::DeviationParams p;
  const int d = features->ambient_dim;
  const int kp = features->fm.output_dim();
  p.k = phieq::Mat(d, kp);
  std::copy(k_rowmajor, k_rowmajor + static_cast<std::size_t>(d) * kp, p.k.a.begin());
  p.c.assign(c, c + d);
  return p;
}

}  // namespace

char* phieq_efp_solve(const phieq_body* body, const phieq_features* features,
                      const double* k_rowmajor, const double* c, double eps, int* status) {
  return guarded_string(status, [&]() -> std::string {
    auto params = params_from_raw(features, k_rowmajor, c);
    const phieq::FeatureMap& fm = features->fm;
    phieq::EfpResult res = phieq::efp_eah(
        *body->body, [&](const phieq::Vec& x) { return phieq::apply_deviation(params, fm, x); },
        eps);
    nlohmann::json out{{"distribution", res.mu.to_json()},
                       {"l1_error", res.l1_error},
                       {"cuts", res.log.cuts.size()}};
    return out.dump();
  });
}

char* phieq_semi_separate(const phieq_body* body, const phieq_features* features,
                          const double* k_rowmajor, const double* c, double eps, int* status) {
  return guarded_string(status, [&]() -> std::string {
    auto params = params_from_raw(features, k_rowmajor, c);
    const phieq::FeatureMap& fm = features->fm;
    phieq::SemiSepResult res = phieq::semi_separate(
        *body->body, [&](const phieq::Vec& x) { return phieq::apply_deviation(params, fm, x); },
        eps);
    nlohmann::json out;
    if (res.is_efp()) {
      out = {{"kind", "efp"},
             {"distribution", res.efp().mu.to_json()},
             {"l1_error", res.efp().l1_error}};
    } else {
      out = {{"kind", "witness"},
             {"point", nlohmann::json(res.witness().point)},
             {"image", nlohmann::json(res.witness().image)}};
    }
    return out.dump();
  });
}

char* phieq_equilibrium_solve(const char* game_json, const char* features_json, double eps,
                              unsigned long long seed, int* status) {
  return guarded_string(status, [&]() -> std::string {
    phieq::MultilinearGame game = phieq::game_from_json(nlohmann::json::parse(game_json));
    nlohmann::json jf = nlohmann::json::parse(features_json);
    std::vector<nlohmann::json> specs;
    if (jf.is_array()) {
      for (const auto& f : jf) specs.push_back(f);
    } else {
      specs.assign(game.players(), jf);
    }
    phieq::EquilibriumOptions opts;
    opts.seed = seed;
    phieq::EquilibriumResult res = phieq::compute_phi_equilibrium(game, specs, eps, opts);
    nlohmann::json out{{"report", res.report.to_json()},
                       {"distribution", res.distribution.joint.to_json()},
                       {"block_dims", nlohmann::json(res.distribution.block_dims)}};
    return out.dump();
  });
}

char* phieq_run_config(const char* config_json, const char* out_dir, long long seed_override,
                       double eps_override, int* status) {
  return guarded_string(status, [&]() -> std::string {
    auto config = nlohmann::json::parse(config_json);
    std::optional<std::uint64_t> seed;
    if (seed_override >= 0) seed = static_cast<std::uint64_t>(seed_override);
    std::optional<double> eps;
    if (eps_override > 0) eps = eps_override;
    phieq::RunReport report =
        phieq::run_and_write(config, out_dir == nullptr ? "." : out_dir, seed, eps);
    return report.summary;
  });
}

}  // extern "C"
