#include "semloc/likelihood.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "semloc/errors.hpp"

namespace semloc {

double ClassWeights::of(SemanticClass cls) const {
  switch (cls) {
    case SemanticClass::pole:
      return pole;
    case SemanticClass::trunk:
      return trunk;
    case SemanticClass::background:
      return background;
  }
  return background;
}

void LikelihoodParams::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw InvalidArgument(what);
  };
  require(sigma_obs > 0.0, "sigma_obs must be positive");
  require(lambda_hit >= 0.0 && lambda_miss >= 0.0, "penalties must be non-negative");
  require(class_weights.pole > class_weights.trunk && class_weights.trunk > class_weights.background &&
              class_weights.background > 0.0,
          "class weights must satisfy pole > trunk > background > 0");
  require(classless_weight > 0.0, "classless weight must be positive");
  require(max_range > 0.0, "max_range must be positive");
  require(alpha_floor > 0.0 && alpha_floor < alpha_ceil && alpha_ceil < 1.0,
          "alpha bounds must satisfy 0 < floor < ceil < 1");
  require(k_scale >= 1.0, "K must be >= 1");
  require(!sigma_gps || *sigma_gps > 0.0, "sigma_gps must be positive");
}

double observation_loglik_from_hit(const Observation& obs, const RaycastResult& hit,
                                   const LikelihoodParams& params, ObservationModel model) {
  const double inv_two_var = 1.0 / (2.0 * params.sigma_obs * params.sigma_obs);
  if (!hit) return -params.lambda_miss * params.lambda_miss * inv_two_var;
  const bool correct = model == ObservationModel::classless ||
                       obs.cls == SemanticClass::background || obs.cls == hit->cls;
  if (!correct) return -params.lambda_hit * params.lambda_hit * inv_two_var;
  const double dr = std::abs(obs.range - hit->range);
  return -dr * dr * inv_two_var;
}

double observation_loglik(const Observation& obs, const Pose2D& particle, const WallMap& map,
                          const LikelihoodParams& params, ObservationModel model) {
  const auto hit = map.raycast(particle.position(), particle.theta + obs.bearing, params.max_range);
  return observation_loglik_from_hit(obs, hit, params, model);
}

int semantic_count(const SemanticScan& scan, ObservationModel model) {
  if (model == ObservationModel::classless) return static_cast<int>(scan.size());
  return static_cast<int>(std::count_if(scan.observations.begin(), scan.observations.end(),
                                        [](const Observation& o) {
                                          return o.cls != SemanticClass::background;
                                        }));
}

SemanticLikelihood semantic_loglik(const SemanticScan& scan, const Pose2D& particle,
                                   const WallMap& map, const LikelihoodParams& params,
                                   ObservationModel model) {
  if (scan.empty()) return {0.0, 0};
  double sum = 0.0;
  for (const auto& obs : scan.observations) {
    const double w = model == ObservationModel::classless ? params.classless_weight
                                                          : params.class_weights.of(obs.cls);
    sum += w * observation_loglik(obs, particle, map, params, model);
  }
  return {sum / static_cast<double>(scan.size()), semantic_count(scan, model)};
}

double gps_loglik(const Pose2D& particle, const GpsFix& fix, double sigma_gps) {
  if (!(sigma_gps > 0.0)) throw InvalidArgument("sigma_gps must be positive");
  const double dx = particle.x - fix.position.x;
  const double dy = particle.y - fix.position.y;
  return -(dx * dx + dy * dy) / (2.0 * sigma_gps * sigma_gps);
}

double blend_alpha(int n_sem, double k_scale, double floor, double ceil) {
  if (n_sem < 0) throw InvalidArgument("n_sem must be non-negative");
  if (!(k_scale >= 1.0)) throw InvalidArgument("K must be >= 1");
  const double raw = 1.0 / (1.0 + static_cast<double>(n_sem) / k_scale);
  return std::clamp(raw, floor, ceil);
}

double combined_loglik(double log_obs, std::optional<double> log_gps, double alpha) {
  if (!log_gps) return log_obs;
  return (1.0 - alpha) * log_obs + alpha * *log_gps;
}

std::vector<double> normalize_weights(std::span<const double> logliks) {
  if (logliks.empty()) throw InvalidArgument("cannot normalise an empty weight set");
  double max_ll = -std::numeric_limits<double>::infinity();
  for (const double ll : logliks) {
    if (!std::isfinite(ll)) throw InvalidArgument("non-finite log-likelihood");
    max_ll = std::max(max_ll, ll);
  }
  std::vector<double> w(logliks.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logliks.size(); ++i) {
    w[i] = std::exp(logliks[i] - max_ll);
    total += w[i];
  }
  for (double& x : w) x /= total;
  return w;
}

}  // namespace semloc
