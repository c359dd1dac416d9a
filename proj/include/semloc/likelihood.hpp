#pragma once

#include <optional>
#include <span>
#include <vector>

#include "semloc/projection.hpp"
#include "semloc/semmap.hpp"
#include "semloc/types.hpp"
#include "semloc/worldsim.hpp"

namespace semloc {

struct ClassWeights {
  double pole = 1.0;
  double trunk = 0.7;
  double background = 0.2;

  double of(SemanticClass cls) const;
};

struct LikelihoodParams {
  double sigma_obs = 0.5;    // range-error standard deviation, m
  double lambda_hit = 4.0;   // incorrect-hit penalty, m
  double lambda_miss = 4.0;  // miss penalty, m
  ClassWeights class_weights;
  double classless_weight = 1.0;  // single weight used when classes are merged
  double max_range = 5.0;
  double alpha_floor = 0.05;
  double alpha_ceil = 0.95;
  double k_scale = 4.0;  // expected semantic observations inside a row
  /// Overrides the fix's own sigma when set.
  std::optional<double> sigma_gps;

  /// Throws InvalidArgument on a broken invariant.
  void validate() const;
};

/// How observation classes enter the likelihood.
enum class ObservationModel {
  semantic,   // three-case model, per-class weights
  classless,  // every hit is a correct hit, one shared weight
};

/// Log-likelihood of one observation for a particle; always <= 0.
double observation_loglik(const Observation& obs, const Pose2D& particle, const WallMap& map,
                          const LikelihoodParams& params,
                          ObservationModel model = ObservationModel::semantic);

/// Same three-case value from an already computed ray-cast result.
double observation_loglik_from_hit(const Observation& obs, const RaycastResult& hit,
                                   const LikelihoodParams& params, ObservationModel model);

struct SemanticLikelihood {
  double log_obs = 0.0;
  int n_sem = 0;
};

/// Count of observations that carry a landmark class (classless mode counts
/// every observation).
int semantic_count(const SemanticScan& scan, ObservationModel model = ObservationModel::semantic);

/// Class-weighted mean over all N observations; (0, 0) for an empty scan.
SemanticLikelihood semantic_loglik(const SemanticScan& scan, const Pose2D& particle,
                                   const WallMap& map, const LikelihoodParams& params,
                                   ObservationModel model = ObservationModel::semantic);

double gps_loglik(const Pose2D& particle, const GpsFix& fix, double sigma_gps);

/// clamp(1 / (1 + n_sem / k), floor, ceil).
double blend_alpha(int n_sem, double k_scale, double floor, double ceil);

/// (1 - alpha) * log_obs + alpha * log_gps; log_obs alone without a fix.
double combined_loglik(double log_obs, std::optional<double> log_gps, double alpha);

/// Max-subtracted softmax. Throws InvalidArgument on empty or non-finite input.
std::vector<double> normalize_weights(std::span<const double> logliks);

}  // namespace semloc
