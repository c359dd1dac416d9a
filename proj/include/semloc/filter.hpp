#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "semloc/likelihood.hpp"
#include "semloc/projection.hpp"
#include "semloc/random.hpp"
#include "semloc/semmap.hpp"
#include "semloc/worldsim.hpp"

namespace semloc {

struct Particle {
  Pose2D pose;
  double log_likelihood = 0.0;
  double weight = 0.0;
};

enum class InitMode { gps_prior, uniform, known_pose };

struct FilterConfig {
  int n_min = 80;
  int n_max = 500;
  double resample_threshold = 0.5;  // resample when ESS < threshold * N
  ObservationModel mode = ObservationModel::semantic;
  bool use_gps = true;
  InitMode init = InitMode::gps_prior;
  int init_count = 500;
  Pose2D init_pose;                  // known_pose mode
  double init_position_sigma = 0.0;  // known_pose spread, m
  double init_heading_sigma = 0.0;   // known_pose spread, rad
  LikelihoodParams likelihood;
  MotionNoise motion_noise;

  void validate() const;
};

struct PoseEstimate {
  Pose2D pose;
  std::array<double, 4> position_covariance{};  // row-major 2x2, m^2
  double ess = 0.0;
};

struct StepDiagnostics {
  double t = 0.0;
  double ess = 0.0;
  int n_particles = 0;
  double alpha = 0.0;
  int n_sem = 0;
  double log_obs_best = 0.0;
  std::optional<double> log_gps_best;
};

/// Particles drawn per the configured mode, weights 1/N. gps_prior without
/// a fix falls back to uniform over `bounds` with a warning.
std::vector<Particle> initialize(const FilterConfig& config, const Bounds& bounds,
                                 const std::optional<GpsFix>& first_gps, Rng& rng);

/// Advances every particle by the delta with independently drawn noise.
void predict(std::vector<Particle>& particles, const OdometryDelta& delta, const MotionNoise& noise,
             Rng& rng);

struct UpdateSummary {
  double alpha = 0.0;
  int n_sem = 0;
  double log_obs_best = 0.0;
  std::optional<double> log_gps_best;
};

/// Measurement update: semantic (or classless) log-likelihood, optional GPS
/// term blended by alpha, then softmax weights across the set.
UpdateSummary update(std::vector<Particle>& particles, const SemanticScan& scan,
                     const std::optional<GpsFix>& fix, const WallMap& map,
                     const FilterConfig& config);

double effective_sample_size(std::span<const double> weights);
double effective_sample_size(std::span<const Particle> particles);

/// clamp(round(n_max * (1 - ess/N) + n_min * ess/N), n_min, n_max).
int adapt_count(double ess, int n_particles, const FilterConfig& config);

/// Systematic resampling to `count` particles with uniform output weights.
std::vector<Particle> systematic_resample(std::span<const Particle> particles, int count, Rng& rng);

/// Resamples only when ESS < threshold * N; the output size follows
/// adapt_count. Returns whether resampling happened.
bool resample(std::vector<Particle>& particles, const FilterConfig& config, Rng& rng);

/// Weighted mean position and covariance with a circular-mean heading.
PoseEstimate estimate(std::span<const Particle> particles);

struct FilterState {
  std::vector<Particle> particles;
  Trajectory estimates;
  std::vector<StepDiagnostics> diagnostics;
};

/// predict -> update -> conditional resample -> estimate; appends the
/// estimate and diagnostics to the state.
PoseEstimate step(FilterState& state, double t, const OdometryDelta& delta,
                  const SemanticScan& scan, const std::optional<GpsFix>& fix, const WallMap& map,
                  const FilterConfig& config, Rng& rng);

}  // namespace semloc
