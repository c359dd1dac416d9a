#include "semloc/filter.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "semloc/errors.hpp"
#include "semloc/io.hpp"

namespace semloc {

void FilterConfig::validate() const {
  if (!(n_min > 0 && n_min <= n_max)) throw InvalidArgument("particle counts need 0 < n_min <= n_max");
  if (!(resample_threshold > 0.0 && resample_threshold <= 1.0)) {
    throw InvalidArgument("resample threshold must lie in (0, 1]");
  }
  if (init_count < 1) throw InvalidArgument("initial particle count must be positive");
  if (init_position_sigma < 0.0 || init_heading_sigma < 0.0) {
    throw InvalidArgument("initial spread must be non-negative");
  }
  likelihood.validate();
  motion_noise.validate();
}

std::vector<Particle> initialize(const FilterConfig& config, const Bounds& bounds,
                                 const std::optional<GpsFix>& first_gps, Rng& rng) {
  config.validate();
  const int count = std::clamp(config.init_count, config.n_min, config.n_max);
  const double w = 1.0 / count;
  InitMode mode = config.init;
  if (mode == InitMode::gps_prior && !first_gps) {
    warn("gps_prior initialisation without a GPS fix; falling back to uniform");
    mode = InitMode::uniform;
  }

  auto uniform_heading = [&] { return normalize_angle(uniform(rng, -std::numbers::pi, std::numbers::pi)); };
  std::vector<Particle> particles;
  particles.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    Pose2D pose;
    switch (mode) {
      case InitMode::gps_prior: {
        const double sigma = config.likelihood.sigma_gps.value_or(first_gps->sigma);
        pose.x = first_gps->position.x + gaussian(rng, sigma);
        pose.y = first_gps->position.y + gaussian(rng, sigma);
        pose.theta = uniform_heading();
        break;
      }
      case InitMode::uniform:
        pose.x = uniform(rng, bounds.min_x, bounds.max_x);
        pose.y = uniform(rng, bounds.min_y, bounds.max_y);
        pose.theta = uniform_heading();
        break;
      case InitMode::known_pose:
        pose.x = config.init_pose.x + gaussian(rng, config.init_position_sigma);
        pose.y = config.init_pose.y + gaussian(rng, config.init_position_sigma);
        pose.theta = normalize_angle(config.init_pose.theta + gaussian(rng, config.init_heading_sigma));
        break;
    }
    particles.push_back({pose, 0.0, w});
  }
  return particles;
}

void predict(std::vector<Particle>& particles, const OdometryDelta& delta, const MotionNoise& noise,
             Rng& rng) {
  noise.validate();
  for (auto& p : particles) p.pose = apply_odometry(p.pose, perturb_odometry(delta, noise, rng));
}

UpdateSummary update(std::vector<Particle>& particles, const SemanticScan& scan,
                     const std::optional<GpsFix>& fix, const WallMap& map,
                     const FilterConfig& config) {
  if (particles.empty()) throw InvalidArgument("update on an empty particle set");
  const auto& params = config.likelihood;
  const bool with_gps = config.use_gps && fix.has_value();
  const double sigma_gps = with_gps ? params.sigma_gps.value_or(fix->sigma) : 1.0;

  UpdateSummary summary;
  summary.n_sem = semantic_count(scan, config.mode);
  summary.alpha = with_gps ? blend_alpha(summary.n_sem, params.k_scale, params.alpha_floor,
                                         params.alpha_ceil)
                           : 0.0;

  std::vector<double> logliks(particles.size());
  std::vector<double> log_obs(particles.size());
  std::vector<double> log_gps(particles.size(), 0.0);
  for (std::size_t i = 0; i < particles.size(); ++i) {
    const auto sem = semantic_loglik(scan, particles[i].pose, map, params, config.mode);
    log_obs[i] = sem.log_obs;
    std::optional<double> g;
    if (with_gps) {
      g = gps_loglik(particles[i].pose, *fix, sigma_gps);
      log_gps[i] = *g;
    }
    logliks[i] = combined_loglik(sem.log_obs, g, summary.alpha);
  }

  const auto weights = normalize_weights(logliks);
  std::size_t best = 0;
  for (std::size_t i = 0; i < particles.size(); ++i) {
    particles[i].log_likelihood = logliks[i];
    particles[i].weight = weights[i];
    if (logliks[i] > logliks[best]) best = i;
  }
  summary.log_obs_best = log_obs[best];
  if (with_gps) summary.log_gps_best = log_gps[best];
  return summary;
}

double effective_sample_size(std::span<const double> weights) {
  double sum_sq = 0.0;
  for (const double w : weights) sum_sq += w * w;
  if (!(sum_sq > 0.0)) throw InvalidArgument("effective sample size of all-zero weights");
  return 1.0 / sum_sq;
}

double effective_sample_size(std::span<const Particle> particles) {
  double sum_sq = 0.0;
  for (const auto& p : particles) sum_sq += p.weight * p.weight;
  if (!(sum_sq > 0.0)) throw InvalidArgument("effective sample size of all-zero weights");
  return 1.0 / sum_sq;
}

int adapt_count(double ess, int n_particles, const FilterConfig& config) {
  if (n_particles <= 0) throw InvalidArgument("adapt_count needs a positive particle count");
  const double frac = std::clamp(ess / n_particles, 0.0, 1.0);
  const double raw = config.n_max * (1.0 - frac) + config.n_min * frac;
  return std::clamp(static_cast<int>(std::lround(raw)), config.n_min, config.n_max);
}

std::vector<Particle> systematic_resample(std::span<const Particle> particles, int count, Rng& rng) {
  if (particles.empty() || count <= 0) throw InvalidArgument("systematic_resample needs input and count > 0");
  double total = 0.0;
  for (const auto& p : particles) total += p.weight;
  const double step = total / count;
  double u = uniform(rng, 0.0, step);
  std::vector<Particle> out;
  out.reserve(static_cast<std::size_t>(count));
  std::size_t i = 0;
  double cumulative = particles[0].weight;
  const double w = 1.0 / count;
  for (int j = 0; j < count; ++j) {
    while (u > cumulative && i + 1 < particles.size()) cumulative += particles[++i].weight;
    out.push_back({particles[i].pose, particles[i].log_likelihood, w});
    u += step;
  }
  return out;
}

bool resample(std::vector<Particle>& particles, const FilterConfig& config, Rng& rng) {
  const double ess = effective_sample_size(particles);
  const int n = static_cast<int>(particles.size());
  if (!(ess < config.resample_threshold * n)) return false;
  particles = systematic_resample(particles, adapt_count(ess, n, config), rng);
  return true;
}

PoseEstimate estimate(std::span<const Particle> particles) {
  if (particles.empty()) throw InvalidArgument("estimate of an empty particle set");
  double total = 0.0, mx = 0.0, my = 0.0, s = 0.0, c = 0.0, sum_sq = 0.0;
  for (const auto& p : particles) {
    total += p.weight;
    mx += p.weight * p.pose.x;
    my += p.weight * p.pose.y;
    s += p.weight * std::sin(p.pose.theta);
    c += p.weight * std::cos(p.pose.theta);
    sum_sq += p.weight * p.weight;
  }
  if (!(total > 0.0)) throw InvalidArgument("estimate needs positive total weight");
  mx /= total;
  my /= total;
  double cxx = 0.0, cxy = 0.0, cyy = 0.0;
  for (const auto& p : particles) {
    const double dx = p.pose.x - mx;
    const double dy = p.pose.y - my;
    cxx += p.weight * dx * dx;
    cxy += p.weight * dx * dy;
    cyy += p.weight * dy * dy;
  }
  PoseEstimate est;
  est.pose = {mx, my, normalize_angle(std::atan2(s, c))};
  est.position_covariance = {cxx / total, cxy / total, cxy / total, cyy / total};
  est.ess = total * total / sum_sq;
  return est;
}

PoseEstimate step(FilterState& state, double t, const OdometryDelta& delta,
                  const SemanticScan& scan, const std::optional<GpsFix>& fix, const WallMap& map,
                  const FilterConfig& config, Rng& rng) {
  if (state.particles.empty()) throw InvalidArgument("filter state is not initialised");
  predict(state.particles, delta, config.motion_noise, rng);
  const auto summary = update(state.particles, scan, fix, map, config);
  const double ess = effective_sample_size(state.particles);
  resample(state.particles, config, rng);
  PoseEstimate est = estimate(state.particles);
  est.ess = ess;

  state.estimates.samples.push_back({t, est.pose});
  state.diagnostics.push_back({t, ess, static_cast<int>(state.particles.size()), summary.alpha,
                               summary.n_sem, summary.log_obs_best, summary.log_gps_best});
  return est;
}

}  // namespace semloc
