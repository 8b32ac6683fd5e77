#pragma once

#include <span>
#include <string>
#include <vector>

#include "threshtest/counts.hpp"
#include "threshtest/sampler.hpp"

// Hierarchical model over (race x county) cells.
//
// Cell-level quantities derive from unconstrained effects:
//   phi_rd   = logistic(phi_race_r + phi_county_d)      prevalence
//   delta_rd = exp(log_delta_race_r [+ log_delta_county_d])
//   z_rd     = logistic(zeta_race_r + zeta_county_d)    testing threshold
// County effects are mean-centered through a sum-to-zero reparameterization
// (the last effect equals minus the sum of the free ones), which removes the
// translation non-identifiability against the race intercepts.
//
// Observation model per cell, with f/g the risk-distribution tail quantities
// at (phi_rd, delta_rd, z_rd):
//   tests  ~ Poisson(population * f)   (or Binomial(population, f))
//   cases  ~ Binomial(tests, g)
// Log-pmf normalization constants are kept so cross-variant comparisons and
// posterior predictive checks are well defined.
//
// Priors (this artifact's choices; every value is configurable):
//   phi_race_r       ~ Normal(logit(phi_loc), phi_scale^2)
//   zeta_race_r      ~ Normal(logit(zeta_loc), zeta_scale^2)
//   log_delta_race_r ~ Normal(log_delta_loc, log_delta_scale^2)
//   county effects   ~ Normal(0, sigma^2), one sigma per effect family
//   sigmas           ~ HalfNormal(scale), sampled on the log scale with the
//                      exp-transform Jacobian included.

namespace threshtest {

enum class CountModel { poisson, binomial };

struct Hyperparams {
  double phi_loc = 0.01;    // prior prevalence location (probability scale)
  double phi_scale = 1.5;   // sd on the logit scale
  double zeta_loc = 0.05;   // prior threshold location (probability scale)
  double zeta_scale = 1.5;
  double log_delta_loc = 0.0;
  double log_delta_scale = 0.5;
  double sigma_phi_scale = 0.5;    // half-normal scales
  double sigma_zeta_scale = 0.5;
  double sigma_delta_scale = 0.5;  // used only with county_delta_effects
  CountModel variant = CountModel::poisson;
  bool county_delta_effects = false;

  void validate() const;
};

struct LatentParams {
  std::vector<double> phi_race;        // size R, logit scale
  std::vector<double> log_delta_race;  // size R
  std::vector<double> zeta_race;       // size R, logit scale
  std::vector<double> phi_county;      // size D, sums to zero
  std::vector<double> zeta_county;     // size D, sums to zero
  std::vector<double> log_delta_county;  // size D or empty
  double sigma_phi = 1.0;
  double sigma_zeta = 1.0;
  double sigma_delta = 1.0;
};

struct CellParams {
  double phi = 0.0;
  double delta = 0.0;
  double z = 0.0;
};

struct CellPrediction {
  double f = 0.0;  // expected tests per capita
  double g = 0.0;  // expected positivity among the tested
};

class Model {
 public:
  Model(ObservedCounts data, Hyperparams hyper);

  std::size_t dimension() const { return dimension_; }
  const ObservedCounts& data() const { return data_; }
  const Hyperparams& hyper() const { return hyper_; }
  std::vector<std::string> parameter_names() const;

  // Mutually inverse bijections between LatentParams and the unconstrained
  // vector the sampler works on. The log-Jacobian of the constraining
  // transform is folded into log_posterior.
  std::vector<double> unconstrain(const LatentParams& latent) const;
  LatentParams constrain(std::span<const double> theta) const;

  // Cell-level (phi, delta, z) for every cell, in data().cells order.
  std::vector<CellParams> cell_params(const LatentParams& latent) const;
  // (f, g) per cell; propagates riskdist domain errors.
  std::vector<CellPrediction> cell_rates(const LatentParams& latent) const;

  // Log posterior density (likelihood + priors + transform Jacobians).
  // Returns -inf when a cell with observed tests has f underflow to zero
  // (the sampler then rejects). Throws on non-finite theta.
  double log_posterior(std::span<const double> theta) const;

  // Analytic gradient of log_posterior. Where the posterior is not finite
  // the returned entries may be non-finite; the sampler flags that as a
  // divergence.
  std::vector<double> grad_log_posterior(std::span<const double> theta) const;

  // Likelihood contribution of one cell at pinned rates (exposed so tests
  // can check the count pmfs in isolation).
  double cell_log_likelihood(double f, double g, const Cell& cell) const;

  // Posterior-mean f and g per cell, averaged over all retained draws.
  std::vector<CellPrediction> predict(const PosteriorDraws& draws) const;

  TargetDensity target() const;

 private:
  struct Offsets {
    std::size_t phi_race, log_delta_race, zeta_race;
    std::size_t phi_county, zeta_county, log_delta_county;
    std::size_t log_sigma_phi, log_sigma_zeta, log_sigma_delta;
  };

  ObservedCounts data_;
  Hyperparams hyper_;
  std::size_t races_ = 0;
  std::size_t counties_ = 0;
  std::size_t dimension_ = 0;
  Offsets off_{};
  double phi_prior_loc_ = 0.0;   // logit(hyper.phi_loc)
  double zeta_prior_loc_ = 0.0;  // logit(hyper.zeta_loc)
};

}  // namespace threshtest
