#pragma once

#include <utility>

// Closed-form mathematics of the two-parameter discriminant distribution,
// the risk-distribution family used throughout the model.
//
// Construction. A latent evidence signal s is drawn from a two-component
// unit-variance Gaussian mixture: with probability phi from N(delta, 1)
// ("has the disease") and with probability 1 - phi from N(0, 1). The risk
// p(s) is the posterior probability of disease given the signal, which
// satisfies
//
//     logit(p(s)) = logit(phi) + delta * s - delta^2 / 2,
//
// strictly increasing in s whenever delta > 0. The risk distribution is the
// law of p(s) on (0, 1): phi is its mean (the population prevalence) and
// delta controls how informative the signal is. delta = 0 degenerates to a
// point mass at phi.
//
// Because p(s) is monotone, tail quantities of the risk distribution reduce
// to Gaussian tail integrals above the signal cutoff s_z with p(s_z) = z:
//
//     f(z) = P(P > z) = phi * Phi(delta - s_z) + (1 - phi) * Phi(-s_z)
//     g(z) = E[P | P > z] = phi * Phi(delta - s_z) / f(z)
//
// (the second identity uses E[p(s) 1{s > s_z}] = phi * P(s > s_z | disease),
// i.e. the posterior-probability integral collapses onto the diseased
// component). quadrature_oracle() checks both closed forms by direct
// numerical integration over the signal domain.

namespace threshtest {

struct DiscriminantParams {
  double phi;    // prevalence, in (0, 1)
  double delta;  // signal separation, >= 0; 0 means point mass at phi

  DiscriminantParams(double phi_in, double delta_in);
};

struct Threshold {
  double z;  // in (0, 1)

  explicit Threshold(double z_in);
};

// Signal value s_z at which the risk equals z: p(s_z) = z. Requires
// delta > 0 (the degenerate distribution has no signal cutoff).
double signal_cutoff(const DiscriminantParams& params, Threshold z);

// f(z) = P(P > z), the fraction of the risk distribution above the
// threshold. Handles delta = 0 as the step function at phi.
double ccdf_above(const DiscriminantParams& params, Threshold z);

// g(z) = E[P | P > z]. Requires f(z) > 0.
double mean_above(const DiscriminantParams& params, Threshold z);

// Density of the risk distribution at p in (0, 1), by change of variables
// through the monotone map p(s). Requires delta > 0.
double density(const DiscriminantParams& params, double p);

// (f, g) by composite Simpson integration of the signal mixture above s_z,
// independent of the closed forms above. Absolute accuracy ~1e-12.
std::pair<double, double> quadrature_oracle(const DiscriminantParams& params,
                                            Threshold z);

}  // namespace threshtest
