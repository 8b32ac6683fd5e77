#include "threshtest/riskdist.hpp"

#include <cmath>
#include <stdexcept>

#include "threshtest/math.hpp"

namespace threshtest {

DiscriminantParams::DiscriminantParams(double phi_in, double delta_in)
    : phi(phi_in), delta(delta_in) {
  if (!(phi > 0.0 && phi < 1.0)) {
    throw std::invalid_argument("DiscriminantParams: phi must lie in (0, 1)");
  }
  if (!(delta >= 0.0) || !std::isfinite(delta)) {
    throw std::invalid_argument("DiscriminantParams: delta must be finite and >= 0");
  }
}

Threshold::Threshold(double z_in) : z(z_in) {
  if (!(z > 0.0 && z < 1.0)) {
    throw std::invalid_argument("Threshold: z must lie in (0, 1)");
  }
}

double signal_cutoff(const DiscriminantParams& params, Threshold z) {
  if (params.delta == 0.0) {
    throw std::domain_error("degenerate distribution has no signal cutoff");
  }
  return (logit(z.z) - logit(params.phi) + 0.5 * params.delta * params.delta) /
         params.delta;
}

double ccdf_above(const DiscriminantParams& params, Threshold z) {
  if (params.delta == 0.0) {
    return z.z < params.phi ? 1.0 : 0.0;
  }
  const double s = signal_cutoff(params, z);
  return params.phi * normal_cdf(params.delta - s) +
         (1.0 - params.phi) * normal_cdf(-s);
}

double mean_above(const DiscriminantParams& params, Threshold z) {
  if (params.delta == 0.0) {
    if (z.z < params.phi) return params.phi;
    throw std::domain_error("conditional mean undefined above threshold");
  }
  const double s = signal_cutoff(params, z);
  const double f = params.phi * normal_cdf(params.delta - s) +
                   (1.0 - params.phi) * normal_cdf(-s);
  if (f <= 0.0) {
    throw std::domain_error("conditional mean undefined above threshold");
  }
  return params.phi * normal_cdf(params.delta - s) / f;
}

double density(const DiscriminantParams& params, double p) {
  if (params.delta == 0.0) {
    throw std::domain_error("density undefined for degenerate distribution");
  }
  if (!(p > 0.0 && p < 1.0)) {
    throw std::invalid_argument("density: p must lie in (0, 1)");
  }
  const double s = signal_cutoff(params, Threshold(p));
  const double mix = params.phi * normal_pdf(s - params.delta) +
                     (1.0 - params.phi) * normal_pdf(s);
  // |dp/ds| = delta * p * (1 - p) for the logistic-linear risk map.
  return mix / (params.delta * p * (1.0 - p));
}

std::pair<double, double> quadrature_oracle(const DiscriminantParams& params,
                                            Threshold z) {
  if (params.delta == 0.0) {
    throw std::domain_error("quadrature oracle requires delta > 0");
  }
  const double phi = params.phi;
  const double delta = params.delta;
  const double s_z = signal_cutoff(params, z);
  const double lo = std::max(s_z, -12.0);
  const double hi = std::max(delta, s_z) + 12.0;

  const auto mixture = [&](double s) {
    return phi * normal_pdf(s - delta) + (1.0 - phi) * normal_pdf(s);
  };
  const auto risk = [&](double s) {
    return logistic(logit(phi) + delta * s - 0.5 * delta * delta);
  };

  // Composite Simpson on a fixed fine grid; the integrands are smooth
  // Gaussian mixtures so h = 0.005 puts the error far below 1e-10.
  const int panels = std::max(64, static_cast<int>(std::ceil((hi - lo) / 0.005)));
  const double h = (hi - lo) / panels;
  double mass = 0.0;
  double weighted = 0.0;
  for (int i = 0; i < panels; ++i) {
    const double a = lo + i * h;
    const double m = a + 0.5 * h;
    const double b = a + h;
    mass += (h / 6.0) * (mixture(a) + 4.0 * mixture(m) + mixture(b));
    weighted += (h / 6.0) * (risk(a) * mixture(a) + 4.0 * risk(m) * mixture(m) +
                             risk(b) * mixture(b));
  }
  return {mass, mass > 0.0 ? weighted / mass : 0.0};
}

}  // namespace threshtest
