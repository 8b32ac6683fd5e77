#include "threshtest/model.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "threshtest/math.hpp"
#include "threshtest/riskdist.hpp"

namespace threshtest {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double half_normal_log_pdf(double x, double scale) {
  return 0.5 * std::log(2.0 / kPi) - std::log(scale) -
         0.5 * x * x / (scale * scale);
}

// Tail quantities of the risk distribution plus everything the gradient
// needs, computed inline (the hot loop avoids the validating riskdist
// wrappers). The complements f_comp = 1 - f and g_comp = 1 - g are built
// from the opposite normal tails so they keep relative precision when f or
// g sits next to 1; likelihoods with (n - t) log(1 - f) style terms would
// otherwise lose six digits of gradient there.
struct CellTail {
  double s;
  double upper_cdf, lower_cdf;    // Phi(delta - s), Phi(-s)
  double upper_comp, lower_comp;  // Phi(s - delta), Phi(s)
  double upper_pdf, lower_pdf;
  double f, f_comp, g, g_comp;
};

CellTail cell_tail(double phi, double delta, double z) {
  CellTail t;
  t.s = (logit(z) - logit(phi) + 0.5 * delta * delta) / delta;
  t.upper_cdf = normal_cdf(delta - t.s);
  t.lower_cdf = normal_cdf(-t.s);
  t.upper_comp = normal_cdf(t.s - delta);
  t.lower_comp = normal_cdf(t.s);
  t.upper_pdf = normal_pdf(delta - t.s);
  t.lower_pdf = normal_pdf(t.s);
  t.f = phi * t.upper_cdf + (1.0 - phi) * t.lower_cdf;
  t.f_comp = phi * t.upper_comp + (1.0 - phi) * t.lower_comp;
  if (t.f > 0.0) {
    t.g = phi * t.upper_cdf / t.f;
    t.g_comp = (1.0 - phi) * t.lower_cdf / t.f;
  } else {
    t.g = std::numeric_limits<double>::quiet_NaN();
    t.g_comp = std::numeric_limits<double>::quiet_NaN();
  }
  return t;
}

}  // namespace

void Hyperparams::validate() const {
  const bool ok = phi_loc > 0.0 && phi_loc < 1.0 && zeta_loc > 0.0 &&
                  zeta_loc < 1.0 && phi_scale > 0.0 && zeta_scale > 0.0 &&
                  log_delta_scale > 0.0 && sigma_phi_scale > 0.0 &&
                  sigma_zeta_scale > 0.0 && sigma_delta_scale > 0.0;
  if (!ok) throw std::invalid_argument("Hyperparams: scales must be positive, locations in (0, 1)");
}

Model::Model(ObservedCounts data, Hyperparams hyper)
    : data_(std::move(data)), hyper_(hyper) {
  data_.validate();
  hyper_.validate();
  races_ = data_.race_count();
  counties_ = data_.county_count();
  if (hyper_.variant == CountModel::binomial) {
    for (const Cell& cell : data_.cells) {
      if (cell.tests > cell.population) {
        throw std::invalid_argument(
            "binomial variant requires tests <= population (race " +
            data_.race_names[cell.race] + ", county " +
            data_.county_names[cell.county] +
            "); use the poisson variant for multiply-tested populations");
      }
    }
  }

  const std::size_t r = races_;
  const std::size_t free_d = counties_ - 1;
  off_.phi_race = 0;
  off_.log_delta_race = r;
  off_.zeta_race = 2 * r;
  off_.phi_county = 3 * r;
  off_.zeta_county = off_.phi_county + free_d;
  off_.log_delta_county = off_.zeta_county + free_d;
  std::size_t next = off_.log_delta_county;
  if (hyper_.county_delta_effects) next += free_d;
  off_.log_sigma_phi = next;
  off_.log_sigma_zeta = next + 1;
  off_.log_sigma_delta = next + 2;
  dimension_ = hyper_.county_delta_effects ? next + 3 : next + 2;

  phi_prior_loc_ = logit(hyper_.phi_loc);
  zeta_prior_loc_ = logit(hyper_.zeta_loc);
}

std::vector<std::string> Model::parameter_names() const {
  std::vector<std::string> names(dimension_);
  for (std::size_t r = 0; r < races_; ++r) {
    names[off_.phi_race + r] = "phi_race[" + data_.race_names[r] + "]";
    names[off_.log_delta_race + r] = "log_delta_race[" + data_.race_names[r] + "]";
    names[off_.zeta_race + r] = "zeta_race[" + data_.race_names[r] + "]";
  }
  for (std::size_t d = 0; d + 1 < counties_; ++d) {
    names[off_.phi_county + d] = "phi_county[" + data_.county_names[d] + "]";
    names[off_.zeta_county + d] = "zeta_county[" + data_.county_names[d] + "]";
    if (hyper_.county_delta_effects) {
      names[off_.log_delta_county + d] =
          "log_delta_county[" + data_.county_names[d] + "]";
    }
  }
  names[off_.log_sigma_phi] = "log_sigma_phi";
  names[off_.log_sigma_zeta] = "log_sigma_zeta";
  if (hyper_.county_delta_effects) names[off_.log_sigma_delta] = "log_sigma_delta";
  return names;
}

std::vector<double> Model::unconstrain(const LatentParams& latent) const {
  if (latent.phi_race.size() != races_ || latent.log_delta_race.size() != races_ ||
      latent.zeta_race.size() != races_ || latent.phi_county.size() != counties_ ||
      latent.zeta_county.size() != counties_) {
    throw std::invalid_argument("unconstrain: dimension mismatch");
  }
  if (hyper_.county_delta_effects &&
      latent.log_delta_county.size() != counties_) {
    throw std::invalid_argument("unconstrain: missing county delta effects");
  }
  std::vector<double> theta(dimension_, 0.0);
  for (std::size_t r = 0; r < races_; ++r) {
    theta[off_.phi_race + r] = latent.phi_race[r];
    theta[off_.log_delta_race + r] = latent.log_delta_race[r];
    theta[off_.zeta_race + r] = latent.zeta_race[r];
  }
  for (std::size_t d = 0; d + 1 < counties_; ++d) {
    theta[off_.phi_county + d] = latent.phi_county[d];
    theta[off_.zeta_county + d] = latent.zeta_county[d];
    if (hyper_.county_delta_effects) {
      theta[off_.log_delta_county + d] = latent.log_delta_county[d];
    }
  }
  theta[off_.log_sigma_phi] = std::log(latent.sigma_phi);
  theta[off_.log_sigma_zeta] = std::log(latent.sigma_zeta);
  if (hyper_.county_delta_effects) {
    theta[off_.log_sigma_delta] = std::log(latent.sigma_delta);
  }
  return theta;
}

LatentParams Model::constrain(std::span<const double> theta) const {
  if (theta.size() != dimension_) {
    throw std::invalid_argument("constrain: dimension mismatch");
  }
  LatentParams latent;
  latent.phi_race.assign(theta.begin() + off_.phi_race,
                         theta.begin() + off_.phi_race + races_);
  latent.log_delta_race.assign(theta.begin() + off_.log_delta_race,
                               theta.begin() + off_.log_delta_race + races_);
  latent.zeta_race.assign(theta.begin() + off_.zeta_race,
                          theta.begin() + off_.zeta_race + races_);

  const auto expand = [&](std::size_t offset) {
    std::vector<double> effects(counties_, 0.0);
    double sum = 0.0;
    for (std::size_t d = 0; d + 1 < counties_; ++d) {
      effects[d] = theta[offset + d];
      sum += effects[d];
    }
    effects[counties_ - 1] = -sum;
    return effects;
  };
  latent.phi_county = expand(off_.phi_county);
  latent.zeta_county = expand(off_.zeta_county);
  if (hyper_.county_delta_effects) {
    latent.log_delta_county = expand(off_.log_delta_county);
    latent.sigma_delta = std::exp(theta[off_.log_sigma_delta]);
  }
  latent.sigma_phi = std::exp(theta[off_.log_sigma_phi]);
  latent.sigma_zeta = std::exp(theta[off_.log_sigma_zeta]);
  return latent;
}

std::vector<CellParams> Model::cell_params(const LatentParams& latent) const {
  std::vector<CellParams> out;
  out.reserve(data_.cells.size());
  for (const Cell& cell : data_.cells) {
    CellParams p;
    p.phi = logistic(latent.phi_race[cell.race] + latent.phi_county[cell.county]);
    double log_delta = latent.log_delta_race[cell.race];
    if (!latent.log_delta_county.empty()) {
      log_delta += latent.log_delta_county[cell.county];
    }
    p.delta = std::exp(log_delta);
    p.z = logistic(latent.zeta_race[cell.race] + latent.zeta_county[cell.county]);
    out.push_back(p);
  }
  return out;
}

std::vector<CellPrediction> Model::cell_rates(const LatentParams& latent) const {
  std::vector<CellPrediction> out;
  out.reserve(data_.cells.size());
  for (const CellParams& p : cell_params(latent)) {
    const DiscriminantParams params(p.phi, p.delta);
    const Threshold z(p.z);
    CellPrediction pred;
    pred.f = ccdf_above(params, z);
    pred.g = mean_above(params, z);
    out.push_back(pred);
  }
  return out;
}

namespace {

// Binomial log pmf taking the success probability and its complement
// separately so near-boundary rates keep full precision.
double binomial_log_pmf_stable(std::int64_t k, std::int64_t n, double p,
                               double p_comp) {
  if (k < 0 || k > n) return -kInf;
  if (p <= 0.0) return k == 0 ? 0.0 : -kInf;
  if (p_comp <= 0.0) return k == n ? 0.0 : -kInf;
  double ll = log_choose(n, k);
  if (k > 0) ll += static_cast<double>(k) * std::log(p);
  if (k < n) ll += static_cast<double>(n - k) * std::log(p_comp);
  return ll;
}

double cell_log_likelihood_impl(const CellTail& t, const Cell& cell,
                                CountModel variant) {
  double ll = 0.0;
  if (variant == CountModel::poisson) {
    if (t.f <= 0.0) {
      if (cell.tests > 0) return -kInf;
    } else {
      ll += poisson_log_pmf(cell.tests,
                            static_cast<double>(cell.population) * t.f);
    }
  } else {
    ll += binomial_log_pmf_stable(cell.tests, cell.population, t.f, t.f_comp);
  }
  if (cell.tests > 0) {
    ll += binomial_log_pmf_stable(cell.cases, cell.tests, t.g, t.g_comp);
  }
  return ll;
}

}  // namespace

double Model::cell_log_likelihood(double f, double g, const Cell& cell) const {
  double ll = 0.0;
  if (hyper_.variant == CountModel::poisson) {
    if (f <= 0.0) {
      if (cell.tests > 0) return -kInf;
    } else {
      ll += poisson_log_pmf(cell.tests, static_cast<double>(cell.population) * f);
    }
  } else {
    ll += binomial_log_pmf(cell.tests, cell.population, std::min(f, 1.0));
  }
  if (cell.tests > 0) {
    ll += binomial_log_pmf(cell.cases, cell.tests, g);
  }
  return ll;
}

double Model::log_posterior(std::span<const double> theta) const {
  if (theta.size() != dimension_) {
    throw std::invalid_argument("log_posterior: dimension mismatch");
  }
  for (double v : theta) {
    if (!std::isfinite(v)) {
      throw std::invalid_argument("log_posterior: non-finite theta");
    }
  }
  const LatentParams latent = constrain(theta);

  double lp = 0.0;
  for (const Cell& cell : data_.cells) {
    const double phi =
        logistic(latent.phi_race[cell.race] + latent.phi_county[cell.county]);
    double log_delta = latent.log_delta_race[cell.race];
    if (!latent.log_delta_county.empty()) {
      log_delta += latent.log_delta_county[cell.county];
    }
    const double delta = std::exp(log_delta);
    const double z =
        logistic(latent.zeta_race[cell.race] + latent.zeta_county[cell.county]);
    const CellTail tail = cell_tail(phi, delta, z);
    const double ll = cell_log_likelihood_impl(tail, cell, hyper_.variant);
    if (!std::isfinite(ll)) return -kInf;
    lp += ll;
  }

  for (std::size_t r = 0; r < races_; ++r) {
    lp += log_normal_pdf(latent.phi_race[r], phi_prior_loc_, hyper_.phi_scale);
    lp += log_normal_pdf(latent.log_delta_race[r], hyper_.log_delta_loc,
                         hyper_.log_delta_scale);
    lp += log_normal_pdf(latent.zeta_race[r], zeta_prior_loc_, hyper_.zeta_scale);
  }
  for (std::size_t d = 0; d < counties_; ++d) {
    lp += log_normal_pdf(latent.phi_county[d], 0.0, latent.sigma_phi);
    lp += log_normal_pdf(latent.zeta_county[d], 0.0, latent.sigma_zeta);
    if (hyper_.county_delta_effects) {
      lp += log_normal_pdf(latent.log_delta_county[d], 0.0, latent.sigma_delta);
    }
  }
  lp += half_normal_log_pdf(latent.sigma_phi, hyper_.sigma_phi_scale);
  lp += half_normal_log_pdf(latent.sigma_zeta, hyper_.sigma_zeta_scale);
  // Jacobian of sigma = exp(log_sigma).
  lp += theta[off_.log_sigma_phi] + theta[off_.log_sigma_zeta];
  if (hyper_.county_delta_effects) {
    lp += half_normal_log_pdf(latent.sigma_delta, hyper_.sigma_delta_scale);
    lp += theta[off_.log_sigma_delta];
  }
  return lp;
}

std::vector<double> Model::grad_log_posterior(std::span<const double> theta) const {
  if (theta.size() != dimension_) {
    throw std::invalid_argument("grad_log_posterior: dimension mismatch");
  }
  for (double v : theta) {
    if (!std::isfinite(v)) {
      throw std::invalid_argument("grad_log_posterior: non-finite theta");
    }
  }
  const LatentParams latent = constrain(theta);
  std::vector<double> grad(dimension_, 0.0);
  std::vector<double> phi_county_acc(counties_, 0.0);
  std::vector<double> zeta_county_acc(counties_, 0.0);
  std::vector<double> delta_county_acc(counties_, 0.0);

  for (const Cell& cell : data_.cells) {
    const double phi =
        logistic(latent.phi_race[cell.race] + latent.phi_county[cell.county]);
    double log_delta = latent.log_delta_race[cell.race];
    if (!latent.log_delta_county.empty()) {
      log_delta += latent.log_delta_county[cell.county];
    }
    const double delta = std::exp(log_delta);
    const double z =
        logistic(latent.zeta_race[cell.race] + latent.zeta_county[cell.county]);
    const CellTail t = cell_tail(phi, delta, z);

    // Partials of the signal cutoff s and the tail pair (f, g).
    // upper_cdf - lower_cdf keeps relative precision only while both lie
    // below 1/2; past that the same difference is formed from the
    // complementary tails.
    const double s_phi = -1.0 / (delta * phi * (1.0 - phi));
    const double s_z = 1.0 / (delta * z * (1.0 - z));
    const double s_delta = 1.0 - t.s / delta;
    const double mix_pdf = phi * t.upper_pdf + (1.0 - phi) * t.lower_pdf;
    const double cdf_gap = t.upper_cdf <= 0.5 ? t.upper_cdf - t.lower_cdf
                                              : t.lower_comp - t.upper_comp;

    const double f_phi = cdf_gap - mix_pdf * s_phi;
    const double f_delta =
        phi * t.upper_pdf * (1.0 - s_delta) - (1.0 - phi) * t.lower_pdf * s_delta;
    const double f_z = -mix_pdf * s_z;

    const double h_phi = t.upper_cdf - phi * t.upper_pdf * s_phi;
    const double h_delta = phi * t.upper_pdf * (1.0 - s_delta);
    const double h_z = -phi * t.upper_pdf * s_z;

    const double g_phi = (h_phi - t.g * f_phi) / t.f;
    const double g_delta = (h_delta - t.g * f_delta) / t.f;
    const double g_z = (h_z - t.g * f_z) / t.f;

    const double n = static_cast<double>(cell.population);
    const double tests = static_cast<double>(cell.tests);
    const double cases = static_cast<double>(cell.cases);
    double dll_df;
    if (hyper_.variant == CountModel::poisson) {
      dll_df = tests / t.f - n;
    } else {
      dll_df = tests / t.f - (n - tests) / t.f_comp;
    }
    double dll_dg = 0.0;
    if (cell.tests > 0) {
      dll_dg = (cases > 0 ? cases / t.g : 0.0) -
               (tests > cases ? (tests - cases) / t.g_comp : 0.0);
    }

    const double d_eta_phi = (dll_df * f_phi + dll_dg * g_phi) * phi * (1.0 - phi);
    const double d_eta_delta = (dll_df * f_delta + dll_dg * g_delta) * delta;
    const double d_eta_z = (dll_df * f_z + dll_dg * g_z) * z * (1.0 - z);

    grad[off_.phi_race + cell.race] += d_eta_phi;
    grad[off_.log_delta_race + cell.race] += d_eta_delta;
    grad[off_.zeta_race + cell.race] += d_eta_z;
    phi_county_acc[cell.county] += d_eta_phi;
    zeta_county_acc[cell.county] += d_eta_z;
    if (hyper_.county_delta_effects) delta_county_acc[cell.county] += d_eta_delta;
  }

  // Race-level priors.
  for (std::size_t r = 0; r < races_; ++r) {
    grad[off_.phi_race + r] -= (latent.phi_race[r] - phi_prior_loc_) /
                               (hyper_.phi_scale * hyper_.phi_scale);
    grad[off_.log_delta_race + r] -=
        (latent.log_delta_race[r] - hyper_.log_delta_loc) /
        (hyper_.log_delta_scale * hyper_.log_delta_scale);
    grad[off_.zeta_race + r] -= (latent.zeta_race[r] - zeta_prior_loc_) /
                                (hyper_.zeta_scale * hyper_.zeta_scale);
  }

  // County priors and the hierarchical scales.
  const double sp = latent.sigma_phi;
  const double sz = latent.sigma_zeta;
  const double sd = latent.sigma_delta;
  double d_sigma_phi = 0.0, d_sigma_zeta = 0.0, d_sigma_delta = 0.0;
  for (std::size_t d = 0; d < counties_; ++d) {
    const double ep = latent.phi_county[d];
    const double ez = latent.zeta_county[d];
    phi_county_acc[d] -= ep / (sp * sp);
    zeta_county_acc[d] -= ez / (sz * sz);
    d_sigma_phi += ep * ep / (sp * sp * sp) - 1.0 / sp;
    d_sigma_zeta += ez * ez / (sz * sz * sz) - 1.0 / sz;
    if (hyper_.county_delta_effects) {
      const double ed = latent.log_delta_county[d];
      delta_county_acc[d] -= ed / (sd * sd);
      d_sigma_delta += ed * ed / (sd * sd * sd) - 1.0 / sd;
    }
  }
  d_sigma_phi -= sp / (hyper_.sigma_phi_scale * hyper_.sigma_phi_scale);
  d_sigma_zeta -= sz / (hyper_.sigma_zeta_scale * hyper_.sigma_zeta_scale);

  // Sum-to-zero: the last effect is minus the sum of the free ones.
  for (std::size_t d = 0; d + 1 < counties_; ++d) {
    grad[off_.phi_county + d] = phi_county_acc[d] - phi_county_acc[counties_ - 1];
    grad[off_.zeta_county + d] = zeta_county_acc[d] - zeta_county_acc[counties_ - 1];
    if (hyper_.county_delta_effects) {
      grad[off_.log_delta_county + d] =
          delta_county_acc[d] - delta_county_acc[counties_ - 1];
    }
  }

  // Chain through sigma = exp(log_sigma); +1 from the Jacobian term.
  grad[off_.log_sigma_phi] = d_sigma_phi * sp + 1.0;
  grad[off_.log_sigma_zeta] = d_sigma_zeta * sz + 1.0;
  if (hyper_.county_delta_effects) {
    d_sigma_delta -= sd / (hyper_.sigma_delta_scale * hyper_.sigma_delta_scale);
    grad[off_.log_sigma_delta] = d_sigma_delta * sd + 1.0;
  }
  return grad;
}

std::vector<CellPrediction> Model::predict(const PosteriorDraws& draws) const {
  if (draws.total_draws() == 0) {
    throw std::invalid_argument("predict: empty draws");
  }
  if (draws.dimension != dimension_) {
    throw std::invalid_argument("predict: draw dimension mismatch");
  }
  std::vector<CellPrediction> acc(data_.cells.size());
  for (std::size_t i = 0; i < draws.total_draws(); ++i) {
    const LatentParams latent = constrain(draws.flat_draw(i));
    const std::vector<CellParams> params = cell_params(latent);
    for (std::size_t c = 0; c < params.size(); ++c) {
      const CellTail t = cell_tail(params[c].phi, params[c].delta, params[c].z);
      acc[c].f += t.f;
      acc[c].g += t.g;
    }
  }
  const double norm = static_cast<double>(draws.total_draws());
  for (auto& p : acc) {
    p.f /= norm;
    p.g /= norm;
  }
  return acc;
}

TargetDensity Model::target() const {
  TargetDensity t;
  t.dimension = dimension_;
  t.log_density = [this](std::span<const double> theta) {
    return log_posterior(theta);
  };
  t.gradient = [this](std::span<const double> theta) {
    return grad_log_posterior(theta);
  };
  return t;
}

}  // namespace threshtest
