#include "tgom/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "tgom/errors.hpp"
#include "tgom/util.hpp"

namespace tgom {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

void check_item(const TrajectoryParams& params, std::size_t k, std::size_t j) {
  if (k >= params.n_profiles() || j >= params.n_items()) {
    throw std::out_of_range("profile or item index out of range");
  }
}

double log_sum_exp(std::span<const double> v) {
  double hi = -std::numeric_limits<double>::infinity();
  for (double x : v) hi = std::max(hi, x);
  if (!std::isfinite(hi)) return hi;
  std::vector<double> scaled(v.size());
  for (std::size_t k = 0; k < v.size(); ++k) scaled[k] = std::exp(v[k] - hi);
  return hi + std::log(ordered_sum(scaled));
}

double clamped_log_bernoulli(int y, double lambda) {
  const double p = std::clamp(lambda, kProbabilityClamp, 1.0 - kProbabilityClamp);
  return y ? std::log(p) : std::log1p(-p);
}

}  // namespace

// ---------------------------------------------------------------- PanelDataset

std::size_t PanelDataset::observed_waves(std::size_t i) const {
  std::size_t n = 0;
  for (std::size_t t = 0; t < n_waves; ++t) n += is_observed(i, t) ? 1 : 0;
  return n;
}

std::size_t PanelDataset::total_observed_cells() const {
  std::size_t n = 0;
  for (std::uint8_t o : observed) n += o ? n_items : 0;
  return n;
}

void PanelDataset::validate() const {
  std::vector<ValidationIssue> issues;
  const std::size_t cells = n_individuals * n_waves;
  if (observed.size() != cells || ages.size() != cells || interview_day.size() != cells ||
      outcomes.size() != cells * n_items || dob.size() != n_individuals ||
      individual_ids.size() != n_individuals || item_labels.size() != n_items ||
      wave_labels.size() != n_waves) {
    issues.push_back({0, "", "shape", "panel arrays do not match the declared dimensions"});
    throw ValidationError(std::move(issues));
  }
  for (std::size_t i = 0; i < n_individuals; ++i) {
    double last = -std::numeric_limits<double>::infinity();
    std::size_t seen = 0;
    for (std::size_t t = 0; t < n_waves; ++t) {
      if (!is_observed(i, t)) continue;
      ++seen;
      const double a = age(i, t);
      if (!std::isfinite(a)) {
        issues.push_back({0, "age", "age", "individual " + individual_ids[i] + " has a non-finite age"});
      } else if (a <= last) {
        issues.push_back({0, "age", "age_order",
                          "individual " + individual_ids[i] + " ages do not increase across waves"});
      }
      last = a;
      for (std::size_t j = 0; j < n_items; ++j) {
        if (y(i, j, t) > 1) {
          issues.push_back({0, item_labels[j], "non_binary",
                            "individual " + individual_ids[i] + " has a non-binary response"});
        }
      }
    }
    if (seen == 0) {
      issues.push_back({0, "", "no_waves", "individual " + individual_ids[i] + " has no observed wave"});
    }
  }
  if (!issues.empty()) throw ValidationError(std::move(issues));
}

PanelDataset make_empty_panel(std::size_t n_individuals, std::size_t n_items, std::size_t n_waves) {
  PanelDataset d;
  d.n_individuals = n_individuals;
  d.n_items = n_items;
  d.n_waves = n_waves;
  d.outcomes.assign(n_individuals * n_waves * n_items, 0);
  d.ages.assign(n_individuals * n_waves, std::numeric_limits<double>::quiet_NaN());
  d.interview_day.assign(n_individuals * n_waves, 0);
  d.observed.assign(n_individuals * n_waves, 0);
  d.dob.assign(n_individuals, 0);
  for (std::size_t i = 0; i < n_individuals; ++i) d.individual_ids.push_back(std::to_string(i + 1));
  for (std::size_t j = 0; j < n_items; ++j) d.item_labels.push_back("item" + std::to_string(j + 1));
  for (std::size_t t = 0; t < n_waves; ++t) d.wave_labels.push_back("wave" + std::to_string(t + 1));
  return d;
}

PanelDataset subset_individuals(const PanelDataset& data, std::span<const std::size_t> keep) {
  PanelDataset out = make_empty_panel(keep.size(), data.n_items, data.n_waves);
  out.item_labels = data.item_labels;
  out.wave_labels = data.wave_labels;
  out.age_offset = data.age_offset;
  const std::size_t T = data.n_waves;
  const std::size_t J = data.n_items;
  for (std::size_t r = 0; r < keep.size(); ++r) {
    const std::size_t i = keep[r];
    if (i >= data.n_individuals) throw std::out_of_range("individual index out of range");
    out.individual_ids[r] = data.individual_ids[i];
    out.dob[r] = data.dob[i];
    std::copy_n(data.observed.begin() + i * T, T, out.observed.begin() + r * T);
    std::copy_n(data.ages.begin() + i * T, T, out.ages.begin() + r * T);
    std::copy_n(data.interview_day.begin() + i * T, T, out.interview_day.begin() + r * T);
    std::copy_n(data.outcomes.begin() + i * T * J, T * J, out.outcomes.begin() + r * T * J);
  }
  return out;
}

std::string dataset_fingerprint(const PanelDataset& data) {
  Fnv1a h;
  h.update_value(static_cast<std::uint64_t>(data.n_individuals));
  h.update_value(static_cast<std::uint64_t>(data.n_items));
  h.update_value(static_cast<std::uint64_t>(data.n_waves));
  h.update_value(data.age_offset);
  for (std::size_t i = 0; i < data.n_individuals; ++i) {
    h.update(data.individual_ids[i]);
    h.update_value(data.dob[i]);
    for (std::size_t t = 0; t < data.n_waves; ++t) {
      const bool obs = data.is_observed(i, t);
      h.update_value(static_cast<std::uint8_t>(obs));
      if (!obs) continue;
      h.update_value(data.age(i, t));
      for (std::size_t j = 0; j < data.n_items; ++j) {
        h.update_value(static_cast<std::uint8_t>(data.y(i, j, t)));
      }
    }
  }
  return h.hex();
}

// ------------------------------------------------------------ parameter types

void TrajectoryParams::validate() const {
  if (beta0.rows() != beta1.rows() || beta0.cols() != beta1.cols()) {
    throw std::invalid_argument("beta0 and beta1 must have the same shape");
  }
  if (!beta0.allFinite() || !beta1.allFinite()) {
    throw std::invalid_argument("trajectory coefficients must be finite");
  }
}

MembershipVector::MembershipVector(std::vector<double> weights) : g(std::move(weights)) {
  if (g.empty()) throw std::invalid_argument("membership vector is empty");
  for (double w : g) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw std::invalid_argument("membership weights must be finite and non-negative");
    }
  }
  if (std::abs(ordered_sum(g) - 1.0) > kSimplexTolerance) {
    throw std::invalid_argument("membership weights must sum to one");
  }
}

LatentAssignments LatentAssignments::for_dataset(const PanelDataset& data) {
  LatentAssignments z;
  z.n_individuals = data.n_individuals;
  z.n_items = data.n_items;
  z.n_waves = data.n_waves;
  z.z.assign(data.outcomes.size(), -1);
  for (std::size_t i = 0; i < data.n_individuals; ++i) {
    for (std::size_t t = 0; t < data.n_waves; ++t) {
      if (!data.is_observed(i, t)) continue;
      for (std::size_t j = 0; j < data.n_items; ++j) z.at(i, j, t) = 0;
    }
  }
  return z;
}

DirichletParams::DirichletParams(std::vector<double> alpha) : alpha_(std::move(alpha)) {
  if (alpha_.empty()) throw std::invalid_argument("Dirichlet parameter vector is empty");
  for (double a : alpha_) {
    if (!(a > 0.0) || !std::isfinite(a)) {
      throw std::invalid_argument("Dirichlet components must be positive and finite");
    }
  }
}

DirichletParams DirichletParams::from_concentration(double alpha0, std::span<const double> xi) {
  if (!(alpha0 > 0.0) || !std::isfinite(alpha0)) {
    throw std::invalid_argument("alpha0 must be positive and finite");
  }
  if (std::abs(ordered_sum(xi) - 1.0) > kSimplexTolerance) {
    throw std::invalid_argument("xi must sum to one");
  }
  std::vector<double> alpha(xi.size());
  for (std::size_t k = 0; k < xi.size(); ++k) alpha[k] = alpha0 * xi[k];
  return DirichletParams(std::move(alpha));
}

double DirichletParams::alpha0() const { return ordered_sum(alpha_); }

std::vector<double> DirichletParams::xi() const {
  const double total = alpha0();
  std::vector<double> out(alpha_.size());
  for (std::size_t k = 0; k < alpha_.size(); ++k) out[k] = alpha_[k] / total;
  return out;
}

std::size_t CohortPartition::cohort_of(std::int32_t dob) const {
  return static_cast<std::size_t>(std::upper_bound(boundaries.begin(), boundaries.end(), dob) -
                                  boundaries.begin());
}

void CohortPartition::validate() const {
  for (std::size_t c = 1; c < boundaries.size(); ++c) {
    if (boundaries[c] <= boundaries[c - 1]) {
      throw std::invalid_argument("cohort cut points must be strictly increasing");
    }
  }
}

std::vector<std::string> Priors::problems() const {
  std::vector<std::string> out;
  auto positive = [&](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) out.push_back(std::string("priors.") + name + " must be > 0");
  };
  positive(a_alpha, "a_alpha");
  positive(b_alpha, "b_alpha");
  positive(sigma0_sq, "sigma0_sq");
  positive(sigma1_sq, "sigma1_sq");
  positive(cohort_tau, "cohort_tau");
  positive(cohort_eta, "cohort_eta");
  if (!std::isfinite(mu0) || !std::isfinite(mu1)) out.push_back("priors.mu0/mu1 must be finite");
  return out;
}

void Priors::validate() const {
  auto p = problems();
  if (!p.empty()) throw ConfigError(std::move(p));
}

// ------------------------------------------------------------------ functions

double logistic(double x) {
  if (!std::isfinite(x)) throw std::domain_error("logistic: non-finite input");
  const double p = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
  return std::clamp(p, kEps, 1.0 - kEps);
}

double logit(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("logit: argument outside (0, 1)");
  return std::log(p) - std::log1p(-p);
}

double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double log_bernoulli_logit(int y, double eta) { return y ? -softplus(-eta) : -softplus(eta); }

double extreme_trajectory_prob(const TrajectoryParams& params, std::size_t k, std::size_t j,
                               double age) {
  check_item(params, k, j);
  return logistic(params.linear_predictor(k, j, age));
}

double individual_trajectory_prob(const MembershipVector& g, const TrajectoryParams& params,
                                  std::size_t j, double age) {
  if (g.size() != params.n_profiles()) throw std::invalid_argument("membership/profile mismatch");
  std::vector<double> terms(g.size());
  for (std::size_t k = 0; k < g.size(); ++k) terms[k] = g[k] * extreme_trajectory_prob(params, k, j, age);
  return ordered_sum(terms);
}

double individual_log_likelihood(std::size_t i, const MembershipVector& g,
                                 const TrajectoryParams& params, const PanelDataset& data) {
  const std::size_t K = params.n_profiles();
  if (g.size() != K || params.n_items() != data.n_items) {
    throw std::invalid_argument("dimension mismatch");
  }
  if (i >= data.n_individuals) throw std::out_of_range("individual index out of range");
  std::vector<double> terms(K);
  double total = 0.0;
  for (std::size_t t = 0; t < data.n_waves; ++t) {
    if (!data.is_observed(i, t)) continue;
    const double a = data.age(i, t);
    for (std::size_t j = 0; j < data.n_items; ++j) {
      const int y = data.y(i, j, t);
      for (std::size_t k = 0; k < K; ++k) {
        terms[k] = std::log(g[k]) + clamped_log_bernoulli(y, extreme_trajectory_prob(params, k, j, a));
      }
      total += log_sum_exp(terms);
    }
  }
  return total;
}

double augmented_log_likelihood(std::size_t i, const MembershipVector& g,
                                const LatentAssignments& z, const TrajectoryParams& params,
                                const PanelDataset& data) {
  const std::size_t K = params.n_profiles();
  if (g.size() != K) throw std::invalid_argument("dimension mismatch");
  double total = 0.0;
  for (std::size_t t = 0; t < data.n_waves; ++t) {
    if (!data.is_observed(i, t)) continue;
    const double a = data.age(i, t);
    for (std::size_t j = 0; j < data.n_items; ++j) {
      const int k = z(i, j, t);
      if (k < 0 || static_cast<std::size_t>(k) >= K) {
        throw std::out_of_range("latent assignment outside 1..K");
      }
      const auto kk = static_cast<std::size_t>(k);
      total += std::log(g[kk]) +
               clamped_log_bernoulli(data.y(i, j, t), extreme_trajectory_prob(params, kk, j, a));
    }
  }
  return total;
}

double brute_force_marginal(std::size_t i, const MembershipVector& g,
                            const TrajectoryParams& params, const PanelDataset& data) {
  const std::size_t K = params.n_profiles();
  if (g.size() != K) throw std::invalid_argument("dimension mismatch");
  std::vector<std::pair<std::size_t, std::size_t>> cells;  // (j, t)
  for (std::size_t t = 0; t < data.n_waves; ++t) {
    if (!data.is_observed(i, t)) continue;
    for (std::size_t j = 0; j < data.n_items; ++j) cells.emplace_back(j, t);
  }
  double configurations = std::pow(static_cast<double>(K), static_cast<double>(cells.size()));
  if (configurations > 1e6) throw std::length_error("brute_force_marginal: too many configurations");

  LatentAssignments z = LatentAssignments::for_dataset(data);
  std::vector<std::size_t> digits(cells.size(), 0);
  std::vector<double> logs;
  logs.reserve(static_cast<std::size_t>(configurations));
  while (true) {
    for (std::size_t c = 0; c < cells.size(); ++c) {
      z.at(i, cells[c].first, cells[c].second) = static_cast<std::int16_t>(digits[c]);
    }
    logs.push_back(augmented_log_likelihood(i, g, z, params, data));
    std::size_t c = 0;
    while (c < digits.size() && ++digits[c] == K) digits[c++] = 0;
    if (c == digits.size()) break;
  }
  return log_sum_exp(logs);
}

const DirichletParams& alpha_of_dob(const CohortDirichletParams& cohort_params,
                                    const CohortPartition& partition, std::int32_t dob) {
  const std::size_t c = partition.cohort_of(dob);
  if (c >= cohort_params.per_cohort.size()) {
    throw std::invalid_argument("partition has more cohorts than parameter sets");
  }
  return cohort_params.per_cohort[c];
}

double log_gamma_density(double x, double shape, double rate) {
  if (!(x > 0.0)) return -std::numeric_limits<double>::infinity();
  return shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * std::log(x) - rate * x;
}

double log_normal_density(double x, double mean, double variance) {
  const double d = x - mean;
  return -0.5 * std::log(2.0 * M_PI * variance) - d * d / (2.0 * variance);
}

double log_dirichlet_density(std::span<const double> x, std::span<const double> alpha) {
  double total = std::lgamma(ordered_sum(alpha));
  for (std::size_t k = 0; k < alpha.size(); ++k) {
    total += (alpha[k] - 1.0) * std::log(x[k]) - std::lgamma(alpha[k]);
  }
  return total;
}

namespace {

double log_prior_beta(const TrajectoryParams& params, const Priors& priors) {
  double total = 0.0;
  for (Eigen::Index k = 0; k < params.beta0.rows(); ++k) {
    for (Eigen::Index j = 0; j < params.beta0.cols(); ++j) {
      total += log_normal_density(params.beta0(k, j), priors.mu0, priors.sigma0_sq);
      total += log_normal_density(params.beta1(k, j), priors.mu1, priors.sigma1_sq);
    }
  }
  return total;
}

double log_prior_dirichlet(const DirichletParams& d, double shape, double rate) {
  // Dirichlet(xi | 1_K) is constant: log Gamma(K).
  return log_gamma_density(d.alpha0(), shape, rate) + std::lgamma(static_cast<double>(d.size()));
}

}  // namespace

double log_prior(const TrajectoryParams& params, const DirichletParams& dirichlet,
                 const Priors& priors) {
  return log_prior_dirichlet(dirichlet, priors.a_alpha, priors.b_alpha) +
         log_prior_beta(params, priors);
}

double log_prior(const TrajectoryParams& params, const CohortDirichletParams& dirichlet,
                 const Priors& priors) {
  double total = log_prior_beta(params, priors);
  for (const auto& d : dirichlet.per_cohort) {
    total += log_prior_dirichlet(d, priors.cohort_tau, priors.cohort_eta);
  }
  return total;
}

double ordered_sum(std::span<const double> values) {
  if (values.size() <= 1) return values.empty() ? 0.0 : values[0];
  if (values.size() == 2) {
    return values[0] <= values[1] ? values[0] + values[1] : values[1] + values[0];
  }
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  double total = 0.0;
  for (double v : sorted) total += v;
  return total;
}

}  // namespace tgom
