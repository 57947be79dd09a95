#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace tgom {

// Profiles, items and waves are 0-based in code; reports print them 1-based.

inline constexpr double kDefaultAgeOffset = 80.0;
inline constexpr double kSimplexTolerance = 1e-12;
inline constexpr double kProbabilityClamp = 1e-12;

// Binary panel: y(i, j, t) is defined only where observed(i, t).
struct PanelDataset {
  std::size_t n_individuals = 0;
  std::size_t n_items = 0;
  std::size_t n_waves = 0;

  std::vector<std::uint8_t> outcomes;       // [(i * T + t) * J + j]
  std::vector<double> ages;                 // [i * T + t], centered; NaN when unobserved
  std::vector<std::int32_t> interview_day;  // [i * T + t], days since 1970-01-01
  std::vector<std::uint8_t> observed;       // [i * T + t]
  std::vector<std::int32_t> dob;            // days since 1970-01-01
  std::vector<std::string> individual_ids;
  std::vector<std::string> item_labels;
  std::vector<std::string> wave_labels;
  double age_offset = kDefaultAgeOffset;

  bool is_observed(std::size_t i, std::size_t t) const { return observed[i * n_waves + t] != 0; }
  double age(std::size_t i, std::size_t t) const { return ages[i * n_waves + t]; }
  int y(std::size_t i, std::size_t j, std::size_t t) const {
    return outcomes[(i * n_waves + t) * n_items + j];
  }
  std::size_t observed_waves(std::size_t i) const;
  std::size_t observed_cells(std::size_t i) const { return observed_waves(i) * n_items; }
  std::size_t total_observed_cells() const;

  // Throws ValidationError listing every broken invariant.
  void validate() const;
};

// Allocates an empty panel with every wave unobserved.
PanelDataset make_empty_panel(std::size_t n_individuals, std::size_t n_items, std::size_t n_waves);

// Keeps the listed individuals, in the given order.
PanelDataset subset_individuals(const PanelDataset& data, std::span<const std::size_t> keep);

// Stable FNV-1a fingerprint over the panel's canonical content.
std::string dataset_fingerprint(const PanelDataset& data);

// beta0(k, j), beta1(k, j): intercept and per-year slope of the logit trajectory.
struct TrajectoryParams {
  Eigen::MatrixXd beta0;
  Eigen::MatrixXd beta1;

  TrajectoryParams() = default;
  TrajectoryParams(std::size_t n_profiles, std::size_t n_items)
      : beta0(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_profiles),
                                    static_cast<Eigen::Index>(n_items))),
        beta1(beta0) {}

  std::size_t n_profiles() const { return static_cast<std::size_t>(beta0.rows()); }
  std::size_t n_items() const { return static_cast<std::size_t>(beta0.cols()); }
  double linear_predictor(std::size_t k, std::size_t j, double age) const {
    return beta0(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) +
           beta1(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) * age;
  }
  void validate() const;
};

struct MembershipVector {
  std::vector<double> g;

  MembershipVector() = default;
  explicit MembershipVector(std::vector<double> weights);  // validates
  std::size_t size() const { return g.size(); }
  double operator[](std::size_t k) const { return g[k]; }
};

// z(i, j, t) in 0..K-1 at observed cells; -1 elsewhere. Same layout as outcomes.
struct LatentAssignments {
  std::size_t n_individuals = 0;
  std::size_t n_items = 0;
  std::size_t n_waves = 0;
  std::vector<std::int16_t> z;

  static LatentAssignments for_dataset(const PanelDataset& data);
  int operator()(std::size_t i, std::size_t j, std::size_t t) const {
    return z[(i * n_waves + t) * n_items + j];
  }
  std::int16_t& at(std::size_t i, std::size_t j, std::size_t t) {
    return z[(i * n_waves + t) * n_items + j];
  }
};

// Dirichlet membership distribution. Stored as the component vector
// alpha_k = alpha0 * xi_k, which is what the sampler moves.
class DirichletParams {
 public:
  DirichletParams() = default;
  explicit DirichletParams(std::vector<double> alpha);  // validates
  static DirichletParams from_concentration(double alpha0, std::span<const double> xi);

  const std::vector<double>& alpha() const { return alpha_; }
  std::size_t size() const { return alpha_.size(); }
  double alpha0() const;
  std::vector<double> xi() const;

  friend bool operator==(const DirichletParams&, const DirichletParams&) = default;

 private:
  std::vector<double> alpha_;
};

// C - 1 strictly increasing DOB cut points (days). Interval c is
// [boundaries[c-1], boundaries[c]) with open ends at both extremes.
struct CohortPartition {
  std::vector<std::int32_t> boundaries;

  std::size_t n_cohorts() const { return boundaries.size() + 1; }
  std::size_t cohort_of(std::int32_t dob) const;
  void validate() const;
  friend bool operator==(const CohortPartition&, const CohortPartition&) = default;
};

struct CohortDirichletParams {
  std::vector<DirichletParams> per_cohort;
  friend bool operator==(const CohortDirichletParams&, const CohortDirichletParams&) = default;
};

struct Priors {
  double a_alpha = 1.0;  // Gamma shape for alpha0
  double b_alpha = 5.0;  // Gamma inverse scale for alpha0
  double mu0 = 0.0;
  double sigma0_sq = 100.0;
  double mu1 = 0.0;
  double sigma1_sq = 100.0;
  double cohort_tau = 1.0;  // Gamma shape for each cohort's alpha0
  double cohort_eta = 5.0;  // Gamma inverse scale for each cohort's alpha0

  std::vector<std::string> problems() const;
  void validate() const;
};

// Logistic function; clamped to [eps, 1 - eps] with eps = machine epsilon.
double logistic(double x);
double logit(double p);

// log(1 + exp(x)) without overflow.
double softplus(double x);

// log Bernoulli(y | logistic(eta)), exact (no clamping).
double log_bernoulli_logit(int y, double eta);

double extreme_trajectory_prob(const TrajectoryParams& params, std::size_t k, std::size_t j,
                               double age);

double individual_trajectory_prob(const MembershipVector& g, const TrajectoryParams& params,
                                  std::size_t j, double age);

// Mixture log-likelihood of individual i over observed cells, with lambda
// clamped to [1e-12, 1 - 1e-12].
double individual_log_likelihood(std::size_t i, const MembershipVector& g,
                                 const TrajectoryParams& params, const PanelDataset& data);

// Complete-data log-likelihood for individual i given its cell labels.
double augmented_log_likelihood(std::size_t i, const MembershipVector& g,
                                const LatentAssignments& z, const TrajectoryParams& params,
                                const PanelDataset& data);

// Exhaustive sum over all K^cells label configurations. Test oracle; throws
// std::length_error above one million configurations.
double brute_force_marginal(std::size_t i, const MembershipVector& g,
                            const TrajectoryParams& params, const PanelDataset& data);

const DirichletParams& alpha_of_dob(const CohortDirichletParams& cohort_params,
                                    const CohortPartition& partition, std::int32_t dob);

double log_gamma_density(double x, double shape, double rate);
double log_normal_density(double x, double mean, double variance);
double log_dirichlet_density(std::span<const double> x, std::span<const double> alpha);

// Gamma(alpha0) + Dirichlet(xi | 1) + normal priors on every beta.
double log_prior(const TrajectoryParams& params, const DirichletParams& dirichlet,
                 const Priors& priors);
double log_prior(const TrajectoryParams& params, const CohortDirichletParams& dirichlet,
                 const Priors& priors);

// Sum of the values in ascending order. Used where a sum over profiles must
// not depend on how the profiles are labelled.
double ordered_sum(std::span<const double> values);

}  // namespace tgom
