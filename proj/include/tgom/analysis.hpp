#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tgom/sampler.hpp"

namespace tgom {

// Age (in years, offset re-added) at which logistic(beta0 + beta1 * (age - offset))
// reaches q. Empty when beta1 <= 0: a non-increasing curve has no onset age.
// Throws std::domain_error unless 0 < q < 1.
std::optional<double> age_quantile(double beta0, double beta1, double q,
                                   double offset = kDefaultAgeOffset);

// Nearest-rank quantile of unsorted values: the ceil(p * n)-th smallest.
double nearest_rank_quantile(std::vector<double> values, double p);

struct Interval {
  double mean = 0.0;
  double sd = 0.0;
  double lower = 0.0;  // 2.5% nearest-rank
  double upper = 0.0;  // 97.5% nearest-rank
};
Interval summarize_draws(std::span<const double> values);

// xi_k averaged over draws (and over cohorts, unweighted, for cohort chains).
std::vector<double> posterior_mean_xi(const PosteriorChain& chain);

// Applies one label permutation (new label k takes old label perm[k]) to every draw.
PosteriorChain permute_profiles(const PosteriorChain& chain, std::span<const std::size_t> perm);

struct Relabeling {
  PosteriorChain chain;
  std::vector<std::size_t> permutation;  // new label -> old label
};

// Orders profiles by decreasing posterior mean xi; ties keep the original order.
Relabeling relabel_profiles(const PosteriorChain& chain);

struct SwitchFlag {
  std::size_t window = 0;
  std::size_t profile_a = 0;  // ranked above profile_b over the whole chain
  std::size_t profile_b = 0;
  double inversion = 0.0;     // xi_b - xi_a within the window
};

struct LabelSwitchingReport {
  std::size_t windows = 0;
  double margin = 0.0;
  std::vector<std::vector<double>> window_xi;  // [window][k]
  std::vector<SwitchFlag> flags;
};

LabelSwitchingReport detect_label_switching(const PosteriorChain& chain, std::size_t windows = 10,
                                            double margin = 0.02);

inline constexpr std::array<double, 3> kOnsetLevels = {0.1, 0.5, 0.9};

struct OnsetAge {
  std::optional<double> point;  // at the posterior-mean coefficients
  std::optional<double> lower;  // per-draw 2.5% / 97.5%, only when every draw is increasing
  std::optional<double> upper;
  double defined_fraction = 0.0;
};

struct ProfileSummary {
  std::size_t n_profiles = 0;
  std::size_t n_items = 0;
  std::vector<std::string> item_labels;
  std::vector<Interval> beta0;  // j * K + k
  std::vector<Interval> beta1;
  std::vector<std::array<OnsetAge, 3>> onset;  // j * K + k, levels kOnsetLevels
  std::vector<Interval> xi;                    // per profile (cohort-averaged for cohort chains)
  std::vector<Interval> alpha0;                // per cohort
};

ProfileSummary summarize_profiles(const PosteriorChain& chain);

void write_profile_table(const ProfileSummary& s, std::ostream& out);
// Onset ages per profile, items ordered by increasing Age_0.5 within each profile.
void write_onset_table(const ProfileSummary& s, std::ostream& out);
void write_xi_table(const ProfileSummary& s, std::ostream& out);

enum class CurveMode { kExtreme, kIndividual };

struct CurveRow {
  std::size_t item = 0;
  std::string curve;  // "profile_<k>" or the individual's id
  double age = 0.0;   // years, offset included
  double probability = 0.0;            // at posterior-mean coefficients
  double posterior_mean_probability = 0.0;  // extreme mode: mean over draws; individual mode: same as probability
};

// Individual mode uses the posterior-mean membership of the first n stored
// individuals with posterior-mean coefficients. ids maps stored indices to labels.
std::vector<CurveRow> trajectory_curve_table(const PosteriorChain& chain, std::span<const double> age_grid,
                                             CurveMode mode, std::size_t n_individuals = 100,
                                             std::span<const std::string> ids = {});
void write_curve_table(const std::vector<CurveRow>& rows, const PosteriorChain& chain, std::ostream& out);

struct CohortXiRow {
  std::size_t cohort = 0;
  std::size_t profile = 0;
  double mean = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

// Throws std::invalid_argument for basic-model chains.
std::vector<CohortXiRow> cohort_xi_table(const PosteriorChain& chain);
void write_cohort_xi_table(const std::vector<CohortXiRow>& rows, std::ostream& out);

}  // namespace tgom
