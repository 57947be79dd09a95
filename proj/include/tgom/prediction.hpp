#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tgom/data_io.hpp"
#include "tgom/sampler.hpp"

namespace tgom {

// Posterior predictive probabilities of reproducing one held-out individual's
// observed outcomes: per cell, per item across waves, per wave across items,
// and jointly over everything.
struct PhiIndividual {
  std::vector<double> cell;  // [t * J + j], NaN where the wave is unobserved
  std::vector<double> item;  // [j]
  std::vector<double> wave;  // [t], NaN where unobserved
  double all = 0.0;
};

struct PhiSettings {
  std::size_t membership_draws = 20;     // M memberships per posterior draw
  std::size_t max_posterior_draws = 0;   // 0: every retained draw
  std::uint64_t seed = 1;
  unsigned threads = 0;
};

// Held-out memberships are integrated out: omega ~ Dirichlet(alpha of the
// draw, cohort-specific when applicable), M times per draw. Products are taken
// inside the omega average, so dependence through shared membership is kept.
std::vector<PhiIndividual> phi_quantities(const PanelDataset& heldout, const PosteriorChain& chain,
                                          const PhiSettings& settings);

struct PhiMeans {
  double cell = 0.0;  // mean phi_ijt over observed (i, j, t)
  double item = 0.0;  // mean phi_ij over (i, j)
  double wave = 0.0;  // mean phi_it over observed (i, t)
  double all = 0.0;   // mean phi_i over i
  std::size_t individuals = 0;
};

PhiMeans average_phi(const std::vector<PhiIndividual>& phi);

// Fold index (0..k-1) per individual; sizes differ by at most one.
std::vector<std::size_t> kfold_split(std::size_t n_individuals, std::size_t k, std::uint64_t seed);

struct LogisticFit {
  std::vector<double> coefficients;  // on 1, a, a^2, a^3 with a = centered age / 10
  bool converged = false;
  bool ridge = false;  // separation detected; refit with a 1e-6 ridge penalty
  int iterations = 0;
};

// Maximum-likelihood logistic regression on a cubic polynomial in centered age (IRLS).
LogisticFit fit_cubic_logistic(const std::vector<double>& ages, const std::vector<std::uint8_t>& y);
double predict_cubic_logistic(const LogisticFit& fit, double age);

struct BaselineResult {
  std::vector<PhiIndividual> phi;
  std::vector<LogisticFit> fits;  // per item
};

// Independence baseline: one logistic curve per item, no shared latent structure.
BaselineResult baseline_independent_logistic(const PanelDataset& train, const PanelDataset& heldout);

struct CvModel {
  std::string name;
  FitConfig fit;
};

struct CvSettings {
  std::vector<CvModel> models;
  std::size_t folds = 4;
  std::uint64_t seed = 1;
  PhiSettings phi;
  bool baseline = true;
  std::function<void(const std::string&)> log;
};

struct ReportRow {
  std::string model;
  PhiMeans means;
};

struct PredictionReport {
  std::vector<ReportRow> rows;
  std::size_t folds = 0;
  std::uint64_t seed = 0;
  std::string fold_fingerprint;
  std::size_t membership_draws = 0;
  std::size_t max_posterior_draws = 0;
  std::vector<std::string> notes;
};

PredictionReport cross_validate(const PanelDataset& data, const CvSettings& settings);

inline constexpr const char* kBaselineLabel = "independence baseline (parametric)";

nlohmann::json to_json(const PredictionReport& report);
// One row per model; ratio columns are percentages of the univariate rate.
void write_report_csv(const PredictionReport& report, std::ostream& out);

}  // namespace tgom
