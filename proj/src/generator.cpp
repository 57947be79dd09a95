#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include "tgom/data_io.hpp"
#include "tgom/errors.hpp"
#include "tgom/rng.hpp"
#include "tgom/util.hpp"

namespace tgom {

namespace {

enum Purpose : std::uint64_t { kDob = 0, kMembership = 1, kCells = 2 };

constexpr int kMaxDobAttempts = 10000;

// Dirichlet draw through log-Gamma variates so that very small alphas
// do not collapse to exact zeros before normalization.
MembershipVector draw_dirichlet(CounterRng& rng, const std::vector<double>& alpha) {
  const std::size_t K = alpha.size();
  std::vector<double> lg(K);
  double hi = -INFINITY;
  for (std::size_t k = 0; k < K; ++k) {
    lg[k] = rng.log_gamma_variate(alpha[k]);
    hi = std::max(hi, lg[k]);
  }
  std::vector<double> g(K);
  for (std::size_t k = 0; k < K; ++k) g[k] = std::exp(lg[k] - hi);
  const double total = ordered_sum(g);
  for (double& v : g) v /= total;
  return MembershipVector(std::move(g));
}

double raw_age(std::int32_t interview, std::int32_t dob) {
  return static_cast<double>(interview - dob) / kDaysPerYear;
}

}  // namespace

std::vector<std::string> GeneratorSpec::problems() const {
  std::vector<std::string> out;
  const std::size_t K = n_profiles();
  const std::size_t J = n_items();
  if (K == 0 || J == 0) out.push_back("generator: K and J must be >= 1");
  if (params.beta0.rows() != params.beta1.rows() || params.beta0.cols() != params.beta1.cols()) {
    out.push_back("generator: beta0 and beta1 shapes differ");
  } else if (!params.beta0.allFinite() || !params.beta1.allFinite()) {
    out.push_back("generator: beta values must be finite");
  }
  const std::size_t C = partition ? partition->n_cohorts() : 1;
  if (dirichlet.per_cohort.size() != C) {
    out.push_back("generator: expected " + std::to_string(C) + " Dirichlet parameter sets, got " +
                  std::to_string(dirichlet.per_cohort.size()));
  }
  for (const auto& d : dirichlet.per_cohort) {
    if (d.size() != K) out.push_back("generator: Dirichlet dimension differs from K");
  }
  if (partition) {
    try {
      partition->validate();
    } catch (const std::exception& e) {
      out.push_back(std::string("generator: ") + e.what());
    }
  }
  if (wave_dates.empty()) out.push_back("generator: at least one wave date is required");
  for (std::size_t t = 1; t < wave_dates.size(); ++t) {
    if (wave_dates[t] <= wave_dates[t - 1]) out.push_back("generator: wave dates must increase");
  }
  if (!wave_labels.empty() && wave_labels.size() != wave_dates.size()) {
    out.push_back("generator: wave_labels must match wave dates");
  }
  if (!item_labels.empty() && item_labels.size() != J) {
    out.push_back("generator: item_labels must have J entries");
  }
  if (dob_max < dob_min) out.push_back("generator: dob range is empty");
  if (!wave_dates.empty() && n_individuals > 0 &&
      raw_age(wave_dates.back(), dob_min) < eligibility_age) {
    out.push_back("generator: nobody in the dob range reaches the eligibility age by the last wave");
  }
  return out;
}

std::pair<PanelDataset, GroundTruth> generate_dataset(const GeneratorSpec& spec, std::uint64_t seed) {
  if (auto p = spec.problems(); !p.empty()) throw ConfigError(std::move(p));
  const std::size_t N = spec.n_individuals;
  const std::size_t J = spec.n_items();
  const std::size_t K = spec.n_profiles();
  const std::size_t T = spec.wave_dates.size();

  PanelDataset d = make_empty_panel(N, J, T);
  d.age_offset = spec.age_offset;
  if (!spec.item_labels.empty()) d.item_labels = spec.item_labels;
  for (std::size_t t = 0; t < T; ++t) {
    d.wave_labels[t] = spec.wave_labels.empty() ? format_iso_date(spec.wave_dates[t]).substr(0, 4)
                                                : spec.wave_labels[t];
  }

  GroundTruth truth;
  truth.memberships.resize(N);
  truth.cohort.resize(N, 0);
  if (spec.path == GenerationPath::kViaLatent) truth.z = LatentAssignments::for_dataset(d);

  const auto span = static_cast<std::uint64_t>(spec.dob_max - spec.dob_min) + 1;
  for (std::size_t i = 0; i < N; ++i) {
    CounterRng dob_rng = CounterRng::stream(seed, Block::kGenerate, {i, kDob});
    std::int32_t dob = 0;
    bool eligible = false;
    for (int attempt = 0; attempt < kMaxDobAttempts && !eligible; ++attempt) {
      dob = spec.dob_min + static_cast<std::int32_t>(dob_rng() % span);
      eligible = raw_age(spec.wave_dates.back(), dob) >= spec.eligibility_age;
    }
    if (!eligible) throw ConfigError({"generator: could not draw an eligible date of birth"});
    d.dob[i] = dob;
    const std::size_t c = spec.partition ? spec.partition->cohort_of(dob) : 0;
    truth.cohort[i] = c;

    CounterRng g_rng = CounterRng::stream(seed, Block::kGenerate, {i, kMembership});
    truth.memberships[i] = draw_dirichlet(g_rng, spec.dirichlet.per_cohort[c].alpha());
    const MembershipVector& g = truth.memberships[i];

    CounterRng cell_rng = CounterRng::stream(seed, Block::kGenerate, {i, kCells});
    for (std::size_t t = 0; t < T; ++t) {
      const double age = raw_age(spec.wave_dates[t], dob);
      if (age < spec.eligibility_age) continue;
      const std::size_t cell = i * T + t;
      d.observed[cell] = 1;
      d.interview_day[cell] = spec.wave_dates[t];
      d.ages[cell] = age - spec.age_offset;
      for (std::size_t j = 0; j < J; ++j) {
        double p = 0.0;
        if (spec.path == GenerationPath::kViaLatent) {
          const double u = cell_rng.uniform();
          std::size_t k = 0;
          double acc = g[0];
          while (k + 1 < K && u > acc) acc += g[++k];
          truth.z->at(i, j, t) = static_cast<std::int16_t>(k);
          p = logistic(spec.params.linear_predictor(k, j, d.ages[cell]));
        } else {
          for (std::size_t k = 0; k < K; ++k) {
            p += g[k] * logistic(spec.params.linear_predictor(k, j, d.ages[cell]));
          }
        }
        d.outcomes[cell * J + j] = cell_rng.uniform() < p ? 1 : 0;
      }
    }
  }
  return {std::move(d), std::move(truth)};
}

void write_ground_truth(const GroundTruth& truth, const PanelDataset& data, std::ostream& out) {
  const std::size_t K = truth.memberships.empty() ? 0 : truth.memberships.front().size();
  out << "id,cohort";
  for (std::size_t k = 0; k < K; ++k) out << ",g" << (k + 1);
  out << '\n';
  out.precision(17);
  for (std::size_t i = 0; i < truth.memberships.size(); ++i) {
    out << data.individual_ids[i] << ',' << (truth.cohort[i] + 1);
    for (std::size_t k = 0; k < K; ++k) out << ',' << truth.memberships[i][k];
    out << '\n';
  }
}

}  // namespace tgom
