#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tgom/model.hpp"

namespace tgom {

enum class ModelKind { kBasic, kCohort };

const char* to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& name);

struct ModelSpec {
  ModelKind kind = ModelKind::kBasic;
  std::size_t n_profiles = 2;
  CohortPartition partition;  // ignored by the basic model

  std::size_t n_cohorts() const { return kind == ModelKind::kCohort ? partition.n_cohorts() : 1; }
  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

struct SamplerConfig {
  std::uint64_t n_iterations = 120000;
  std::uint64_t burn_in = 20000;
  double thin_keep_fraction = 0.2;
  std::uint64_t seed = 1;
  double proposal_sd_beta0 = 0.05;
  double proposal_sd_beta1 = 0.05;
  double proposal_sd_log_alpha = 0.1;
  bool adapt = true;
  std::uint64_t adapt_window = 100;
  double target_accept_low = 0.2;
  double target_accept_high = 0.5;
  // Individuals whose membership draws are stored: -1 all, 0 none, m > 0 a seeded sample of m.
  std::int64_t store_memberships = 100;
  unsigned threads = 0;  // 0: available parallelism. Never affects results.
  std::uint64_t progress_every = 0;

  std::vector<std::string> problems(const Priors& priors) const;
  void validate(const Priors& priors) const;
  // Number of retained draws: floor((n_iterations - burn_in) * thin_keep_fraction).
  std::uint64_t expected_draws() const;
  // Whether post-burn-in iteration s (1-based) is retained.
  bool keeps(std::uint64_t s) const;

  friend bool operator==(const SamplerConfig&, const SamplerConfig&) = default;
};

struct ChainState {
  TrajectoryParams params;
  std::vector<MembershipVector> memberships;
  // log g, kept alongside g so that tiny components stay exact in the alpha update.
  std::vector<std::vector<double>> log_memberships;
  LatentAssignments z;
  CohortDirichletParams dirichlet;  // a single entry for the basic model
  std::uint64_t iteration = 0;

  void set_membership(std::size_t i, MembershipVector g);
};

// Fixed inputs shared by every kernel of one chain.
struct KernelContext {
  const PanelDataset* data = nullptr;
  Priors priors;
  ModelSpec model;
  std::uint64_t seed = 0;
  std::vector<std::size_t> cohort_index;                  // per individual
  std::vector<std::vector<std::size_t>> cohort_members;  // per cohort
  // Stream id of each profile label. Permuting labels together with this map
  // permutes the chain exactly.
  std::vector<std::uint64_t> profile_stream;
  unsigned threads = 1;

  static KernelContext make(const PanelDataset& data, const Priors& priors, const ModelSpec& model,
                            std::uint64_t seed);
};

// Cells currently assigned to each (item, profile) pair, bucket index j * K + k.
struct CellBuckets {
  std::vector<std::vector<double>> ages;
  std::vector<std::vector<std::uint8_t>> y;
};
CellBuckets bucket_cells(const ChainState& state, const PanelDataset& data);

struct ProposalScales {
  std::vector<double> beta0_sd;      // j * K + k
  std::vector<double> beta1_sd;      // j * K + k
  std::vector<double> log_alpha_sd;  // per cohort
};

// ---- kernel mathematics, exposed for identity tests

// Normalized full-conditional probabilities of z for one cell.
std::vector<double> latent_probabilities(std::span<const double> log_g, const TrajectoryParams& params,
                                         std::size_t j, double age, int y);

// Log of the random-walk acceptance ratio for (beta0, beta1) of one
// (item, profile) pair in product form: ratio of (1 + exp) terms over the
// assigned cells times the two prior/sufficient-statistic factors. Requires mu0 = mu1 = 0.
double beta_log_acceptance(std::span<const double> ages, std::span<const std::uint8_t> y,
                           double beta0, double beta1, double proposal0, double proposal1,
                           const Priors& priors);
// Unnormalized log full conditional of (beta0, beta1).
double beta_log_full_conditional(std::span<const double> ages, std::span<const std::uint8_t> y,
                                 double beta0, double beta1, const Priors& priors);

// Per-cohort sufficient statistics for the Dirichlet update.
struct AlphaStats {
  std::size_t n_members = 0;
  std::vector<double> sum_log_g;  // sum over members of log g_ik
};

// Log acceptance ratio of the log-normal random walk on alpha in product form:
// Gamma prior on alpha0, Hastings factor prod(alpha*/alpha), the Gamma-function
// ratio to the power n, and the membership geometric-mean factor. Includes the
// alpha0^-(K-1) change of variables implied by priors on (alpha0, xi).
double alpha_log_acceptance(std::span<const double> alpha, std::span<const double> proposal,
                            const AlphaStats& stats, double shape, double rate);
// Unnormalized log full conditional of alpha (in alpha coordinates).
double alpha_log_full_conditional(std::span<const double> alpha, const AlphaStats& stats,
                                  double shape, double rate);

AlphaStats alpha_stats(const ChainState& state, std::span<const std::size_t> members);

// ---- Gibbs blocks. All randomness is keyed by (seed, state.iteration, block, unit).

void sample_z(ChainState& state, const KernelContext& ctx);
bool sample_beta(ChainState& state, const KernelContext& ctx, const CellBuckets& buckets,
                 std::size_t j, std::size_t k, double sd0, double sd1);
void sample_g(ChainState& state, const KernelContext& ctx);
// Basic model: one Dirichlet over everybody, prior Gamma(a_alpha, b_alpha).
bool sample_alpha(ChainState& state, const KernelContext& ctx, double log_sd);
// Cohort model: one update per cohort with prior Gamma(cohort_tau, cohort_eta).
std::vector<bool> sample_alpha_cohort(ChainState& state, const KernelContext& ctx,
                                      std::span<const double> log_sd);

// Multiplicative adjustment of one proposal scale after an adaptation window.
double adapt_proposal_scale(double sd, double acceptance_rate, const SamplerConfig& config,
                            std::size_t round);
ProposalScales adapt_proposals(const ProposalScales& scales, std::span<const double> beta_rates,
                               std::span<const double> alpha_rates, const SamplerConfig& config,
                               std::size_t round);

// Overdispersed start: g ~ Dirichlet(1), beta ~ N(mu, 1), alpha0 = 1, xi uniform,
// z from its full conditional.
ChainState initial_state(const KernelContext& ctx);

// Log density of the sampler's target at the state (alpha coordinates).
double log_posterior(const ChainState& state, const KernelContext& ctx);

// ---- chains

struct Draw {
  std::uint64_t iteration = 0;
  TrajectoryParams params;
  CohortDirichletParams dirichlet;
  double log_posterior = 0.0;
  std::vector<double> memberships;  // membership_ids.size() * K, row-major

  friend bool operator==(const Draw& a, const Draw& b);
};

struct ChainMeta {
  ModelSpec model;
  Priors priors;
  SamplerConfig config;
  std::string dataset_fingerprint;
  std::size_t n_individuals = 0;
  std::vector<std::string> item_labels;
  double age_offset = kDefaultAgeOffset;
  std::vector<std::size_t> membership_ids;
  std::vector<std::size_t> cohort_sizes;
  std::vector<double> beta_acceptance;   // post burn-in, j * K + k
  std::vector<double> alpha_acceptance;  // post burn-in, per cohort
  ProposalScales final_scales;
  std::vector<std::size_t> relabel_permutation;  // new label -> old label; empty when never relabelled

  std::size_t n_profiles() const { return model.n_profiles; }
  std::size_t n_items() const { return item_labels.size(); }
  friend bool operator==(const ChainMeta& a, const ChainMeta& b);
};

struct PosteriorChain {
  ChainMeta meta;
  std::vector<Draw> draws;
  friend bool operator==(const PosteriorChain&, const PosteriorChain&) = default;
};

struct ProgressRecord {
  std::uint64_t iteration = 0;
  double log_posterior = 0.0;
  double beta_acceptance = 0.0;   // mean over blocks since the start
  std::vector<double> alpha_acceptance;
  bool burn_in = true;
};

struct RunOptions {
  std::optional<ChainState> initial;
  std::vector<std::uint64_t> profile_stream;  // empty: identity
  std::function<void(const ProgressRecord&)> progress;
};

// Runs full sweeps z -> beta (lexicographic j, k) -> g -> alpha and keeps the
// thinned post-burn-in draws. Adaptation happens only during burn-in.
PosteriorChain run_chain(const PanelDataset& data, const Priors& priors,
                         const SamplerConfig& config, const ModelSpec& model,
                         const RunOptions& options = {});

std::string progress_json(const ProgressRecord& record);

}  // namespace tgom
