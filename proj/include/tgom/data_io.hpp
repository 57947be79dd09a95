#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "tgom/model.hpp"
#include "tgom/sampler.hpp"

namespace tgom {

inline constexpr double kDaysPerYear = 365.0;

// ------------------------------------------------------------------ panel CSV
//
// Long format, one row per individual and wave:
//   id,wave,interview_date,dob,<item_1>,...,<item_J>
// Dates are YYYY-MM-DD; responses are 0 or 1. A wave is either fully
// observed or absent (no row, or a row with every response blank).

struct ParseOptions {
  double age_offset = kDefaultAgeOffset;
};

PanelDataset parse_panel(std::istream& in, const ParseOptions& options = {});
PanelDataset parse_panel_file(const std::filesystem::path& path, const ParseOptions& options = {});

void write_panel(const PanelDataset& data, std::ostream& out);
void write_panel_file(const PanelDataset& data, const std::filesystem::path& path);

struct CohortAssignment {
  std::vector<std::size_t> cohort;                   // per individual, 0-based
  std::vector<std::vector<std::size_t>> by_wave;     // [cohort][wave] observed individuals
  std::vector<std::size_t> totals;                   // individuals per cohort
};

CohortAssignment assign_cohorts(const PanelDataset& data, const CohortPartition& partition);
void write_cohort_table(const CohortAssignment& table, const PanelDataset& data,
                        const CohortPartition& partition, std::ostream& out);

// ---------------------------------------------------------- synthetic panels

enum class GenerationPath {
  kViaLatent,  // draw z, then y | z
  kMarginal,   // draw y from the mixed probability directly
};

struct GeneratorSpec {
  std::size_t n_individuals = 0;
  TrajectoryParams params;  // K x J
  CohortDirichletParams dirichlet;  // one entry unless a partition is given
  std::optional<CohortPartition> partition;
  std::vector<std::int32_t> wave_dates;  // days since 1970-01-01, increasing
  std::vector<std::string> wave_labels;  // defaults to the wave years
  std::vector<std::string> item_labels;  // defaults to item1..itemJ
  std::int32_t dob_min = 0;
  std::int32_t dob_max = 0;
  double eligibility_age = 65.0;
  double age_offset = kDefaultAgeOffset;
  GenerationPath path = GenerationPath::kViaLatent;

  std::size_t n_profiles() const { return params.n_profiles(); }
  std::size_t n_items() const { return params.n_items(); }
  std::vector<std::string> problems() const;
};

struct GroundTruth {
  std::vector<MembershipVector> memberships;
  std::vector<std::size_t> cohort;
  std::optional<LatentAssignments> z;  // only for GenerationPath::kViaLatent
};

std::pair<PanelDataset, GroundTruth> generate_dataset(const GeneratorSpec& spec, std::uint64_t seed);

// -------------------------------------------------------------- chain files
//
// Line 1: {"format":"tgom-chain","version":1,"meta":{...}}
// Lines 2..n+1: one draw per line.
// Last line: {"end":true,"draws":n,"checksum":"<fnv1a-64 hex of all preceding bytes>"}

inline constexpr int kChainFormatVersion = 1;

void write_chain(const PosteriorChain& chain, std::ostream& out);
void write_chain_file(const PosteriorChain& chain, const std::filesystem::path& path);
PosteriorChain read_chain(std::istream& in);
PosteriorChain read_chain_file(const std::filesystem::path& path);

// ------------------------------------------------------------ configuration

struct FitConfig {
  ModelSpec model;
  Priors priors;
  SamplerConfig sampler;
  double age_offset = kDefaultAgeOffset;
};

// Parses and validates; throws ConfigError listing every problem found.
FitConfig parse_fit_config(const nlohmann::json& j);
FitConfig read_fit_config_file(const std::filesystem::path& path);
nlohmann::json to_json(const FitConfig& config);

GeneratorSpec parse_generator_spec(const nlohmann::json& j);
nlohmann::json to_json(const GeneratorSpec& spec);

nlohmann::json to_json(const Priors& priors);
nlohmann::json to_json(const SamplerConfig& config);
nlohmann::json to_json(const ModelSpec& model);

void write_ground_truth(const GroundTruth& truth, const PanelDataset& data, std::ostream& out);

}  // namespace tgom
