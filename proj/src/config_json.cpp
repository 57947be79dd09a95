#include <fstream>
#include <stdexcept>

#include "tgom/data_io.hpp"
#include "tgom/errors.hpp"
#include "tgom/util.hpp"

namespace tgom {

using nlohmann::json;

namespace {

// Reads optional fields, recording a problem instead of throwing so that all
// mistakes in a config file are reported together.
class FieldReader {
 public:
  FieldReader(const json& obj, std::string prefix, std::vector<std::string>& problems)
      : obj_(obj), prefix_(std::move(prefix)), problems_(problems) {}

  template <typename T>
  void get(const char* key, T& out) {
    if (!obj_.is_object() || !obj_.contains(key)) return;
    try {
      out = obj_.at(key).get<T>();
    } catch (const json::exception&) {
      problems_.push_back(prefix_ + key + " has the wrong type");
    }
  }

 private:
  const json& obj_;
  std::string prefix_;
  std::vector<std::string>& problems_;
};

std::vector<std::int32_t> parse_dates(const json& arr, const std::string& what,
                                      std::vector<std::string>& problems) {
  std::vector<std::int32_t> out;
  if (!arr.is_array()) {
    problems.push_back(what + " must be an array of ISO dates");
    return out;
  }
  for (const auto& v : arr) {
    try {
      out.push_back(parse_iso_date(v.get<std::string>()));
    } catch (const std::exception& e) {
      problems.push_back(what + ": " + e.what());
    }
  }
  return out;
}

json dates_json(const std::vector<std::int32_t>& days) {
  json arr = json::array();
  for (auto d : days) arr.push_back(format_iso_date(d));
  return arr;
}

Priors parse_priors(const json& j, std::vector<std::string>& problems) {
  Priors p;
  bool tau_given = false;
  bool eta_given = false;
  if (j.is_object()) {
    FieldReader r(j, "priors.", problems);
    r.get("a_alpha", p.a_alpha);
    r.get("b_alpha", p.b_alpha);
    r.get("mu0", p.mu0);
    r.get("sigma0_sq", p.sigma0_sq);
    r.get("mu1", p.mu1);
    r.get("sigma1_sq", p.sigma1_sq);
    tau_given = j.contains("cohort_tau");
    eta_given = j.contains("cohort_eta");
    r.get("cohort_tau", p.cohort_tau);
    r.get("cohort_eta", p.cohort_eta);
  } else if (!j.is_null()) {
    problems.push_back("priors must be an object");
  }
  if (!tau_given) p.cohort_tau = p.a_alpha;
  if (!eta_given) p.cohort_eta = p.b_alpha;
  return p;
}

SamplerConfig parse_sampler(const json& j, std::vector<std::string>& problems) {
  SamplerConfig s;
  if (j.is_null()) return s;
  if (!j.is_object()) {
    problems.push_back("sampler must be an object");
    return s;
  }
  FieldReader r(j, "sampler.", problems);
  r.get("n_iterations", s.n_iterations);
  r.get("burn_in", s.burn_in);
  r.get("thin_keep_fraction", s.thin_keep_fraction);
  r.get("seed", s.seed);
  r.get("proposal_sd_beta0", s.proposal_sd_beta0);
  r.get("proposal_sd_beta1", s.proposal_sd_beta1);
  r.get("proposal_sd_log_alpha", s.proposal_sd_log_alpha);
  r.get("adapt", s.adapt);
  r.get("adapt_window", s.adapt_window);
  r.get("store_memberships", s.store_memberships);
  r.get("threads", s.threads);
  r.get("progress_every", s.progress_every);
  if (j.contains("target_accept_range")) {
    const auto& range = j["target_accept_range"];
    if (range.is_array() && range.size() == 2 && range[0].is_number() && range[1].is_number()) {
      s.target_accept_low = range[0].get<double>();
      s.target_accept_high = range[1].get<double>();
    } else {
      problems.push_back("sampler.target_accept_range must be [low, high]");
    }
  }
  return s;
}

}  // namespace

json to_json(const Priors& p) {
  return {{"a_alpha", p.a_alpha},     {"b_alpha", p.b_alpha},       {"mu0", p.mu0},
          {"sigma0_sq", p.sigma0_sq}, {"mu1", p.mu1},               {"sigma1_sq", p.sigma1_sq},
          {"cohort_tau", p.cohort_tau}, {"cohort_eta", p.cohort_eta}};
}

json to_json(const SamplerConfig& s) {
  return {{"n_iterations", s.n_iterations},
          {"burn_in", s.burn_in},
          {"thin_keep_fraction", s.thin_keep_fraction},
          {"seed", s.seed},
          {"proposal_sd_beta0", s.proposal_sd_beta0},
          {"proposal_sd_beta1", s.proposal_sd_beta1},
          {"proposal_sd_log_alpha", s.proposal_sd_log_alpha},
          {"adapt", s.adapt},
          {"adapt_window", s.adapt_window},
          {"target_accept_range", {s.target_accept_low, s.target_accept_high}},
          {"store_memberships", s.store_memberships},
          {"threads", s.threads},
          {"progress_every", s.progress_every}};
}

json to_json(const ModelSpec& m) {
  return {{"model", to_string(m.kind)},
          {"K", m.n_profiles},
          {"cohort_cut_points", dates_json(m.partition.boundaries)}};
}

FitConfig parse_fit_config(const json& j) {
  std::vector<std::string> problems;
  FitConfig c;
  if (!j.is_object()) throw ConfigError({"config must be a JSON object"});
  if (j.contains("model")) {
    try {
      c.model.kind = model_kind_from_string(j["model"].get<std::string>());
    } catch (const std::exception& e) {
      problems.push_back(std::string("model: ") + e.what());
    }
  }
  if (!j.contains("K")) {
    problems.push_back("K is required");
  } else if (!j["K"].is_number_integer() || j["K"].get<long long>() < 1) {
    problems.push_back("K must be a positive integer");
  } else {
    c.model.n_profiles = j["K"].get<std::size_t>();
  }
  if (j.contains("cohort_cut_points")) {
    c.model.partition.boundaries = parse_dates(j["cohort_cut_points"], "cohort_cut_points", problems);
    try {
      c.model.partition.validate();
    } catch (const std::exception& e) {
      problems.push_back(std::string("cohort_cut_points: ") + e.what());
    }
  } else if (c.model.kind == ModelKind::kCohort) {
    problems.push_back("cohort model requires cohort_cut_points");
  }
  if (j.contains("age_offset")) {
    if (j["age_offset"].is_number()) {
      c.age_offset = j["age_offset"].get<double>();
    } else {
      problems.push_back("age_offset must be a number");
    }
  }
  c.priors = parse_priors(j.value("priors", json()), problems);
  c.sampler = parse_sampler(j.value("sampler", json()), problems);
  auto more = c.sampler.problems(c.priors);
  problems.insert(problems.end(), more.begin(), more.end());
  if (!problems.empty()) throw ConfigError(std::move(problems));
  return c;
}

FitConfig read_fit_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({"config not found: " + path.string()});
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError({std::string("config is not valid JSON: ") + e.what()});
  }
  return parse_fit_config(j);
}

json to_json(const FitConfig& c) {
  json j = to_json(c.model);
  j["priors"] = to_json(c.priors);
  j["sampler"] = to_json(c.sampler);
  j["age_offset"] = c.age_offset;
  return j;
}

namespace {

Eigen::MatrixXd parse_matrix(const json& j, const char* name, std::vector<std::string>& problems) {
  if (!j.is_array() || j.empty() || !j[0].is_array()) {
    problems.push_back(std::string("generator.") + name + " must be a K x J array of arrays");
    return {};
  }
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      problems.push_back(std::string("generator.") + name + " rows must all have J entries");
      return {};
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
      if (!row[static_cast<std::size_t>(c)].is_number()) {
        problems.push_back(std::string("generator.") + name + " entries must be numbers");
        return {};
      }
      m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
    }
  }
  return m;
}

json matrix_json(const Eigen::MatrixXd& m) {
  json arr = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    arr.push_back(row);
  }
  return arr;
}

DirichletParams parse_dirichlet(const json& j, std::vector<std::string>& problems) {
  try {
    if (j.contains("alpha")) return DirichletParams(j["alpha"].get<std::vector<double>>());
    const auto xi = j.at("xi").get<std::vector<double>>();
    return DirichletParams::from_concentration(j.at("alpha0").get<double>(), xi);
  } catch (const std::exception& e) {
    problems.push_back(std::string("generator Dirichlet parameters: ") + e.what());
    return {};
  }
}

}  // namespace

GeneratorSpec parse_generator_spec(const json& j) {
  std::vector<std::string> problems;
  GeneratorSpec s;
  if (!j.is_object()) throw ConfigError({"generator spec must be a JSON object"});
  FieldReader r(j, "generator.", problems);
  r.get("n_individuals", s.n_individuals);
  r.get("eligibility_age", s.eligibility_age);
  r.get("age_offset", s.age_offset);
  r.get("item_labels", s.item_labels);
  r.get("wave_labels", s.wave_labels);
  s.params.beta0 = parse_matrix(j.value("beta0", json()), "beta0", problems);
  s.params.beta1 = parse_matrix(j.value("beta1", json()), "beta1", problems);
  if (j.contains("cohort_cut_points")) {
    CohortPartition p;
    p.boundaries = parse_dates(j["cohort_cut_points"], "generator.cohort_cut_points", problems);
    s.partition = p;
  }
  if (j.contains("cohorts")) {
    for (const auto& c : j["cohorts"]) s.dirichlet.per_cohort.push_back(parse_dirichlet(c, problems));
  } else if (j.contains("dirichlet")) {
    s.dirichlet.per_cohort.push_back(parse_dirichlet(j["dirichlet"], problems));
  } else {
    problems.push_back("generator: 'dirichlet' or 'cohorts' is required");
  }
  s.wave_dates = parse_dates(j.value("waves", json()), "generator.waves", problems);
  const auto range = parse_dates(j.value("dob_range", json()), "generator.dob_range", problems);
  if (range.size() == 2) {
    s.dob_min = range[0];
    s.dob_max = range[1];
  } else {
    problems.push_back("generator.dob_range must be [first, last]");
  }
  if (j.contains("path")) {
    const auto path = j["path"].get<std::string>();
    if (path == "latent") {
      s.path = GenerationPath::kViaLatent;
    } else if (path == "marginal") {
      s.path = GenerationPath::kMarginal;
    } else {
      problems.push_back("generator.path must be 'latent' or 'marginal'");
    }
  }
  if (problems.empty()) {
    auto more = s.problems();
    problems.insert(problems.end(), more.begin(), more.end());
  }
  if (!problems.empty()) throw ConfigError(std::move(problems));
  return s;
}

json to_json(const GeneratorSpec& s) {
  json j;
  j["n_individuals"] = s.n_individuals;
  j["beta0"] = matrix_json(s.params.beta0);
  j["beta1"] = matrix_json(s.params.beta1);
  json cohorts = json::array();
  for (const auto& d : s.dirichlet.per_cohort) cohorts.push_back({{"alpha", d.alpha()}});
  if (s.partition) {
    j["cohort_cut_points"] = dates_json(s.partition->boundaries);
    j["cohorts"] = cohorts;
  } else {
    j["dirichlet"] = cohorts.at(0);
  }
  j["waves"] = dates_json(s.wave_dates);
  if (!s.wave_labels.empty()) j["wave_labels"] = s.wave_labels;
  if (!s.item_labels.empty()) j["item_labels"] = s.item_labels;
  j["dob_range"] = dates_json({s.dob_min, s.dob_max});
  j["eligibility_age"] = s.eligibility_age;
  j["age_offset"] = s.age_offset;
  j["path"] = s.path == GenerationPath::kViaLatent ? "latent" : "marginal";
  return j;
}

}  // namespace tgom
