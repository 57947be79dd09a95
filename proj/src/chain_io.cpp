#include <fstream>
#include <sstream>

#include "tgom/data_io.hpp"
#include "tgom/errors.hpp"
#include "tgom/util.hpp"

namespace tgom {

using nlohmann::json;

namespace {

constexpr const char* kFormatName = "tgom-chain";

json meta_json(const ChainMeta& m) {
  json j;
  j["model"] = to_json(m.model);
  j["priors"] = to_json(m.priors);
  j["sampler"] = to_json(m.config);
  j["dataset_fingerprint"] = m.dataset_fingerprint;
  j["n_individuals"] = m.n_individuals;
  j["item_labels"] = m.item_labels;
  j["age_offset"] = m.age_offset;
  j["membership_ids"] = m.membership_ids;
  j["cohort_sizes"] = m.cohort_sizes;
  j["beta_acceptance"] = m.beta_acceptance;
  j["alpha_acceptance"] = m.alpha_acceptance;
  j["final_scales"] = {{"beta0_sd", m.final_scales.beta0_sd},
                       {"beta1_sd", m.final_scales.beta1_sd},
                       {"log_alpha_sd", m.final_scales.log_alpha_sd}};
  j["relabel_permutation"] = m.relabel_permutation;
  return j;
}

ChainMeta meta_from_json(const json& j) {
  ChainMeta m;
  json model = j.at("model");
  model["priors"] = j.at("priors");
  model["sampler"] = j.at("sampler");
  model["age_offset"] = j.at("age_offset");
  const FitConfig fc = parse_fit_config(model);
  m.model = fc.model;
  m.priors = fc.priors;
  m.config = fc.sampler;
  m.age_offset = fc.age_offset;
  m.dataset_fingerprint = j.at("dataset_fingerprint").get<std::string>();
  m.n_individuals = j.at("n_individuals").get<std::size_t>();
  m.item_labels = j.at("item_labels").get<std::vector<std::string>>();
  m.membership_ids = j.at("membership_ids").get<std::vector<std::size_t>>();
  m.cohort_sizes = j.at("cohort_sizes").get<std::vector<std::size_t>>();
  m.beta_acceptance = j.at("beta_acceptance").get<std::vector<double>>();
  m.alpha_acceptance = j.at("alpha_acceptance").get<std::vector<double>>();
  const auto& fs = j.at("final_scales");
  m.final_scales.beta0_sd = fs.at("beta0_sd").get<std::vector<double>>();
  m.final_scales.beta1_sd = fs.at("beta1_sd").get<std::vector<double>>();
  m.final_scales.log_alpha_sd = fs.at("log_alpha_sd").get<std::vector<double>>();
  m.relabel_permutation = j.at("relabel_permutation").get<std::vector<std::size_t>>();
  return m;
}

std::vector<double> flatten(const Eigen::MatrixXd& m) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) out.push_back(m(r, c));
  }
  return out;
}

Eigen::MatrixXd unflatten(const std::vector<double>& v, std::size_t rows, std::size_t cols) {
  if (v.size() != rows * cols) throw ChainFormatError("draw matrix has the wrong size");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v[r * cols + c];
    }
  }
  return m;
}

json draw_json(const Draw& d) {
  json alpha = json::array();
  for (const auto& c : d.dirichlet.per_cohort) alpha.push_back(c.alpha());
  return {{"iteration", d.iteration},   {"log_posterior", d.log_posterior},
          {"beta0", flatten(d.params.beta0)}, {"beta1", flatten(d.params.beta1)},
          {"alpha", alpha},             {"g", d.memberships}};
}

Draw draw_from_json(const json& j, std::size_t K, std::size_t J) {
  Draw d;
  d.iteration = j.at("iteration").get<std::uint64_t>();
  d.log_posterior = j.at("log_posterior").get<double>();
  d.params.beta0 = unflatten(j.at("beta0").get<std::vector<double>>(), K, J);
  d.params.beta1 = unflatten(j.at("beta1").get<std::vector<double>>(), K, J);
  for (const auto& a : j.at("alpha")) d.dirichlet.per_cohort.emplace_back(a.get<std::vector<double>>());
  d.memberships = j.at("g").get<std::vector<double>>();
  return d;
}

}  // namespace

void write_chain(const PosteriorChain& chain, std::ostream& out) {
  Fnv1a checksum;
  auto emit = [&](const json& j) {
    const std::string line = j.dump() + "\n";
    checksum.update(line);
    out << line;
  };
  emit({{"format", kFormatName}, {"version", kChainFormatVersion}, {"meta", meta_json(chain.meta)}});
  for (const auto& d : chain.draws) emit(draw_json(d));
  out << json{{"end", true}, {"draws", chain.draws.size()}, {"checksum", checksum.hex()}}.dump() << '\n';
}

void write_chain_file(const PosteriorChain& chain, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write chain file " + path.string());
  write_chain(chain, out);
  if (!out) throw IoError("error while writing " + path.string());
}

PosteriorChain read_chain(std::istream& in) {
  std::vector<std::string> lines;
  std::string line;
  bool last_has_newline = true;
  while (std::getline(in, line)) {
    last_has_newline = !in.eof();
    lines.push_back(line);
  }
  if (lines.empty()) throw ChainTruncatedError("chain file is empty");

  json header;
  try {
    header = json::parse(lines.front());
  } catch (const json::exception&) {
    throw ChainFormatError("chain header is not valid JSON");
  }
  if (!header.is_object() || header.value("format", "") != kFormatName) {
    throw ChainFormatError("not a tgom chain file");
  }
  if (header.value("version", -1) != kChainFormatVersion) {
    throw ChainVersionError("chain format version " + header.value("version", json(-1)).dump() +
                            " is not supported (expected " + std::to_string(kChainFormatVersion) + ")");
  }

  json trailer;
  bool trailer_ok = lines.size() >= 2 && last_has_newline;
  if (trailer_ok) {
    try {
      trailer = json::parse(lines.back());
      trailer_ok = trailer.is_object() && trailer.value("end", false);
    } catch (const json::exception&) {
      trailer_ok = false;
    }
  }
  if (!trailer_ok) throw ChainTruncatedError("chain file ends without its trailer record");
  const std::size_t n_draws = lines.size() - 2;
  if (trailer.value("draws", std::size_t{0}) != n_draws) {
    throw ChainTruncatedError("chain trailer expects " + trailer["draws"].dump() + " draws, found " +
                              std::to_string(n_draws));
  }
  Fnv1a checksum;
  for (std::size_t l = 0; l + 1 < lines.size(); ++l) {
    checksum.update(lines[l]);
    checksum.update("\n");
  }
  if (trailer.value("checksum", "") != checksum.hex()) {
    throw ChainChecksumError("chain checksum mismatch");
  }

  PosteriorChain chain;
  try {
    chain.meta = meta_from_json(header.at("meta"));
    const std::size_t K = chain.meta.n_profiles();
    const std::size_t J = chain.meta.n_items();
    chain.draws.reserve(n_draws);
    for (std::size_t l = 1; l + 1 < lines.size(); ++l) {
      chain.draws.push_back(draw_from_json(json::parse(lines[l]), K, J));
    }
  } catch (const json::exception& e) {
    throw ChainFormatError(std::string("malformed chain record: ") + e.what());
  } catch (const ConfigError& e) {
    throw ChainFormatError(std::string("malformed chain metadata: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ChainFormatError(std::string("invalid chain values: ") + e.what());
  }
  return chain;
}

PosteriorChain read_chain_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open chain file " + path.string());
  return read_chain(in);
}

}  // namespace tgom
