#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cmath>
#include <sstream>

#include <nlohmann/json.hpp>

#include "tgom/analysis.hpp"
#include "tgom/cli.hpp"
#include "tgom/data_io.hpp"
#include "tgom/errors.hpp"
#include "tgom/prediction.hpp"
#include "tgom/sampler.hpp"

namespace py = pybind11;
using nlohmann::json;
using namespace tgom;

namespace {

template <typename T>
py::array_t<T> to_array(const std::vector<T>& v, std::vector<py::ssize_t> shape) {
  py::array_t<T> out(shape);
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

json interval_json(const Interval& s) {
  return {{"mean", s.mean}, {"sd", s.sd}, {"lower", s.lower}, {"upper", s.upper}};
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::string summary_json(const PosteriorChain& chain) {
  const ProfileSummary s = summarize_profiles(chain);
  json j;
  for (const auto& x : s.xi) j["xi"].push_back(interval_json(x));
  for (const auto& a : s.alpha0) j["alpha0"].push_back(interval_json(a));
  for (std::size_t k = 0; k < s.n_profiles; ++k) {
    json profile;
    for (std::size_t jj = 0; jj < s.n_items; ++jj) {
      const std::size_t idx = jj * s.n_profiles + k;
      json onset;
      for (std::size_t q = 0; q < kOnsetLevels.size(); ++q) {
        const OnsetAge& o = s.onset[idx][q];
        onset.push_back({{"level", kOnsetLevels[q]},
                         {"point", optional_json(o.point)},
                         {"lower", optional_json(o.lower)},
                         {"upper", optional_json(o.upper)},
                         {"defined_fraction", o.defined_fraction}});
      }
      profile[s.item_labels[jj]] = {
          {"beta0", interval_json(s.beta0[idx])}, {"beta1", interval_json(s.beta1[idx])}, {"onset", onset}};
    }
    j["profiles"].push_back(profile);
  }
  if (chain.meta.model.kind == ModelKind::kCohort) {
    for (const auto& r : cohort_xi_table(chain)) {
      j["cohort_xi"].push_back(
          {{"cohort", r.cohort}, {"profile", r.profile}, {"mean", r.mean}, {"lower", r.lower}, {"upper", r.upper}});
    }
  }
  return j.dump();
}

py::dict phi_dict(const std::vector<PhiIndividual>& phi, const PanelDataset& d) {
  const std::size_t N = d.n_individuals, J = d.n_items, T = d.n_waves;
  std::vector<double> cell(N * T * J), item(N * J), wave(N * T), all(N);
  for (std::size_t i = 0; i < N; ++i) {
    std::copy(phi[i].cell.begin(), phi[i].cell.end(), cell.begin() + static_cast<std::ptrdiff_t>(i * T * J));
    std::copy(phi[i].item.begin(), phi[i].item.end(), item.begin() + static_cast<std::ptrdiff_t>(i * J));
    std::copy(phi[i].wave.begin(), phi[i].wave.end(), wave.begin() + static_cast<std::ptrdiff_t>(i * T));
    all[i] = phi[i].all;
  }
  const PhiMeans m = average_phi(phi);
  py::dict out;
  const auto n = static_cast<py::ssize_t>(N);
  out["cell"] = to_array(cell, {n, static_cast<py::ssize_t>(T), static_cast<py::ssize_t>(J)});
  out["item"] = to_array(item, {n, static_cast<py::ssize_t>(J)});
  out["wave"] = to_array(wave, {n, static_cast<py::ssize_t>(T)});
  out["all"] = to_array(all, {n});
  py::dict means;
  means["phi_ijt"] = m.cell;
  means["phi_ij"] = m.item;
  means["phi_it"] = m.wave;
  means["phi_i"] = m.all;
  out["means"] = means;
  return out;
}

}  // namespace

PYBIND11_MODULE(_tgom, m) {
  m.doc() = "Trajectory grade-of-membership models for binary panel data";
  m.attr("__version__") = TGOM_VERSION;

  auto base = py::register_exception<Error>(m, "TgomError", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<ValidationError>(m, "ValidationError", base.ptr());
  py::register_exception<NumericalError>(m, "NumericalError", base.ptr());
  auto io = py::register_exception<IoError>(m, "IoError", base.ptr());
  py::register_exception<ChainFormatError>(m, "ChainFormatError", io.ptr());

  py::class_<PanelDataset>(m, "Panel")
      .def_static("read", [](const std::filesystem::path& p, double offset) {
        return parse_panel_file(p, ParseOptions{offset});
      }, py::arg("path"), py::arg("age_offset") = kDefaultAgeOffset)
      .def_static("from_csv", [](const std::string& text, double offset) {
        std::istringstream in(text);
        return parse_panel(in, ParseOptions{offset});
      }, py::arg("text"), py::arg("age_offset") = kDefaultAgeOffset)
      .def("to_csv", [](const PanelDataset& d) {
        std::ostringstream out;
        write_panel(d, out);
        return out.str();
      })
      .def("write", [](const PanelDataset& d, const std::filesystem::path& p) { write_panel_file(d, p); })
      .def_readonly("n_individuals", &PanelDataset::n_individuals)
      .def_readonly("n_items", &PanelDataset::n_items)
      .def_readonly("n_waves", &PanelDataset::n_waves)
      .def_readonly("item_labels", &PanelDataset::item_labels)
      .def_readonly("wave_labels", &PanelDataset::wave_labels)
      .def_readonly("ids", &PanelDataset::individual_ids)
      .def_readonly("age_offset", &PanelDataset::age_offset)
      .def_property_readonly("fingerprint", [](const PanelDataset& d) { return dataset_fingerprint(d); })
      .def_property_readonly("outcomes", [](const PanelDataset& d) {
        return to_array(d.outcomes, {static_cast<py::ssize_t>(d.n_individuals),
                                     static_cast<py::ssize_t>(d.n_waves), static_cast<py::ssize_t>(d.n_items)});
      }, "(N, T, J) responses; meaningful only where observed")
      .def_property_readonly("ages", [](const PanelDataset& d) {
        return to_array(d.ages, {static_cast<py::ssize_t>(d.n_individuals), static_cast<py::ssize_t>(d.n_waves)});
      }, "(N, T) centered ages, NaN where unobserved")
      .def_property_readonly("observed", [](const PanelDataset& d) {
        py::array_t<bool> out({static_cast<py::ssize_t>(d.n_individuals), static_cast<py::ssize_t>(d.n_waves)});
        std::transform(d.observed.begin(), d.observed.end(), out.mutable_data(), [](std::uint8_t o) { return o != 0; });
        return out;
      })
      .def("subset", [](const PanelDataset& d, const std::vector<std::size_t>& keep) {
        return subset_individuals(d, keep);
      })
      .def("__repr__", [](const PanelDataset& d) {
        return "<Panel N=" + std::to_string(d.n_individuals) + " J=" + std::to_string(d.n_items) +
               " T=" + std::to_string(d.n_waves) + ">";
      });

  py::class_<PosteriorChain>(m, "Chain")
      .def_static("load", &read_chain_file, py::arg("path"))
      .def("save", [](const PosteriorChain& c, const std::filesystem::path& p) { write_chain_file(c, p); })
      .def_property_readonly("n_draws", [](const PosteriorChain& c) { return c.draws.size(); })
      .def_property_readonly("n_profiles", [](const PosteriorChain& c) { return c.meta.n_profiles(); })
      .def_property_readonly("item_labels", [](const PosteriorChain& c) { return c.meta.item_labels; })
      .def_property_readonly("membership_ids", [](const PosteriorChain& c) { return c.meta.membership_ids; })
      .def_property_readonly("relabel_permutation", [](const PosteriorChain& c) { return c.meta.relabel_permutation; })
      .def_property_readonly("beta0", [](const PosteriorChain& c) {
        const std::size_t K = c.meta.n_profiles(), J = c.meta.n_items();
        std::vector<double> v;
        for (const auto& d : c.draws) {
          for (std::size_t k = 0; k < K; ++k) {
            for (std::size_t j = 0; j < J; ++j) v.push_back(d.params.beta0(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)));
          }
        }
        return to_array(v, {static_cast<py::ssize_t>(c.draws.size()), static_cast<py::ssize_t>(K), static_cast<py::ssize_t>(J)});
      }, "(draws, K, J)")
      .def_property_readonly("beta1", [](const PosteriorChain& c) {
        const std::size_t K = c.meta.n_profiles(), J = c.meta.n_items();
        std::vector<double> v;
        for (const auto& d : c.draws) {
          for (std::size_t k = 0; k < K; ++k) {
            for (std::size_t j = 0; j < J; ++j) v.push_back(d.params.beta1(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)));
          }
        }
        return to_array(v, {static_cast<py::ssize_t>(c.draws.size()), static_cast<py::ssize_t>(K), static_cast<py::ssize_t>(J)});
      }, "(draws, K, J)")
      .def_property_readonly("alpha", [](const PosteriorChain& c) {
        const std::size_t K = c.meta.n_profiles();
        const std::size_t C = c.draws.empty() ? 0 : c.draws.front().dirichlet.per_cohort.size();
        std::vector<double> v;
        for (const auto& d : c.draws) {
          for (const auto& dir : d.dirichlet.per_cohort) v.insert(v.end(), dir.alpha().begin(), dir.alpha().end());
        }
        return to_array(v, {static_cast<py::ssize_t>(c.draws.size()), static_cast<py::ssize_t>(C), static_cast<py::ssize_t>(K)});
      }, "(draws, cohorts, K) Dirichlet components")
      .def_property_readonly("log_posterior", [](const PosteriorChain& c) {
        std::vector<double> v;
        for (const auto& d : c.draws) v.push_back(d.log_posterior);
        return to_array(v, {static_cast<py::ssize_t>(v.size())});
      })
      .def_property_readonly("memberships", [](const PosteriorChain& c) {
        const std::size_t K = c.meta.n_profiles(), S = c.meta.membership_ids.size();
        std::vector<double> v;
        for (const auto& d : c.draws) v.insert(v.end(), d.memberships.begin(), d.memberships.end());
        return to_array(v, {static_cast<py::ssize_t>(c.draws.size()), static_cast<py::ssize_t>(S), static_cast<py::ssize_t>(K)});
      }, "(draws, stored individuals, K)")
      .def("relabel", [](const PosteriorChain& c) {
        Relabeling r = relabel_profiles(c);
        return py::make_tuple(std::move(r.chain), r.permutation);
      }, "Orders profiles by decreasing posterior mean xi; returns (chain, permutation)")
      .def("permute", [](const PosteriorChain& c, const std::vector<std::size_t>& perm) {
        return permute_profiles(c, perm);
      })
      .def("summary_json", &summary_json)
      .def("__repr__", [](const PosteriorChain& c) {
        return "<Chain K=" + std::to_string(c.meta.n_profiles()) + " draws=" + std::to_string(c.draws.size()) + ">";
      });

  m.def("simulate", [](const std::string& spec_json, std::uint64_t seed) {
    auto [data, truth] = generate_dataset(parse_generator_spec(json::parse(spec_json)), seed);
    std::ostringstream gt;
    write_ground_truth(truth, data, gt);
    return py::make_tuple(std::move(data), gt.str());
  }, py::arg("spec_json"), py::arg("seed"), "Returns (panel, ground-truth CSV text)");

  m.def("fit", [](const PanelDataset& data, const std::string& config_json) {
    const FitConfig c = parse_fit_config(json::parse(config_json));
    py::gil_scoped_release release;
    return run_chain(data, c.priors, c.sampler, c.model);
  }, py::arg("panel"), py::arg("config_json"));

  m.def("normalize_config", [](const std::string& config_json) {
    return to_json(parse_fit_config(json::parse(config_json))).dump();
  }, "Validates a fit config and fills in defaults");

  m.def("phi", [](const PanelDataset& heldout, const PosteriorChain& chain, std::size_t membership_draws,
                  std::size_t max_draws, std::uint64_t seed) {
    std::vector<PhiIndividual> phi;
    {
      py::gil_scoped_release release;
      phi = phi_quantities(heldout, chain, PhiSettings{membership_draws, max_draws, seed, 0});
    }
    return phi_dict(phi, heldout);
  }, py::arg("heldout"), py::arg("chain"), py::arg("membership_draws") = 20, py::arg("max_draws") = 0,
     py::arg("seed") = 1);

  m.def("baseline_phi", [](const PanelDataset& train, const PanelDataset& heldout) {
    const BaselineResult r = baseline_independent_logistic(train, heldout);
    return phi_dict(r.phi, heldout);
  }, py::arg("train"), py::arg("heldout"));

  m.def("cross_validate", [](const PanelDataset& data, const std::vector<std::pair<std::string, std::string>>& models,
                             std::size_t folds, std::uint64_t seed, std::size_t membership_draws,
                             std::size_t max_draws, bool baseline) {
    CvSettings s;
    for (const auto& [name, cfg] : models) s.models.push_back({name, parse_fit_config(json::parse(cfg))});
    s.folds = folds;
    s.seed = seed;
    s.phi.membership_draws = membership_draws;
    s.phi.max_posterior_draws = max_draws;
    s.baseline = baseline;
    py::gil_scoped_release release;
    return to_json(cross_validate(data, s)).dump();
  }, py::arg("panel"), py::arg("models"), py::arg("folds") = 4, py::arg("seed") = 1,
     py::arg("membership_draws") = 20, py::arg("max_draws") = 0, py::arg("baseline") = true);

  m.def("age_quantile", &age_quantile, py::arg("beta0"), py::arg("beta1"), py::arg("q"),
        py::arg("offset") = kDefaultAgeOffset);

  m.def("run_cli", [](const std::vector<std::string>& args) {
    std::ostringstream out, err;
    int code = 0;
    {
      py::gil_scoped_release release;
      code = run_cli(args, out, err);
    }
    return py::make_tuple(code, out.str(), err.str());
  }, py::arg("args"), "Runs a tgom command line; returns (exit code, stdout, stderr)");
}
