#pragma once

#include <iosfwd>
#include <optional>
#include <string>

#include "stattest/hardness.hpp"
#include "stattest/model.hpp"
#include "stattest/numkit.hpp"

// JSON file formats and run configuration shared by the command-line tools
// and the tests. Numbers are IEEE-754 doubles emitted in shortest
// round-trip decimal form, so serialize -> parse is field-exact.
//
//   network  {"units":[{"u":f64,"w":[f64...]}...]}
//   dataset  {"points":[[f64...]...],"labels":[f64...],"bias_appended":bool}
//   loss     {"kind":"square"|"identity"|"logistic","l_lip":f64?,"lg_lip":f64?}
//   plt      {"m":int,"vectors":[[int...]...]}
//   anf      {"a":[f64...],"b":[f64...],"Z":[[f64...]...],"L":[[f64...]...]}

namespace stattest::io {

struct Guards {
  int cell_ties = 20;              // oracle cell enumeration
  long long gp_subsets = 1'000'000; // general-position subsets
  int sat_vars = 20;               // brute-force SAT / exhaustive PLT
  int plt_clauses = 12;            // certificate-mode selections
  int anft_switches = 16;          // ANFT signatures
};

struct RunConfig {
  numkit::SolverOptions solver;
  Guards guards;
  uint64_t seed = 0;
  enum class Output { text, json } output = Output::text;
};

/// Parses a RunConfig JSON ({"rank_rel_tol":..., "qp_tol":..., "feas_tol":...,
/// "margin_tol":..., "guards":{...}, "seed":..., "output":"text"|"json"});
/// absent fields keep their defaults.
RunConfig load_run_config(const std::string& path);
/// Reads the config named by STATTEST_CONFIG, when set.
std::optional<RunConfig> run_config_from_env();

model::Network read_network(const std::string& path);
void write_network(const model::Network& net, const std::string& path);

model::Dataset read_dataset(const std::string& path);
void write_dataset(const model::Dataset& data, const std::string& path);

/// Built-in kinds only; l_lip / lg_lip override the defaults when present.
model::LossModel read_loss(const std::string& path);
void write_loss(const model::LossModel& loss, const std::string& path);

hardness::PltInstance read_plt(const std::string& path);
void write_plt(const hardness::PltInstance& inst, const std::string& path);

hardness::AbsNormalForm read_abs_normal(const std::string& path);
void write_abs_normal(const hardness::AbsNormalForm& anf, const std::string& path);

// string-level variants used by the round-trip tests
std::string network_to_json(const model::Network& net);
model::Network network_from_json(const std::string& text);
std::string dataset_to_json(const model::Dataset& data);
model::Dataset dataset_from_json(const std::string& text);
std::string plt_to_json(const hardness::PltInstance& inst);
hardness::PltInstance plt_from_json(const std::string& text);
std::string abs_normal_to_json(const hardness::AbsNormalForm& anf);
hardness::AbsNormalForm abs_normal_from_json(const std::string& text);

}  // namespace stattest::io
