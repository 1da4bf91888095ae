#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "stattest/io.hpp"

namespace stattest::io {

namespace {

using nlohmann::json;

json parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw io_error(path + ": " + e.what());
  }
  return j;
}

void write_file(const json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write " + path);
  out << j.dump(2) << '\n';
}

json parse_text(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw io_error(std::string("json: ") + e.what());
  }
}

template <typename T>
T field(const json& j, const char* name) {
  if (!j.contains(name)) throw io_error(std::string("missing field: ") + name);
  try {
    return j.at(name).get<T>();
  } catch (const json::exception& e) {
    throw io_error(std::string("field ") + name + ": " + e.what());
  }
}

Eigen::VectorXd to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), v.size());
}

std::vector<double> from_vector(const Eigen::VectorXd& v) {
  return {v.data(), v.data() + v.size()};
}

json network_json(const model::Network& net) {
  json units = json::array();
  for (const auto& unit : net.units)
    units.push_back({{"u", unit.u}, {"w", from_vector(unit.w)}});
  return {{"units", units}};
}

model::Network network_from(const json& j) {
  model::Network net;
  for (const auto& ju : field<json>(j, "units")) {
    model::Network::Unit unit;
    unit.u = field<double>(ju, "u");
    unit.w = to_vector(field<std::vector<double>>(ju, "w"));
    net.units.push_back(std::move(unit));
  }
  try {
    net.validate();
  } catch (const std::invalid_argument& e) {
    throw io_error(e.what());
  }
  return net;
}

json dataset_json(const model::Dataset& data) {
  json pts = json::array();
  for (const auto& x : data.points) pts.push_back(from_vector(x));
  return {{"points", pts}, {"labels", data.labels}, {"bias_appended", data.bias_appended}};
}

model::Dataset dataset_from(const json& j) {
  model::Dataset data;
  for (const auto& jp : field<json>(j, "points"))
    data.points.push_back(to_vector(jp.get<std::vector<double>>()));
  data.labels = field<std::vector<double>>(j, "labels");
  data.bias_appended = field<bool>(j, "bias_appended");
  try {
    data.validate();
  } catch (const std::invalid_argument& e) {
    throw io_error(e.what());
  }
  return data;
}

json plt_json(const hardness::PltInstance& inst) {
  json vecs = json::array();
  for (const auto& y : inst.vectors)
    vecs.push_back(std::vector<int>(y.data(), y.data() + y.size()));
  return {{"m", inst.dim}, {"vectors", vecs}};
}

hardness::PltInstance plt_from(const json& j) {
  hardness::PltInstance inst;
  inst.dim = field<int>(j, "m");
  for (const auto& jv : field<json>(j, "vectors")) {
    const auto v = jv.get<std::vector<int>>();
    inst.vectors.push_back(Eigen::Map<const Eigen::VectorXi>(v.data(), v.size()));
  }
  try {
    inst.validate();
  } catch (const std::invalid_argument& e) {
    throw io_error(e.what());
  }
  return inst;
}

json matrix_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (int i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from(const json& j, const char* name) {
  if (!j.is_array()) throw io_error(std::string(name) + ": expected an array of rows");
  const int rows = static_cast<int>(j.size());
  int cols = -1;
  Eigen::MatrixXd m;
  for (int i = 0; i < rows; ++i) {
    const auto row = j.at(i).get<std::vector<double>>();
    if (cols < 0) {
      cols = static_cast<int>(row.size());
      m.resize(rows, cols);
    }
    if (static_cast<int>(row.size()) != cols)
      throw io_error(std::string(name) + ": ragged rows");
    for (int c = 0; c < cols; ++c) m(i, c) = row[c];
  }
  if (rows == 0) m.resize(0, 0);
  return m;
}

json anf_json(const hardness::AbsNormalForm& anf) {
  return {{"a", from_vector(anf.a)},
          {"b", from_vector(anf.b)},
          {"Z", matrix_json(anf.Z)},
          {"L", matrix_json(anf.L)}};
}

hardness::AbsNormalForm anf_from(const json& j) {
  hardness::AbsNormalForm anf;
  anf.a = to_vector(field<std::vector<double>>(j, "a"));
  anf.b = to_vector(field<std::vector<double>>(j, "b"));
  anf.Z = matrix_from(field<json>(j, "Z"), "Z");
  anf.L = matrix_from(field<json>(j, "L"), "L");
  try {
    anf.validate();
  } catch (const std::invalid_argument& e) {
    throw io_error(e.what());
  }
  return anf;
}

}  // namespace

RunConfig load_run_config(const std::string& path) {
  const json j = parse_file(path);
  RunConfig cfg;
  if (j.contains("rank_rel_tol")) cfg.solver.rank_rel_tol = j.at("rank_rel_tol").get<double>();
  if (j.contains("qp_tol")) cfg.solver.qp_tol = j.at("qp_tol").get<double>();
  if (j.contains("feas_tol")) cfg.solver.feas_tol = j.at("feas_tol").get<double>();
  if (j.contains("margin_tol")) cfg.solver.margin_tol = j.at("margin_tol").get<double>();
  if (j.contains("max_iter")) cfg.solver.max_iter = j.at("max_iter").get<int>();
  if (j.contains("guards")) {
    const json& g = j.at("guards");
    if (g.contains("cell_ties")) cfg.guards.cell_ties = g.at("cell_ties").get<int>();
    if (g.contains("gp_subsets")) cfg.guards.gp_subsets = g.at("gp_subsets").get<long long>();
    if (g.contains("sat_vars")) cfg.guards.sat_vars = g.at("sat_vars").get<int>();
    if (g.contains("plt_clauses")) cfg.guards.plt_clauses = g.at("plt_clauses").get<int>();
    if (g.contains("anft_switches"))
      cfg.guards.anft_switches = g.at("anft_switches").get<int>();
  }
  if (j.contains("seed")) cfg.seed = j.at("seed").get<uint64_t>();
  if (j.contains("output")) {
    const auto s = j.at("output").get<std::string>();
    if (s == "json") cfg.output = RunConfig::Output::json;
    else if (s == "text") cfg.output = RunConfig::Output::text;
    else throw io_error("config: output must be \"text\" or \"json\"");
  }
  if (!(cfg.solver.qp_tol > 0) || !(cfg.solver.feas_tol > 0) || !(cfg.solver.margin_tol > 0) ||
      !(cfg.solver.rank_rel_tol > 0))
    throw io_error("config: tolerances must be positive");
  return cfg;
}

std::optional<RunConfig> run_config_from_env() {
  const char* path = std::getenv("STATTEST_CONFIG");
  if (path == nullptr || *path == '\0') return std::nullopt;
  return load_run_config(path);
}

model::Network read_network(const std::string& path) { return network_from(parse_file(path)); }
void write_network(const model::Network& net, const std::string& path) {
  write_file(network_json(net), path);
}

model::Dataset read_dataset(const std::string& path) { return dataset_from(parse_file(path)); }
void write_dataset(const model::Dataset& data, const std::string& path) {
  write_file(dataset_json(data), path);
}

model::LossModel read_loss(const std::string& path) {
  const json j = parse_file(path);
  const auto kind = field<std::string>(j, "kind");
  model::LossModel loss;
  try {
    loss = model::LossModel::by_name(kind);
  } catch (const std::invalid_argument& e) {
    throw io_error(e.what());
  }
  if (j.contains("l_lip")) loss.value_lip = j.at("l_lip").get<double>();
  if (j.contains("lg_lip")) loss.grad_lip = j.at("lg_lip").get<double>();
  return loss;
}

void write_loss(const model::LossModel& loss, const std::string& path) {
  std::string kind;
  switch (loss.kind) {
    case model::LossModel::Kind::square: kind = "square"; break;
    case model::LossModel::Kind::identity: kind = "identity"; break;
    case model::LossModel::Kind::logistic: kind = "logistic"; break;
    case model::LossModel::Kind::custom:
      throw io_error("custom losses are not serializable");
  }
  write_file(json{{"kind", kind}, {"l_lip", loss.value_lip}, {"lg_lip", loss.grad_lip}}, path);
}

hardness::PltInstance read_plt(const std::string& path) { return plt_from(parse_file(path)); }
void write_plt(const hardness::PltInstance& inst, const std::string& path) {
  write_file(plt_json(inst), path);
}

hardness::AbsNormalForm read_abs_normal(const std::string& path) {
  return anf_from(parse_file(path));
}
void write_abs_normal(const hardness::AbsNormalForm& anf, const std::string& path) {
  write_file(anf_json(anf), path);
}

std::string network_to_json(const model::Network& net) { return network_json(net).dump(); }
model::Network network_from_json(const std::string& text) {
  return network_from(parse_text(text));
}
std::string dataset_to_json(const model::Dataset& data) { return dataset_json(data).dump(); }
model::Dataset dataset_from_json(const std::string& text) {
  return dataset_from(parse_text(text));
}
std::string plt_to_json(const hardness::PltInstance& inst) { return plt_json(inst).dump(); }
hardness::PltInstance plt_from_json(const std::string& text) {
  return plt_from(parse_text(text));
}
std::string abs_normal_to_json(const hardness::AbsNormalForm& anf) {
  return anf_json(anf).dump();
}
hardness::AbsNormalForm abs_normal_from_json(const std::string& text) {
  return anf_from(parse_text(text));
}

}  // namespace stattest::io
