// Command-line surface for the stationarity testing library: exact and
// robust tests, oracle cross-checks, hardness instance generation and
// verification, and a demonstration subgradient trainer that stops on a
// robust certificate.
//
// Exit codes are a stable contract: 0 success, 1 I/O or input error,
// 2 span qualification fails (exact test), 3 guard exceeded, 4 iteration
// cap reached (train).

#include <cinttypes>
#include <fstream>
#include <cmath>
#include <cstdio>
#include <optional>
#include <random>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "stattest/exact.hpp"
#include "stattest/hardness.hpp"
#include "stattest/io.hpp"
#include "stattest/oracle.hpp"
#include "stattest/robust.hpp"

namespace {

using nlohmann::json;
using namespace stattest;

constexpr int kExitOk = 0;
constexpr int kExitIo = 1;
constexpr int kExitNotSq = 2;
constexpr int kExitGuard = 3;
constexpr int kExitCap = 4;

struct CommonArgs {
  std::string net_path, data_path, loss_path;
  std::string kind = "clarke";
  std::string output;
  std::optional<double> tol_rank, tol_qp, tol_feas, tol_margin;
};

void add_tol_flags(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--tol-rank", args.tol_rank, "rank decision tolerance (relative)");
  cmd->add_option("--tol-qp", args.tol_qp, "QP KKT residual tolerance");
  cmd->add_option("--tol-feas", args.tol_feas, "feasibility tolerance");
  cmd->add_option("--tol-margin", args.tol_margin, "strict-inequality margin tolerance");
  cmd->add_option("--output", args.output, "report format: text or json");
}

io::RunConfig effective_config(const CommonArgs& args) {
  io::RunConfig cfg;
  if (auto env = io::run_config_from_env()) cfg = *env;
  if (args.tol_rank) cfg.solver.rank_rel_tol = *args.tol_rank;
  if (args.tol_qp) cfg.solver.qp_tol = *args.tol_qp;
  if (args.tol_feas) cfg.solver.feas_tol = *args.tol_feas;
  if (args.tol_margin) cfg.solver.margin_tol = *args.tol_margin;
  if (args.output == "json") cfg.output = io::RunConfig::Output::json;
  else if (args.output == "text") cfg.output = io::RunConfig::Output::text;
  else if (!args.output.empty()) throw io_error("--output must be text or json");
  return cfg;
}

exact::TestKind parse_kind(const std::string& kind) {
  if (kind == "clarke") return exact::TestKind::clarke;
  if (kind == "frechet") return exact::TestKind::frechet;
  throw io_error("--kind must be clarke or frechet");
}

json sq_json(const chain::SqReport& sq) {
  json units = json::array();
  for (const auto& u : sq.units)
    units.push_back({{"rank_nonneg", u.rank_nonneg},
                     {"rank_neg", u.rank_neg},
                     {"rank_joint", u.rank_joint},
                     {"sq", u.sq}});
  return {{"overall", sq.overall}, {"units", units}};
}

void print_sq(const chain::SqReport& sq) {
  std::printf("span qualification: %s\n", sq.overall ? "holds" : "FAILS");
  for (size_t k = 0; k < sq.units.size(); ++k)
    std::printf("  unit %zu: rank+=%d rank-=%d joint=%d -> %s\n", k, sq.units[k].rank_nonneg,
                sq.units[k].rank_neg, sq.units[k].rank_joint, sq.units[k].sq ? "ok" : "violated");
}

int cmd_exact(const CommonArgs& args) {
  const auto cfg = effective_config(args);
  const auto net = io::read_network(args.net_path);
  const auto data = io::read_dataset(args.data_path);
  const auto loss = io::read_loss(args.loss_path);
  const auto kind = parse_kind(args.kind);
  const auto res = exact::etest(kind, net, data, loss, cfg.solver);

  if (cfg.output == io::RunConfig::Output::json) {
    json j{{"kind", args.kind}, {"sq", sq_json(res.sq)}};
    switch (res.status) {
      case exact::ExactTestResult::Status::not_sq: j["status"] = "not-SQ"; break;
      case exact::ExactTestResult::Status::infinite: j["status"] = "infinite"; break;
      case exact::ExactTestResult::Status::value: {
        j["status"] = "value";
        j["epsilon"] = res.epsilon;
        json units = json::array();
        for (const auto& u : res.units)
          units.push_back({{"u_gap", u.u_gap}, {"w_dist", u.w_dist}});
        j["units"] = units;
        break;
      }
    }
    std::printf("%s\n", j.dump(2).c_str());
  } else {
    print_sq(res.sq);
    switch (res.status) {
      case exact::ExactTestResult::Status::not_sq:
        std::printf("result: not-SQ (chain-rule formula not exact here)\n");
        break;
      case exact::ExactTestResult::Status::infinite:
        std::printf("result: +inf (a tied sample with negative u*rho empties the set)\n");
        break;
      case exact::ExactTestResult::Status::value:
        std::printf("result: epsilon = %.17g\n", res.epsilon);
        for (size_t k = 0; k < res.units.size(); ++k)
          std::printf("  unit %zu: |u-component| = %.17g, dist = %.17g\n", k, res.units[k].u_gap,
                      res.units[k].w_dist);
        break;
    }
  }
  return res.status == exact::ExactTestResult::Status::not_sq ? kExitNotSq : kExitOk;
}

const char* robust_status(const robust::RobustResult& r) {
  switch (r.status) {
    case robust::RobustResult::Status::value: return "value";
    case robust::RobustResult::Status::not_sq: return "not-SQ";
    case robust::RobustResult::Status::infinite:
      switch (r.reason) {
        case robust::RobustResult::InfiniteReason::rounding_infeasible:
          return "+inf (rounding infeasible)";
        case robust::RobustResult::InfiniteReason::moved_too_far:
          return "+inf (rounded point moved past delta)";
        case robust::RobustResult::InfiniteReason::frechet_empty:
          return "+inf (empty regular subdifferential)";
        default: return "+inf";
      }
  }
  return "?";
}

int cmd_robust(const CommonArgs& args, double delta0, int max_iters) {
  const auto cfg = effective_config(args);
  const auto net = io::read_network(args.net_path);
  const auto data = io::read_dataset(args.data_path);
  const auto loss = io::read_loss(args.loss_path);
  const auto kind = parse_kind(args.kind);

  if (kind == exact::TestKind::frechet) {
    // the certified Frechet bound presumes nonzero loss slopes on every
    // sample touching a tie; warn when the input point violates that
    const auto rp = model::rho_and_partition(net, data, loss);
    bool degenerate = false;
    for (int k = 0; k < net.width(); ++k)
      for (const int i : rp.partition.units[k].eq) degenerate |= rp.rho(i) == 0.0;
    if (degenerate)
      std::printf("warning: zero loss slope on a tied sample; the certified bound "
                  "does not cover this point\n");
  }

  const auto trace = robust::line_search(kind, net, data, loss, delta0, max_iters, cfg.solver);
  const auto bundle = robust::constants(data, loss, net.norm() + delta0, net.width());
  const double c_mu =
      kind == exact::TestKind::clarke ? bundle.clarke.c_mu : bundle.frechet.c_mu;

  if (cfg.output == io::RunConfig::Output::json) {
    json steps = json::array();
    for (const auto& s : trace.steps) {
      json js{{"delta", s.delta},
              {"status", robust_status(s.result)},
              {"rounding_identity", s.rounding_identity}};
      if (s.result.is_value()) js["epsilon"] = s.result.epsilon;
      steps.push_back(std::move(js));
    }
    json j{{"kind", args.kind},
           {"steps", steps},
           {"constants",
            {{"R", bundle.radius},
             {"B", bundle.norm_bound},
             {"c_mu", c_mu},
             {"c_u", bundle.c_u}}}};
    if (trace.best)
      j["best"] = {{"epsilon", trace.best->first}, {"delta", trace.best->second}};
    std::printf("%s\n", j.dump(2).c_str());
  } else {
    std::printf("constants: R=%.17g B=%.17g c_mu=%.17g c_u=%.17g\n", bundle.radius,
                bundle.norm_bound, c_mu, bundle.c_u);
    for (const auto& s : trace.steps) {
      if (s.result.is_value())
        std::printf("delta=%.17g -> epsilon=%.17g%s  [bound epsilon + c_mu*delta = %.17g]\n",
                    s.delta, s.result.epsilon, s.rounding_identity ? " (identity rounding)" : "",
                    s.result.epsilon + c_mu * s.delta);
      else
        std::printf("delta=%.17g -> %s\n", s.delta, robust_status(s.result));
    }
    if (trace.best)
      std::printf("best certificate: (epsilon, delta) = (%.17g, %.17g)\n", trace.best->first,
                  trace.best->second);
    else
      std::printf("no finite certificate found\n");
  }
  return kExitOk;
}

int cmd_oracle_compare(const CommonArgs& args) {
  const auto cfg = effective_config(args);
  const auto net = io::read_network(args.net_path);
  const auto data = io::read_dataset(args.data_path);
  const auto loss = io::read_loss(args.loss_path);

  const auto formula = exact::etest_clarke(net, data, loss, cfg.solver);
  const double oracle_dist =
      oracle::clarke_oracle_distance(net, data, loss, cfg.solver, cfg.guards.cell_ties);
  std::printf("oracle Clarke distance:  %.17g\n", oracle_dist);
  if (formula.status == exact::ExactTestResult::Status::value) {
    std::printf("formula Clarke distance: %.17g\n", formula.epsilon);
    std::printf("agreement: %s (|diff| = %.3g)\n",
                std::abs(formula.epsilon - oracle_dist) <= 1e-7 ? "yes" : "NO",
                std::abs(formula.epsilon - oracle_dist));
  } else {
    std::printf("formula Clarke distance: not-SQ (formula set is a strict superset here)\n");
  }

  const auto fre = exact::etest_frechet(net, data, loss, cfg.solver);
  if (fre.status == exact::ExactTestResult::Status::value) {
    const bool member =
        oracle::frechet_oracle_check(*fre.minimizer, net, data, loss, cfg.solver,
                                     cfg.guards.cell_ties);
    std::printf("frechet minimizer (norm %.17g) oracle membership: %s\n", fre.epsilon,
                member ? "confirmed" : "REFUTED");
  } else if (fre.status == exact::ExactTestResult::Status::infinite) {
    const bool zero_member = oracle::frechet_oracle_check(
        Eigen::VectorXd::Zero(net.param_count()), net, data, loss, cfg.solver,
        cfg.guards.cell_ties);
    std::printf("frechet set empty by formula; oracle membership of 0: %s\n",
                zero_member ? "MEMBER (disagreement)" : "refuted (consistent)");
  } else {
    std::printf("frechet formula: not-SQ\n");
  }
  return kExitOk;
}

int cmd_hardness_gen(const std::string& cnf_path, const std::string& out_path) {
  std::ifstream in(cnf_path);
  if (!in) throw io_error("cannot open " + cnf_path);
  const auto cnf = hardness::parse_dimacs(in);
  const auto inst = hardness::sat_to_plt(cnf);
  io::write_plt(inst, out_path);
  std::printf("wrote %zu vectors (m=%d, %d clauses) to %s\n", inst.vectors.size(), inst.dim,
              inst.clause_count(), out_path.c_str());
  return kExitOk;
}

int cmd_hardness_check(const std::string& cnf_path, const std::string& mode) {
  std::ifstream in(cnf_path);
  if (!in) throw io_error("cannot open " + cnf_path);
  const auto cnf = hardness::parse_dimacs(in);
  const auto inst = hardness::sat_to_plt(cnf);
  const bool sat = hardness::brute_sat(cnf);
  std::printf("%s\n", sat ? "SAT" : "UNSAT");
  bool stationary = false;
  if (mode == "exhaustive" || mode == "both") {
    stationary = hardness::plt_stationary(inst, 0.0, hardness::PltMode::exhaustive);
    std::printf("stationary (exhaustive): %s\n", stationary ? "true" : "false");
  }
  if (mode == "certificate" || mode == "both") {
    stationary = hardness::plt_stationary(inst, 0.0, hardness::PltMode::certificate);
    std::printf("stationary (certificate): %s\n", stationary ? "true" : "false");
  }
  if (sat == stationary) {
    std::printf("ERROR: satisfiability and stationarity fail to complement\n");
    return kExitIo;
  }
  std::printf("complement relation holds\n");
  return kExitOk;
}

int cmd_hardness_anft(const std::string& cnf_path, const std::string& plt_path,
                      const std::string& write_anf) {
  hardness::PltInstance inst;
  if (!plt_path.empty()) {
    inst = io::read_plt(plt_path);
  } else {
    std::ifstream in(cnf_path);
    if (!in) throw io_error("cannot open " + cnf_path);
    inst = hardness::sat_to_plt(hardness::parse_dimacs(in));
  }
  const auto anf = hardness::plt_to_abs_normal(inst);
  if (!write_anf.empty()) io::write_abs_normal(anf, write_anf);
  const bool refuted = hardness::anft_check(anf);
  std::printf("switching variables: %d\n", anf.switches());
  std::printf("first-order minimality: %s\n", refuted ? "refuted (origin not stationary)"
                                                      : "holds (origin stationary)");
  return kExitOk;
}

int cmd_train(const std::string& data_path, const std::string& loss_path,
              const std::string& net_path, int width, uint64_t seed, const std::string& kind_name,
              double step0, const std::string& decay, int max_iters, int probe_every,
              double eps_target, double delta_target, double delta0, int ls_iters) {
  const auto data = io::read_dataset(data_path);
  const auto loss = io::read_loss(loss_path);
  const auto kind = parse_kind(kind_name);

  model::Network net;
  if (!net_path.empty()) {
    net = io::read_network(net_path);
  } else {
    if (width < 1) throw io_error("train: give --net or a positive --width");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    net.units.resize(width);
    for (auto& unit : net.units) {
      unit.u = unif(rng);
      unit.w.resize(data.dim());
      for (int j = 0; j < data.dim(); ++j) unit.w(j) = unif(rng);
    }
  }
  model::check_compatible(net, data);

  std::optional<std::pair<double, double>> best;
  for (int t = 1; t <= max_iters; ++t) {
    // subgradient selection: tied activations treated as inactive
    const auto rp = model::rho_and_partition(net, data, loss);
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(net.param_count());
    for (int k = 0; k < net.width(); ++k) {
      double gu = 0.0;
      Eigen::VectorXd gw = Eigen::VectorXd::Zero(data.dim());
      for (int i = 0; i < data.size(); ++i) {
        const double dot = numkit::dot_ascending(net.units[k].w, data.points[i]);
        gu += rp.rho(i) * std::max(dot, 0.0);
        if (dot > 0.0) gw += rp.rho(i) * net.units[k].u * data.points[i];
      }
      grad(k * (data.dim() + 1)) = gu;
      grad.segment(k * (data.dim() + 1) + 1, data.dim()) = gw;
    }
    double step = step0;
    if (decay == "inv_t") step = step0 / t;
    else if (decay == "inv_sqrt") step = step0 / std::sqrt(static_cast<double>(t));
    else if (decay != "constant") throw io_error("--decay must be constant, inv_t or inv_sqrt");
    net = model::Network::unpack(net.pack() - step * grad, data.dim());

    if (t % probe_every == 0) {
      const auto trace = robust::line_search(kind, net, data, loss, delta0, ls_iters);
      std::printf("iter %d: loss=%.17g", t, model::eval_loss(net, data, loss));
      if (trace.best) {
        std::printf(" certificate=(%.17g, %.17g)\n", trace.best->first, trace.best->second);
        if (!best || *trace.best < *best) best = trace.best;
        if (trace.best->first <= eps_target && trace.best->second <= delta_target) {
          std::printf("terminated: certificate within targets (%.17g <= %.17g, %.17g <= %.17g)\n",
                      trace.best->first, eps_target, trace.best->second, delta_target);
          return kExitOk;
        }
      } else {
        std::printf(" certificate=none\n");
      }
    }
  }
  if (best)
    std::printf("cap reached: best certificate (%.17g, %.17g)\n", best->first, best->second);
  else
    std::printf("cap reached: no finite certificate\n");
  return kExitCap;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stationarity tests for two-layer ReLU empirical losses"};
  app.require_subcommand(1);

  CommonArgs args;
  double delta0 = 1.0;
  int max_iters = 60;

  auto* exact_cmd = app.add_subcommand("exact", "exact stationarity test at the given point");
  exact_cmd->add_option("--kind", args.kind, "clarke or frechet");
  exact_cmd->add_option("--net", args.net_path, "network JSON")->required();
  exact_cmd->add_option("--data", args.data_path, "dataset JSON")->required();
  exact_cmd->add_option("--loss", args.loss_path, "loss JSON")->required();
  add_tol_flags(exact_cmd, args);

  auto* robust_cmd =
      app.add_subcommand("robust", "robust test with a halving line search over the radius");
  robust_cmd->add_option("--kind", args.kind, "clarke or frechet");
  robust_cmd->add_option("--net", args.net_path, "network JSON")->required();
  robust_cmd->add_option("--data", args.data_path, "dataset JSON")->required();
  robust_cmd->add_option("--loss", args.loss_path, "loss JSON")->required();
  robust_cmd->add_option("--delta0", delta0, "initial rounding radius")->required();
  robust_cmd->add_option("--max-iters", max_iters, "line search cap");
  add_tol_flags(robust_cmd, args);

  auto* oracle_cmd = app.add_subcommand("oracle", "brute-force cross-checks");
  oracle_cmd->require_subcommand(1);
  auto* compare_cmd = oracle_cmd->add_subcommand("compare", "formula vs oracle distances");
  compare_cmd->add_option("--net", args.net_path)->required();
  compare_cmd->add_option("--data", args.data_path)->required();
  compare_cmd->add_option("--loss", args.loss_path)->required();
  add_tol_flags(compare_cmd, args);

  auto* hard_cmd = app.add_subcommand("hardness", "reduction instances and their checkers");
  hard_cmd->require_subcommand(1);
  std::string cnf_path, out_path, plt_path, write_anf, mode = "both";
  auto* gen_cmd = hard_cmd->add_subcommand("gen", "CNF -> piecewise-linear instance JSON");
  gen_cmd->add_option("--cnf", cnf_path, "DIMACS CNF input")->required();
  gen_cmd->add_option("--out", out_path, "instance JSON output")->required();
  auto* check_cmd =
      hard_cmd->add_subcommand("check", "satisfiability vs stationarity complement");
  check_cmd->add_option("--cnf", cnf_path, "DIMACS CNF input")->required();
  check_cmd->add_option("--mode", mode, "exhaustive, certificate or both");
  auto* anft_cmd = hard_cmd->add_subcommand("anft", "first-order minimality of the encoding");
  anft_cmd->add_option("--cnf", cnf_path, "DIMACS CNF input");
  anft_cmd->add_option("--plt", plt_path, "instance JSON input");
  anft_cmd->add_option("--write-anf", write_anf, "also write the abs-normal JSON here");

  auto* train_cmd =
      app.add_subcommand("train", "subgradient descent with certificate termination");
  std::string train_net, train_decay = "inv_t", train_kind = "clarke";
  int train_width = 0, train_iters = 1000, probe_every = 50, ls_iters = 40;
  uint64_t train_seed = 0;
  double step0 = 0.1, eps_target = 1e-6, delta_target = 1.0, train_delta0 = 1.0;
  train_cmd->add_option("--data", args.data_path)->required();
  train_cmd->add_option("--loss", args.loss_path)->required();
  train_cmd->add_option("--net", train_net, "starting network (otherwise random)");
  train_cmd->add_option("--width", train_width, "hidden width for a random start");
  train_cmd->add_option("--seed", train_seed, "random start seed");
  train_cmd->add_option("--kind", train_kind, "certificate kind");
  train_cmd->add_option("--step0", step0, "base step size");
  train_cmd->add_option("--decay", train_decay, "constant, inv_t or inv_sqrt");
  train_cmd->add_option("--max-iters", train_iters, "iteration cap");
  train_cmd->add_option("--probe-every", probe_every, "certificate probe period");
  train_cmd->add_option("--eps-target", eps_target, "target epsilon");
  train_cmd->add_option("--delta-target", delta_target, "target delta");
  train_cmd->add_option("--delta0", train_delta0, "probe line-search start radius");
  train_cmd->add_option("--ls-iters", ls_iters, "probe line-search cap");

  CLI11_PARSE(app, argc, argv);

  try {
    if (exact_cmd->parsed()) return cmd_exact(args);
    if (robust_cmd->parsed()) return cmd_robust(args, delta0, max_iters);
    if (compare_cmd->parsed()) return cmd_oracle_compare(args);
    if (gen_cmd->parsed()) return cmd_hardness_gen(cnf_path, out_path);
    if (check_cmd->parsed()) return cmd_hardness_check(cnf_path, mode);
    if (anft_cmd->parsed()) {
      if (cnf_path.empty() && plt_path.empty()) throw io_error("anft: give --cnf or --plt");
      return cmd_hardness_anft(cnf_path, plt_path, write_anf);
    }
    if (train_cmd->parsed())
      return cmd_train(args.data_path, args.loss_path, train_net, train_width, train_seed,
                       train_kind, step0, train_decay, train_iters, probe_every, eps_target,
                       delta_target, train_delta0, ls_iters);
    std::fprintf(stderr, "no subcommand\n");
    return kExitIo;
  } catch (const guard_error& e) {
    std::fprintf(stderr, "guard exceeded: %s\n", e.what());
    return kExitGuard;
  } catch (const io_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitIo;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitIo;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitIo;
  }
}
