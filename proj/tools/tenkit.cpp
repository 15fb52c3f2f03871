// Command-line front end: decompose / tucker / check / crb / synth / bench,
// all emitting a JSON run report to stdout or --out.

#include <CLI11.hpp>
#include <chrono>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <sstream>

#include "tenkit/bench.hpp"
#include "tenkit/cpd.hpp"
#include "tenkit/crb.hpp"
#include "tenkit/fixtures.hpp"
#include "tenkit/io.hpp"
#include "tenkit/kernels.hpp"
#include "tenkit/ops.hpp"
#include "tenkit/tucker.hpp"
#include "tenkit/uniqueness.hpp"

using nlohmann::json;
using namespace tenkit;

namespace {

json factors_to_json(const KruskalModel& m) {
  json out;
  out["rank"] = m.rank();
  out["weights"] = std::vector<double>(m.weights.data(),
                                       m.weights.data() + m.weights.size());
  json factors = json::array();
  for (const auto& a : m.factors) {
    json f;
    f["rows"] = a.rows();
    f["cols"] = a.cols();
    f["data_colmajor"] = std::vector<double>(a.data(), a.data() + a.size());
    factors.push_back(f);
  }
  out["factors"] = factors;
  return out;
}

KruskalModel factors_from_json(const json& j) {
  std::vector<Matrix> factors;
  for (const auto& f : j.at("factors")) {
    const index_t rows = f.at("rows").get<index_t>();
    const index_t cols = f.at("cols").get<index_t>();
    const auto data = f.at("data_colmajor").get<std::vector<double>>();
    if (static_cast<index_t>(data.size()) != rows * cols)
      throw std::runtime_error("model json: factor size mismatch");
    factors.push_back(Eigen::Map<const Matrix>(data.data(), rows, cols));
  }
  const auto weights = j.at("weights").get<std::vector<double>>();
  return KruskalModel(std::move(factors),
                      Eigen::Map<const Vector>(weights.data(),
                                               weights.size()));
}

json report_from_fit(const FitReport& rep) {
  json out;
  out["sweeps"] = rep.sweeps;
  out["loss_trajectory"] = rep.loss_trajectory;
  out["terminal_loss"] =
      rep.loss_trajectory.empty() ? 0.0 : rep.loss_trajectory.back();
  out["terminal_relative_change"] = rep.terminal_relative_change;
  out["diverged"] = rep.diverged;
  out["max_column_norm_trajectory"] = rep.max_column_norm_trajectory;
  out["ridge_applied"] = rep.ridge_applied;
  out["rank_overspecified"] = rep.rank_overspecified;
  out["gevd_used"] = rep.gevd_used;
  out["best_restart"] = rep.best_restart;
  out["wall_seconds"] = rep.wall_time_seconds;
  if (!rep.skipped_rows.empty()) {
    json skipped = json::array();
    for (auto [mode, row] : rep.skipped_rows)
      skipped.push_back({{"mode", mode}, {"row", row}});
    out["skipped_rows"] = skipped;
  }
  return out;
}

TensorReadResult load_input(const std::string& source, json& report) {
  if (source.rfind("fixture:", 0) == 0) {
    const std::string name = source.substr(8);
    TensorReadResult result;
    if (name == "complexmult") {
      result.tensor = complex_mult_fixture().tensor;
    } else if (name == "strassen") {
      result.tensor = strassen_fixture();
    } else if (name == "borderrank") {
      Vector u = Vector::Zero(3), v = Vector::Zero(3);
      u(0) = 1.0;
      v(1) = 1.0;
      result.tensor = border_rank_tensor(u, v);
    } else {
      throw CLI::ValidationError("unknown fixture '" + name + "'");
    }
    report["input"] = source;
    return result;
  }
  TensorReadResult result = read_tensor(source);
  report["input"] = source;
  if (!result.warnings.empty()) report["warnings"] = result.warnings;
  return result;
}

std::vector<index_t> parse_dims(const std::string& csv) {
  std::vector<index_t> dims;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) dims.push_back(std::stoll(item));
  if (dims.empty()) throw CLI::ValidationError("empty dimension list");
  return dims;
}

ConstraintDescriptor parse_constraint(const std::string& text, index_t* mode) {
  // MODE:KIND[:PARAM], 1-based mode
  std::stringstream ss(text);
  std::string mode_s, kind, param;
  std::getline(ss, mode_s, ':');
  std::getline(ss, kind, ':');
  std::getline(ss, param, ':');
  *mode = std::stoll(mode_s) - 1;
  if (kind == "nonnegative") return ConstraintDescriptor::nonnegative();
  if (kind == "simplex") return ConstraintDescriptor::simplex();
  if (kind == "monotone") return ConstraintDescriptor::monotone();
  if (kind == "l1") return ConstraintDescriptor::l1(std::stod(param));
  if (kind == "smooth") return ConstraintDescriptor::smooth(std::stod(param));
  if (kind == "sparsity")
    return ConstraintDescriptor::hard_sparsity(std::stoll(param));
  if (kind == "symmetric")
    return ConstraintDescriptor::symmetric_with(std::stoll(param) - 1);
  throw CLI::ValidationError("unknown constraint kind '" + kind + "'");
}

void emit(const json& report, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << report.dump(2) << "\n";
  } else {
    std::ofstream out(out_path);
    if (!out) throw std::runtime_error("cannot write " + out_path);
    out << report.dump(2) << "\n";
  }
}

std::string verdict_name(Verdict v) {
  switch (v) {
    case Verdict::unique:
      return "unique";
    case Verdict::inconclusive:
      return "inconclusive";
    case Verdict::necessary_condition_violated:
      return "necessary-condition-violated";
  }
  return "?";
}

json verdict_to_json(const UniquenessVerdict& v) {
  json out;
  out["verdict"] = verdict_name(v.verdict);
  out["condition"] = v.condition;
  out["rank"] = v.rank;
  if (!v.k_ranks.empty()) out["k_ranks"] = v.k_ranks;
  if (!v.ranks.empty()) out["ranks"] = v.ranks;
  out["bound_value"] = v.bound_value;
  out["bound_required"] = v.bound_required;
  if (v.generic_rank) out["generic_rank"] = *v.generic_rank;
  out["known_exception"] = v.known_exception;
  if (!v.note.empty()) out["note"] = v.note;
  return out;
}

json crb_to_json(const CrbReport& crb) {
  json out;
  out["mode_traces"] = crb.bound_mode_traces();
  out["total_trace"] = crb.bound_total();
  out["detected_deficiency"] = crb.detected_deficiency;
  out["method"] = crb.structured ? "structured" : "dense-fallback";
  out["psi_pinv_trace"] = crb.psi_pinv_trace;
  switch (crb.noise) {
    case NoiseModel::gaussian:
      out["noise"] = {{"model", "gaussian"}, {"sigma2", crb.noise_parameter}};
      break;
    case NoiseModel::laplacian:
      out["noise"] = {{"model", "laplacian"}, {"b", crb.noise_parameter}};
      break;
    case NoiseModel::cauchy:
      out["noise"] = {{"model", "cauchy"}, {"gamma", crb.noise_parameter}};
      break;
  }
  return out;
}

int run(int argc, char** argv) {
  CLI::App app{"tenkit: tensor decomposition toolkit"};
  app.require_subcommand(1);

  std::string out_path;
  app.add_option("--out", out_path, "write the JSON report here")
      ->capture_default_str();

  // decompose
  auto* dec = app.add_subcommand("decompose", "fit a CP model");
  dec->fallthrough();
  std::string dec_input, dec_init = "random", dec_method = "als";
  std::string dec_mask_path;
  std::vector<std::string> dec_constraints;
  index_t dec_rank = 1, dec_restarts = 1, dec_sweeps = 500;
  uint64_t dec_seed = 0;
  double dec_tol = 1e-8;
  dec->add_option("input", dec_input, "tensor file or fixture:<name>")
      ->required();
  dec->add_option("--rank", dec_rank, "number of components")->required();
  dec->add_option("--init", dec_init, "random | gevd")
      ->check(CLI::IsMember({"random", "gevd"}));
  dec->add_option("--method", dec_method, "als | sgd | em")
      ->check(CLI::IsMember({"als", "sgd", "em"}));
  dec->add_option("--constraint", dec_constraints,
                  "per-mode constraint MODE:KIND[:PARAM], 1-based mode");
  dec->add_option("--missing-mask", dec_mask_path,
                  "dense 0/1 tensor file marking observed entries");
  dec->add_option("--restarts", dec_restarts, "independent starts");
  dec->add_option("--seed", dec_seed, "rng seed");
  dec->add_option("--tol", dec_tol, "relative fit-change tolerance");
  dec->add_option("--max-sweeps", dec_sweeps, "sweep cap");

  // tucker
  auto* tuck = app.add_subcommand("tucker", "orthogonal Tucker / MLSVD");
  tuck->fallthrough();
  std::string tuck_input, tuck_ranks;
  bool tuck_mlsvd_only = false;
  tuck->add_option("input", tuck_input, "tensor file or fixture:<name>")
      ->required();
  tuck->add_option("--ranks", tuck_ranks, "comma-separated mode ranks")
      ->required();
  tuck->add_flag("--mlsvd-only", tuck_mlsvd_only,
                 "skip the alternating refinement");

  // check
  auto* chk = app.add_subcommand("check", "uniqueness verdicts");
  chk->fallthrough();
  std::string chk_dims, chk_kranks, chk_model;
  index_t chk_rank = 0;
  bool chk_generic = false;
  chk->add_option("--dims", chk_dims, "tensor dimensions I,J,K");
  chk->add_option("--rank", chk_rank, "candidate rank F");
  chk->add_flag("--generic", chk_generic, "dimension-generic verdict");
  chk->add_option("--kranks", chk_kranks, "known per-mode k-ranks");
  chk->add_option("--model", chk_model,
                  "JSON run report holding a fitted model");

  // crb
  auto* crb_cmd = app.add_subcommand("crb", "Cramer-Rao bound report");
  crb_cmd->fallthrough();
  std::string crb_dims, crb_model, crb_noise = "gaussian";
  index_t crb_rank = 2;
  uint64_t crb_seed = 0;
  double crb_sigma2 = 1.0, crb_noise_param = 0.0;
  crb_cmd->add_option("--dims", crb_dims, "synthesize a model of these dims");
  crb_cmd->add_option("--rank", crb_rank, "model rank");
  crb_cmd->add_option("--seed", crb_seed, "rng seed for the planted model");
  crb_cmd->add_option("--sigma2", crb_sigma2, "gaussian noise variance");
  crb_cmd->add_option("--model", crb_model, "JSON run report with a model");
  crb_cmd->add_option("--noise", crb_noise, "gaussian | laplacian | cauchy")
      ->check(CLI::IsMember({"gaussian", "laplacian", "cauchy"}));
  crb_cmd->add_option("--noise-param", crb_noise_param,
                      "laplacian b or cauchy gamma");

  // synth
  auto* syn = app.add_subcommand("synth", "generate tensors and fixtures");
  syn->fallthrough();
  std::string syn_dims, syn_fixture, syn_tensor_out, syn_model_out;
  index_t syn_rank = 2;
  uint64_t syn_seed = 0;
  double syn_sigma = 0.0;
  bool syn_binary = false;
  syn->add_option("--dims", syn_dims, "dimensions of the random model");
  syn->add_option("--rank", syn_rank, "components of the random model");
  syn->add_option("--seed", syn_seed, "rng seed");
  syn->add_option("--sigma", syn_sigma, "additive noise std deviation");
  syn->add_option("--fixture", syn_fixture,
                  "complexmult | strassen | borderrank");
  syn->add_option("--tensor-out", syn_tensor_out, "tensor file to write")
      ->required();
  syn->add_option("--model-out", syn_model_out,
                  "JSON file for the planted factors");
  syn->add_flag("--binary", syn_binary, "binary dense payload");

  // bench
  auto* ben = app.add_subcommand("bench", "Monte-Carlo studies");
  ben->fallthrough();
  std::string ben_kind, ben_dims = "2,2,2";
  index_t ben_trials = 1000, ben_rank = 2;
  uint64_t ben_seed = 0;
  double ben_snr = 40.0;
  ben->add_option("kind", ben_kind, "typical-rank | mse-vs-crb")
      ->required()
      ->check(CLI::IsMember({"typical-rank", "mse-vs-crb"}));
  ben->add_option("--dims", ben_dims, "tensor dimensions");
  ben->add_option("--trials", ben_trials, "Monte-Carlo trials");
  ben->add_option("--seed", ben_seed, "master seed");
  ben->add_option("--rank", ben_rank, "model rank (mse-vs-crb)");
  ben->add_option("--snr-db", ben_snr, "signal-to-noise ratio in dB");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // help exits cleanly, usage errors with 2
  }

  json report;
  report["simd"] = kernels::active().name;
  const auto t0 = std::chrono::steady_clock::now();

  if (*dec) {
    report["command"] = "decompose";
    report["options"] = {{"rank", dec_rank},       {"init", dec_init},
                         {"method", dec_method},   {"restarts", dec_restarts},
                         {"seed", dec_seed},       {"tol", dec_tol},
                         {"max_sweeps", dec_sweeps}};
    auto input = load_input(dec_input, report);

    FitOptions opts;
    opts.rank = dec_rank;
    opts.restarts = dec_restarts;
    opts.seed = dec_seed;
    opts.tolerance = dec_tol;
    opts.max_sweeps = dec_sweeps;
    opts.init = dec_init == "gevd" ? InitStrategy::gevd : InitStrategy::random;
    if (!dec_constraints.empty()) {
      const index_t order = input.is_dense()
                                ? input.dense().order()
                                : input.sparse().order();
      opts.mode_constraints.assign(order, ConstraintDescriptor::none());
      for (const auto& text : dec_constraints) {
        index_t mode = 0;
        ConstraintDescriptor c = parse_constraint(text, &mode);
        if (mode < 0 || mode >= order)
          throw CLI::ValidationError("constraint mode out of range");
        opts.mode_constraints[mode] = c;
      }
    }

    std::pair<KruskalModel, FitReport> fit;
    if (!dec_mask_path.empty()) {
      auto mask_read = read_tensor(dec_mask_path);
      const DenseTensor mask_dense = mask_read.densified();
      MissingMask mask;
      mask.shape = mask_dense.shape();
      mask.observed.resize(mask_dense.size());
      for (index_t i = 0; i < mask_dense.size(); ++i)
        mask.observed[i] = mask_dense[i] != 0.0 ? 1 : 0;
      const DenseTensor data = input.densified();
      fit = dec_method == "em" ? em_impute_fit(data, mask, opts)
                               : cpd_als_missing(data, mask, opts);
    } else if (dec_method == "sgd") {
      fit = input.is_dense() ? cpd_sgd(input.dense(), opts)
                             : cpd_sgd(input.sparse(), opts);
    } else {
      fit = input.is_dense() ? cpd_als(input.dense(), opts)
                             : cpd_als(input.sparse(), opts);
    }
    report["fit"] = report_from_fit(fit.second);
    report["model"] = factors_to_json(fit.first);
  } else if (*tuck) {
    report["command"] = "tucker";
    auto input = load_input(tuck_input, report);
    const DenseTensor data = input.densified();
    const auto ranks = parse_dims(tuck_ranks);
    report["options"] = {{"ranks", ranks}, {"mlsvd_only", tuck_mlsvd_only}};
    if (tuck_mlsvd_only) {
      TuckerModel m = mlsvd(data, ranks);
      report["core_norm_sq"] = m.core.norm_sq();
      report["residual_sq"] = data.norm_sq() - m.core.norm_sq();
    } else {
      auto [m, rep] = tucker_als(data, ranks);
      report["core_norm_sq"] = m.core.norm_sq();
      report["residual_sq"] = rep.loss_trajectory.back();
      report["sweeps"] = rep.sweeps;
      report["reward_trajectory"] = rep.reward_trajectory;
    }
  } else if (*chk) {
    report["command"] = "check";
    json verdicts = json::array();
    if (!chk_model.empty()) {
      std::ifstream in(chk_model);
      if (!in) throw std::runtime_error("cannot read " + chk_model);
      json doc;
      in >> doc;
      KruskalModel model = factors_from_json(doc.at("model"));
      json entry;
      entry["kruskal"] = verdict_to_json(check_kruskal(model));
      if (model.order() == 3)
        entry["one_mode_full_rank"] =
            verdict_to_json(check_one_mode_full_rank(model));
      verdicts.push_back(entry);
    } else {
      if (chk_dims.empty() || chk_rank < 1)
        throw CLI::ValidationError("check needs --dims and --rank");
      const auto dims = parse_dims(chk_dims);
      json entry;
      if (chk_generic)
        entry["generic"] = verdict_to_json(check_generic(dims, chk_rank));
      if (!chk_kranks.empty())
        entry["kruskal"] = verdict_to_json(
            check_kruskal(dims, parse_dims(chk_kranks), chk_rank));
      if (entry.empty())
        throw CLI::ValidationError("check needs --generic or --kranks");
      verdicts.push_back(entry);
    }
    report["verdicts"] = verdicts;
  } else if (*crb_cmd) {
    report["command"] = "crb";
    KruskalModel model;
    if (!crb_model.empty()) {
      std::ifstream in(crb_model);
      if (!in) throw std::runtime_error("cannot read " + crb_model);
      json doc;
      in >> doc;
      model = factors_from_json(doc.at("model"));
    } else {
      if (crb_dims.empty())
        throw CLI::ValidationError("crb needs --dims or --model");
      auto [planted, tensor] =
          synth_model(parse_dims(crb_dims), crb_rank, crb_seed, 0.0);
      model = planted;
      report["options"] = {{"dims", parse_dims(crb_dims)},
                           {"rank", crb_rank},
                           {"seed", crb_seed}};
    }
    CrbReport crb = crb_pinv(build_fim(model, crb_sigma2));
    if (crb_noise == "laplacian")
      crb = noise_rescale(crb, NoiseModel::laplacian, crb_noise_param);
    else if (crb_noise == "cauchy")
      crb = noise_rescale(crb, NoiseModel::cauchy, crb_noise_param);
    report["crb"] = crb_to_json(crb);
  } else if (*syn) {
    report["command"] = "synth";
    if (!syn_fixture.empty()) {
      auto input = load_input("fixture:" + syn_fixture, report);
      write_tensor(syn_tensor_out, input.dense(), syn_binary);
      if (!syn_model_out.empty() && syn_fixture == "complexmult") {
        std::ofstream out(syn_model_out);
        out << factors_to_json(complex_mult_fixture().factors).dump(2)
            << "\n";
      }
      report["tensor_out"] = syn_tensor_out;
    } else {
      if (syn_dims.empty())
        throw CLI::ValidationError("synth needs --dims or --fixture");
      auto [model, tensor] =
          synth_model(parse_dims(syn_dims), syn_rank, syn_seed, syn_sigma);
      write_tensor(syn_tensor_out, tensor, syn_binary);
      report["tensor_out"] = syn_tensor_out;
      report["options"] = {{"dims", parse_dims(syn_dims)},
                           {"rank", syn_rank},
                           {"seed", syn_seed},
                           {"sigma", syn_sigma}};
      if (!syn_model_out.empty()) {
        std::ofstream out(syn_model_out);
        out << factors_to_json(model).dump(2) << "\n";
        report["model_out"] = syn_model_out;
      }
    }
  } else if (*ben) {
    report["command"] = "bench";
    const auto dims = parse_dims(ben_dims);
    if (ben_kind == "typical-rank") {
      if (dims.size() != 3 || dims[0] != dims[1] || dims[2] != 2)
        throw CLI::ValidationError("typical-rank expects dims I,I,2");
      auto result = bench_typical_rank(dims[0], ben_trials, ben_seed);
      report["options"] = {{"dims", dims},
                           {"trials", ben_trials},
                           {"seed", ben_seed}};
      report["result"] = {
          {"full_pencil_rank_fraction", result.fraction()},
          {"full_pencil_rank_count", result.full_pencil_rank_count}};
    } else {
      auto result =
          bench_mse_vs_crb(dims, ben_rank, ben_snr, ben_trials, ben_seed);
      report["options"] = {{"dims", dims},
                           {"rank", ben_rank},
                           {"snr_db", ben_snr},
                           {"trials", ben_trials},
                           {"seed", ben_seed}};
      report["result"] = {{"mean_squared_error", result.mean_squared_error},
                          {"crb_trace", result.crb_trace},
                          {"ratio", result.ratio()},
                          {"sigma2", result.sigma_sq}};
    }
  }

  report["wall_seconds"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  emit(report, out_path);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const CLI::Error& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
