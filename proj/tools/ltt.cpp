#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "ltt/autograd.hpp"
#include "ltt/lsvd.hpp"
#include "ltt/parallel.hpp"
#include "ltt/report.hpp"
#include "ltt/train.hpp"

using nlohmann::json;

namespace {

constexpr int kSchemaVersion = 1;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

json load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file: " + path);
  try {
    json j;
    in >> j;
    return j;
  } catch (const json::exception& e) {
    throw UsageError("malformed JSON in " + path + ": " + e.what());
  }
}

int require_int(const json& j, const std::string& key) {
  if (!j.contains(key)) throw UsageError("config is missing required field '" + key + "'");
  if (!j.at(key).is_number_integer())
    throw UsageError("config field '" + key + "' must be an integer");
  return j.at(key).get<int>();
}

ltt::ModelConfig model_config(const json& j, bool heads_default_p = false) {
  ltt::ModelConfig cfg;
  cfg.t_len = require_int(j, "T");
  cfg.d = require_int(j, "d");
  cfg.p = require_int(j, "p");
  cfg.layers = j.value("layers", 0);
  cfg.heads = j.contains("heads") ? require_int(j, "heads")
                                  : (heads_default_p ? cfg.p : require_int(j, "heads"));
  const std::string pe = j.value("pe", "linear");
  cfg.pe_kind = pe == "learnable" ? ltt::PEStrategy::Kind::Learnable
                                  : ltt::PEStrategy::named(pe, cfg.p).kind;
  cfg.transform_kind = j.value("transform", "dct");
  cfg.activation = ltt::activation_from_name(j.value("activation", "gelu"));
  cfg.seed = j.value("seed", 0ull);
  try {
    cfg.validate();
    cfg.make_transform();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return cfg;
}

ltt::TrainConfig train_config(const json& j) {
  ltt::TrainConfig tc;
  const json t = j.value("train", json::object());
  tc.lr_peak = t.value("lr_peak", tc.lr_peak);
  tc.weight_decay = t.value("weight_decay", tc.weight_decay);
  tc.warmup_frac = t.value("warmup_frac", tc.warmup_frac);
  tc.lr_floor = t.value("lr_floor", tc.lr_floor);
  tc.clip_norm = t.value("clip_norm", tc.clip_norm);
  tc.epochs = t.value("epochs", tc.epochs);
  tc.batch = t.value("batch", tc.batch);
  tc.seed = t.value("seed", 0ull);
  try {
    tc.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return tc;
}

void write_json(const json& j, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(1) << "\n";
}

std::ofstream open_csv(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.precision(17);
  return out;
}

// --- subcommands ------------------------------------------------------------

int cmd_verify(const json& cfg_json, const std::filesystem::path& out_dir) {
  const ltt::ModelConfig cfg = model_config(cfg_json);
  const json v = cfg_json.value("verify", json::object());
  const int trials = v.value("trials", 20);
  const double tol = v.value("tol", 1e-11);

  const ltt::EquivalenceReport r = ltt::verify_equivalence(cfg, trials, tol);

  json j = {{"schema_version", kSchemaVersion},
            {"trials", r.trials},
            {"tol", r.tol},
            {"max_attention_err", r.max_attention_err},
            {"max_ffn_err", r.max_ffn_err},
            {"max_model_err", r.max_model_err},
            {"pass", r.pass}};
  write_json(j, out_dir / "verify_report.json");
  auto csv = open_csv(out_dir / "verify_report.csv");
  csv << "check,max_rel_err,tol,pass\n";
  csv << "attention_slices," << r.max_attention_err << "," << tol << ","
      << (r.max_attention_err <= tol) << "\n";
  csv << "ffn_slices," << r.max_ffn_err << "," << tol << "," << (r.max_ffn_err <= tol) << "\n";
  csv << "p1_model," << r.max_model_err << "," << tol << "," << (r.max_model_err <= tol)
      << "\n";
  std::printf("verify: attention %.3e  ffn %.3e  p1-model %.3e  (tol %.1e) -> %s\n",
              r.max_attention_err, r.max_ffn_err, r.max_model_err, tol,
              r.pass ? "PASS" : "FAIL");
  return r.pass ? 0 : 1;
}

int cmd_count_params(const json& cfg_json, const std::filesystem::path& out_dir) {
  const ltt::ModelConfig cfg = model_config(cfg_json);
  const int vocab = cfg_json.value("vocab", 0);
  const int classes = cfg_json.value("classes", 0);
  const ltt::ParamReport r = ltt::count_params(cfg, vocab, classes);

  json j = {{"schema_version", kSchemaVersion},
            {"attention_per_layer", r.attention_per_layer},
            {"ffn_per_layer", r.ffn_per_layer},
            {"layernorm_per_layer", r.layernorm_per_layer},
            {"per_layer_total", r.per_layer_total},
            {"layers", r.layers},
            {"pe", r.pe},
            {"encoder_total", r.encoder_total},
            {"embedding", r.embedding},
            {"classifier", r.classifier},
            {"total", r.total},
            {"baseline_encoder_total", r.baseline_encoder_total},
            {"encoder_ratio", r.encoder_ratio}};
  write_json(j, out_dir / "param_report.json");
  auto csv = open_csv(out_dir / "param_report.csv");
  csv << "component,count\n";
  csv << "attention_per_layer," << r.attention_per_layer << "\n";
  csv << "ffn_per_layer," << r.ffn_per_layer << "\n";
  csv << "layernorm_per_layer," << r.layernorm_per_layer << "\n";
  csv << "per_layer_total," << r.per_layer_total << "\n";
  csv << "pe," << r.pe << "\n";
  csv << "encoder_total," << r.encoder_total << "\n";
  csv << "embedding," << r.embedding << "\n";
  csv << "classifier," << r.classifier << "\n";
  csv << "total," << r.total << "\n";
  csv << "baseline_encoder_total," << r.baseline_encoder_total << "\n";
  csv << "encoder_ratio," << r.encoder_ratio << "\n";
  std::printf("params: encoder %lld (baseline %lld, ratio %.4f), total %lld\n",
              r.encoder_total, r.baseline_encoder_total, r.encoder_ratio, r.total);
  return 0;
}

int cmd_flops(const json& cfg_json, const std::filesystem::path& out_dir) {
  const ltt::ModelConfig cfg = model_config(cfg_json, /*heads_default_p=*/true);
  const int t_len = cfg_json.value("flops_T", cfg.t_len);
  const ltt::FlopReport r = ltt::flop_model(cfg, t_len);

  json rows = json::array();
  for (const ltt::FlopRow& row : r.rows)
    rows.push_back({{"op", row.op}, {"standard", row.standard}, {"tensor", row.tensor}});
  json j = {{"schema_version", kSchemaVersion},
            {"T", t_len},
            {"d", cfg.d},
            {"p", cfg.p},
            {"log_base", 2},
            {"rows", rows},
            {"standard_total", r.standard_total},
            {"tensor_total", r.tensor_total}};
  write_json(j, out_dir / "flop_report.json");
  auto csv = open_csv(out_dir / "flop_report.csv");
  csv << "op,standard,tensor\n";
  for (const ltt::FlopRow& row : r.rows)
    csv << row.op << "," << row.standard << "," << row.tensor << "\n";
  csv << "total," << r.standard_total << "," << r.tensor_total << "\n";
  std::printf("flops: standard %.0f, tensor %.0f (T=%d d=%d p=%d)\n", r.standard_total,
              r.tensor_total, t_len, cfg.d, cfg.p);
  return 0;
}

int cmd_bench(const json& cfg_json, const std::filesystem::path& out_dir) {
  const ltt::ModelConfig cfg = model_config(cfg_json);
  const int reps = cfg_json.value("bench", json::object()).value("reps", 5);
  const ltt::BenchReport r = ltt::bench(cfg, reps);

  json j = {{"schema_version", kSchemaVersion},
            {"reps", r.reps},
            {"forward_sequential_ms", r.forward_sequential_ms},
            {"forward_batched_ms", r.forward_batched_ms},
            {"grad_sequential_ms", r.grad_sequential_ms},
            {"grad_batched_ms", r.grad_batched_ms},
            {"median_forward_sequential_ms", r.median_forward_sequential_ms},
            {"median_forward_batched_ms", r.median_forward_batched_ms},
            {"median_grad_sequential_ms", r.median_grad_sequential_ms},
            {"median_grad_batched_ms", r.median_grad_batched_ms},
            {"outputs_identical", r.outputs_identical},
            {"projection_ffn_flop_ratio", r.projection_ffn_flop_ratio}};
  write_json(j, out_dir / "bench_report.json");
  auto csv = open_csv(out_dir / "bench_report.csv");
  csv << "metric,value\n";
  csv << "median_forward_sequential_ms," << r.median_forward_sequential_ms << "\n";
  csv << "median_forward_batched_ms," << r.median_forward_batched_ms << "\n";
  csv << "median_grad_sequential_ms," << r.median_grad_sequential_ms << "\n";
  csv << "median_grad_batched_ms," << r.median_grad_batched_ms << "\n";
  csv << "outputs_identical," << r.outputs_identical << "\n";
  csv << "projection_ffn_flop_ratio," << r.projection_ffn_flop_ratio << "\n";
  std::printf("bench: fwd seq %.3fms / batched %.3fms; grad seq %.3fms / batched %.3fms; "
              "identical=%d; proj+ffn flop ratio %.4f\n",
              r.median_forward_sequential_ms, r.median_forward_batched_ms,
              r.median_grad_sequential_ms, r.median_grad_batched_ms,
              r.outputs_identical ? 1 : 0, r.projection_ffn_flop_ratio);
  return r.outputs_identical ? 0 : 1;
}

int cmd_train(const json& cfg_json, const std::filesystem::path& out_dir) {
  const ltt::ModelConfig cfg = model_config(cfg_json);
  const ltt::TrainConfig tc = train_config(cfg_json);
  const int vocab = require_int(cfg_json, "vocab");
  const int classes = require_int(cfg_json, "classes");
  const json t = cfg_json.value("train", json::object());

  ltt::Dataset full;
  if (t.contains("dataset") && t.at("dataset").is_object()) {
    const std::string file = t.at("dataset").value("file", "");
    if (file.empty()) throw UsageError("train.dataset object needs a 'file' key");
    full = ltt::load_dataset(file, vocab, classes);
  } else {
    const std::string kind = t.value("dataset", "keyword");
    const int n = t.value("n", 2000);
    full = ltt::synth_dataset(ltt::synth_kind_from_name(kind), n, cfg.t_len, vocab, classes,
                              tc.seed);
  }

  if (full.items.empty()) throw UsageError("train: dataset is empty");
  const double holdout = t.value("holdout_frac", 0.2);
  ltt::Dataset train_set, eval_set;
  train_set.vocab = eval_set.vocab = vocab;
  train_set.num_classes = eval_set.num_classes = classes;
  ltt::Rng split_rng(tc.seed + 1);
  std::vector<int> order(full.items.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  for (std::size_t i = order.size() - 1; i > 0; --i)
    std::swap(order[i], order[split_rng.uniform_int(static_cast<int>(i) + 1)]);
  const std::size_t eval_n = static_cast<std::size_t>(holdout * full.items.size());
  for (std::size_t i = 0; i < order.size(); ++i)
    (i < eval_n ? eval_set : train_set).items.push_back(full.items[order[i]]);

  ltt::Model model = ltt::Model::init(cfg, vocab, classes);
  const ltt::TrainResult r =
      ltt::train(model, train_set, eval_set.items.empty() ? nullptr : &eval_set, tc);

  ltt::write_metrics_csv(r, (out_dir / "metrics.csv").string());
  ltt::write_metrics_json(r, (out_dir / "metrics.json").string());
  ltt::save_checkpoint(model, (out_dir / "checkpoint.json").string());

  const double final_acc = r.history.back().accuracy;
  json j = {{"schema_version", kSchemaVersion},
            {"epochs", tc.epochs},
            {"train_examples", train_set.items.size()},
            {"eval_examples", eval_set.items.size()},
            {"initial_loss", r.initial_loss},
            {"final_loss", r.history.back().loss},
            {"final_accuracy", final_acc}};
  write_json(j, out_dir / "train_report.json");
  std::printf("train: %d epochs, final loss %.4f, accuracy %.4f\n", tc.epochs,
              r.history.back().loss, final_acc);
  return 0;
}

int cmd_lsvd_demo(const json& cfg_json, const std::filesystem::path& out_dir) {
  const json l = cfg_json.value("lsvd", json::object());
  const int p = require_int(cfg_json, "p");
  const int n1 = l.value("n1", 6);
  const int n2 = l.value("n2", 5);
  const std::uint64_t seed = cfg_json.value("seed", 0ull);
  ltt::TransformOp transform;
  try {
    transform = ltt::TransformOp::named(cfg_json.value("transform", "dct"), p);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }

  ltt::Rng rng(seed);
  const ltt::Tensor3 a = ltt::random_tensor(n1, n2, p, rng);
  const ltt::LSvdResult svd = ltt::l_svd(a, transform);
  const ltt::Tensor3 recon = ltt::l_product(
      ltt::l_product(svd.u, svd.s, transform), ltt::l_transpose(svd.v, transform), transform);
  const double recon_err = ltt::rel_error(recon, a);
  const bool ortho =
      ltt::is_l_orthogonal(svd.u, transform, 1e-8) && ltt::is_l_orthogonal(svd.v, transform, 1e-8);
  const int rank = ltt::tubal_rank(svd);
  const double avg_rank = ltt::average_rank(a, transform);

  json sweep = json::array();
  auto csv = open_csv(out_dir / "lsvd_report.csv");
  csv << "k,energy_err,direct_err\n";
  for (int k = 1; k <= std::min(n1, n2); ++k) {
    const auto [approx, err] = ltt::truncated_l_svd(a, transform, k);
    const double direct = ltt::frobenius_norm(ltt::sub(a, approx));
    sweep.push_back({{"k", k}, {"energy_err", err}, {"direct_err", direct}});
    csv << k << "," << err << "," << direct << "\n";
  }

  json j = {{"schema_version", kSchemaVersion},
            {"dims", {n1, n2, p}},
            {"reconstruction_rel_err", recon_err},
            {"factors_l_orthogonal", ortho},
            {"tubal_rank", rank},
            {"average_rank", avg_rank},
            {"truncation_sweep", sweep}};
  write_json(j, out_dir / "lsvd_report.json");
  std::printf("lsvd: %dx%dx%d reconstruction %.3e, tubal rank %d, average rank %.2f\n", n1, n2,
              p, recon_err, rank, avg_rank);
  return (recon_err <= 1e-10 && ortho) ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"L-product tensor Transformer toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = ".";
  std::string exec_mode = "sequential";
  for (const char* name : {"verify", "train", "count-params", "flops", "bench", "lsvd-demo"}) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "JSON config file")->required();
    sub->add_option("--out", out_dir, "output directory for reports");
    sub->add_option("--slice-exec", exec_mode, "slice execution: sequential|batched");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (exec_mode == "batched")
      ltt::set_slice_execution(ltt::SliceExec::Batched);
    else if (exec_mode != "sequential")
      throw UsageError("--slice-exec must be sequential or batched");

    const json cfg = load_config(config_path);
    std::filesystem::create_directories(out_dir);
    const std::filesystem::path out(out_dir);

    if (app.got_subcommand("verify")) return cmd_verify(cfg, out);
    if (app.got_subcommand("train")) return cmd_train(cfg, out);
    if (app.got_subcommand("count-params")) return cmd_count_params(cfg, out);
    if (app.got_subcommand("flops")) return cmd_flops(cfg, out);
    if (app.got_subcommand("bench")) return cmd_bench(cfg, out);
    if (app.got_subcommand("lsvd-demo")) return cmd_lsvd_demo(cfg, out);
    return 2;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
