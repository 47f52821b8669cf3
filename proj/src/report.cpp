#include "ltt/report.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

#include "ltt/autograd.hpp"
#include "ltt/parallel.hpp"
#include "ltt/reference.hpp"
#include "ltt/train.hpp"

namespace ltt {

namespace {

AttentionParams draw_attention(const ModelConfig& cfg, Rng& rng) {
  AttentionParams p;
  for (int j = 0; j < cfg.h(); ++j) {
    p.wq.push_back(random_tensor(cfg.d_s(), cfg.d_h(), cfg.p, rng));
    p.wk.push_back(random_tensor(cfg.d_s(), cfg.d_h(), cfg.p, rng));
    p.wv.push_back(random_tensor(cfg.d_s(), cfg.d_h(), cfg.p, rng));
  }
  p.wo = random_tensor(cfg.d_s(), cfg.d_s(), cfg.p, rng);
  return p;
}

FfnParams draw_ffn(const ModelConfig& cfg, Rng& rng) {
  FfnParams p;
  p.w1 = random_tensor(cfg.d_s(), cfg.d_ff_s(), cfg.p, rng);
  p.w2 = random_tensor(cfg.d_ff_s(), cfg.d_s(), cfg.p, rng);
  p.b1 = random_tensor(1, cfg.d_ff_s(), cfg.p, rng);
  p.b2 = random_tensor(1, cfg.d_s(), cfg.p, rng);
  return p;
}

ref::AttentionWeights slice_attn(const AttentionParams& p, int slice) {
  ref::AttentionWeights w;
  for (const Tensor3& t : p.wq) w.wq.push_back(frontal_slice(t, slice));
  for (const Tensor3& t : p.wk) w.wk.push_back(frontal_slice(t, slice));
  for (const Tensor3& t : p.wv) w.wv.push_back(frontal_slice(t, slice));
  w.wo = frontal_slice(p.wo, slice);
  return w;
}

ref::FfnWeights slice_ffn(const FfnParams& p, int slice) {
  ref::FfnWeights w;
  w.w1 = frontal_slice(p.w1, slice);
  w.w2 = frontal_slice(p.w2, slice);
  for (int j = 0; j < p.b1.n2; ++j) w.b1.push_back(p.b1(0, j, slice));
  for (int j = 0; j < p.b2.n2; ++j) w.b2.push_back(p.b2(0, j, slice));
  return w;
}

// p=1 standard-reference forward of a full model, plain loops end to end
std::vector<double> reference_model_logits(const Model& m, const std::vector<int>& tokens,
                                           const std::vector<std::uint8_t>& mask) {
  const ModelConfig& cfg = m.cfg;
  Matrix x = embed(tokens, m.embedding);
  const Tensor3 pe = positional_encoding(m.pe, cfg.t_len, cfg.d, 1);
  for (int t = 0; t < cfg.t_len; ++t)
    for (int j = 0; j < cfg.d; ++j) x(t, j) += pe(t, j, 0);

  for (const EncoderParams& layer : m.layers) {
    ref::EncoderLayerWeights w;
    w.attn = slice_attn(layer.attn, 0);
    w.ffn = slice_ffn(layer.ffn, 0);
    for (int j = 0; j < cfg.d; ++j) {
      w.ln1_gamma.push_back(layer.ln1.gamma(0, j, 0));
      w.ln1_beta.push_back(layer.ln1.beta(0, j, 0));
      w.ln2_gamma.push_back(layer.ln2.gamma(0, j, 0));
      w.ln2_beta.push_back(layer.ln2.beta(0, j, 0));
    }
    w.eps = layer.ln1.eps;
    x = ref::encoder_layer(x, w, cfg.d_h(), cfg.activation);
  }
  return classify(x, mask, m.cls_w, m.cls_b);
}

}  // namespace

EquivalenceReport verify_equivalence(const ModelConfig& cfg, int trials, double tol,
                                     const TransformOp* override_transform) {
  cfg.validate();
  if (trials < 1) throw std::invalid_argument("verify_equivalence: trials must be >= 1");
  const TransformOp transform =
      override_transform ? *override_transform : cfg.make_transform();
  // the reference path inverts with the mathematical transpose, not the
  // transform's stored inverse
  const Matrix z_t = transpose(transform.z);

  EquivalenceReport report;
  report.trials = trials;
  report.tol = tol;
  Rng rng(cfg.seed + 1);

  for (int trial = 0; trial < trials; ++trial) {
    const Tensor3 x = random_tensor(cfg.t_len, cfg.d_s(), cfg.p, rng);
    const Tensor3 x_hat = mode_n_product(x, transform.z, 3);

    const AttentionParams ap = draw_attention(cfg, rng);
    Tensor3 ref_stack(cfg.t_len, cfg.d_s(), cfg.p);
    const Tensor3 core = mha_spectral_core(x_hat, ap, cfg, nullptr);
    for (int i = 0; i < cfg.p; ++i) {
      const Matrix standalone =
          ref::attention(frontal_slice(x_hat, i), slice_attn(ap, i), cfg.d_h());
      report.max_attention_err =
          std::max(report.max_attention_err, rel_error(frontal_slice(core, i), standalone));
      set_frontal_slice(ref_stack, i, standalone);
    }
    const Tensor3 block = l_mha(x, ap, cfg, transform, nullptr);
    const Tensor3 ref_block = mode_n_product(ref_stack, z_t, 3);
    report.max_attention_err = std::max(report.max_attention_err, rel_error(block, ref_block));

    const FfnParams fp = draw_ffn(cfg, rng);
    const Tensor3 fcore = ffn_spectral_core(x_hat, fp, cfg);
    Tensor3 ref_fstack(cfg.t_len, cfg.d_s(), cfg.p);
    for (int i = 0; i < cfg.p; ++i) {
      const Matrix standalone =
          ref::ffn(frontal_slice(x_hat, i), slice_ffn(fp, i), cfg.activation);
      report.max_ffn_err =
          std::max(report.max_ffn_err, rel_error(frontal_slice(fcore, i), standalone));
      set_frontal_slice(ref_fstack, i, standalone);
    }
    const Tensor3 fblock = tffn(x, fp, cfg, transform);
    const Tensor3 ref_fblock = mode_n_product(ref_fstack, z_t, 3);
    report.max_ffn_err = std::max(report.max_ffn_err, rel_error(fblock, ref_fblock));
  }

  // (c) p=1 full model against the standard reference
  ModelConfig flat = cfg;
  flat.p = 1;
  flat.transform_kind = "identity";
  if (flat.pe_kind == PEStrategy::Kind::Learnable) flat.pe_kind = PEStrategy::Kind::Standard;
  flat.validate();
  const int vocab = 17, classes = 3;
  Model m = Model::init(flat, vocab, classes);
  Rng tok_rng(cfg.seed + 2);
  for (int trial = 0; trial < trials; ++trial) {
    std::vector<int> tokens;
    std::vector<std::uint8_t> mask;
    for (int t = 0; t < flat.t_len; ++t) {
      tokens.push_back(tok_rng.uniform_int(vocab));
      mask.push_back(t + 1 < flat.t_len ? 1 : static_cast<std::uint8_t>(trial % 2));
    }
    const EncodeResult got = encode(m, tokens, mask);
    const std::vector<double> want = reference_model_logits(m, tokens, mask);
    double num = 0.0, den = 0.0;
    for (std::size_t c = 0; c < want.size(); ++c) {
      num += (got.logits[c] - want[c]) * (got.logits[c] - want[c]);
      den += want[c] * want[c];
    }
    report.max_model_err =
        std::max(report.max_model_err, std::sqrt(num) / std::max(std::sqrt(den), 1e-300));
  }

  report.pass = report.max_attention_err <= tol && report.max_ffn_err <= tol &&
                report.max_model_err <= tol;
  return report;
}

ParamReport count_params(const ModelConfig& cfg, int vocab, int classes) {
  cfg.validate();
  auto encoder_layer_counts = [](const ModelConfig& c, ParamReport& r) {
    const long long ds = c.d_s(), dh = c.d_h(), h = c.h(), p = c.p, dff = c.d_ff_s();
    r.attention_per_layer = 3 * h * ds * dh * p + ds * ds * p;
    r.ffn_per_layer = ds * dff * p + dff * ds * p + dff * p + ds * p;
    r.layernorm_per_layer = 2 * (2 * ds * p);
    r.per_layer_total = r.attention_per_layer + r.ffn_per_layer + r.layernorm_per_layer;
  };

  ParamReport report;
  report.layers = cfg.layers;
  encoder_layer_counts(cfg, report);
  report.pe = cfg.pe_kind == PEStrategy::Kind::Learnable
                  ? static_cast<long long>(cfg.t_len) * cfg.d_s() * cfg.p
                  : 0;
  report.encoder_total = static_cast<long long>(cfg.layers) * report.per_layer_total + report.pe;
  report.embedding = vocab > 0 ? static_cast<long long>(vocab) * cfg.d : 0;
  report.classifier = classes > 0 ? static_cast<long long>(cfg.d) * classes + classes : 0;
  report.total = report.embedding + report.encoder_total + report.classifier;

  ModelConfig base = cfg;
  base.p = 1;
  base.validate();
  ParamReport baseline;
  encoder_layer_counts(base, baseline);
  const long long base_pe = cfg.pe_kind == PEStrategy::Kind::Learnable
                                ? static_cast<long long>(cfg.t_len) * cfg.d
                                : 0;
  report.baseline_encoder_total =
      static_cast<long long>(cfg.layers) * baseline.per_layer_total + base_pe;
  report.encoder_ratio = report.baseline_encoder_total > 0
                             ? static_cast<double>(report.encoder_total) /
                                   static_cast<double>(report.baseline_encoder_total)
                             : 1.0;
  return report;
}

FlopReport flop_model(const ModelConfig& cfg, int t_len) {
  cfg.validate();
  if (t_len < 1) throw std::invalid_argument("flop_model: T must be >= 1");
  const double t = t_len, d = cfg.d, p = cfg.p;
  FlopReport r;
  r.rows = {
      {"qkv_projections", 3 * t * d * d, 3 * t * d * d / p},
      {"attention_scores", t * t * d, t * t * d},
      {"attention_times_v", t * t * d, t * t * d},
      {"output_projection", t * d * d, t * d * d / p},
      {"ffn", 8 * t * d * d, 8 * t * d * d / p},
      {"transform", 0.0, t * d * std::log2(p)},
  };
  for (const FlopRow& row : r.rows) {
    r.standard_total += row.standard;
    r.tensor_total += row.tensor;
  }
  return r;
}

namespace {

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

BenchReport bench(const ModelConfig& cfg, int reps) {
  cfg.validate();
  if (reps < 3) throw std::invalid_argument("bench: reps must be >= 3");
  const int vocab = 64, classes = 2;
  Model m = Model::init(cfg, vocab, classes);
  Rng rng(cfg.seed + 7);
  std::vector<int> tokens;
  std::vector<std::uint8_t> mask(cfg.t_len, 1);
  for (int t = 0; t < cfg.t_len; ++t) tokens.push_back(rng.uniform_int(vocab));
  std::vector<Example> batch;
  for (int b = 0; b < 4; ++b) {
    Example ex;
    ex.tokens = tokens;
    ex.mask = mask;
    ex.label = b % classes;
    std::rotate(tokens.begin(), tokens.begin() + 1, tokens.end());
    batch.push_back(std::move(ex));
  }

  BenchReport report;
  report.reps = reps;
  const SliceExec saved = slice_execution();

  EncodeResult out_seq, out_bat;
  GradStore g_seq, g_bat;
  auto time_ms = [](const std::function<void()>& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
        .count();
  };

  for (int rep = 0; rep < reps; ++rep) {
    set_slice_execution(SliceExec::Sequential);
    report.forward_sequential_ms.push_back(
        time_ms([&] { out_seq = encode(m, tokens, mask); }));
    report.grad_sequential_ms.push_back(time_ms([&] { g_seq = grad(m, batch); }));
    set_slice_execution(SliceExec::Batched);
    report.forward_batched_ms.push_back(time_ms([&] { out_bat = encode(m, tokens, mask); }));
    report.grad_batched_ms.push_back(time_ms([&] { g_bat = grad(m, batch); }));
  }
  set_slice_execution(saved);

  report.outputs_identical = out_seq.logits == out_bat.logits && g_seq.loss == g_bat.loss;
  for (const auto& [name, g] : g_seq.named)
    report.outputs_identical = report.outputs_identical && g.a == g_bat.named.at(name).a;

  report.median_forward_sequential_ms = median_of(report.forward_sequential_ms);
  report.median_forward_batched_ms = median_of(report.forward_batched_ms);
  report.median_grad_sequential_ms = median_of(report.grad_sequential_ms);
  report.median_grad_batched_ms = median_of(report.grad_batched_ms);

  const FlopReport f = flop_model(cfg, cfg.t_len);
  double proj_ffn_std = 0.0, proj_ffn_tensor = 0.0;
  for (const FlopRow& row : f.rows) {
    if (row.op == "qkv_projections" || row.op == "output_projection" || row.op == "ffn") {
      proj_ffn_std += row.standard;
      proj_ffn_tensor += row.tensor;
    }
  }
  report.projection_ffn_flop_ratio = proj_ffn_tensor / proj_ffn_std;
  return report;
}

}  // namespace ltt
