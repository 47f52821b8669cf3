#ifndef LTT_REPORT_HPP
#define LTT_REPORT_HPP

#include <string>
#include <vector>

#include "ltt/encoder.hpp"

namespace ltt {

// --- slice-wise equivalence verification ------------------------------------

struct EquivalenceReport {
  int trials = 0;
  double tol = 0.0;
  double max_attention_err = 0.0;  // spectral MHA slices vs standalone attention
  double max_ffn_err = 0.0;        // spectral FFN slices vs standalone FFN
  double max_model_err = 0.0;      // p=1 model logits vs standard reference
  bool pass = false;
};

// Draws `trials` random parameter/input instances and compares
//   (a) every spectral attention slice (and the assembled block output)
//   (b) every spectral FFN slice (and the assembled block output)
//   (c) the p=1 full model
// against the plain-loop standard reference. override_transform substitutes
// the transform used by the implementation path (negative-control fixtures);
// the reference path always inverts with the mathematical transpose.
EquivalenceReport verify_equivalence(const ModelConfig& cfg, int trials, double tol = 1e-11,
                                     const TransformOp* override_transform = nullptr);

// --- parameter counting --------------------------------------------------------

struct ParamReport {
  // per-layer breakdown
  long long attention_per_layer = 0;
  long long ffn_per_layer = 0;
  long long layernorm_per_layer = 0;
  long long per_layer_total = 0;
  int layers = 0;
  long long pe = 0;                 // learnable table, 0 for fixed strategies
  long long encoder_total = 0;      // layers * per_layer_total + pe
  long long embedding = 0;          // vocab * d (0 when vocab unset)
  long long classifier = 0;         // d * classes + classes (0 when classes unset)
  long long total = 0;
  // same d / heads / layers at p = 1
  long long baseline_encoder_total = 0;
  double encoder_ratio = 0.0;
};

ParamReport count_params(const ModelConfig& cfg, int vocab = 0, int classes = 0);

// --- analytic per-layer FLOP model ------------------------------------------------

struct FlopRow {
  std::string op;
  double standard = 0.0;
  double tensor = 0.0;
};

struct FlopReport {
  std::vector<FlopRow> rows;  // qkv, scores, attn_v, out_proj, ffn, transform
  double standard_total = 0.0;
  double tensor_total = 0.0;
};

// Per-layer forward FLOPs at sequence length T for width d and factor p.
// Attention-score and attention-times-V terms are identical in both columns;
// the transform overhead uses log base 2.
FlopReport flop_model(const ModelConfig& cfg, int t_len);

// --- micro benchmark ------------------------------------------------------------

struct BenchReport {
  int reps = 0;
  std::vector<double> forward_sequential_ms, forward_batched_ms;
  std::vector<double> grad_sequential_ms, grad_batched_ms;
  double median_forward_sequential_ms = 0.0, median_forward_batched_ms = 0.0;
  double median_grad_sequential_ms = 0.0, median_grad_batched_ms = 0.0;
  bool outputs_identical = false;  // batched vs sequential cross-check
  double projection_ffn_flop_ratio = 0.0;
};

// Wall-clock timing of the forward and forward+backward paths under both
// slice-execution policies. No correctness claim beyond the bit-identical
// cross-check of the two policies.
BenchReport bench(const ModelConfig& cfg, int reps);

}  // namespace ltt

#endif
