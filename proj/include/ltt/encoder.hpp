#ifndef LTT_ENCODER_HPP
#define LTT_ENCODER_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "ltt/nn.hpp"
#include "ltt/tensor.hpp"
#include "ltt/transform.hpp"

namespace ltt {

// Additive mask sentinel used instead of -inf so exp() never sees a NaN.
constexpr double kMaskSentinel = -1e30;

// strictly-upper-triangular sentinel mask (position t attends to <= t)
Matrix causal_mask(int t_len);

struct ModelConfig {
  int t_len = 0;   // sequence length T
  int d = 0;       // total embedding width
  int p = 1;       // transform factor
  int layers = 0;  // encoder depth
  int heads = 1;   // total heads H across slices; h = H/p per slice
  PEStrategy::Kind pe_kind = PEStrategy::Kind::Linear;
  std::string transform_kind = "dct";  // identity | dct | file:<path>
  Activation activation = Activation::Gelu;
  std::uint64_t seed = 0;

  int d_s() const { return d / p; }
  int h() const { return heads / p; }
  int d_h() const { return d / heads; }
  int d_ff_s() const { return 4 * d_s(); }

  // Enforces p | d, p | H, H | d (hence h*d_h == d_s) and positive dims.
  void validate() const;
  TransformOp make_transform() const;
};

// All attention and FFN weights are stored directly in the transform domain;
// the original-domain tensors are derived views (see spectral_to_original).
struct AttentionParams {
  std::vector<Tensor3> wq, wk, wv;  // per head: d_s x d_h x p
  Tensor3 wo;                       // d_s x d_s x p
};

struct FfnParams {
  Tensor3 w1;  // d_s x d_ff_s x p
  Tensor3 w2;  // d_ff_s x d_s x p
  Tensor3 b1;  // 1 x d_ff_s x p
  Tensor3 b2;  // 1 x d_s x p
};

struct EncoderParams {
  AttentionParams attn;
  FfnParams ffn;
  LayerNormParams ln1, ln2;
};

struct DecoderParams {
  AttentionParams self_attn;
  AttentionParams cross_attn;
  FfnParams ffn;
  LayerNormParams ln1, ln2, ln3;
};

// Original-domain view of a spectral weight: L^{-1}(w_hat).
Tensor3 spectral_to_original(const Tensor3& w_hat, const TransformOp& l);

// --- spectral cores ---------------------------------------------------------
// Per-slice computations on transform-domain inputs, before the inverse
// transform. Slice i of the output depends only on slice i of the input and
// the slice-i weights; the slice loop runs under the SliceExec policy.

Tensor3 mha_spectral_core(const Tensor3& x_hat, const AttentionParams& p,
                          const ModelConfig& cfg, const Matrix* mask);
Tensor3 cross_attention_spectral_core(const Tensor3& xq_hat, const Tensor3& xkv_hat,
                                      const AttentionParams& p, const ModelConfig& cfg);
Tensor3 ffn_spectral_core(const Tensor3& x_hat, const FfnParams& p, const ModelConfig& cfg);

// --- block-level ops --------------------------------------------------------

// x is the PE-added tensor; PE is applied once at the model input.
Tensor3 l_mha(const Tensor3& x, const AttentionParams& p, const ModelConfig& cfg,
              const TransformOp& l, const Matrix* mask = nullptr);
Tensor3 l_mha_masked(const Tensor3& x, const AttentionParams& p, const ModelConfig& cfg,
                     const TransformOp& l);
Tensor3 l_cross_attention(const Tensor3& x_dec, const Tensor3& x_enc, const AttentionParams& p,
                          const ModelConfig& cfg, const TransformOp& l);
Tensor3 tffn(const Tensor3& x, const FfnParams& p, const ModelConfig& cfg,
             const TransformOp& l);

Tensor3 encoder_layer(const Tensor3& x, const EncoderParams& p, const ModelConfig& cfg,
                      const TransformOp& l);
Tensor3 decoder_layer(const Tensor3& x, const Tensor3& x_enc, const DecoderParams& p,
                      const ModelConfig& cfg, const TransformOp& l);

// --- full model --------------------------------------------------------------

struct Model {
  ModelConfig cfg;
  TransformOp transform;
  int vocab = 0;
  int classes = 0;
  EmbeddingTable embedding;
  PEStrategy pe;
  std::vector<EncoderParams> layers;
  Matrix cls_w;                // d x classes
  std::vector<double> cls_b;   // classes

  static Model init(const ModelConfig& cfg, int vocab, int classes);
  // checkpoint restore path: transform supplied instead of rebuilt from cfg
  static Model init(const ModelConfig& cfg, int vocab, int classes, TransformOp transform);
};

// Named view of one trainable buffer. `decay` marks parameters subject to
// weight decay (everything except biases and LayerNorm scale/shift); dims
// give the order-3 shape of the buffer (matrices are r x c x 1).
struct ParamRef {
  std::string name;
  double* data;
  std::size_t len;
  bool decay;
  int dims[3];
};
std::vector<ParamRef> parameters(Model& m);

struct EncodeResult {
  std::vector<double> logits;
  Matrix pooled;  // 1 x d masked mean
};

// embed -> tensorize -> +PE -> encoder stack -> matricize -> masked mean-pool
// -> classifier. tokens must already be padded to cfg.t_len; mask flags the
// real (unpadded) positions.
EncodeResult encode(const Model& m, const std::vector<int>& tokens,
                    const std::vector<std::uint8_t>& mask);
// pads with token 0 / mask 0 up to cfg.t_len
EncodeResult encode(const Model& m, const std::vector<int>& tokens);

// --- checkpoints --------------------------------------------------------------

// Versioned JSON container with the config, transform matrix and every
// parameter tensor under its registry name; round-trips bit-exactly.
void save_checkpoint(const Model& m, const std::string& path);
Model load_checkpoint(const std::string& path);

}  // namespace ltt

#endif
