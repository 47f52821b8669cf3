#include "ltt/encoder.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "json.hpp"
#include "ltt/kernels.hpp"
#include "ltt/parallel.hpp"

namespace ltt {

Matrix causal_mask(int t_len) {
  Matrix m(t_len, t_len);
  for (int i = 0; i < t_len; ++i)
    for (int j = i + 1; j < t_len; ++j) m(i, j) = kMaskSentinel;
  return m;
}

void ModelConfig::validate() const {
  if (t_len < 1 || d < 1 || p < 1 || heads < 1 || layers < 0)
    throw std::invalid_argument("ModelConfig: T, d, p, heads must be positive, layers >= 0");
  if (d % p != 0)
    throw std::invalid_argument("ModelConfig: p=" + std::to_string(p) +
                                " does not divide d=" + std::to_string(d));
  if (heads % p != 0)
    throw std::invalid_argument("ModelConfig: p=" + std::to_string(p) +
                                " does not divide heads=" + std::to_string(heads));
  if (d % heads != 0)
    throw std::invalid_argument("ModelConfig: heads=" + std::to_string(heads) +
                                " does not divide d=" + std::to_string(d));
}

TransformOp ModelConfig::make_transform() const {
  if (transform_kind.rfind("file:", 0) == 0) {
    TransformOp l = TransformOp::from_file(transform_kind.substr(5));
    if (l.p != p)
      throw std::invalid_argument("ModelConfig: transform file is " + std::to_string(l.p) +
                                  "x" + std::to_string(l.p) + " but p=" + std::to_string(p));
    return l;
  }
  return TransformOp::named(transform_kind, p);
}

Tensor3 spectral_to_original(const Tensor3& w_hat, const TransformOp& l) {
  return l_inverse(w_hat, l);
}

namespace {

void check_attention_shapes(const Tensor3& x_hat, const AttentionParams& p,
                            const ModelConfig& cfg) {
  const int h = cfg.h();
  if (static_cast<int>(p.wq.size()) != h || static_cast<int>(p.wk.size()) != h ||
      static_cast<int>(p.wv.size()) != h)
    throw std::invalid_argument("l_mha: expected " + std::to_string(h) + " heads");
  if (x_hat.n2 != cfg.d_s() || x_hat.n3 != cfg.p)
    throw std::invalid_argument("l_mha: input is " + x_hat.dims_str() + ", expected ?x" +
                                std::to_string(cfg.d_s()) + "x" + std::to_string(cfg.p));
  for (int j = 0; j < h; ++j) {
    if (p.wq[j].n1 != cfg.d_s() || p.wq[j].n2 != cfg.d_h() || p.wq[j].n3 != cfg.p)
      throw std::invalid_argument("l_mha: head weight " + p.wq[j].dims_str() + " misshapen");
  }
  if (p.wo.n1 != cfg.d_s() || p.wo.n2 != cfg.d_s() || p.wo.n3 != cfg.p)
    throw std::invalid_argument("l_mha: output projection misshapen");
}

// standard scaled-dot-product attention at width d_s inside one slice
Matrix slice_attention(const Matrix& xq, const Matrix& xkv, const AttentionParams& p,
                       const ModelConfig& cfg, int slice, const Matrix* mask) {
  const int tq = xq.rows, tk = xkv.rows;
  const int h = cfg.h(), dh = cfg.d_h(), ds = cfg.d_s();
  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));
  Matrix concat(tq, ds);
  for (int j = 0; j < h; ++j) {
    const Matrix wq = frontal_slice(p.wq[j], slice);
    const Matrix wk = frontal_slice(p.wk[j], slice);
    const Matrix wv = frontal_slice(p.wv[j], slice);
    const Matrix q = matmul(xq, wq);
    const Matrix k = matmul(xkv, wk);
    const Matrix v = matmul(xkv, wv);
    Matrix scores(tq, tk);
    kern::gemm_nt(q.a.data(), k.a.data(), scores.a.data(), tq, dh, tk);
    for (auto& s : scores.a) s *= inv_sqrt_dh;
    if (mask) {
      if (mask->rows != tq || mask->cols != tk)
        throw std::invalid_argument("l_mha: mask must be " + std::to_string(tq) + "x" +
                                    std::to_string(tk));
      for (std::size_t i = 0; i < scores.a.size(); ++i) scores.a[i] += mask->a[i];
    }
    const Matrix attn = softmax_rows(scores);
    const Matrix head = matmul(attn, v);
    for (int r = 0; r < tq; ++r)
      for (int c = 0; c < dh; ++c) concat(r, j * dh + c) = head(r, c);
  }
  return matmul(concat, frontal_slice(p.wo, slice));
}

}  // namespace

Tensor3 mha_spectral_core(const Tensor3& x_hat, const AttentionParams& p,
                          const ModelConfig& cfg, const Matrix* mask) {
  check_attention_shapes(x_hat, p, cfg);
  Tensor3 y_hat(x_hat.n1, x_hat.n2, x_hat.n3);
  for_each_slice(cfg.p, [&](int i) {
    const Matrix xi = frontal_slice(x_hat, i);
    set_frontal_slice(y_hat, i, slice_attention(xi, xi, p, cfg, i, mask));
  });
  return y_hat;
}

Tensor3 cross_attention_spectral_core(const Tensor3& xq_hat, const Tensor3& xkv_hat,
                                      const AttentionParams& p, const ModelConfig& cfg) {
  check_attention_shapes(xq_hat, p, cfg);
  if (xkv_hat.n2 != cfg.d_s() || xkv_hat.n3 != cfg.p)
    throw std::invalid_argument("l_cross_attention: encoder stream misshapen");
  Tensor3 y_hat(xq_hat.n1, xq_hat.n2, xq_hat.n3);
  for_each_slice(cfg.p, [&](int i) {
    const Matrix xq = frontal_slice(xq_hat, i);
    const Matrix xkv = frontal_slice(xkv_hat, i);
    set_frontal_slice(y_hat, i, slice_attention(xq, xkv, p, cfg, i, nullptr));
  });
  return y_hat;
}

Tensor3 ffn_spectral_core(const Tensor3& x_hat, const FfnParams& p, const ModelConfig& cfg) {
  if (x_hat.n2 != cfg.d_s() || x_hat.n3 != cfg.p)
    throw std::invalid_argument("tffn: input is " + x_hat.dims_str());
  if (p.w1.n1 != cfg.d_s() || p.w1.n2 != cfg.d_ff_s() || p.w2.n1 != cfg.d_ff_s() ||
      p.w2.n2 != cfg.d_s() || p.b1.n2 != cfg.d_ff_s() || p.b2.n2 != cfg.d_s())
    throw std::invalid_argument("tffn: weight shapes do not match config");
  Tensor3 y_hat(x_hat.n1, x_hat.n2, x_hat.n3);
  for_each_slice(cfg.p, [&](int i) {
    const Matrix xi = frontal_slice(x_hat, i);
    Matrix hidden = matmul(xi, frontal_slice(p.w1, i));
    for (int r = 0; r < hidden.rows; ++r)
      for (int c = 0; c < hidden.cols; ++c) {
        hidden(r, c) += p.b1(0, c, i);
        hidden(r, c) = activate(hidden(r, c), cfg.activation);
      }
    Matrix out = matmul(hidden, frontal_slice(p.w2, i));
    for (int r = 0; r < out.rows; ++r)
      for (int c = 0; c < out.cols; ++c) out(r, c) += p.b2(0, c, i);
    set_frontal_slice(y_hat, i, out);
  });
  return y_hat;
}

Tensor3 l_mha(const Tensor3& x, const AttentionParams& p, const ModelConfig& cfg,
              const TransformOp& l, const Matrix* mask) {
  return l_inverse(mha_spectral_core(l_forward(x, l), p, cfg, mask), l);
}

Tensor3 l_mha_masked(const Tensor3& x, const AttentionParams& p, const ModelConfig& cfg,
                     const TransformOp& l) {
  const Matrix mask = causal_mask(x.n1);
  return l_mha(x, p, cfg, l, &mask);
}

Tensor3 l_cross_attention(const Tensor3& x_dec, const Tensor3& x_enc, const AttentionParams& p,
                          const ModelConfig& cfg, const TransformOp& l) {
  return l_inverse(
      cross_attention_spectral_core(l_forward(x_dec, l), l_forward(x_enc, l), p, cfg), l);
}

Tensor3 tffn(const Tensor3& x, const FfnParams& p, const ModelConfig& cfg,
             const TransformOp& l) {
  return l_inverse(ffn_spectral_core(l_forward(x, l), p, cfg), l);
}

Tensor3 encoder_layer(const Tensor3& x, const EncoderParams& p, const ModelConfig& cfg,
                      const TransformOp& l) {
  const Tensor3 x1 = tensor_layernorm(add(x, l_mha(x, p.attn, cfg, l, nullptr)), p.ln1);
  return tensor_layernorm(add(x1, tffn(x1, p.ffn, cfg, l)), p.ln2);
}

Tensor3 decoder_layer(const Tensor3& x, const Tensor3& x_enc, const DecoderParams& p,
                      const ModelConfig& cfg, const TransformOp& l) {
  const Tensor3 x1 = tensor_layernorm(add(x, l_mha_masked(x, p.self_attn, cfg, l)), p.ln1);
  const Tensor3 x2 =
      tensor_layernorm(add(x1, l_cross_attention(x1, x_enc, p.cross_attn, cfg, l)), p.ln2);
  return tensor_layernorm(add(x2, tffn(x2, p.ffn, cfg, l)), p.ln3);
}

// --- model -------------------------------------------------------------------

namespace {

AttentionParams init_attention(const ModelConfig& cfg, Rng& rng, double bound) {
  AttentionParams p;
  const int h = cfg.h();
  p.wq.reserve(h);
  p.wk.reserve(h);
  p.wv.reserve(h);
  for (int j = 0; j < h; ++j) {
    p.wq.push_back(random_tensor(cfg.d_s(), cfg.d_h(), cfg.p, rng, -bound, bound));
    p.wk.push_back(random_tensor(cfg.d_s(), cfg.d_h(), cfg.p, rng, -bound, bound));
    p.wv.push_back(random_tensor(cfg.d_s(), cfg.d_h(), cfg.p, rng, -bound, bound));
  }
  p.wo = random_tensor(cfg.d_s(), cfg.d_s(), cfg.p, rng, -bound, bound);
  return p;
}

}  // namespace

Model Model::init(const ModelConfig& cfg, int vocab, int classes) {
  return init(cfg, vocab, classes, cfg.make_transform());
}

Model Model::init(const ModelConfig& cfg, int vocab, int classes, TransformOp transform) {
  cfg.validate();
  if (vocab < 1 || classes < 2)
    throw std::invalid_argument("Model: vocab must be >= 1 and classes >= 2");
  if (transform.p != cfg.p)
    throw std::invalid_argument("Model: transform size != p");
  Model m;
  m.cfg = cfg;
  m.transform = std::move(transform);
  m.vocab = vocab;
  m.classes = classes;

  Rng master(cfg.seed);
  m.embedding = EmbeddingTable::random_init(vocab, cfg.d, master.next_u64());
  if (cfg.pe_kind == PEStrategy::Kind::Learnable)
    m.pe = PEStrategy::learnable(cfg.t_len, cfg.d_s(), cfg.p, master.next_u64());
  else
    m.pe = PEStrategy::named(PEStrategy::kind_name(cfg.pe_kind), cfg.p);

  const double bound = 1.0 / std::sqrt(static_cast<double>(cfg.d_s()));
  m.layers.reserve(cfg.layers);
  for (int layer = 0; layer < cfg.layers; ++layer) {
    EncoderParams ep;
    ep.attn = init_attention(cfg, master, bound);
    ep.ffn.w1 = random_tensor(cfg.d_s(), cfg.d_ff_s(), cfg.p, master, -bound, bound);
    ep.ffn.w2 = random_tensor(cfg.d_ff_s(), cfg.d_s(), cfg.p, master, -bound, bound);
    ep.ffn.b1 = Tensor3(1, cfg.d_ff_s(), cfg.p);
    ep.ffn.b2 = Tensor3(1, cfg.d_s(), cfg.p);
    ep.ln1 = LayerNormParams::unit(cfg.d_s(), cfg.p);
    ep.ln2 = LayerNormParams::unit(cfg.d_s(), cfg.p);
    m.layers.push_back(std::move(ep));
  }
  const double cls_bound = 1.0 / std::sqrt(static_cast<double>(cfg.d));
  m.cls_w = random_matrix(cfg.d, classes, master, -cls_bound, cls_bound);
  m.cls_b.assign(classes, 0.0);
  return m;
}

std::vector<ParamRef> parameters(Model& m) {
  std::vector<ParamRef> out;
  auto push_t = [&](const std::string& name, Tensor3& t, bool decay) {
    out.push_back({name, t.a.data(), t.a.size(), decay, {t.n1, t.n2, t.n3}});
  };
  out.push_back({"embedding",
                 m.embedding.weights.a.data(),
                 m.embedding.weights.a.size(),
                 true,
                 {m.embedding.vocab, m.embedding.d, 1}});
  if (m.pe.is_learnable()) push_t("pe.table", m.pe.learn_table, true);
  for (std::size_t layer = 0; layer < m.layers.size(); ++layer) {
    EncoderParams& ep = m.layers[layer];
    const std::string base = "enc" + std::to_string(layer) + ".";
    for (std::size_t j = 0; j < ep.attn.wq.size(); ++j) {
      const std::string hj = std::to_string(j);
      push_t(base + "attn.q" + hj, ep.attn.wq[j], true);
      push_t(base + "attn.k" + hj, ep.attn.wk[j], true);
      push_t(base + "attn.v" + hj, ep.attn.wv[j], true);
    }
    push_t(base + "attn.o", ep.attn.wo, true);
    push_t(base + "ffn.w1", ep.ffn.w1, true);
    push_t(base + "ffn.w2", ep.ffn.w2, true);
    push_t(base + "ffn.b1", ep.ffn.b1, false);
    push_t(base + "ffn.b2", ep.ffn.b2, false);
    push_t(base + "ln1.gamma", ep.ln1.gamma, false);
    push_t(base + "ln1.beta", ep.ln1.beta, false);
    push_t(base + "ln2.gamma", ep.ln2.gamma, false);
    push_t(base + "ln2.beta", ep.ln2.beta, false);
  }
  out.push_back({"cls.w", m.cls_w.a.data(), m.cls_w.a.size(), true,
                 {m.cls_w.rows, m.cls_w.cols, 1}});
  out.push_back({"cls.b", m.cls_b.data(), m.cls_b.size(), false,
                 {1, static_cast<int>(m.cls_b.size()), 1}});
  return out;
}

EncodeResult encode(const Model& m, const std::vector<int>& tokens,
                    const std::vector<std::uint8_t>& mask) {
  const ModelConfig& cfg = m.cfg;
  if (static_cast<int>(tokens.size()) != cfg.t_len ||
      static_cast<int>(mask.size()) != cfg.t_len)
    throw std::invalid_argument("encode: tokens/mask must have length T=" +
                                std::to_string(cfg.t_len));
  const Matrix x = embed(tokens, m.embedding);
  Tensor3 h = tensorize(x, cfg.p);
  h = add(h, positional_encoding(m.pe, cfg.t_len, cfg.d_s(), cfg.p));
  for (const EncoderParams& layer : m.layers) h = encoder_layer(h, layer, cfg, m.transform);
  const Matrix z = matricize(h);
  EncodeResult res;
  res.pooled = masked_mean_rows(z, mask);
  res.logits = classify(z, mask, m.cls_w, m.cls_b);
  return res;
}

EncodeResult encode(const Model& m, const std::vector<int>& tokens) {
  if (static_cast<int>(tokens.size()) > m.cfg.t_len)
    throw std::invalid_argument("encode: sequence longer than T");
  std::vector<int> padded(m.cfg.t_len, 0);
  std::vector<std::uint8_t> mask(m.cfg.t_len, 0);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    padded[i] = tokens[i];
    mask[i] = 1;
  }
  return encode(m, padded, mask);
}

// --- checkpoints ---------------------------------------------------------------

namespace {

using nlohmann::json;

json dump_dims(const Tensor3& t) { return json::array({t.n1, t.n2, t.n3}); }

constexpr int kCheckpointVersion = 1;

}  // namespace

void save_checkpoint(const Model& m, const std::string& path) {
  json j;
  j["format"] = "ltt-checkpoint";
  j["version"] = kCheckpointVersion;
  j["config"] = {
      {"T", m.cfg.t_len},
      {"d", m.cfg.d},
      {"p", m.cfg.p},
      {"layers", m.cfg.layers},
      {"heads", m.cfg.heads},
      {"pe", PEStrategy::kind_name(m.cfg.pe_kind)},
      {"transform", m.cfg.transform_kind},
      {"activation", activation_name(m.cfg.activation)},
      {"seed", m.cfg.seed},
  };
  j["vocab"] = m.vocab;
  j["classes"] = m.classes;
  j["transform_matrix"] = {{"p", m.transform.p},
                           {"orthonormal", m.transform.orthonormal},
                           {"z", m.transform.z.a}};
  json params = json::object();
  Model& mm = const_cast<Model&>(m);
  for (const ParamRef& ref : parameters(mm)) {
    params[ref.name] = std::vector<double>(ref.data, ref.data + ref.len);
  }
  json shapes = json::object();
  shapes["embedding"] = json::array({m.embedding.vocab, m.embedding.d});
  if (m.pe.is_learnable()) shapes["pe.table"] = dump_dims(m.pe.learn_table);
  j["params"] = std::move(params);
  j["shapes"] = std::move(shapes);

  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_checkpoint: cannot write " + path);
  out << j.dump(1) << "\n";
}

Model load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
  json j;
  in >> j;
  if (j.value("format", "") != "ltt-checkpoint")
    throw std::runtime_error("load_checkpoint: not a checkpoint file");
  if (j.value("version", -1) != kCheckpointVersion)
    throw std::runtime_error("load_checkpoint: unsupported version");

  ModelConfig cfg;
  const json& c = j.at("config");
  cfg.t_len = c.at("T").get<int>();
  cfg.d = c.at("d").get<int>();
  cfg.p = c.at("p").get<int>();
  cfg.layers = c.at("layers").get<int>();
  cfg.heads = c.at("heads").get<int>();
  const std::string pe_name = c.at("pe").get<std::string>();
  cfg.pe_kind = pe_name == "learnable" ? PEStrategy::Kind::Learnable
                                       : PEStrategy::named(pe_name, cfg.p).kind;
  cfg.transform_kind = c.at("transform").get<std::string>();
  cfg.activation = activation_from_name(c.at("activation").get<std::string>());
  cfg.seed = c.at("seed").get<std::uint64_t>();

  // the stored transform matrix is authoritative; a file-backed transform
  // stays loadable even if the original file moved
  const json& tm = j.at("transform_matrix");
  if (!tm.at("orthonormal").get<bool>())
    throw std::runtime_error("load_checkpoint: only orthonormal transforms are supported");
  const int tp = tm.at("p").get<int>();
  Matrix z(tp, tp, tm.at("z").get<std::vector<double>>());
  Matrix zt = transpose(z);
  TransformOp transform = TransformOp::unchecked(std::move(z), std::move(zt), true);

  Model m = Model::init(cfg, j.at("vocab").get<int>(), j.at("classes").get<int>(),
                        std::move(transform));

  const json& params = j.at("params");
  for (const ParamRef& ref : parameters(m)) {
    const auto it = params.find(ref.name);
    if (it == params.end())
      throw std::runtime_error("load_checkpoint: missing parameter " + ref.name);
    const auto vals = it->get<std::vector<double>>();
    if (vals.size() != ref.len)
      throw std::runtime_error("load_checkpoint: size mismatch for " + ref.name);
    std::copy(vals.begin(), vals.end(), ref.data);
  }
  return m;
}

}  // namespace ltt
