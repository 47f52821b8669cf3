#include "ltt/autograd.hpp"

#include <cmath>
#include <optional>
#include <stdexcept>

#include "ltt/kernels.hpp"

namespace ltt {

namespace {

// per-slice transpose, no transform involved
Tensor3 slice_transpose(const Tensor3& a) {
  Tensor3 out(a.n2, a.n1, a.n3);
  for (int i = 0; i < a.n1; ++i)
    for (int j = 0; j < a.n2; ++j)
      for (int k = 0; k < a.n3; ++k) out(j, i, k) = a(i, j, k);
  return out;
}

}  // namespace

LProductGrads backward_l_product(const Tensor3& g, const Tensor3& x, const Tensor3& w,
                                 const TransformOp& l) {
  if (g.n1 != x.n1 || g.n2 != w.n2 || x.n2 != w.n1 || g.n3 != l.p || x.n3 != l.p ||
      w.n3 != l.p)
    throw std::invalid_argument("backward_l_product: shapes inconsistent with y = x *_L w");
  LProductGrads out;
  out.dx = l_product(g, l_transpose(w, l), l);
  out.dw = l_product(l_transpose(x, l), g, l);
  return out;
}

Tensor3 backward_mode3(const Tensor3& g, const Matrix& z) {
  return mode_n_product(g, transpose(z), 3);
}

// --- tape ---------------------------------------------------------------------

int Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

int Tape::leaf(Tensor3 value, std::string name, bool requires_grad) {
  Node n;
  n.op = Op::Leaf;
  n.value = std::move(value);
  n.name = std::move(name);
  n.needs_grad = requires_grad;
  return push(std::move(n));
}

int Tape::add(int a, int b) {
  Node n;
  n.op = Op::Add;
  n.in0 = a;
  n.in1 = b;
  n.value = ltt::add(nodes_[a].value, nodes_[b].value);
  n.needs_grad = req(a) || req(b);
  return push(std::move(n));
}

int Tape::bias_add(int x, int b) {
  const Tensor3& xv = nodes_[x].value;
  const Tensor3& bv = nodes_[b].value;
  if (bv.n1 != 1 || bv.n2 != xv.n2 || bv.n3 != xv.n3)
    throw std::invalid_argument("bias_add: bias must be 1 x n2 x n3 of the input");
  Node n;
  n.op = Op::BiasAdd;
  n.in0 = x;
  n.in1 = b;
  Tensor3 out = xv;
  for (int i = 0; i < xv.n1; ++i)
    for (int j = 0; j < xv.n2; ++j)
      for (int k = 0; k < xv.n3; ++k) out(i, j, k) += bv(0, j, k);
  n.value = std::move(out);
  n.needs_grad = req(x) || req(b);
  return push(std::move(n));
}

int Tape::scale(int x, double c) {
  Node n;
  n.op = Op::Scale;
  n.in0 = x;
  n.c = c;
  n.value = ltt::scale(nodes_[x].value, c);
  n.needs_grad = req(x);
  return push(std::move(n));
}

int Tape::mode3(int x, Matrix m) {
  Node n;
  n.op = Op::Mode3;
  n.in0 = x;
  n.value = mode_n_product(nodes_[x].value, m, 3);
  n.m = std::move(m);
  n.needs_grad = req(x);
  return push(std::move(n));
}

int Tape::facewise(int a, int b) {
  Node n;
  n.op = Op::Facewise;
  n.in0 = a;
  n.in1 = b;
  n.value = facewise_product(nodes_[a].value, nodes_[b].value);
  n.needs_grad = req(a) || req(b);
  return push(std::move(n));
}

int Tape::f_transpose(int x) {
  Node n;
  n.op = Op::FTranspose;
  n.in0 = x;
  n.value = slice_transpose(nodes_[x].value);
  n.needs_grad = req(x);
  return push(std::move(n));
}

int Tape::softmax_rows(int x) {
  Node n;
  n.op = Op::Softmax;
  n.in0 = x;
  n.value = softmax_rows_slicewise(nodes_[x].value);
  n.needs_grad = req(x);
  return push(std::move(n));
}

int Tape::activation(int x, Activation act) {
  Node n;
  n.op = Op::Activation;
  n.in0 = x;
  n.act = act;
  n.value = activate(nodes_[x].value, act);
  n.needs_grad = req(x);
  return push(std::move(n));
}

int Tape::layernorm(int x, int gamma, int beta, double eps) {
  const Tensor3& xv = nodes_[x].value;
  LayerNormParams p;
  p.gamma = nodes_[gamma].value;
  p.beta = nodes_[beta].value;
  p.eps = eps;
  Node n;
  n.op = Op::LayerNorm;
  n.in0 = x;
  n.in1 = gamma;
  n.in2 = beta;
  n.eps = eps;
  n.value = tensor_layernorm(xv, p);
  n.needs_grad = req(x) || req(gamma) || req(beta);
  return push(std::move(n));
}

int Tape::tensorize_op(int x, int p) {
  const Tensor3& xv = nodes_[x].value;
  if (xv.n3 != 1) throw std::invalid_argument("tensorize_op: input must be T x d x 1");
  Matrix flat(xv.n1, xv.n2);
  for (int i = 0; i < xv.n1; ++i)
    for (int j = 0; j < xv.n2; ++j) flat(i, j) = xv(i, j, 0);
  Node n;
  n.op = Op::Tensorize;
  n.in0 = x;
  n.split_p = p;
  n.value = tensorize(flat, p);
  n.needs_grad = req(x);
  return push(std::move(n));
}

int Tape::matricize_op(int x) {
  const Tensor3& xv = nodes_[x].value;
  const Matrix flat = matricize(xv);
  Node n;
  n.op = Op::Matricize;
  n.in0 = x;
  n.split_p = xv.n3;
  n.value = Tensor3(flat.rows, flat.cols, 1, flat.a);
  n.needs_grad = req(x);
  return push(std::move(n));
}

int Tape::concat_mode2(const std::vector<int>& xs) {
  if (xs.empty()) throw std::invalid_argument("concat_mode2: no inputs");
  const Tensor3& first = nodes_[xs[0]].value;
  int total = 0;
  for (int id : xs) {
    const Tensor3& v = nodes_[id].value;
    if (v.n1 != first.n1 || v.n3 != first.n3)
      throw std::invalid_argument("concat_mode2: incompatible shapes");
    total += v.n2;
  }
  Tensor3 out(first.n1, total, first.n3);
  int off = 0;
  for (int id : xs) {
    const Tensor3& v = nodes_[id].value;
    for (int i = 0; i < v.n1; ++i)
      for (int j = 0; j < v.n2; ++j)
        for (int k = 0; k < v.n3; ++k) out(i, off + j, k) = v(i, j, k);
    off += v.n2;
  }
  Node n;
  n.op = Op::Concat2;
  n.in_list = xs;
  n.value = std::move(out);
  for (int id : xs) n.needs_grad = n.needs_grad || req(id);
  return push(std::move(n));
}

int Tape::masked_mean(int x, std::vector<std::uint8_t> mask) {
  const Tensor3& xv = nodes_[x].value;
  if (xv.n3 != 1) throw std::invalid_argument("masked_mean: input must be T x d x 1");
  Matrix flat(xv.n1, xv.n2);
  for (int i = 0; i < xv.n1; ++i)
    for (int j = 0; j < xv.n2; ++j) flat(i, j) = xv(i, j, 0);
  const Matrix mean = masked_mean_rows(flat, mask);
  Node n;
  n.op = Op::MaskedMean;
  n.in0 = x;
  n.mask = std::move(mask);
  n.value = Tensor3(1, xv.n2, 1, mean.a);
  n.needs_grad = req(x);
  return push(std::move(n));
}

int Tape::embed_gather(int table, std::vector<int> ids) {
  const Tensor3& tv = nodes_[table].value;
  if (tv.n3 != 1) throw std::invalid_argument("embed_gather: table must be vocab x d x 1");
  Tensor3 out(static_cast<int>(ids.size()), tv.n2, 1);
  for (std::size_t t = 0; t < ids.size(); ++t) {
    const int id = ids[t];
    if (id < 0 || id >= tv.n1)
      throw std::out_of_range("embed_gather: token id " + std::to_string(id));
    for (int j = 0; j < tv.n2; ++j) out(static_cast<int>(t), j, 0) = tv(id, j, 0);
  }
  Node n;
  n.op = Op::EmbedGather;
  n.in0 = table;
  n.ids = std::move(ids);
  n.value = std::move(out);
  n.needs_grad = req(table);
  return push(std::move(n));
}

int Tape::cross_entropy(int logits, int label) {
  const Tensor3& lv = nodes_[logits].value;
  if (lv.n1 != 1 || lv.n3 != 1)
    throw std::invalid_argument("cross_entropy: logits must be 1 x C x 1");
  if (label < 0 || label >= lv.n2)
    throw std::invalid_argument("cross_entropy: label out of range");
  double mx = lv.a[0];
  for (double v : lv.a) mx = std::max(mx, v);
  double lse = 0.0;
  for (double v : lv.a) lse += std::exp(v - mx);
  lse = mx + std::log(lse);
  Node n;
  n.op = Op::CrossEntropy;
  n.in0 = logits;
  n.label = label;
  n.value = Tensor3(1, 1, 1, {lse - lv.a[label]});
  n.needs_grad = req(logits);
  return push(std::move(n));
}

std::map<std::string, Tensor3> Tape::backward(int loss_id) {
  if (loss_id < 0 || loss_id >= static_cast<int>(nodes_.size()))
    throw std::invalid_argument("backward: bad node id");
  const Tensor3& lv = nodes_[loss_id].value;
  if (lv.size() != 1) throw std::invalid_argument("backward: loss must be scalar");

  std::vector<std::optional<Tensor3>> grads(nodes_.size());
  grads[loss_id] = Tensor3(1, 1, 1, {1.0});

  auto acc = [&](int id, Tensor3&& g) {
    if (!req(id)) return;
    if (!grads[id]) {
      grads[id] = std::move(g);
    } else {
      kern::add(grads[id]->a.data(), grads[id]->a.data(), g.a.data(), g.size());
    }
  };

  for (int i = loss_id; i >= 0; --i) {
    if (!grads[i] || nodes_[i].op == Op::Leaf) continue;
    const Node& n = nodes_[i];
    const Tensor3& g = *grads[i];
    switch (n.op) {
      case Op::Leaf:
        break;
      case Op::Add:
        acc(n.in0, Tensor3(g));
        acc(n.in1, Tensor3(g));
        break;
      case Op::BiasAdd: {
        acc(n.in0, Tensor3(g));
        if (req(n.in1)) {
          Tensor3 db(1, g.n2, g.n3);
          for (int r = 0; r < g.n1; ++r)
            for (int j = 0; j < g.n2; ++j)
              for (int k = 0; k < g.n3; ++k) db(0, j, k) += g(r, j, k);
          acc(n.in1, std::move(db));
        }
        break;
      }
      case Op::Scale:
        acc(n.in0, ltt::scale(g, n.c));
        break;
      case Op::Mode3:
        acc(n.in0, backward_mode3(g, n.m));
        break;
      case Op::Facewise: {
        const Tensor3& a = nodes_[n.in0].value;
        const Tensor3& b = nodes_[n.in1].value;
        if (req(n.in0)) acc(n.in0, facewise_product(g, slice_transpose(b)));
        if (req(n.in1)) acc(n.in1, facewise_product(slice_transpose(a), g));
        break;
      }
      case Op::FTranspose:
        acc(n.in0, slice_transpose(g));
        break;
      case Op::Softmax: {
        const Tensor3& soft = n.value;
        Tensor3 dx(g.n1, g.n2, g.n3);
        for (int k = 0; k < g.n3; ++k)
          for (int r = 0; r < g.n1; ++r) {
            double dotgs = 0.0;
            for (int j = 0; j < g.n2; ++j) dotgs += g(r, j, k) * soft(r, j, k);
            for (int j = 0; j < g.n2; ++j)
              dx(r, j, k) = soft(r, j, k) * (g(r, j, k) - dotgs);
          }
        acc(n.in0, std::move(dx));
        break;
      }
      case Op::Activation: {
        const Tensor3& x = nodes_[n.in0].value;
        Tensor3 dx(g.n1, g.n2, g.n3);
        for (std::size_t idx = 0; idx < g.size(); ++idx)
          dx.a[idx] = g.a[idx] * activate_grad(x.a[idx], n.act);
        acc(n.in0, std::move(dx));
        break;
      }
      case Op::LayerNorm: {
        const Tensor3& x = nodes_[n.in0].value;
        const Tensor3& gamma = nodes_[n.in1].value;
        const int ds = x.n2;
        Tensor3 dx(x.n1, x.n2, x.n3);
        Tensor3 dgamma(1, x.n2, x.n3);
        Tensor3 dbeta(1, x.n2, x.n3);
        for (int k = 0; k < x.n3; ++k)
          for (int t = 0; t < x.n1; ++t) {
            double mean = 0.0;
            for (int j = 0; j < ds; ++j) mean += x(t, j, k);
            mean /= ds;
            double var = 0.0;
            for (int j = 0; j < ds; ++j) {
              const double c = x(t, j, k) - mean;
              var += c * c;
            }
            var /= ds;
            const double inv = 1.0 / std::sqrt(var + n.eps);
            double m1 = 0.0, m2 = 0.0;
            for (int j = 0; j < ds; ++j) {
              const double xh = (x(t, j, k) - mean) * inv;
              const double dxh = g(t, j, k) * gamma(0, j, k);
              m1 += dxh;
              m2 += dxh * xh;
              dgamma(0, j, k) += g(t, j, k) * xh;
              dbeta(0, j, k) += g(t, j, k);
            }
            m1 /= ds;
            m2 /= ds;
            for (int j = 0; j < ds; ++j) {
              const double xh = (x(t, j, k) - mean) * inv;
              const double dxh = g(t, j, k) * gamma(0, j, k);
              dx(t, j, k) = inv * (dxh - m1 - xh * m2);
            }
          }
        acc(n.in0, std::move(dx));
        acc(n.in1, std::move(dgamma));
        acc(n.in2, std::move(dbeta));
        break;
      }
      case Op::Tensorize: {
        const Tensor3& x = nodes_[n.in0].value;
        Tensor3 dx(x.n1, x.n2, 1);
        const int ds = g.n2;
        for (int t = 0; t < g.n1; ++t)
          for (int k = 0; k < g.n3; ++k)
            for (int j = 0; j < ds; ++j) dx(t, k * ds + j, 0) = g(t, j, k);
        acc(n.in0, std::move(dx));
        break;
      }
      case Op::Matricize: {
        const Tensor3& x = nodes_[n.in0].value;
        Tensor3 dx(x.n1, x.n2, x.n3);
        for (int t = 0; t < x.n1; ++t)
          for (int k = 0; k < x.n3; ++k)
            for (int j = 0; j < x.n2; ++j) dx(t, j, k) = g(t, k * x.n2 + j, 0);
        acc(n.in0, std::move(dx));
        break;
      }
      case Op::Concat2: {
        int off = 0;
        for (int id : n.in_list) {
          const Tensor3& v = nodes_[id].value;
          if (req(id)) {
            Tensor3 part(v.n1, v.n2, v.n3);
            for (int r = 0; r < v.n1; ++r)
              for (int j = 0; j < v.n2; ++j)
                for (int k = 0; k < v.n3; ++k) part(r, j, k) = g(r, off + j, k);
            acc(id, std::move(part));
          }
          off += v.n2;
        }
        break;
      }
      case Op::MaskedMean: {
        const Tensor3& x = nodes_[n.in0].value;
        int cnt = 0;
        for (std::uint8_t f : n.mask) cnt += f ? 1 : 0;
        const double inv = 1.0 / cnt;
        Tensor3 dx(x.n1, x.n2, 1);
        for (int t = 0; t < x.n1; ++t) {
          if (!n.mask[t]) continue;
          for (int j = 0; j < x.n2; ++j) dx(t, j, 0) = g(0, j, 0) * inv;
        }
        acc(n.in0, std::move(dx));
        break;
      }
      case Op::EmbedGather: {
        const Tensor3& table = nodes_[n.in0].value;
        Tensor3 dt(table.n1, table.n2, 1);
        for (std::size_t t = 0; t < n.ids.size(); ++t)
          for (int j = 0; j < table.n2; ++j)
            dt(n.ids[t], j, 0) += g(static_cast<int>(t), j, 0);
        acc(n.in0, std::move(dt));
        break;
      }
      case Op::CrossEntropy: {
        const Tensor3& logits = nodes_[n.in0].value;
        double mx = logits.a[0];
        for (double v : logits.a) mx = std::max(mx, v);
        double denom = 0.0;
        for (double v : logits.a) denom += std::exp(v - mx);
        Tensor3 dl(1, logits.n2, 1);
        const double gs = g.a[0];
        for (int c = 0; c < logits.n2; ++c) {
          const double p = std::exp(logits.a[c] - mx) / denom;
          dl(0, c, 0) = gs * (p - (c == n.label ? 1.0 : 0.0));
        }
        acc(n.in0, std::move(dl));
        break;
      }
    }
  }

  std::map<std::string, Tensor3> named;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].op == Op::Leaf && nodes_[i].needs_grad && !nodes_[i].name.empty()) {
      if (grads[i])
        named.emplace(nodes_[i].name, std::move(*grads[i]));
      else
        named.emplace(nodes_[i].name,
                      Tensor3(nodes_[i].value.n1, nodes_[i].value.n2, nodes_[i].value.n3));
    }
  }
  return named;
}

// --- model-level --------------------------------------------------------------

std::map<std::string, int> register_model_leaves(Tape& tape, Model& m) {
  std::map<std::string, int> ids;
  for (const ParamRef& ref : parameters(m)) {
    Tensor3 t(ref.dims[0], ref.dims[1], ref.dims[2],
              std::vector<double>(ref.data, ref.data + ref.len));
    ids[ref.name] = tape.leaf(std::move(t), ref.name, true);
  }
  return ids;
}

int taped_example_loss(Tape& tape, const std::map<std::string, int>& leaves, const Model& m,
                       const Example& ex) {
  const ModelConfig& cfg = m.cfg;
  if (static_cast<int>(ex.tokens.size()) != cfg.t_len ||
      static_cast<int>(ex.mask.size()) != cfg.t_len)
    throw std::invalid_argument("taped_example_loss: example not padded to T");
  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(cfg.d_h()));

  auto leaf_id = [&](const std::string& name) {
    const auto it = leaves.find(name);
    if (it == leaves.end())
      throw std::invalid_argument("taped_example_loss: missing leaf " + name);
    return it->second;
  };

  int x = tape.embed_gather(leaf_id("embedding"), ex.tokens);
  int h = tape.tensorize_op(x, cfg.p);
  if (m.pe.is_learnable())
    h = tape.add(h, leaf_id("pe.table"));
  else
    h = tape.add(h, tape.constant(positional_encoding(m.pe, cfg.t_len, cfg.d_s(), cfg.p)));

  for (std::size_t layer = 0; layer < m.layers.size(); ++layer) {
    const std::string base = "enc" + std::to_string(layer) + ".";
    const int x_hat = tape.mode3(h, m.transform.z);
    std::vector<int> heads;
    for (int j = 0; j < cfg.h(); ++j) {
      const std::string hj = std::to_string(j);
      const int q = tape.facewise(x_hat, leaf_id(base + "attn.q" + hj));
      const int k = tape.facewise(x_hat, leaf_id(base + "attn.k" + hj));
      const int v = tape.facewise(x_hat, leaf_id(base + "attn.v" + hj));
      const int scores = tape.scale(tape.facewise(q, tape.f_transpose(k)), inv_sqrt_dh);
      const int attn = tape.softmax_rows(scores);
      heads.push_back(tape.facewise(attn, v));
    }
    const int concat = cfg.h() == 1 ? heads[0] : tape.concat_mode2(heads);
    const int y_hat = tape.facewise(concat, leaf_id(base + "attn.o"));
    const int attn_out = tape.mode3(y_hat, m.transform.z_inv);
    const int h1 = tape.layernorm(tape.add(h, attn_out), leaf_id(base + "ln1.gamma"),
                                  leaf_id(base + "ln1.beta"), m.layers[layer].ln1.eps);

    const int x_hat2 = tape.mode3(h1, m.transform.z);
    const int lin1 = tape.bias_add(tape.facewise(x_hat2, leaf_id(base + "ffn.w1")),
                                   leaf_id(base + "ffn.b1"));
    const int act = tape.activation(lin1, cfg.activation);
    const int lin2 = tape.bias_add(tape.facewise(act, leaf_id(base + "ffn.w2")),
                                   leaf_id(base + "ffn.b2"));
    const int ffn_out = tape.mode3(lin2, m.transform.z_inv);
    h = tape.layernorm(tape.add(h1, ffn_out), leaf_id(base + "ln2.gamma"),
                       leaf_id(base + "ln2.beta"), m.layers[layer].ln2.eps);
  }

  const int z = tape.matricize_op(h);
  const int pooled = tape.masked_mean(z, ex.mask);
  const int logits = tape.bias_add(tape.facewise(pooled, leaf_id("cls.w")), leaf_id("cls.b"));
  return tape.cross_entropy(logits, ex.label);
}

namespace {

int taped_batch_loss(Tape& tape, const std::map<std::string, int>& leaves, Model& m,
                     const std::vector<Example>& batch, LossKind kind) {
  if (batch.empty()) throw std::invalid_argument("grad: empty batch");
  int total = -1;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    int li = -1;
    try {
      li = taped_example_loss(tape, leaves, m, batch[i]);
    } catch (const std::invalid_argument& e) {
      // a non-finite intermediate trips the Tensor3 finiteness invariant
      throw std::runtime_error("grad: forward failed at batch element " + std::to_string(i) +
                               ": " + e.what());
    }
    if (!std::isfinite(tape.scalar(li)))
      throw std::runtime_error("grad: non-finite loss at batch element " + std::to_string(i));
    total = (total < 0) ? li : tape.add(total, li);
  }
  if (kind == LossKind::CrossEntropyMean)
    total = tape.scale(total, 1.0 / static_cast<double>(batch.size()));
  return total;
}

}  // namespace

GradStore grad(Model& m, const std::vector<Example>& batch, LossKind kind) {
  Tape tape;
  const auto leaves = register_model_leaves(tape, m);
  const int total = taped_batch_loss(tape, leaves, m, batch, kind);
  GradStore gs;
  gs.loss = tape.scalar(total);
  gs.named = tape.backward(total);
  return gs;
}

double batch_loss(Model& m, const std::vector<Example>& batch, LossKind kind) {
  Tape tape;
  const auto leaves = register_model_leaves(tape, m);
  return tape.scalar(taped_batch_loss(tape, leaves, m, batch, kind));
}

FdReport finite_difference_check(Model& m, const std::vector<Example>& batch, double h,
                                 double tol, const GradStore* analytic, LossKind kind) {
  if (!(h > 0.0)) throw std::invalid_argument("finite_difference_check: h must be > 0");
  GradStore computed;
  if (!analytic) {
    computed = grad(m, batch, kind);
    analytic = &computed;
  }
  FdReport report;
  for (const ParamRef& ref : parameters(m)) {
    const auto it = analytic->named.find(ref.name);
    if (it == analytic->named.end())
      throw std::invalid_argument("finite_difference_check: no gradient for " + ref.name);
    const Tensor3& a = it->second;
    FdEntry entry{ref.name, 0.0};
    for (std::size_t idx = 0; idx < ref.len; ++idx) {
      const double saved = ref.data[idx];
      ref.data[idx] = saved + h;
      const double up = batch_loss(m, batch, kind);
      ref.data[idx] = saved - h;
      const double down = batch_loss(m, batch, kind);
      ref.data[idx] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double diff = std::fabs(a.a[idx] - numeric);
      const double denom = std::max({std::fabs(a.a[idx]), std::fabs(numeric), 1e-12});
      entry.max_rel_err = std::max(entry.max_rel_err, diff == 0.0 ? 0.0 : diff / denom);
    }
    report.worst = std::max(report.worst, entry.max_rel_err);
    report.entries.push_back(std::move(entry));
  }
  report.pass = report.worst <= tol;
  return report;
}

}  // namespace ltt
