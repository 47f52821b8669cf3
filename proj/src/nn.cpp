#include "ltt/nn.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace ltt {

namespace {
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;
}  // namespace

Activation activation_from_name(const std::string& name) {
  if (name == "relu") return Activation::Relu;
  if (name == "gelu") return Activation::Gelu;
  throw std::invalid_argument("unknown activation '" + name + "' (relu|gelu)");
}

const char* activation_name(Activation a) {
  return a == Activation::Relu ? "relu" : "gelu";
}

double activate(double x, Activation a) {
  if (a == Activation::Relu) return x > 0.0 ? x : 0.0;
  const double u = kGeluC * (x + kGeluA * x * x * x);
  return 0.5 * x * (1.0 + std::tanh(u));
}

double activate_grad(double x, Activation a) {
  if (a == Activation::Relu) return x > 0.0 ? 1.0 : 0.0;
  const double u = kGeluC * (x + kGeluA * x * x * x);
  const double t = std::tanh(u);
  const double du = kGeluC * (1.0 + 3.0 * kGeluA * x * x);
  return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du;
}

Tensor3 activate(const Tensor3& x, Activation a) {
  Tensor3 out(x.n1, x.n2, x.n3);
  for (std::size_t i = 0; i < x.size(); ++i) out.a[i] = activate(x.a[i], a);
  return out;
}

Matrix softmax_rows(const Matrix& s) {
  Matrix out(s.rows, s.cols);
  for (int i = 0; i < s.rows; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < s.cols; ++j) mx = std::max(mx, s(i, j));
    if (!(mx > -std::numeric_limits<double>::infinity()))
      throw std::invalid_argument("softmax_rows: row " + std::to_string(i) +
                                  " has no unmasked entry");
    double denom = 0.0;
    for (int j = 0; j < s.cols; ++j) {
      const double e = std::exp(s(i, j) - mx);
      out(i, j) = e;
      denom += e;
    }
    const double inv = 1.0 / denom;
    for (int j = 0; j < s.cols; ++j) out(i, j) *= inv;
  }
  return out;
}

Tensor3 softmax_rows_slicewise(const Tensor3& s) {
  Tensor3 out(s.n1, s.n2, s.n3);
  for (int k = 0; k < s.n3; ++k) set_frontal_slice(out, k, softmax_rows(frontal_slice(s, k)));
  return out;
}

std::vector<double> pe_alphas(PEStrategy::Kind kind, int p) {
  std::vector<double> a(p, 1.0);
  switch (kind) {
    case PEStrategy::Kind::Standard:
      break;
    case PEStrategy::Kind::Linear:
      for (int k = 0; k < p; ++k) a[k] = static_cast<double>(k + 1) / p;
      break;
    case PEStrategy::Kind::Exponential:
      if (p > 1)
        for (int k = 0; k < p; ++k) a[k] = std::pow(2.0, static_cast<double>(k) / (p - 1));
      break;
    case PEStrategy::Kind::Harmonic:
      for (int k = 0; k < p; ++k) a[k] = static_cast<double>(k + 1);
      break;
    case PEStrategy::Kind::Learnable:
      throw std::invalid_argument("pe_alphas: learnable kind has no alpha table");
  }
  return a;
}

namespace {
PEStrategy fixed_strategy(PEStrategy::Kind kind, int p) {
  if (p < 1) throw std::invalid_argument("PEStrategy: p must be >= 1");
  PEStrategy s;
  s.kind = kind;
  s.alphas = pe_alphas(kind, p);
  return s;
}
}  // namespace

PEStrategy PEStrategy::standard(int p) { return fixed_strategy(Kind::Standard, p); }
PEStrategy PEStrategy::linear(int p) { return fixed_strategy(Kind::Linear, p); }
PEStrategy PEStrategy::exponential(int p) { return fixed_strategy(Kind::Exponential, p); }
PEStrategy PEStrategy::harmonic(int p) { return fixed_strategy(Kind::Harmonic, p); }

PEStrategy PEStrategy::learnable(int t_len, int d_s, int p, std::uint64_t seed) {
  PEStrategy s;
  s.kind = Kind::Learnable;
  Rng rng(seed);
  s.learn_table = random_tensor(t_len, d_s, p, rng, -0.02, 0.02);
  return s;
}

PEStrategy PEStrategy::named(const std::string& name, int p) {
  if (name == "standard") return standard(p);
  if (name == "linear") return linear(p);
  if (name == "exponential") return exponential(p);
  if (name == "harmonic") return harmonic(p);
  throw std::invalid_argument("unknown pe strategy '" + name +
                              "' (standard|linear|exponential|harmonic|learnable)");
}

const char* PEStrategy::kind_name(Kind k) {
  switch (k) {
    case Kind::Standard: return "standard";
    case Kind::Linear: return "linear";
    case Kind::Exponential: return "exponential";
    case Kind::Harmonic: return "harmonic";
    case Kind::Learnable: return "learnable";
  }
  return "?";
}

Tensor3 positional_encoding(const PEStrategy& s, int t_len, int d_s, int p) {
  if (t_len < 1 || d_s < 1 || p < 1)
    throw std::invalid_argument("positional_encoding: dims must be >= 1");
  if (s.is_learnable()) {
    if (s.learn_table.n1 != t_len || s.learn_table.n2 != d_s || s.learn_table.n3 != p)
      throw std::invalid_argument("positional_encoding: learn table is " +
                                  s.learn_table.dims_str() + ", expected " +
                                  Tensor3(t_len, d_s, p).dims_str());
    return s.learn_table;
  }
  if (static_cast<int>(s.alphas.size()) != p)
    throw std::invalid_argument("positional_encoding: alpha table size mismatch");
  Tensor3 pe(t_len, d_s, p);
  for (int t = 0; t < t_len; ++t) {
    const double pos = t + 1;  // positions count from 1
    for (int j = 0; j < d_s; ++j) {
      const double expo = 2.0 * (j / 2) / static_cast<double>(d_s);
      const double base = pos / std::pow(10000.0, expo);
      const bool sin_row = (j % 2 == 0);  // odd 1-based j
      for (int k = 0; k < p; ++k) {
        const double arg = base * s.alphas[k];
        pe(t, j, k) = sin_row ? std::sin(arg) : std::cos(arg);
      }
    }
  }
  return pe;
}

LayerNormParams LayerNormParams::unit(int d_s, int p, double eps) {
  LayerNormParams out;
  out.gamma = Tensor3(1, d_s, p);
  out.beta = Tensor3(1, d_s, p);
  for (auto& v : out.gamma.a) v = 1.0;
  out.eps = eps;
  return out;
}

Tensor3 tensor_layernorm(const Tensor3& x, const LayerNormParams& p) {
  if (p.gamma.n2 != x.n2 || p.gamma.n3 != x.n3 || p.gamma.n1 != 1 ||
      !p.gamma.same_dims(p.beta))
    throw std::invalid_argument("tensor_layernorm: parameter shapes do not match input");
  if (!(p.eps > 0.0)) throw std::invalid_argument("tensor_layernorm: eps must be > 0");
  const int ds = x.n2;
  Tensor3 out(x.n1, x.n2, x.n3);
  for (int k = 0; k < x.n3; ++k) {
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
      const double inv = 1.0 / std::sqrt(var + p.eps);
      for (int j = 0; j < ds; ++j)
        out(t, j, k) = p.gamma(0, j, k) * (x(t, j, k) - mean) * inv + p.beta(0, j, k);
    }
  }
  return out;
}

EmbeddingTable EmbeddingTable::random_init(int vocab, int d, std::uint64_t seed) {
  if (vocab < 1 || d < 1) throw std::invalid_argument("EmbeddingTable: dims must be >= 1");
  EmbeddingTable e;
  e.vocab = vocab;
  e.d = d;
  Rng rng(seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(d));
  e.weights = random_matrix(vocab, d, rng, -bound, bound);
  return e;
}

Matrix embed(const std::vector<int>& tokens, const EmbeddingTable& e) {
  if (tokens.empty()) throw std::invalid_argument("embed: empty token sequence");
  Matrix out(static_cast<int>(tokens.size()), e.d);
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    const int id = tokens[t];
    if (id < 0 || id >= e.vocab)
      throw std::out_of_range("embed: token id " + std::to_string(id) +
                              " outside vocab of " + std::to_string(e.vocab));
    for (int j = 0; j < e.d; ++j) out(static_cast<int>(t), j) = e.weights(id, j);
  }
  return out;
}

Matrix masked_mean_rows(const Matrix& z, const std::vector<std::uint8_t>& mask) {
  if (static_cast<int>(mask.size()) != z.rows)
    throw std::invalid_argument("masked_mean_rows: mask length != row count");
  int count = 0;
  Matrix mean(1, z.cols);
  for (int t = 0; t < z.rows; ++t) {
    if (!mask[t]) continue;
    ++count;
    for (int j = 0; j < z.cols; ++j) mean(0, j) += z(t, j);
  }
  if (count == 0) throw std::invalid_argument("masked_mean_rows: all positions masked");
  const double inv = 1.0 / count;
  for (int j = 0; j < z.cols; ++j) mean(0, j) *= inv;
  return mean;
}

std::vector<double> classify(const Matrix& z, const std::vector<std::uint8_t>& mask,
                             const Matrix& w, const std::vector<double>& b) {
  if (w.rows != z.cols || static_cast<int>(b.size()) != w.cols)
    throw std::invalid_argument("classify: weight/bias shapes do not match");
  const Matrix mean = masked_mean_rows(z, mask);
  std::vector<double> logits(b.begin(), b.end());
  for (int c = 0; c < w.cols; ++c)
    for (int j = 0; j < w.rows; ++j) logits[c] += mean(0, j) * w(j, c);
  return logits;
}

}  // namespace ltt
