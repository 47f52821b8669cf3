#include "ltt/reference.hpp"

#include <cmath>
#include <stdexcept>

namespace ltt::ref {

namespace {

Matrix mm(const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows) throw std::invalid_argument("ref::mm: shape mismatch");
  Matrix c(a.rows, b.cols);
  for (int i = 0; i < a.rows; ++i)
    for (int j = 0; j < b.cols; ++j) {
      double acc = 0.0;
      for (int k = 0; k < a.cols; ++k) acc += a(i, k) * b(k, j);
      c(i, j) = acc;
    }
  return c;
}

Matrix softmax(const Matrix& s) {
  Matrix out(s.rows, s.cols);
  for (int i = 0; i < s.rows; ++i) {
    double mx = s(i, 0);
    for (int j = 1; j < s.cols; ++j) mx = std::max(mx, s(i, j));
    double denom = 0.0;
    for (int j = 0; j < s.cols; ++j) {
      out(i, j) = std::exp(s(i, j) - mx);
      denom += out(i, j);
    }
    for (int j = 0; j < s.cols; ++j) out(i, j) /= denom;
  }
  return out;
}

}  // namespace

Matrix attention(const Matrix& x, const AttentionWeights& w, int d_h, const Matrix* mask) {
  const int t_len = x.rows;
  const int width = x.cols;
  const int h = static_cast<int>(w.wq.size());
  Matrix concat(t_len, width);
  for (int j = 0; j < h; ++j) {
    const Matrix q = mm(x, w.wq[j]);
    const Matrix k = mm(x, w.wk[j]);
    const Matrix v = mm(x, w.wv[j]);
    Matrix scores(t_len, t_len);
    for (int a = 0; a < t_len; ++a)
      for (int b = 0; b < t_len; ++b) {
        double acc = 0.0;
        for (int c = 0; c < d_h; ++c) acc += q(a, c) * k(b, c);
        scores(a, b) = acc / std::sqrt(static_cast<double>(d_h)) +
                       (mask ? (*mask)(a, b) : 0.0);
      }
    const Matrix attn = softmax(scores);
    const Matrix head = mm(attn, v);
    for (int a = 0; a < t_len; ++a)
      for (int c = 0; c < d_h; ++c) concat(a, j * d_h + c) = head(a, c);
  }
  return mm(concat, w.wo);
}

Matrix ffn(const Matrix& x, const FfnWeights& w, Activation act) {
  Matrix hidden = mm(x, w.w1);
  for (int i = 0; i < hidden.rows; ++i)
    for (int j = 0; j < hidden.cols; ++j)
      hidden(i, j) = activate(hidden(i, j) + w.b1[j], act);
  Matrix out = mm(hidden, w.w2);
  for (int i = 0; i < out.rows; ++i)
    for (int j = 0; j < out.cols; ++j) out(i, j) += w.b2[j];
  return out;
}

Matrix layernorm(const Matrix& x, const std::vector<double>& gamma,
                 const std::vector<double>& beta, double eps) {
  Matrix out(x.rows, x.cols);
  for (int i = 0; i < x.rows; ++i) {
    double mean = 0.0;
    for (int j = 0; j < x.cols; ++j) mean += x(i, j);
    mean /= x.cols;
    double var = 0.0;
    for (int j = 0; j < x.cols; ++j) var += (x(i, j) - mean) * (x(i, j) - mean);
    var /= x.cols;
    const double inv = 1.0 / std::sqrt(var + eps);
    for (int j = 0; j < x.cols; ++j)
      out(i, j) = gamma[j] * (x(i, j) - mean) * inv + beta[j];
  }
  return out;
}

Matrix encoder_layer(const Matrix& x, const EncoderLayerWeights& w, int d_h, Activation act) {
  Matrix a = attention(x, w.attn, d_h, nullptr);
  Matrix x1(x.rows, x.cols);
  for (std::size_t i = 0; i < x.a.size(); ++i) x1.a[i] = x.a[i] + a.a[i];
  x1 = layernorm(x1, w.ln1_gamma, w.ln1_beta, w.eps);
  Matrix f = ffn(x1, w.ffn, act);
  Matrix x2(x.rows, x.cols);
  for (std::size_t i = 0; i < x.a.size(); ++i) x2.a[i] = x1.a[i] + f.a[i];
  return layernorm(x2, w.ln2_gamma, w.ln2_beta, w.eps);
}

}  // namespace ltt::ref
