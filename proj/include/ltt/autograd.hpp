#ifndef LTT_AUTOGRAD_HPP
#define LTT_AUTOGRAD_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ltt/encoder.hpp"
#include "ltt/nn.hpp"
#include "ltt/tensor.hpp"
#include "ltt/transform.hpp"

namespace ltt {

// --- standalone adjoints ------------------------------------------------------

// For y = x *_L w:  dX = g *_L w^T,  dW = x^T *_L g.
struct LProductGrads {
  Tensor3 dx;
  Tensor3 dw;
};
LProductGrads backward_l_product(const Tensor3& g, const Tensor3& x, const Tensor3& w,
                                 const TransformOp& l);

// For y = x x_3 z:  dX = g x_3 z^T.
Tensor3 backward_mode3(const Tensor3& g, const Matrix& z);

// --- tape ----------------------------------------------------------------------

// Append-only record of one forward evaluation. Node ids are indices into
// the tape; topological order equals append order. A tape is used by one
// thread at a time.
class Tape {
 public:
  int leaf(Tensor3 value, std::string name, bool requires_grad);
  int constant(Tensor3 value) { return leaf(std::move(value), "", false); }

  int add(int a, int b);
  int bias_add(int x, int b);  // b: 1 x n2 x p, broadcast along mode-1
  int scale(int x, double c);
  int mode3(int x, Matrix m);
  int facewise(int a, int b);
  int f_transpose(int x);
  int softmax_rows(int x);  // per-slice row softmax
  int activation(int x, Activation act);
  int layernorm(int x, int gamma, int beta, double eps);
  int tensorize_op(int x, int p);  // T x d x 1 -> T x d/p x p
  int matricize_op(int x);         // T x d_s x p -> T x d 1
  int concat_mode2(const std::vector<int>& xs);
  int masked_mean(int x, std::vector<std::uint8_t> mask);  // T x d x 1 -> 1 x d x 1
  int embed_gather(int table, std::vector<int> ids);       // table: vocab x d x 1
  int cross_entropy(int logits, int label);                // 1 x C x 1 -> 1 x 1 x 1

  const Tensor3& value(int id) const { return nodes_[id].value; }
  double scalar(int id) const { return nodes_[id].value.a[0]; }
  std::size_t size() const { return nodes_.size(); }

  // Reverse pass from a scalar node; returns gradients of the named leaves.
  std::map<std::string, Tensor3> backward(int loss_id);

 private:
  enum class Op {
    Leaf,
    Add,
    BiasAdd,
    Scale,
    Mode3,
    Facewise,
    FTranspose,
    Softmax,
    Activation,
    LayerNorm,
    Tensorize,
    Matricize,
    Concat2,
    MaskedMean,
    EmbedGather,
    CrossEntropy,
  };

  struct Node {
    Op op;
    int in0 = -1, in1 = -1, in2 = -1;
    std::vector<int> in_list;
    Tensor3 value;
    bool needs_grad = false;
    std::string name;
    double c = 0.0;
    Matrix m;
    Activation act = Activation::Gelu;
    double eps = 0.0;
    std::vector<std::uint8_t> mask;
    std::vector<int> ids;
    int label = -1;
    int split_p = 1;
  };

  int push(Node n);
  bool req(int id) const { return id >= 0 && nodes_[id].needs_grad; }

  std::vector<Node> nodes_;
};

// --- model-level gradients -------------------------------------------------------

struct Example {
  std::vector<int> tokens;          // padded to T
  std::vector<std::uint8_t> mask;   // length T
  int label = 0;
};

enum class LossKind { CrossEntropyMean, CrossEntropySum };

struct GradStore {
  std::map<std::string, Tensor3> named;  // keyed by parameter registry name
  double loss = 0.0;
};

// Taped forward for one padded example; returns the loss node id.
int taped_example_loss(Tape& tape, const std::map<std::string, int>& leaves, const Model& m,
                       const Example& ex);

// Registers every trainable parameter as a tape leaf (name -> node id).
std::map<std::string, int> register_model_leaves(Tape& tape, Model& m);

// Forward+backward over a batch; cross-entropy over class logits. Throws if
// the forward produces a non-finite loss, naming the batch element.
GradStore grad(Model& m, const std::vector<Example>& batch,
               LossKind kind = LossKind::CrossEntropyMean);

// Batch loss without gradients (used by the finite-difference checker).
double batch_loss(Model& m, const std::vector<Example>& batch,
                  LossKind kind = LossKind::CrossEntropyMean);

// --- finite-difference checking ----------------------------------------------------

struct FdEntry {
  std::string name;
  double max_rel_err = 0.0;
};

struct FdReport {
  std::vector<FdEntry> entries;
  double worst = 0.0;
  bool pass = false;
};

// Central differences with step h against the analytic gradients (or a
// caller-supplied GradStore, the hook used by the corrupted-gradient
// negative control). Per-entry error |a - n| / max(|a|, |n|, 1e-12).
FdReport finite_difference_check(Model& m, const std::vector<Example>& batch, double h = 1e-5,
                                 double tol = 1e-5, const GradStore* analytic = nullptr,
                                 LossKind kind = LossKind::CrossEntropyMean);

}  // namespace ltt

#endif
