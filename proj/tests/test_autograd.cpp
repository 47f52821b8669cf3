#include <functional>
#include <cmath>
#include <stdexcept>

#include "doctest.h"
#include "ltt/autograd.hpp"
#include "ltt/parallel.hpp"

using namespace ltt;

namespace {

// Reduce any tape value to a scalar through differentiable ops: flatten,
// project onto a fixed random direction, average the rows. Dims are copied
// up front; node references go stale once the tape grows.
int scalarize(Tape& tape, int x, Rng& rng) {
  const int rows = tape.value(x).n1;
  const int width = tape.value(x).n2 * tape.value(x).n3;
  int flat = tape.matricize_op(x);
  int dir = tape.constant(random_tensor(width, 1, 1, rng));
  int proj = tape.facewise(flat, dir);  // rows x 1 x 1
  return tape.masked_mean(proj, std::vector<std::uint8_t>(rows, 1));
}

// central-difference gradient of scalarize(op(x)) wrt a copy of x
double fd_loss(const std::function<double(const Tensor3&)>& f, Tensor3& x, std::size_t idx,
               double h) {
  const double saved = x.a[idx];
  x.a[idx] = saved + h;
  const double up = f(x);
  x.a[idx] = saved - h;
  const double down = f(x);
  x.a[idx] = saved;
  return (up - down) / (2 * h);
}

ModelConfig tiny_config() {
  ModelConfig cfg;
  cfg.t_len = 4;
  cfg.d = 8;
  cfg.p = 2;
  cfg.heads = 2;
  cfg.layers = 1;
  cfg.pe_kind = PEStrategy::Kind::Learnable;
  cfg.seed = 21;
  return cfg;
}

std::vector<Example> tiny_batch(const ModelConfig& cfg, int vocab) {
  std::vector<Example> batch;
  Rng rng(5);
  for (int b = 0; b < 3; ++b) {
    Example ex;
    for (int t = 0; t < cfg.t_len; ++t) {
      ex.tokens.push_back(rng.uniform_int(vocab));
      ex.mask.push_back(1);
    }
    if (b == 2) {  // exercise padding in one element
      ex.tokens.back() = 0;
      ex.mask.back() = 0;
    }
    ex.label = b % 2;
    batch.push_back(std::move(ex));
  }
  return batch;
}

}  // namespace

TEST_CASE("backward_l_product") {
  Rng rng(201);

  SUBCASE("p=1 identity transform reduces to matrix adjoints") {
    TransformOp l = TransformOp::identity(1);
    Tensor3 x = random_tensor(3, 4, 1, rng);
    Tensor3 w = random_tensor(4, 2, 1, rng);
    Tensor3 g = random_tensor(3, 2, 1, rng);
    LProductGrads grads = backward_l_product(g, x, w, l);
    Matrix dx_expect = matmul(frontal_slice(g, 0), transpose(frontal_slice(w, 0)));
    Matrix dw_expect = matmul(transpose(frontal_slice(x, 0)), frontal_slice(g, 0));
    CHECK(rel_error(frontal_slice(grads.dx, 0), dx_expect) <= 1e-13);
    CHECK(rel_error(frontal_slice(grads.dw, 0), dw_expect) <= 1e-13);
  }

  SUBCASE("identity weight passes the cotangent through") {
    TransformOp l = TransformOp::dct(3);
    Tensor3 x = random_tensor(4, 5, 3, rng);
    Tensor3 ident = l_identity(5, l);
    Tensor3 g = random_tensor(4, 5, 3, rng);
    LProductGrads grads = backward_l_product(g, x, ident, l);
    CHECK(rel_error(grads.dx, g) <= 1e-12);
  }

  SUBCASE("matches finite differences of a scalar loss") {
    TransformOp l = TransformOp::dct(2);
    Tensor3 x = random_tensor(3, 4, 2, rng);
    Tensor3 w = random_tensor(4, 2, 2, rng);
    Tensor3 r = random_tensor(3, 2, 2, rng);  // loss = <x *_L w, r>

    auto loss_x = [&](const Tensor3& xv) {
      const Tensor3 y = l_product(xv, w, l);
      double acc = 0.0;
      for (std::size_t i = 0; i < y.size(); ++i) acc += y.a[i] * r.a[i];
      return acc;
    };
    auto loss_w = [&](const Tensor3& wv) {
      const Tensor3 y = l_product(x, wv, l);
      double acc = 0.0;
      for (std::size_t i = 0; i < y.size(); ++i) acc += y.a[i] * r.a[i];
      return acc;
    };
    LProductGrads grads = backward_l_product(r, x, w, l);
    for (std::size_t i = 0; i < x.size(); i += 5) {
      const double fd = fd_loss(loss_x, x, i, 1e-5);
      CHECK(grads.dx.a[i] == doctest::Approx(fd).epsilon(1e-6));
    }
    for (std::size_t i = 0; i < w.size(); i += 3) {
      const double fd = fd_loss(loss_w, w, i, 1e-5);
      CHECK(grads.dw.a[i] == doctest::Approx(fd).epsilon(1e-6));
    }
  }

  SUBCASE("shape mismatch throws") {
    TransformOp l = TransformOp::dct(2);
    CHECK_THROWS_AS(backward_l_product(Tensor3(3, 2, 2), Tensor3(3, 4, 2), Tensor3(5, 2, 2), l),
                    std::invalid_argument);
  }
}

TEST_CASE("backward_mode3") {
  Rng rng(203);
  SUBCASE("identity matrix passes the cotangent") {
    Tensor3 g = random_tensor(3, 2, 4, rng);
    CHECK(max_abs_diff(backward_mode3(g, Matrix::identity(4)), g) == 0.0);
  }
  SUBCASE("orthonormal roundtrip composes to the identity on the cotangent") {
    TransformOp l = TransformOp::dct(4);
    Tensor3 g = random_tensor(3, 2, 4, rng);
    Tensor3 through = backward_mode3(backward_mode3(g, l.z_inv), l.z);
    CHECK(rel_error(through, g) <= 1e-12);
  }
  SUBCASE("matches finite differences") {
    Matrix z = TransformOp::dct(3).z;
    Tensor3 x = random_tensor(2, 3, 3, rng);
    Tensor3 r = random_tensor(2, 3, 3, rng);
    auto loss = [&](const Tensor3& xv) {
      const Tensor3 y = mode_n_product(xv, z, 3);
      double acc = 0.0;
      for (std::size_t i = 0; i < y.size(); ++i) acc += y.a[i] * r.a[i];
      return acc;
    };
    const Tensor3 dx = backward_mode3(r, z);
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double fd = fd_loss(loss, x, i, 1e-6);
      CHECK(dx.a[i] == doctest::Approx(fd).epsilon(1e-7));
    }
  }
}

TEST_CASE("primitive backward rules against finite differences") {
  Rng rng(207);
  const double h = 1e-5;

  auto check_unary = [&](const std::function<int(Tape&, int)>& build, int n1, int n2, int n3,
                         double tol) {
    for (int trial = 0; trial < 10; ++trial) {
      Tensor3 x0 = random_tensor(n1, n2, n3, rng);
      Rng dir_rng(1000 + trial);

      Tape tape;
      int x = tape.leaf(x0, "x", true);
      int y = build(tape, x);
      Rng dir_copy = dir_rng;
      int loss = scalarize(tape, y, dir_rng);
      auto grads = tape.backward(loss);
      const Tensor3& dx = grads.at("x");

      auto loss_fn = [&](const Tensor3& xv) {
        Tape t2;
        int xx = t2.leaf(xv, "x", false);
        int yy = build(t2, xx);
        Rng d2 = dir_copy;
        return t2.scalar(scalarize(t2, yy, d2));
      };
      for (std::size_t i = 0; i < x0.size(); i += std::max<std::size_t>(1, x0.size() / 7)) {
        const double fd = fd_loss(loss_fn, x0, i, h);
        const double denom = std::max({std::fabs(fd), std::fabs(dx.a[i]), 1e-10});
        CHECK(std::fabs(dx.a[i] - fd) / denom <= tol);
      }
    }
  };

  SUBCASE("softmax") {
    check_unary([](Tape& t, int x) { return t.softmax_rows(x); }, 3, 4, 2, 1e-5);
  }
  SUBCASE("gelu and relu") {
    check_unary([](Tape& t, int x) { return t.activation(x, Activation::Gelu); }, 3, 4, 2, 1e-5);
    check_unary([](Tape& t, int x) { return t.activation(x, Activation::Relu); }, 3, 4, 2, 1e-4);
  }
  SUBCASE("layernorm wrt input") {
    Rng grng(7);
    Tensor3 gamma0 = random_tensor(1, 4, 2, grng, 0.5, 1.5);
    check_unary(
        [&](Tape& t, int x) {
          int gamma = t.constant(gamma0);
          int beta = t.constant(Tensor3(1, 4, 2));
          return t.layernorm(x, gamma, beta, 1e-5);
        },
        3, 4, 2, 1e-4);
  }
  SUBCASE("facewise wrt both factors") {
    Tensor3 b0 = random_tensor(4, 3, 2, rng);
    check_unary(
        [&](Tape& t, int x) {
          int b = t.constant(b0);
          return t.facewise(x, b);
        },
        3, 4, 2, 1e-5);
    Tensor3 a0 = random_tensor(3, 4, 2, rng);
    check_unary(
        [&](Tape& t, int x) {
          int a = t.constant(a0);
          return t.facewise(a, x);
        },
        4, 3, 2, 1e-5);
  }
  SUBCASE("mode3, bias_add, tensorize, transpose, mean") {
    Matrix z = TransformOp::dct(2).z;
    check_unary([&](Tape& t, int x) { return t.mode3(x, z); }, 3, 4, 2, 1e-5);
    Tensor3 bias = random_tensor(1, 4, 2, rng);
    check_unary(
        [&](Tape& t, int x) {
          int b = t.constant(bias);
          return t.bias_add(x, b);
        },
        3, 4, 2, 1e-5);
    check_unary([](Tape& t, int x) { return t.tensorize_op(x, 2); }, 3, 4, 1, 1e-5);
    check_unary([](Tape& t, int x) { return t.f_transpose(x); }, 3, 4, 2, 1e-5);
    check_unary(
        [](Tape& t, int x) { return t.masked_mean(x, std::vector<std::uint8_t>{1, 0, 1}); }, 3,
        4, 1, 1e-5);
  }
}

TEST_CASE("layernorm parameter gradients") {
  Rng rng(209);
  Tensor3 x0 = random_tensor(3, 4, 2, rng);
  Tensor3 g0 = random_tensor(1, 4, 2, rng, 0.5, 1.5);
  Tensor3 b0 = random_tensor(1, 4, 2, rng);
  Rng dir_rng(33);
  Rng dir_copy = dir_rng;

  Tape tape;
  int x = tape.leaf(x0, "x", false);
  int gamma = tape.leaf(g0, "gamma", true);
  int beta = tape.leaf(b0, "beta", true);
  int y = tape.layernorm(x, gamma, beta, 1e-5);
  int loss = scalarize(tape, y, dir_rng);
  auto grads = tape.backward(loss);

  auto loss_fn = [&](const Tensor3& gv, const Tensor3& bv) {
    Tape t2;
    int xx = t2.leaf(x0, "x", false);
    int gg = t2.leaf(gv, "g", false);
    int bb = t2.leaf(bv, "b", false);
    int yy = t2.layernorm(xx, gg, bb, 1e-5);
    Rng d2 = dir_copy;
    return t2.scalar(scalarize(t2, yy, d2));
  };
  for (std::size_t i = 0; i < g0.size(); ++i) {
    Tensor3 gv = g0;
    gv.a[i] += 1e-5;
    const double up = loss_fn(gv, b0);
    gv.a[i] -= 2e-5;
    const double down = loss_fn(gv, b0);
    const double fd = (up - down) / 2e-5;
    CHECK(grads.at("gamma").a[i] == doctest::Approx(fd).epsilon(1e-5));
  }
  for (std::size_t i = 0; i < b0.size(); ++i) {
    Tensor3 bv = b0;
    bv.a[i] += 1e-5;
    const double up = loss_fn(g0, bv);
    bv.a[i] -= 2e-5;
    const double down = loss_fn(g0, bv);
    const double fd = (up - down) / 2e-5;
    CHECK(grads.at("beta").a[i] == doctest::Approx(fd).epsilon(1e-5));
  }
}

TEST_CASE("classifier bias gradient closed form") {
  ModelConfig cfg = tiny_config();
  cfg.layers = 0;
  cfg.pe_kind = PEStrategy::Kind::Linear;
  Model m = Model::init(cfg, 10, 2);
  for (auto& v : m.cls_w.a) v = 0.0;
  for (auto& v : m.cls_b) v = 0.0;

  SUBCASE("balanced batch gives zero bias gradient") {
    std::vector<Example> batch = {
        {{1, 2, 3, 4}, {1, 1, 1, 1}, 0},
        {{5, 6, 7, 8}, {1, 1, 1, 1}, 1},
    };
    GradStore gs = grad(m, batch);
    for (double v : gs.named.at("cls.b").a) CHECK(std::fabs(v) <= 1e-15);
    CHECK(gs.loss == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  }
  SUBCASE("unbalanced batch gives softmax(0) minus label frequencies") {
    std::vector<Example> batch = {
        {{1, 2, 3, 4}, {1, 1, 1, 1}, 0},
        {{5, 6, 7, 8}, {1, 1, 1, 1}, 0},
        {{2, 4, 6, 8}, {1, 1, 1, 1}, 1},
    };
    GradStore gs = grad(m, batch);
    const Tensor3& db = gs.named.at("cls.b");
    CHECK(db.a[0] == doctest::Approx(0.5 - 2.0 / 3.0).epsilon(1e-12));
    CHECK(db.a[1] == doctest::Approx(0.5 - 1.0 / 3.0).epsilon(1e-12));
  }
}

TEST_CASE("sum reduction doubles the gradient of a duplicated example") {
  ModelConfig cfg = tiny_config();
  Model m = Model::init(cfg, 10, 2);
  Example ex{{1, 2, 3, 4}, {1, 1, 1, 1}, 1};
  GradStore single = grad(m, {ex}, LossKind::CrossEntropySum);
  GradStore doubled = grad(m, {ex, ex}, LossKind::CrossEntropySum);
  for (const auto& [name, g1] : single.named) {
    const Tensor3& g2 = doubled.named.at(name);
    for (std::size_t i = 0; i < g1.size(); ++i)
      CHECK(g2.a[i] == doctest::Approx(2.0 * g1.a[i]).epsilon(1e-12));
  }
  // mean reduction is invariant to duplication
  GradStore m1 = grad(m, {ex}, LossKind::CrossEntropyMean);
  GradStore m2 = grad(m, {ex, ex}, LossKind::CrossEntropyMean);
  for (const auto& [name, g1] : m1.named) {
    CHECK(rel_error(m2.named.at(name), g1) <= 1e-12);
  }
}

TEST_CASE("taped forward agrees with the plain forward") {
  ModelConfig cfg = tiny_config();
  Model m = Model::init(cfg, 10, 2);
  std::vector<Example> batch = tiny_batch(cfg, 10);

  Tape tape;
  auto leaves = register_model_leaves(tape, m);
  for (const Example& ex : batch) {
    const int loss_id = taped_example_loss(tape, leaves, m, ex);
    EncodeResult plain = encode(m, ex.tokens, ex.mask);
    // recompute the cross entropy from the plain logits
    double mx = plain.logits[0];
    for (double v : plain.logits) mx = std::max(mx, v);
    double lse = 0.0;
    for (double v : plain.logits) lse += std::exp(v - mx);
    const double expect = mx + std::log(lse) - plain.logits[ex.label];
    CHECK(tape.scalar(loss_id) == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("full tiny model passes the finite-difference sweep") {
  ModelConfig cfg = tiny_config();
  Model m = Model::init(cfg, 10, 2);
  std::vector<Example> batch = tiny_batch(cfg, 10);

  CHECK_THROWS_AS(finite_difference_check(m, batch, 0.0, 1e-5), std::invalid_argument);
  FdReport report = finite_difference_check(m, batch, 1e-5, 1e-5);
  CHECK(report.pass);
  CHECK(report.worst <= 1e-5);
  // every registered parameter is covered, including the learnable PE
  bool saw_pe = false;
  for (const auto& e : report.entries) saw_pe = saw_pe || e.name == "pe.table";
  CHECK(saw_pe);
}

TEST_CASE("corrupted gradients are caught by the checker") {
  ModelConfig cfg = tiny_config();
  Model m = Model::init(cfg, 10, 2);
  std::vector<Example> batch = tiny_batch(cfg, 10);
  GradStore gs = grad(m, batch);
  for (auto& v : gs.named.at("enc0.ffn.w1").a) v *= 1.01;
  FdReport report = finite_difference_check(m, batch, 1e-5, 1e-5, &gs);
  CHECK_FALSE(report.pass);
}

TEST_CASE("fixed PE contributes no gradient entry") {
  ModelConfig cfg = tiny_config();
  cfg.pe_kind = PEStrategy::Kind::Harmonic;
  Model m = Model::init(cfg, 10, 2);
  GradStore gs = grad(m, tiny_batch(cfg, 10));
  CHECK(gs.named.find("pe.table") == gs.named.end());
}

TEST_CASE("gradients are identical under batched slice execution") {
  ModelConfig cfg = tiny_config();
  Model m = Model::init(cfg, 10, 2);
  std::vector<Example> batch = tiny_batch(cfg, 10);
  set_slice_execution(SliceExec::Sequential);
  GradStore a = grad(m, batch);
  set_slice_execution(SliceExec::Batched);
  GradStore b = grad(m, batch);
  set_slice_execution(SliceExec::Sequential);
  CHECK(a.loss == b.loss);
  for (const auto& [name, g] : a.named) CHECK(g.a == b.named.at(name).a);
}

TEST_CASE("non-finite forward is reported with the batch element") {
  ModelConfig cfg = tiny_config();
  Model m = Model::init(cfg, 10, 2);
  // label-1 logit sits 2e308 below the max, so its cross entropy overflows
  m.cls_b = {1e308, -1e308};
  std::vector<Example> batch = tiny_batch(cfg, 10);
  CHECK_THROWS_WITH_AS(grad(m, batch), doctest::Contains("batch element 1"),
                       std::runtime_error);
}
