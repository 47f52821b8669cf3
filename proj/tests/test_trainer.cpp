#include <fstream>
#include <limits>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "doctest.h"
#include "ltt/train.hpp"

using namespace ltt;

namespace {

ModelConfig small_config() {
  ModelConfig cfg;
  cfg.t_len = 8;
  cfg.d = 8;
  cfg.p = 2;
  cfg.heads = 2;
  cfg.layers = 1;
  cfg.pe_kind = PEStrategy::Kind::Linear;
  cfg.seed = 3;
  return cfg;
}

}  // namespace

TEST_CASE("adamw single steps") {
  ModelConfig cfg = small_config();
  cfg.layers = 0;
  Model m = Model::init(cfg, 8, 2);
  auto params = parameters(m);
  TrainConfig tc;

  SUBCASE("zero gradient, zero decay leaves parameters unchanged") {
    TrainConfig nodecay = tc;
    nodecay.weight_decay = 0.0;
    GradStore gs;
    for (const ParamRef& ref : params)
      gs.named.emplace(ref.name, Tensor3(ref.dims[0], ref.dims[1], ref.dims[2]));
    const std::vector<double> before(params[0].data, params[0].data + params[0].len);
    AdamState st;
    adamw_step(params, gs, st, 1e-3, nodecay);
    for (std::size_t i = 0; i < params[0].len; ++i) CHECK(params[0].data[i] == before[i]);
  }

  SUBCASE("first step from zero state matches the closed form") {
    GradStore gs;
    Rng rng(17);
    for (const ParamRef& ref : params)
      gs.named.emplace(ref.name, random_tensor(ref.dims[0], ref.dims[1], ref.dims[2], rng));
    TrainConfig nodecay = tc;
    nodecay.weight_decay = 0.0;
    const ParamRef& ref = params[0];
    const Tensor3& g = gs.named.at(ref.name);
    const std::vector<double> before(ref.data, ref.data + ref.len);
    AdamState st;
    adamw_step(params, gs, st, 1e-3, nodecay);
    for (std::size_t i = 0; i < ref.len; ++i) {
      const double expect = before[i] - 1e-3 * g.a[i] / (std::fabs(g.a[i]) + 1e-8);
      CHECK(ref.data[i] == doctest::Approx(expect).epsilon(1e-9));
    }
  }

  SUBCASE("decay-only step shrinks decayed parameters multiplicatively") {
    GradStore gs;
    for (const ParamRef& ref : params)
      gs.named.emplace(ref.name, Tensor3(ref.dims[0], ref.dims[1], ref.dims[2]));
    std::vector<std::vector<double>> before;
    for (const ParamRef& ref : params)
      before.emplace_back(ref.data, ref.data + ref.len);
    AdamState st;
    adamw_step(params, gs, st, 0.5, tc);  // lr 0.5, wd 0.01
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
      for (std::size_t i = 0; i < params[pi].len; ++i) {
        const double expect =
            params[pi].decay ? before[pi][i] * (1.0 - 0.5 * 0.01) : before[pi][i];
        CHECK(params[pi].data[i] == doctest::Approx(expect).epsilon(1e-12));
      }
    }
  }

  SUBCASE("non-finite gradient aborts with the parameter name") {
    GradStore gs;
    for (const ParamRef& ref : params)
      gs.named.emplace(ref.name, Tensor3(ref.dims[0], ref.dims[1], ref.dims[2]));
    gs.named.at("cls.w").a[0] = std::numeric_limits<double>::quiet_NaN();
    AdamState st;
    CHECK_THROWS_WITH_AS(adamw_step(params, gs, st, 1e-3, tc), doctest::Contains("cls.w"),
                         std::runtime_error);
  }
}

TEST_CASE("lr schedule") {
  TrainConfig tc;
  tc.lr_peak = 3e-4;
  tc.lr_floor = 1e-5;
  tc.warmup_frac = 0.10;
  const long total = 1000;
  const long warmup = 100;
  CHECK(lr_schedule(0, total, tc) == doctest::Approx(tc.lr_peak / warmup));
  CHECK(lr_schedule(warmup - 1, total, tc) == doctest::Approx(tc.lr_peak));
  CHECK(lr_schedule(warmup, total, tc) == doctest::Approx(tc.lr_peak));
  CHECK(std::fabs(lr_schedule(total - 1, total, tc) - tc.lr_floor) <= 1e-12);
  // monotone rise then fall
  for (long s = 1; s < warmup; ++s) CHECK(lr_schedule(s, total, tc) >= lr_schedule(s - 1, total, tc));
  for (long s = warmup + 1; s < total; ++s)
    CHECK(lr_schedule(s, total, tc) <= lr_schedule(s - 1, total, tc) + 1e-18);
  CHECK_THROWS_AS(lr_schedule(total, total, tc), std::invalid_argument);
}

TEST_CASE("gradient clipping") {
  GradStore gs;
  gs.named.emplace("a", Tensor3(1, 2, 1, {0.3, 0.4}));  // norm 0.5

  SUBCASE("below the threshold is untouched") {
    GradStore copy = gs;
    const double norm = clip_gradients(copy, 1.0);
    CHECK(norm == doctest::Approx(0.5));
    CHECK(copy.named.at("a").a == gs.named.at("a").a);
  }
  SUBCASE("above the threshold is rescaled to the threshold") {
    gs.named.emplace("b", Tensor3(1, 2, 1, {1.2, 1.6}));  // total norm sqrt(0.25+4)
    const double pre = clip_gradients(gs, 1.0);
    CHECK(pre == doctest::Approx(std::sqrt(4.25)));
    double post = 0.0;
    for (const auto& [n, g] : gs.named)
      for (double v : g.a) post += v * v;
    CHECK(std::sqrt(post) == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("direction preserved, random draws stay under the cap") {
    Rng rng(23);
    for (int trial = 0; trial < 10; ++trial) {
      GradStore g2;
      g2.named.emplace("x", random_tensor(3, 4, 2, rng, -2.0, 2.0));
      const Tensor3 orig = g2.named.at("x");
      clip_gradients(g2, 1.0);
      const Tensor3& clipped = g2.named.at("x");
      double dot = 0.0, n1 = 0.0, n2 = 0.0;
      for (std::size_t i = 0; i < orig.size(); ++i) {
        dot += orig.a[i] * clipped.a[i];
        n1 += orig.a[i] * orig.a[i];
        n2 += clipped.a[i] * clipped.a[i];
      }
      CHECK(dot / std::sqrt(n1 * n2) == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(std::sqrt(n2) <= 1.0 + 1e-12);
    }
  }
}

TEST_CASE("synthetic datasets") {
  SUBCASE("deterministic and balanced") {
    Dataset a = synth_dataset(SynthKind::Keyword, 101, 12, 40, 2, 5);
    Dataset b = synth_dataset(SynthKind::Keyword, 101, 12, 40, 2, 5);
    REQUIRE(a.items.size() == 101);
    for (std::size_t i = 0; i < a.items.size(); ++i) {
      CHECK(a.items[i].tokens == b.items[i].tokens);
      CHECK(a.items[i].label == b.items[i].label);
    }
    int counts[2] = {0, 0};
    for (const Sequence& s : a.items) ++counts[s.label];
    CHECK(std::abs(counts[0] - counts[1]) <= 1);
  }
  SUBCASE("keyword classes use disjoint marker tokens") {
    Dataset ds = synth_dataset(SynthKind::Keyword, 60, 10, 30, 3, 7);
    for (const Sequence& s : ds.items) {
      for (int tok : s.tokens) {
        CHECK(tok >= 1);
        CHECK(tok < 30);
        if (tok <= 9) {  // keyword region: 1..9 for 3 classes x 3 keywords
          const int cls = (tok - 1) / 3;
          CHECK(cls == s.label);
        }
      }
    }
  }
  SUBCASE("slice-frequency plants periodic markers") {
    Dataset ds = synth_dataset(SynthKind::SliceFrequency, 20, 12, 30, 2, 9);
    for (const Sequence& s : ds.items) {
      const int period = 2 + s.label;
      std::vector<int> hits;
      for (std::size_t t = 0; t < s.tokens.size(); ++t)
        if (s.tokens[t] == 1) hits.push_back(static_cast<int>(t));
      REQUIRE(hits.size() >= 2);
      for (std::size_t i = 1; i < hits.size(); ++i)
        CHECK((hits[i] - hits[i - 1]) % period == 0);
    }
  }
  SUBCASE("file round trip") {
    Dataset ds = synth_dataset(SynthKind::Keyword, 13, 8, 25, 2, 11);
    const char* path = "ltt_test_ds.tsv";
    save_dataset(ds, path);
    Dataset back = load_dataset(path, 25, 2);
    REQUIRE(back.items.size() == ds.items.size());
    for (std::size_t i = 0; i < ds.items.size(); ++i) {
      CHECK(back.items[i].tokens == ds.items[i].tokens);
      CHECK(back.items[i].label == ds.items[i].label);
    }
    std::remove(path);
  }
  SUBCASE("loader rejects out-of-bounds ids") {
    const char* path = "ltt_test_bad.tsv";
    {
      std::FILE* f = std::fopen(path, "w");
      std::fputs("0\t1 2 99\n", f);
      std::fclose(f);
    }
    CHECK_THROWS_AS(load_dataset(path, 50, 2), std::invalid_argument);
    std::remove(path);
  }
}

TEST_CASE("training loop") {
  ModelConfig cfg = small_config();
  Dataset ds = synth_dataset(SynthKind::Keyword, 64, cfg.t_len, 24, 2, 13);
  TrainConfig tc;
  tc.epochs = 2;
  tc.batch = 8;
  tc.seed = 1;

  SUBCASE("zero learning rate leaves the model unchanged") {
    Model m = Model::init(cfg, 24, 2);
    const double acc0 = evaluate_accuracy(m, ds);
    TrainConfig frozen = tc;
    frozen.lr_peak = 1e-300;
    frozen.lr_floor = 0.0;
    frozen.weight_decay = 0.0;
    Model m2 = m;
    TrainResult r = train(m2, ds, nullptr, frozen);
    CHECK(evaluate_accuracy(m2, ds) == doctest::Approx(acc0));
    CHECK(r.history.size() == 2);
  }

  SUBCASE("deterministic: identical runs, identical history and weights") {
    Model m1 = Model::init(cfg, 24, 2);
    Model m2 = Model::init(cfg, 24, 2);
    TrainResult r1 = train(m1, ds, nullptr, tc);
    TrainResult r2 = train(m2, ds, nullptr, tc);
    REQUIRE(r1.history.size() == r2.history.size());
    for (std::size_t e = 0; e < r1.history.size(); ++e) {
      CHECK(r1.history[e].loss == r2.history[e].loss);
      CHECK(r1.history[e].accuracy == r2.history[e].accuracy);
    }
    auto p1 = parameters(m1);
    auto p2 = parameters(m2);
    for (std::size_t i = 0; i < p1.size(); ++i)
      for (std::size_t j = 0; j < p1[i].len; ++j) CHECK(p1[i].data[j] == p2[i].data[j]);
  }

  SUBCASE("first-epoch loss drops below the initial loss") {
    Dataset big = synth_dataset(SynthKind::Keyword, 320, cfg.t_len, 24, 2, 13);
    Model m = Model::init(cfg, 24, 2);
    TrainConfig tc2 = tc;
    tc2.epochs = 1;
    TrainResult r = train(m, big, nullptr, tc2);
    CHECK(r.history[0].loss < r.initial_loss);
  }

  SUBCASE("metrics files") {
    Model m = Model::init(cfg, 24, 2);
    TrainResult r = train(m, ds, nullptr, tc);
    write_metrics_csv(r, "ltt_test_metrics.csv");
    write_metrics_json(r, "ltt_test_metrics.json");
    std::ifstream csv("ltt_test_metrics.csv");
    std::string header;
    std::getline(csv, header);
    CHECK(header == "epoch,loss,accuracy");
    int lines = 0;
    std::string line;
    while (std::getline(csv, line))
      if (!line.empty()) ++lines;
    CHECK(lines == 2);
    std::remove("ltt_test_metrics.csv");
    std::remove("ltt_test_metrics.json");
  }
}
