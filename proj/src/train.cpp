#include "ltt/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "ltt/kernels.hpp"

namespace ltt {

void TrainConfig::validate() const {
  if (!(warmup_frac > 0.0 && warmup_frac < 1.0))
    throw std::invalid_argument("TrainConfig: warmup_frac must be in (0, 1)");
  if (!(clip_norm > 0.0)) throw std::invalid_argument("TrainConfig: clip_norm must be > 0");
  if (epochs < 1 || batch < 1)
    throw std::invalid_argument("TrainConfig: epochs and batch must be >= 1");
  if (!(lr_peak > 0.0) || lr_floor < 0.0 || lr_floor > lr_peak)
    throw std::invalid_argument("TrainConfig: need lr_peak > 0 and 0 <= lr_floor <= lr_peak");
}

void adamw_step(std::vector<ParamRef>& params, const GradStore& grads, AdamState& state,
                double lr, const TrainConfig& cfg) {
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  state.step += 1;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  for (ParamRef& ref : params) {
    const auto it = grads.named.find(ref.name);
    if (it == grads.named.end())
      throw std::invalid_argument("adamw_step: no gradient for " + ref.name);
    const Tensor3& g = it->second;
    if (g.size() != ref.len)
      throw std::invalid_argument("adamw_step: gradient size mismatch for " + ref.name);
    auto& m = state.m[ref.name];
    auto& v = state.v[ref.name];
    if (m.empty()) m.assign(ref.len, 0.0);
    if (v.empty()) v.assign(ref.len, 0.0);
    for (std::size_t i = 0; i < ref.len; ++i) {
      const double gi = g.a[i];
      if (!std::isfinite(gi))
        throw std::runtime_error("adamw_step: non-finite gradient in " + ref.name);
      m[i] = beta1 * m[i] + (1.0 - beta1) * gi;
      v[i] = beta2 * v[i] + (1.0 - beta2) * gi * gi;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      double update = lr * mhat / (std::sqrt(vhat) + eps);
      if (ref.decay) update += lr * cfg.weight_decay * ref.data[i];
      ref.data[i] -= update;
    }
  }
}

double lr_schedule(long step, long total_steps, const TrainConfig& cfg) {
  if (step < 0 || step >= total_steps)
    throw std::invalid_argument("lr_schedule: step out of range");
  const long warmup = std::max<long>(1, std::lround(cfg.warmup_frac * total_steps));
  if (step < warmup) return cfg.lr_peak * static_cast<double>(step + 1) / warmup;
  const long span = std::max<long>(1, total_steps - 1 - warmup);
  const double frac = static_cast<double>(step - warmup) / span;
  constexpr double pi = 3.14159265358979323846264338327950288;
  return cfg.lr_floor + (cfg.lr_peak - cfg.lr_floor) * 0.5 * (1.0 + std::cos(pi * frac));
}

double clip_gradients(GradStore& grads, double max_norm) {
  if (!(max_norm > 0.0)) throw std::invalid_argument("clip_gradients: max_norm must be > 0");
  double sumsq = 0.0;
  for (const auto& [name, g] : grads.named) sumsq += kern::sumsq(g.a.data(), g.size());
  const double norm = std::sqrt(sumsq);
  if (norm > max_norm) {
    const double s = max_norm / norm;
    for (auto& [name, g] : grads.named) kern::scale(g.a.data(), g.a.data(), s, g.size());
  }
  return norm;
}

// --- data ------------------------------------------------------------------------

SynthKind synth_kind_from_name(const std::string& name) {
  if (name == "keyword") return SynthKind::Keyword;
  if (name == "slice-frequency") return SynthKind::SliceFrequency;
  throw std::invalid_argument("unknown synthetic dataset kind '" + name +
                              "' (keyword|slice-frequency)");
}

Dataset synth_dataset(SynthKind kind, int n, int t_len, int vocab, int classes,
                      std::uint64_t seed) {
  if (n < 1 || t_len < 2 || classes < 2)
    throw std::invalid_argument("synth_dataset: need n >= 1, T >= 2, classes >= 2");
  const int keywords_per_class = 3;
  const int reserved = 1 + classes * keywords_per_class;  // pad + keyword blocks
  if (vocab < reserved + 4)
    throw std::invalid_argument("synth_dataset: vocab too small for " +
                                std::to_string(classes) + " classes");
  Rng rng(seed);
  Dataset ds;
  ds.vocab = vocab;
  ds.num_classes = classes;
  ds.items.reserve(n);

  const int filler_lo = reserved;  // ids below `reserved` never appear as filler
  const int filler_n = vocab - reserved;

  for (int i = 0; i < n; ++i) {
    const int label = i % classes;  // balanced within +-1
    Sequence seq;
    seq.label = label;
    const bool shortened = rng.uniform() < 0.25;
    const int len = shortened ? t_len / 2 + rng.uniform_int(t_len - t_len / 2) : t_len;
    seq.tokens.resize(len);
    if (kind == SynthKind::Keyword) {
      for (int t = 0; t < len; ++t) seq.tokens[t] = filler_lo + rng.uniform_int(filler_n);
      const int plant = 1 + rng.uniform_int(std::min(3, len));
      for (int q = 0; q < plant; ++q) {
        const int kw = 1 + label * keywords_per_class + rng.uniform_int(keywords_per_class);
        seq.tokens[rng.uniform_int(len)] = kw;
      }
    } else {
      // one shared marker token; only its recurrence period encodes the class
      const int marker = 1;
      const int period = 2 + label;
      const int phase = rng.uniform_int(period);
      for (int t = 0; t < len; ++t) {
        if ((t + phase) % period == 0)
          seq.tokens[t] = marker;
        else
          seq.tokens[t] = filler_lo + rng.uniform_int(filler_n);
      }
    }
    ds.items.push_back(std::move(seq));
  }
  return ds;
}

void save_dataset(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_dataset: cannot write " + path);
  for (const Sequence& s : ds.items) {
    out << s.label << '\t';
    for (std::size_t i = 0; i < s.tokens.size(); ++i)
      out << (i ? " " : "") << s.tokens[i];
    out << '\n';
  }
}

Dataset load_dataset(const std::string& path, int vocab, int num_classes) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("load_dataset: cannot open " + path);
  Dataset ds;
  ds.vocab = vocab;
  ds.num_classes = num_classes;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    Sequence seq;
    if (!(ls >> seq.label))
      throw std::invalid_argument("load_dataset: bad label at line " + std::to_string(lineno));
    if (seq.label < 0 || seq.label >= num_classes)
      throw std::invalid_argument("load_dataset: label out of range at line " +
                                  std::to_string(lineno));
    int id;
    while (ls >> id) {
      if (id < 0 || id >= vocab)
        throw std::invalid_argument("load_dataset: token id " + std::to_string(id) +
                                    " outside vocab at line " + std::to_string(lineno));
      seq.tokens.push_back(id);
    }
    if (seq.tokens.empty())
      throw std::invalid_argument("load_dataset: empty sequence at line " +
                                  std::to_string(lineno));
    ds.items.push_back(std::move(seq));
  }
  return ds;
}

Example to_example(const Sequence& seq, int t_len) {
  if (static_cast<int>(seq.tokens.size()) > t_len)
    throw std::invalid_argument("to_example: sequence longer than T");
  Example ex;
  ex.tokens.assign(t_len, 0);
  ex.mask.assign(t_len, 0);
  for (std::size_t i = 0; i < seq.tokens.size(); ++i) {
    ex.tokens[i] = seq.tokens[i];
    ex.mask[i] = 1;
  }
  ex.label = seq.label;
  return ex;
}

// --- training loop -------------------------------------------------------------------

double evaluate_accuracy(const Model& model, const Dataset& ds) {
  if (ds.items.empty()) throw std::invalid_argument("evaluate_accuracy: empty dataset");
  int correct = 0;
  for (const Sequence& s : ds.items) {
    const Example ex = to_example(s, model.cfg.t_len);
    const EncodeResult r = encode(model, ex.tokens, ex.mask);
    int arg = 0;
    for (std::size_t c = 1; c < r.logits.size(); ++c)
      if (r.logits[c] > r.logits[arg]) arg = static_cast<int>(c);
    if (arg == s.label) ++correct;
  }
  return static_cast<double>(correct) / ds.items.size();
}

double evaluate_loss(Model& model, const Dataset& ds, int batch) {
  if (ds.items.empty()) throw std::invalid_argument("evaluate_loss: empty dataset");
  double total = 0.0;
  std::vector<Example> buf;
  for (std::size_t i = 0; i < ds.items.size(); i += batch) {
    buf.clear();
    for (std::size_t j = i; j < std::min(ds.items.size(), i + batch); ++j)
      buf.push_back(to_example(ds.items[j], model.cfg.t_len));
    total += batch_loss(model, buf, LossKind::CrossEntropySum);
  }
  return total / ds.items.size();
}

TrainResult train(Model& model, const Dataset& train_set, const Dataset* eval_set,
                  const TrainConfig& cfg) {
  cfg.validate();
  if (train_set.items.empty()) throw std::invalid_argument("train: empty dataset");
  if (train_set.num_classes != model.classes)
    throw std::invalid_argument("train: dataset classes != model classes");
  if (train_set.vocab > model.vocab)
    throw std::invalid_argument("train: dataset vocab exceeds model vocab");

  const long n = static_cast<long>(train_set.items.size());
  const long steps_per_epoch = (n + cfg.batch - 1) / cfg.batch;
  const long total_steps = steps_per_epoch * cfg.epochs;

  std::vector<ParamRef> params = parameters(model);
  AdamState state;
  Rng shuffle_rng(cfg.seed);

  TrainResult result;
  result.initial_loss = evaluate_loss(model, train_set, cfg.batch);

  std::vector<int> order(n);
  for (long i = 0; i < n; ++i) order[i] = static_cast<int>(i);

  long step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (long i = n - 1; i > 0; --i)
      std::swap(order[i], order[shuffle_rng.uniform_int(static_cast<int>(i) + 1)]);

    double epoch_loss = 0.0;
    long batches = 0;
    for (long start = 0; start < n; start += cfg.batch) {
      std::vector<Example> batch;
      for (long j = start; j < std::min(n, start + cfg.batch); ++j)
        batch.push_back(to_example(train_set.items[order[j]], model.cfg.t_len));
      GradStore grads = grad(model, batch, LossKind::CrossEntropyMean);
      clip_gradients(grads, cfg.clip_norm);
      adamw_step(params, grads, state, lr_schedule(step, total_steps, cfg), cfg);
      epoch_loss += grads.loss;
      ++batches;
      ++step;
    }

    EpochMetrics em;
    em.epoch = epoch;
    em.loss = epoch_loss / batches;
    em.accuracy = evaluate_accuracy(model, eval_set ? *eval_set : train_set);
    result.history.push_back(em);
  }
  return result;
}

void write_metrics_csv(const TrainResult& r, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_metrics_csv: cannot write " + path);
  out.precision(17);
  out << "epoch,loss,accuracy\n";
  for (const EpochMetrics& em : r.history)
    out << em.epoch << "," << em.loss << "," << em.accuracy << "\n";
}

void write_metrics_json(const TrainResult& r, const std::string& path) {
  nlohmann::json j;
  j["initial_loss"] = r.initial_loss;
  j["epochs"] = nlohmann::json::array();
  for (const EpochMetrics& em : r.history)
    j["epochs"].push_back({{"epoch", em.epoch}, {"loss", em.loss}, {"accuracy", em.accuracy}});
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_metrics_json: cannot write " + path);
  out << j.dump(1) << "\n";
}

}  // namespace ltt
