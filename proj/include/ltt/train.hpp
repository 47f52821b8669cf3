#ifndef LTT_TRAIN_HPP
#define LTT_TRAIN_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ltt/autograd.hpp"
#include "ltt/encoder.hpp"

namespace ltt {

struct TrainConfig {
  double lr_peak = 3e-4;
  double weight_decay = 0.01;
  double warmup_frac = 0.10;
  double lr_floor = 1e-5;
  double clip_norm = 1.0;
  int epochs = 10;
  int batch = 32;
  std::uint64_t seed = 0;

  void validate() const;
};

// --- optimizer ---------------------------------------------------------------

// AdamW, beta = (0.9, 0.999), eps 1e-8, decoupled weight decay. Decay is
// applied only to parameters flagged decay in the registry (weights, not
// biases or LayerNorm scale/shift). Aborts on a non-finite gradient, naming
// the parameter.
struct AdamState {
  std::map<std::string, std::vector<double>> m, v;
  long step = 0;
};

void adamw_step(std::vector<ParamRef>& params, const GradStore& grads, AdamState& state,
                double lr, const TrainConfig& cfg);

// Linear warmup to lr_peak over warmup_frac of the run, then cosine decay to
// lr_floor. lr(0) = lr_peak / warmup_steps; the first post-warmup step is
// exactly lr_peak and step total_steps-1 lands on lr_floor.
double lr_schedule(long step, long total_steps, const TrainConfig& cfg);

// Global L2 clipping across all gradient tensors; returns the pre-clip norm.
double clip_gradients(GradStore& grads, double max_norm);

// --- data ----------------------------------------------------------------------

struct Sequence {
  std::vector<int> tokens;
  int label = 0;
};

struct Dataset {
  std::vector<Sequence> items;
  int vocab = 0;
  int num_classes = 0;
};

enum class SynthKind { Keyword, SliceFrequency };
SynthKind synth_kind_from_name(const std::string& name);

// Deterministic synthetic classification tasks.
//  keyword          class-specific marker tokens planted in filler text;
//                   separable by token identity alone
//  slice-frequency  one shared marker token recurring with class-dependent
//                   period; separable only through positional structure
Dataset synth_dataset(SynthKind kind, int n, int t_len, int vocab, int classes,
                      std::uint64_t seed);

// One example per line: label<TAB>id id id ...
void save_dataset(const Dataset& ds, const std::string& path);
Dataset load_dataset(const std::string& path, int vocab, int num_classes);

Example to_example(const Sequence& seq, int t_len);  // pad with 0 / mask 0

// --- training loop ----------------------------------------------------------------

struct EpochMetrics {
  int epoch = 0;
  double loss = 0.0;      // mean over the epoch's optimizer steps
  double accuracy = 0.0;  // on eval_set when given, else on the train set
};

struct TrainResult {
  std::vector<EpochMetrics> history;
  double initial_loss = 0.0;  // before the first update
};

// Fixed-epoch loop: shuffled batches, warmup+cosine schedule, gradient
// clipping, no early stopping, no checkpoint selection. Deterministic for a
// fixed (seed, config, dataset).
TrainResult train(Model& model, const Dataset& train_set, const Dataset* eval_set,
                  const TrainConfig& cfg);

double evaluate_accuracy(const Model& model, const Dataset& ds);
double evaluate_loss(Model& model, const Dataset& ds, int batch);

void write_metrics_csv(const TrainResult& r, const std::string& path);
void write_metrics_json(const TrainResult& r, const std::string& path);

}  // namespace ltt

#endif
