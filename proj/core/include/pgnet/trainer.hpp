#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "pgnet/model.hpp"
#include "pgnet/text.hpp"

namespace pgnet {

struct TrainConfig {
    std::int32_t vocab_size = 50000;
    std::int32_t d_e = 128;
    std::int32_t d_h = 512;
    std::int64_t max_enc = 400;
    std::int64_t max_dec = 100;
    real lr = real(0.15);
    real adagrad_init_acc = real(0.1);
    real clip_norm = real(2.0);
    std::int32_t batch_size = 16;
    real coverage_weight = real(1.0);
    std::int64_t phase1_steps = 0;  // coverage off
    std::int64_t phase2_steps = 0;  // coverage on
    std::uint64_t seed = 1;
    std::int64_t checkpoint_every = 1000;
    std::string checkpoint_dir;  // empty disables checkpointing
    std::string loss_csv_path;   // empty disables the CSV

    std::int64_t total_steps() const { return phase1_steps + phase2_steps; }
    void validate() const;
};

// Per-tensor squared-gradient accumulators.
struct AdagradState {
    std::map<std::string, Tensor> acc;
    void init(const ModelParams& params, real init_acc);
};

// Global-norm clipping over the tensors' grad buffers; scales everything
// by max_norm/g when the joint norm g exceeds max_norm. Returns the
// pre-clip norm.
real clip_by_global_norm(std::span<Tensor* const> tensors, real max_norm);

// acc += grad^2; param -= lr * grad / (sqrt(acc) + eps), elementwise.
void adagrad_step(ModelParams& params, AdagradState& state, real lr, real eps = real(1e-10));

// Deterministic 70/20/10 split by hash of the example index.
enum class Split { train, val, test };
Split split_of_index(std::size_t index);

struct StepLog {
    std::int64_t step = 0;
    int phase = 1;
    real loss = 0;
    real coverage_loss = 0;  // unweighted coverage penalty per token
};

struct TrainResult {
    std::vector<StepLog> history;       // the steps run by this call
    std::vector<std::string> warnings;  // e.g. a non-decreasing phase-1 loss window
    std::int64_t final_step = 0;
};

// Two-phase training loop: phase 1 without coverage (no w_c term, no
// penalty), phase 2 with both. Runs steps start_step+1 .. total_steps().
// Batch order is a pure function of (seed, epoch), so resuming from a
// checkpoint continues the exact step stream.
TrainResult train(const TrainConfig& config, const std::vector<EncodedExample>& train_examples,
                  const std::vector<EncodedExample>& val_examples, ModelParams& params,
                  AdagradState& opt, std::int64_t start_step = 0,
                  const std::function<void(const std::string&)>& log = {});

// ---------------------------------------------------------------------------
// Checkpoints: manifest.json plus one raw little-endian payload per
// tensor (<name>.bin) and per optimizer accumulator (<name>.acc.bin).

struct CheckpointMeta {
    std::int32_t vocab_size = 0;
    std::int32_t d_e = 0;
    std::int32_t d_h = 0;
    std::int64_t max_enc = 400;
    std::int64_t max_dec = 100;
    real lr = real(0.15);
    real coverage_weight = real(1.0);
    real clip_norm = real(2.0);
    real adagrad_init_acc = real(0.1);
    std::int64_t step = 0;
    int phase = 1;
    std::uint64_t seed = 0;
};

void save_checkpoint(const ModelParams& params, const AdagradState& opt,
                     const CheckpointMeta& meta, const std::string& dir);

struct LoadedCheckpoint {
    ModelParams params;
    AdagradState opt;
    CheckpointMeta meta;
};

LoadedCheckpoint load_checkpoint(const std::string& dir);

bool checkpoint_exists(const std::string& dir);

}  // namespace pgnet
