#include "pgnet/trainer.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "pgnet/rng.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint payloads are little-endian; byte swapping is not implemented");

namespace pgnet {

namespace fs = std::filesystem;

void TrainConfig::validate() const {
    if (lr <= 0) throw ContractError("learning rate must be positive");
    if (clip_norm <= 0) throw ContractError("clip_norm must be positive");
    if (batch_size < 1) throw ContractError("batch_size must be at least 1");
    if (phase1_steps < 0 || phase2_steps < 0) throw ContractError("step counts must be nonnegative");
    if (checkpoint_every < 1) throw ContractError("checkpoint_every must be at least 1");
}

void AdagradState::init(const ModelParams& params, real init_acc) {
    acc.clear();
    for (const auto& [name, t] : params.named()) {
        acc.emplace(name, Tensor::full(t->shape, init_acc));
    }
}

real clip_by_global_norm(std::span<Tensor* const> tensors, real max_norm) {
    if (max_norm <= 0) throw ContractError("max_norm must be positive");
    real sq = 0;
    for (Tensor* t : tensors) {
        for (real g : t->grad) sq += g * g;
    }
    const real norm = std::sqrt(sq);
    if (norm > max_norm) {
        const real scale = max_norm / norm;
        for (Tensor* t : tensors) {
            for (real& g : t->grad) g *= scale;
        }
    }
    return norm;
}

void adagrad_step(ModelParams& params, AdagradState& state, real lr, real eps) {
    for (auto& [name, t] : params.named()) {
        auto it = state.acc.find(name);
        if (it == state.acc.end()) {
            throw ContractError("optimizer state missing accumulator for tensor '" + name + "'");
        }
        Tensor& a = it->second;
        if (!a.same_shape(*t)) {
            throw ContractError("optimizer accumulator shape mismatch for tensor '" + name + "'");
        }
        if (t->grad.empty()) continue;
        for (std::size_t i = 0; i < t->data.size(); ++i) {
            const real g = t->grad[i];
            if (g == real(0)) continue;
            a.data[i] += g * g;
            t->data[i] -= lr * g / (std::sqrt(a.data[i]) + eps);
        }
    }
}

Split split_of_index(std::size_t index) {
    const std::uint64_t bucket = Rng::splitmix64(static_cast<std::uint64_t>(index)) % 10;
    if (bucket < 7) return Split::train;
    if (bucket < 9) return Split::val;
    return Split::test;
}

namespace {

std::uint64_t epoch_seed(std::uint64_t seed, std::int64_t epoch) {
    return Rng::splitmix64(seed ^ (0x6A09E667F3BCC909ULL + static_cast<std::uint64_t>(epoch)));
}

std::string format_real(real v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", static_cast<double>(v));
    return buf;
}

real validation_loss(ModelParams& params, const std::vector<EncodedExample>& val_examples,
                     const TrainConfig& config, bool coverage_enabled) {
    // Capped read-only pass; enough for trend logging.
    constexpr std::size_t kMaxValBatches = 8;
    const std::vector<Batch> batches = make_batches(val_examples, config.batch_size, 0);
    real total = 0;
    std::size_t used = 0;
    for (const Batch& b : batches) {
        total += compute_loss(params, b, config.coverage_weight, coverage_enabled, false).loss;
        if (++used == kMaxValBatches) break;
    }
    return used ? total / static_cast<real>(used) : real(0);
}

}  // namespace

TrainResult train(const TrainConfig& config, const std::vector<EncodedExample>& train_examples,
                  const std::vector<EncodedExample>& val_examples, ModelParams& params,
                  AdagradState& opt, std::int64_t start_step,
                  const std::function<void(const std::string&)>& log) {
    config.validate();
    if (train_examples.empty()) throw EmptyInputError("no training examples");
    const std::int64_t total = config.total_steps();
    if (start_step > total) throw ContractError("start step is past the configured schedule");

    const std::int64_t steps_per_epoch =
        (static_cast<std::int64_t>(train_examples.size()) + config.batch_size - 1) /
        config.batch_size;

    if (!config.checkpoint_dir.empty()) fs::create_directories(config.checkpoint_dir);
    std::ofstream csv;
    if (!config.loss_csv_path.empty()) {
        csv.open(config.loss_csv_path,
                 start_step > 0 ? std::ios::app : std::ios::trunc);
        if (!csv) throw IoError("cannot open loss CSV for writing: " + config.loss_csv_path);
        if (start_step == 0) csv << "step,phase,loss,coverage_loss\n";
    }

    const auto checkpoint_now = [&](std::int64_t step, int phase) {
        if (config.checkpoint_dir.empty()) return;
        CheckpointMeta meta;
        meta.vocab_size = params.vocab_size;
        meta.d_e = params.d_e;
        meta.d_h = params.d_h;
        meta.max_enc = config.max_enc;
        meta.max_dec = config.max_dec;
        meta.lr = config.lr;
        meta.coverage_weight = config.coverage_weight;
        meta.clip_norm = config.clip_norm;
        meta.adagrad_init_acc = config.adagrad_init_acc;
        meta.step = step;
        meta.phase = phase;
        meta.seed = config.seed;
        save_checkpoint(params, opt, meta, config.checkpoint_dir);
        if (!val_examples.empty() && log) {
            const real vl = validation_loss(params, val_examples, config, phase == 2);
            log("step " + std::to_string(step) + " val_loss " + format_real(vl));
        }
    };

    TrainResult result;
    std::vector<Tensor*> tensors;
    for (auto& [name, t] : params.named()) tensors.push_back(t);

    std::int64_t cached_epoch = -1;
    std::vector<Batch> batches;

    // Phase-1 progress flag: non-overlapping 200-step block means must
    // keep decreasing on a learnable task.
    constexpr std::int64_t kFlagWindow = 200;
    real block_sum = 0;
    std::int64_t block_n = 0;
    real prev_block_mean = 0;
    bool have_prev_block = false;

    for (std::int64_t step = start_step + 1; step <= total; ++step) {
        const int phase = (step <= config.phase1_steps) ? 1 : 2;
        const bool coverage_enabled = (phase == 2);

        const std::int64_t epoch = (step - 1) / steps_per_epoch;
        if (epoch != cached_epoch) {
            batches = make_batches(train_examples, config.batch_size,
                                   epoch_seed(config.seed, epoch));
            cached_epoch = epoch;
        }
        const Batch& batch = batches[static_cast<std::size_t>((step - 1) % steps_per_epoch)];

        params.zero_grads();
        LossValue lv;
        try {
            lv = compute_loss(params, batch, config.coverage_weight, coverage_enabled, true);
        } catch (const NumericalError&) {
            throw NumericalError("non-finite loss at step " + std::to_string(step) +
                                 "; last checkpoint retained");
        }
        if (!std::isfinite(lv.loss)) {
            throw NumericalError("non-finite loss at step " + std::to_string(step) +
                                 "; last checkpoint retained");
        }
        clip_by_global_norm(tensors, config.clip_norm);
        adagrad_step(params, opt, config.lr);

        result.history.push_back({step, phase, lv.loss, lv.coverage_mean});
        if (csv.is_open()) {
            csv << step << ',' << phase << ',' << format_real(lv.loss) << ','
                << format_real(lv.coverage_mean) << '\n';
            csv.flush();
        }

        if (phase == 1) {
            block_sum += lv.loss;
            if (++block_n == kFlagWindow) {
                const real mean = block_sum / static_cast<real>(kFlagWindow);
                if (have_prev_block && mean >= prev_block_mean) {
                    result.warnings.push_back(
                        "phase-1 loss plateau: mean over steps " +
                        std::to_string(step - 2 * kFlagWindow + 1) + ".." +
                        std::to_string(step - kFlagWindow) + " -> " + std::to_string(step) +
                        " did not decrease");
                }
                prev_block_mean = mean;
                have_prev_block = true;
                block_sum = 0;
                block_n = 0;
            }
        }

        const bool phase_boundary = (step == config.phase1_steps) && config.phase2_steps > 0;
        if (step % config.checkpoint_every == 0 || phase_boundary || step == total) {
            checkpoint_now(step, phase);
        }
        result.final_step = step;
    }
    if (result.final_step == 0) result.final_step = start_step;
    for (const std::string& w : result.warnings) {
        if (log) log(w);
    }
    return result;
}

// ---------------------------------------------------------------------------

namespace {

void write_payload(const fs::path& path, const Tensor& t) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open checkpoint payload for writing: " + path.string());
    out.write(reinterpret_cast<const char*>(t.data.data()),
              static_cast<std::streamsize>(t.data.size() * sizeof(real)));
    if (!out) throw IoError("failed writing checkpoint payload: " + path.string());
}

void read_payload(const fs::path& path, const std::string& tensor_name, Tensor& t) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw CorruptionError("checkpoint payload missing for tensor '" + tensor_name +
                              "': " + path.string());
    }
    in.seekg(0, std::ios::end);
    const std::streamsize bytes = in.tellg();
    const std::streamsize want =
        static_cast<std::streamsize>(t.data.size() * sizeof(real));
    if (bytes != want) {
        throw CorruptionError("checkpoint payload for tensor '" + tensor_name + "' holds " +
                              std::to_string(bytes) + " bytes, expected " + std::to_string(want));
    }
    in.seekg(0, std::ios::beg);
    in.read(reinterpret_cast<char*>(t.data.data()), want);
    if (!in) throw CorruptionError("failed reading checkpoint payload: " + path.string());
}

std::string payload_name(const std::string& tensor_name, bool accumulator) {
    return tensor_name + (accumulator ? ".acc.bin" : ".bin");
}

}  // namespace

void save_checkpoint(const ModelParams& params, const AdagradState& opt,
                     const CheckpointMeta& meta, const std::string& dir) {
    fs::create_directories(dir);
    nlohmann::json manifest;
    manifest["format"] = "pgnet-checkpoint-v1";
    manifest["dtype"] = real_dtype_name();
    manifest["hyperparameters"] = {
        {"vocab_size", meta.vocab_size}, {"emb", meta.d_e},
        {"hidden", meta.d_h},            {"max_enc", meta.max_enc},
        {"max_dec", meta.max_dec},       {"lr", meta.lr},
        {"coverage_weight", meta.coverage_weight},
        {"clip_norm", meta.clip_norm},   {"adagrad_init_acc", meta.adagrad_init_acc},
    };
    manifest["step"] = meta.step;
    manifest["phase"] = meta.phase;
    manifest["seed"] = meta.seed;

    nlohmann::json tensors = nlohmann::json::array();
    nlohmann::json optimizer = nlohmann::json::array();
    for (const auto& [name, t] : params.named()) {
        const std::string file = payload_name(name, false);
        tensors.push_back({{"name", name}, {"shape", t->shape}, {"file", file}});
        write_payload(fs::path(dir) / file, *t);

        const auto it = opt.acc.find(name);
        if (it == opt.acc.end()) {
            throw ContractError("optimizer state missing accumulator for tensor '" + name + "'");
        }
        const std::string acc_file = payload_name(name, true);
        optimizer.push_back({{"name", name}, {"shape", it->second.shape}, {"file", acc_file}});
        write_payload(fs::path(dir) / acc_file, it->second);
    }
    manifest["tensors"] = std::move(tensors);
    manifest["optimizer"] = std::move(optimizer);

    const fs::path manifest_path = fs::path(dir) / "manifest.json";
    std::ofstream out(manifest_path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open manifest for writing: " + manifest_path.string());
    out << manifest.dump(2) << '\n';
    if (!out) throw IoError("failed writing manifest: " + manifest_path.string());
}

bool checkpoint_exists(const std::string& dir) {
    return fs::exists(fs::path(dir) / "manifest.json");
}

LoadedCheckpoint load_checkpoint(const std::string& dir) {
    const fs::path manifest_path = fs::path(dir) / "manifest.json";
    std::ifstream in(manifest_path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint manifest: " + manifest_path.string());
    nlohmann::json manifest;
    try {
        in >> manifest;
    } catch (const nlohmann::json::exception& e) {
        throw CorruptionError("unparsable checkpoint manifest: " + std::string(e.what()));
    }

    LoadedCheckpoint loaded;
    try {
        if (manifest.at("format").get<std::string>() != "pgnet-checkpoint-v1") {
            throw CorruptionError("unknown checkpoint format tag");
        }
        if (manifest.at("dtype").get<std::string>() != real_dtype_name()) {
            throw CorruptionError("checkpoint dtype " + manifest["dtype"].get<std::string>() +
                                  " does not match this build's " + real_dtype_name());
        }
        const auto& hp = manifest.at("hyperparameters");
        loaded.meta.vocab_size = hp.at("vocab_size").get<std::int32_t>();
        loaded.meta.d_e = hp.at("emb").get<std::int32_t>();
        loaded.meta.d_h = hp.at("hidden").get<std::int32_t>();
        loaded.meta.max_enc = hp.at("max_enc").get<std::int64_t>();
        loaded.meta.max_dec = hp.at("max_dec").get<std::int64_t>();
        loaded.meta.lr = hp.at("lr").get<real>();
        loaded.meta.coverage_weight = hp.at("coverage_weight").get<real>();
        loaded.meta.clip_norm = hp.at("clip_norm").get<real>();
        loaded.meta.adagrad_init_acc = hp.at("adagrad_init_acc").get<real>();
        loaded.meta.step = manifest.at("step").get<std::int64_t>();
        loaded.meta.phase = manifest.at("phase").get<int>();
        loaded.meta.seed = manifest.at("seed").get<std::uint64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw CorruptionError("checkpoint manifest missing fields: " + std::string(e.what()));
    }

    loaded.params = init_params(loaded.meta.vocab_size, loaded.meta.d_e, loaded.meta.d_h, 0);
    loaded.opt.init(loaded.params, loaded.meta.adagrad_init_acc);

    const auto read_group = [&](const nlohmann::json& listing, bool accumulator) {
        auto named = loaded.params.named();
        if (!listing.is_array() || listing.size() != named.size()) {
            throw CorruptionError("checkpoint manifest lists " + std::to_string(listing.size()) +
                                  " tensors, expected " + std::to_string(named.size()));
        }
        for (const auto& entry : listing) {
            const std::string name = entry.at("name").get<std::string>();
            Tensor* target = nullptr;
            for (auto& [n, t] : named) {
                if (n == name) {
                    target = accumulator ? &loaded.opt.acc.at(n) : t;
                    break;
                }
            }
            if (!target) {
                throw CorruptionError("checkpoint manifest names unknown tensor '" + name + "'");
            }
            const Shape shape = entry.at("shape").get<Shape>();
            if (shape != target->shape) {
                throw CorruptionError("checkpoint shape " + shape_str(shape) + " for tensor '" +
                                      name + "' does not match expected " +
                                      shape_str(target->shape));
            }
            read_payload(fs::path(dir) / entry.at("file").get<std::string>(), name, *target);
        }
    };
    read_group(manifest.at("tensors"), false);
    read_group(manifest.at("optimizer"), true);
    return loaded;
}

}  // namespace pgnet
