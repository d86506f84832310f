#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "pgnet/model.hpp"
#include "pgnet/text.hpp"

namespace pgnet {

// Partial decode. token_ids are extended ids beginning with START; the
// log-probability is the sum of per-step log P_final of each emitted id.
struct Hypothesis {
    std::vector<std::int32_t> token_ids;
    real log_prob = 0;
    DecoderState state;
    bool finished = false;
    std::vector<real> pgen_trace;  // p_gen of the step that emitted token_ids[i+1]

    std::int64_t generated() const { return static_cast<std::int64_t>(token_ids.size()) - 1; }
    double norm_score() const {
        return static_cast<double>(log_prob) / static_cast<double>(token_ids.size() - 1);
    }
};

struct BeamConfig {
    std::int32_t beam = 4;
    std::int64_t max_dec = 100;
    std::int64_t min_dec = 8;
    std::int64_t max_enc = 400;
    bool coverage_enabled = true;
};

struct BeamResult {
    std::vector<std::string> tokens;  // summary tokens, START/STOP stripped
    Hypothesis best;
    std::vector<std::string> oov_list;
};

// One expansion of a hypothesis: the distribution over extended ids for
// the next token, diagnostics, and the advanced decoder state.
struct BeamStepOutput {
    Tensor p_final;
    real p_gen = 0;
    DecoderState next;
};

using BeamStepFn = std::function<BeamStepOutput(const DecoderState&, std::int32_t y_prev_ext)>;

// Search skeleton shared by the model-backed decoder and tests that
// drive it with hand-built distributions.
Hypothesis beam_search_core(const BeamStepFn& step, const DecoderState& initial,
                            const BeamConfig& config);

// Length-normalized beam search over the extended vocabulary. Each step
// expands every live hypothesis with its top 2*beam candidates (STOP is
// skipped below min_dec generated tokens), pools them by total
// log-probability, and keeps the beam best; ties break toward the
// lexicographically smaller id sequence. Returns the finished (or live,
// if none finished) hypothesis with the best log_prob / token count.
BeamResult beam_search(std::span<const std::string> article_tokens, const ModelParams& params,
                       const Vocabulary& vocab, const BeamConfig& config = {});

// id < vocab size -> vocabulary token; otherwise oov_list[id - size].
// START/STOP are stripped; UNK renders as its literal reserved token.
std::vector<std::string> ids_to_tokens(std::span<const std::int32_t> ids, const Vocabulary& vocab,
                                       std::span<const std::string> oov_list);

// Single-space join without a space before closing punctuation or after
// opening brackets/quotes.
std::string detokenize(std::span<const std::string> tokens);

}  // namespace pgnet
