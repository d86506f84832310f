#include "pgnet/beam.hpp"

#include <algorithm>
#include <cmath>

#include "pgnet/unicode.hpp"

namespace pgnet {

namespace {

struct Candidate {
    std::size_t parent;
    std::int32_t ext_id;
    real log_prob;  // parent log_prob + log P_final(ext_id)
    real step_pgen;
};

// Total order: higher log_prob first, then the lexicographically smaller
// extension (parent ids, then the new id).
bool candidate_before(const Candidate& a, const Candidate& b,
                      const std::vector<Hypothesis>& hyps) {
    if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
    const auto& ta = hyps[a.parent].token_ids;
    const auto& tb = hyps[b.parent].token_ids;
    const std::size_t n = std::min(ta.size(), tb.size());
    for (std::size_t i = 0; i < n; ++i) {
        if (ta[i] != tb[i]) return ta[i] < tb[i];
    }
    if (ta.size() != tb.size()) return ta.size() < tb.size();
    return a.ext_id < b.ext_id;
}

bool hyp_before(const Hypothesis& a, const Hypothesis& b) {
    const double sa = a.norm_score(), sb = b.norm_score();
    if (sa != sb) return sa > sb;
    return a.token_ids < b.token_ids;
}

}  // namespace

Hypothesis beam_search_core(const BeamStepFn& step, const DecoderState& initial,
                            const BeamConfig& config) {
    if (config.beam < 1) throw ContractError("beam width must be at least 1");
    if (config.max_dec < 1) throw ContractError("max_dec must be at least 1");

    std::vector<Hypothesis> live;
    {
        Hypothesis h;
        h.token_ids = {Vocabulary::kStart};
        h.log_prob = 0;
        h.state = initial;
        live.push_back(std::move(h));
    }
    std::vector<Hypothesis> finished;

    for (std::int64_t t = 0; t < config.max_dec; ++t) {
        std::vector<Candidate> pool;
        std::vector<DecoderState> next_states(live.size());
        for (std::size_t p = 0; p < live.size(); ++p) {
            const Hypothesis& hyp = live[p];
            const BeamStepOutput out = step(hyp.state, hyp.token_ids.back());
            next_states[p] = out.next;

            const bool stop_allowed = hyp.generated() >= config.min_dec;
            std::vector<Candidate> local;
            local.reserve(out.p_final.data.size());
            for (std::size_t id = 0; id < out.p_final.data.size(); ++id) {
                if (static_cast<std::int32_t>(id) == Vocabulary::kStop && !stop_allowed) continue;
                local.push_back({p, static_cast<std::int32_t>(id),
                                 hyp.log_prob + static_cast<real>(std::log(out.p_final.data[id])),
                                 out.p_gen});
            }
            const std::size_t keep = std::min<std::size_t>(
                local.size(), static_cast<std::size_t>(2 * config.beam));
            std::partial_sort(local.begin(), local.begin() + static_cast<std::ptrdiff_t>(keep),
                              local.end(), [](const Candidate& a, const Candidate& b) {
                                  if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
                                  return a.ext_id < b.ext_id;
                              });
            local.resize(keep);
            pool.insert(pool.end(), local.begin(), local.end());
        }

        std::sort(pool.begin(), pool.end(),
                  [&](const Candidate& a, const Candidate& b) { return candidate_before(a, b, live); });

        std::vector<Hypothesis> next_live;
        for (const Candidate& cand : pool) {
            Hypothesis h;
            h.token_ids = live[cand.parent].token_ids;
            h.token_ids.push_back(cand.ext_id);
            h.log_prob = cand.log_prob;
            h.pgen_trace = live[cand.parent].pgen_trace;
            h.pgen_trace.push_back(cand.step_pgen);
            h.state = next_states[cand.parent];
            if (cand.ext_id == Vocabulary::kStop) {
                h.finished = true;
                finished.push_back(std::move(h));
            } else if (next_live.size() < static_cast<std::size_t>(config.beam)) {
                next_live.push_back(std::move(h));
            }
            if (next_live.size() == static_cast<std::size_t>(config.beam)) break;
        }
        live = std::move(next_live);
        if (finished.size() >= static_cast<std::size_t>(config.beam)) break;
        if (live.empty()) break;
    }

    const std::vector<Hypothesis>& candidates = finished.empty() ? live : finished;
    if (candidates.empty()) throw ContractError("beam search produced no hypotheses");
    const Hypothesis* best = &candidates.front();
    for (const Hypothesis& h : candidates) {
        if (hyp_before(h, *best)) best = &h;
    }
    return *best;
}

BeamResult beam_search(std::span<const std::string> article_tokens, const ModelParams& params,
                       const Vocabulary& vocab, const BeamConfig& config) {
    if (article_tokens.empty()) throw EmptyInputError("empty article: nothing to summarize");

    const EncodedSource src = encode_source(article_tokens, vocab, config.max_enc);
    const std::int32_t max_oov = static_cast<std::int32_t>(src.oov_list.size());
    const EncodeResult enc = encode(params, src.ids);
    const std::vector<std::uint8_t> enc_mask(src.ids.size(), 1);

    const BeamStepFn step = [&](const DecoderState& state, std::int32_t y_prev) {
        if (y_prev >= params.vocab_size) y_prev = Vocabulary::kUnk;
        const StepResult sr = decoder_step(params, state, y_prev, enc.H, src.ext_ids, enc_mask,
                                           max_oov, config.coverage_enabled);
        return BeamStepOutput{sr.p_final, sr.p_gen, sr.next};
    };

    BeamResult result;
    result.best = beam_search_core(step, enc.state0, config);
    result.oov_list = src.oov_list;
    result.tokens = ids_to_tokens(result.best.token_ids, vocab, result.oov_list);
    return result;
}

std::vector<std::string> ids_to_tokens(std::span<const std::int32_t> ids, const Vocabulary& vocab,
                                       std::span<const std::string> oov_list) {
    std::vector<std::string> out;
    out.reserve(ids.size());
    const std::int32_t ext_limit = vocab.size() + static_cast<std::int32_t>(oov_list.size());
    for (std::int32_t id : ids) {
        if (id == Vocabulary::kStart || id == Vocabulary::kStop) continue;
        if (id < 0 || id >= ext_limit) {
            throw IndexError("extended id " + std::to_string(id) + " out of range [0," +
                             std::to_string(ext_limit) + ")");
        }
        if (id < vocab.size()) {
            out.push_back(vocab.token(id));
        } else {
            out.push_back(oov_list[static_cast<std::size_t>(id - vocab.size())]);
        }
    }
    return out;
}

namespace {

constexpr char32_t kClosing[] = {
    0x0964, 0x0965,  // danda, double danda
    U'.', U',', U'?', U'!', U';', U':',
    U')', U']', U'}', 0x201D, 0x2019, 0x00BB, 0x2026,
};
constexpr char32_t kOpening[] = {U'(', U'[', U'{', 0x201C, 0x2018, 0x00AB};

bool single_cp_in(const std::string& token, std::span<const char32_t> set) {
    const std::u32string cps = uni::decode_utf8(token);
    if (cps.size() != 1) return false;
    return std::find(set.begin(), set.end(), cps[0]) != set.end();
}

}  // namespace

std::string detokenize(std::span<const std::string> tokens) {
    std::string out;
    bool suppress_next_space = false;
    for (const std::string& token : tokens) {
        const bool closing = single_cp_in(token, kClosing);
        if (!out.empty() && !closing && !suppress_next_space) out.push_back(' ');
        out += token;
        suppress_next_space = single_cp_in(token, kOpening);
    }
    return out;
}

}  // namespace pgnet
