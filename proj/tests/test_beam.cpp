#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include <pgnet/beam.hpp>
#include <pgnet/model.hpp>
#include <pgnet/rng.hpp>

#include "beam_oracle.hpp"
#include "testutil.hpp"

using namespace pgnet;

namespace {

Vocabulary vocab_of(std::initializer_list<const char*> words) {
    std::vector<std::vector<std::string>> corpus;
    std::vector<std::string> line;
    for (const char* w : words) line.emplace_back(w);
    corpus.push_back(line);
    return build_vocab(corpus, static_cast<std::int32_t>(words.size()) + 4);
}

}  // namespace

TEST_SUITE_BEGIN("beam_decoder");

TEST_CASE("ids_to_tokens mapping and stripping") {
    const Vocabulary v = vocab_of({"a", "b"});
    const std::vector<std::string> oov{"x", "y"};

    const std::vector<std::int32_t> ids{Vocabulary::kStart, 4, Vocabulary::kStop};
    CHECK(ids_to_tokens(ids, v, oov) == std::vector<std::string>{"a"});

    const std::vector<std::int32_t> ext{v.size() + 1};
    CHECK(ids_to_tokens(ext, v, oov) == std::vector<std::string>{"y"});

    const std::vector<std::int32_t> unk{Vocabulary::kUnk};
    CHECK(ids_to_tokens(unk, v, oov) == std::vector<std::string>{"[UNK]"});

    const std::vector<std::int32_t> bad{v.size() + 2};
    CHECK_THROWS_AS(ids_to_tokens(bad, v, oov), IndexError);
}

TEST_CASE("detokenize punctuation attachment") {
    CHECK(detokenize(std::vector<std::string>{"ক", "খ", "।"}) ==
          "ক খ।");
    CHECK(detokenize(std::vector<std::string>{"(", "a", ")"}) == "(a)");
    CHECK(detokenize(std::vector<std::string>{}) == "");
    CHECK(detokenize(std::vector<std::string>{"a", ",", "b", "?"}) == "a, b?");
}

TEST_CASE("hand-built two-step distribution: beam outruns greedy") {
    // Step 1 favors id 4 (0.4 vs 0.35 for id 5), but id 5's continuation
    // is far better: 0.4*0.1 < 0.35*0.9.
    const auto step = [](const DecoderState& state, std::int32_t y_prev) {
        BeamStepOutput out;
        out.next = state;
        if (y_prev == Vocabulary::kStart) {
            out.p_final = Tensor::vec({0.05, 0.05, 0.05, 0.1, 0.4, 0.35});
        } else if (y_prev == 4) {
            out.p_final = Tensor::vec({0.02, 0.02, 0.02, 0.02, 0.1, 0.08});
        } else {
            out.p_final = Tensor::vec({0.02, 0.02, 0.02, 0.02, 0.9, 0.01});
        }
        return out;
    };

    BeamConfig config;
    config.max_dec = 2;
    config.min_dec = 2;

    config.beam = 2;
    const Hypothesis wide = beam_search_core(step, DecoderState{}, config);
    CHECK(wide.token_ids == std::vector<std::int32_t>{Vocabulary::kStart, 5, 4});
    CHECK(wide.log_prob == doctest::Approx(std::log(0.35) + std::log(0.9)));

    config.beam = 1;
    const Hypothesis greedy = beam_search_core(step, DecoderState{}, config);
    CHECK(greedy.token_ids == std::vector<std::int32_t>{Vocabulary::kStart, 4, 4});
}

TEST_CASE("beam of one reproduces greedy argmax decoding") {
    const ModelParams p = init_params(9, 3, 4, 55);
    const Vocabulary v = vocab_of({"w1", "w2", "w3", "w4", "w5"});
    REQUIRE(v.size() == 9);
    const std::vector<std::string> article{"w1", "w3", "zz", "w5"};

    BeamConfig config;
    config.beam = 1;
    config.max_dec = 6;
    config.min_dec = 1;
    const BeamResult got = beam_search(article, p, v, config);

    // Independent greedy loop over the same value-level steps.
    const EncodedSource src = encode_source(article, v, config.max_enc);
    const EncodeResult enc = encode(p, src.ids);
    const std::vector<std::uint8_t> mask(src.ids.size(), 1);
    DecoderState state = enc.state0;
    std::vector<std::int32_t> seq{Vocabulary::kStart};
    for (std::int64_t t = 0; t < config.max_dec; ++t) {
        std::int32_t y = seq.back();
        if (y >= p.vocab_size) y = Vocabulary::kUnk;
        const StepResult step =
            decoder_step(p, state, y, enc.H, src.ext_ids, mask,
                         static_cast<std::int32_t>(src.oov_list.size()), true);
        std::size_t arg = step.p_final.data.size();
        const std::int64_t generated = static_cast<std::int64_t>(seq.size()) - 1;
        for (std::size_t i = 0; i < step.p_final.data.size(); ++i) {
            if (static_cast<std::int32_t>(i) == Vocabulary::kStop && generated < config.min_dec) {
                continue;
            }
            if (arg == step.p_final.data.size() || step.p_final.data[i] > step.p_final.data[arg]) {
                arg = i;
            }
        }
        REQUIRE(arg < step.p_final.data.size());
        seq.push_back(static_cast<std::int32_t>(arg));
        state = step.next;
        if (static_cast<std::int32_t>(arg) == Vocabulary::kStop) break;
    }
    const std::vector<std::string> want = ids_to_tokens(seq, v, src.oov_list);
    CHECK(got.tokens == want);
}

TEST_CASE("a forced pointer copies the OOV token back") {
    const Vocabulary v = vocab_of({"w"});
    REQUIRE(v.size() == 5);
    ModelParams forced = init_params(5, 3, 4, 78);
    forced.pgen_b.at(0) = -60;  // p_gen ~= 0: pure copy

    const std::vector<std::string> article{"z"};
    BeamConfig config;
    config.beam = 2;
    config.max_dec = 3;
    config.min_dec = 1;
    const BeamResult r = beam_search(article, forced, v, config);
    bool has_copy = false;
    for (const std::string& t : r.tokens) {
        if (t == "z") has_copy = true;
    }
    CHECK(has_copy);
    REQUIRE(!r.best.pgen_trace.empty());
    CHECK(r.best.pgen_trace.front() < 1e-10);
}

TEST_CASE("beam rejects empty articles and degenerate settings") {
    const ModelParams p = init_params(5, 3, 4, 1);
    const Vocabulary v = vocab_of({"w"});
    CHECK_THROWS_AS(beam_search({}, p, v, {}), EmptyInputError);
    BeamConfig bad;
    bad.beam = 0;
    const std::vector<std::string> article{"w"};
    CHECK_THROWS_AS(beam_search(article, p, v, bad), ContractError);
}

TEST_CASE("log-probabilities are nonpositive and monotone along the winner") {
    const ModelParams p = init_params(8, 3, 4, 91);
    const Vocabulary v = vocab_of({"w1", "w2", "w3", "w4"});
    const std::vector<std::string> article{"w1", "w4", "qq", "w2"};
    BeamConfig config;
    config.beam = 3;
    config.max_dec = 5;
    config.min_dec = 1;
    const BeamResult r = beam_search(article, p, v, config);
    CHECK(r.best.log_prob <= 0);
    CHECK(r.best.norm_score() <= 0);
    CHECK(r.best.pgen_trace.size() == r.best.token_ids.size() - 1);
}

TEST_CASE("pointer-generator closure: every token is vocab or article") {
    const ModelParams p = init_params(10, 3, 4, 17);
    const Vocabulary v = vocab_of({"w1", "w2", "w3", "w4", "w5", "w6"});
    Rng rng(18);
    const std::vector<std::string> pool{"w1", "w2", "w3", "w4", "w5", "w6", "ox1", "ox2"};
    for (int trial = 0; trial < 5; ++trial) {
        std::vector<std::string> article;
        for (int i = 0; i < 6; ++i) {
            article.push_back(pool[static_cast<std::size_t>(rng.below(pool.size()))]);
        }
        BeamConfig config;
        config.beam = 2;
        config.max_dec = 4;
        config.min_dec = 1;
        const BeamResult r = beam_search(article, p, v, config);
        for (const std::string& t : r.tokens) {
            const bool in_vocab = v.contains(t) || t == "[UNK]" || t == "[PAD]";
            const bool in_article =
                std::find(article.begin(), article.end(), t) != article.end();
            CHECK((in_vocab || in_article));
        }
    }
}

TEST_CASE("determinism: identical inputs give identical outputs") {
    const ModelParams p = init_params(8, 3, 4, 33);
    const Vocabulary v = vocab_of({"w1", "w2", "w3", "w4"});
    const std::vector<std::string> article{"w2", "qq", "w3"};
    BeamConfig config;
    config.beam = 4;
    config.max_dec = 5;
    config.min_dec = 1;
    const BeamResult a = beam_search(article, p, v, config);
    const BeamResult b = beam_search(article, p, v, config);
    CHECK(a.tokens == b.tokens);
    CHECK(a.best.log_prob == b.best.log_prob);
}

TEST_CASE("exhaustive beams match enumeration on tiny instances") {
    // extended vocab 6 (5 + one OOV), max_dec 3, beam = 6^3.
    const Vocabulary v = vocab_of({"w"});
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const ModelParams p = init_params(5, 2, 4, seed * 13);
        const std::vector<std::string> article{"w", "qq", "w"};
        BeamConfig config;
        config.beam = 216;
        config.max_dec = 3;
        config.min_dec = 1;
        const BeamResult got = beam_search(article, p, v, config);

        const EncodedSource src = encode_source(article, v, config.max_enc);
        const EncodeResult enc = encode(p, src.ids);
        const std::vector<std::uint8_t> mask(src.ids.size(), 1);
        testutil::EnumOracle oracle{p,
                                    enc.H,
                                    src.ext_ids,
                                    mask,
                                    static_cast<std::int32_t>(src.oov_list.size()),
                                    config.max_dec,
                                    config.min_dec,
                                    config.coverage_enabled};
        const testutil::EnumBest want = oracle.run(enc.state0);
        REQUIRE(want.found);
        CAPTURE(seed);
        CHECK(got.best.token_ids == want.ids);
        CHECK(got.best.norm_score() == doctest::Approx(want.score).epsilon(1e-12));
    }
}

TEST_SUITE_END();
