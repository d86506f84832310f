#include <doctest.h>

#include <array>
#include <cmath>
#include <vector>

#include <pgnet/model.hpp>
#include <pgnet/rng.hpp>

#include "testutil.hpp"

using namespace pgnet;

namespace {

ModelParams micro_params(std::uint64_t seed, std::int32_t vocab = 8, std::int32_t d_e = 3,
                         std::int32_t d_h = 4) {
    return init_params(vocab, d_e, d_h, seed);
}

Batch micro_batch(const ModelParams& params, Rng& rng, std::int32_t batch_size,
                  std::int64_t t_enc, std::int64_t t_dec, std::int32_t oov_count) {
    std::vector<EncodedExample> examples;
    for (std::int32_t b = 0; b < batch_size; ++b) {
        EncodedExample ex;
        for (std::int64_t i = 0; i < t_enc; ++i) {
            if (oov_count > 0 && i < oov_count) {
                ex.enc_ids.push_back(Vocabulary::kUnk);
                ex.enc_ext_ids.push_back(params.vocab_size + static_cast<std::int32_t>(i));
            } else {
                const std::int32_t id =
                    4 + static_cast<std::int32_t>(rng.below(
                            static_cast<std::uint64_t>(params.vocab_size - 4)));
                ex.enc_ids.push_back(id);
                ex.enc_ext_ids.push_back(id);
            }
        }
        for (std::int32_t i = 0; i < oov_count; ++i) {
            ex.oov_list.push_back("oov" + std::to_string(i));
        }
        ex.dec_input.push_back(Vocabulary::kStart);
        for (std::int64_t i = 0; i + 1 < t_dec; ++i) {
            ex.dec_input.push_back(4 + static_cast<std::int32_t>(rng.below(
                                           static_cast<std::uint64_t>(params.vocab_size - 4))));
        }
        for (std::int64_t i = 0; i + 1 < t_dec; ++i) {
            const bool use_ext = oov_count > 0 && rng.below(3) == 0;
            ex.dec_target.push_back(
                use_ext ? params.vocab_size + static_cast<std::int32_t>(rng.below(
                                                  static_cast<std::uint64_t>(oov_count)))
                        : 4 + static_cast<std::int32_t>(rng.below(
                                  static_cast<std::uint64_t>(params.vocab_size - 4))));
        }
        ex.dec_target.push_back(Vocabulary::kStop);
        examples.push_back(std::move(ex));
    }
    return make_batch(examples);
}

}  // namespace

TEST_SUITE_BEGIN("seq2seq_model");

TEST_CASE("init_params is deterministic under the seed") {
    const ModelParams a = init_params(20, 4, 8, 7);
    const ModelParams b = init_params(20, 4, 8, 7);
    for (std::size_t i = 0; i < a.named().size(); ++i) {
        CHECK(a.named()[i].second->data == b.named()[i].second->data);
    }
    const ModelParams c = init_params(20, 4, 8, 8);
    CHECK(a.embedding.data != c.embedding.data);
}

TEST_CASE("init_params ranges: uniform weights, zero biases, unit forget gates") {
    const ModelParams p = init_params(20, 4, 8, 3);
    for (const auto& [name, t] : p.named()) {
        const bool bias = name.ends_with(".b") || name.ends_with(".b1") || name.ends_with(".b2");
        if (!bias) {
            for (real v : t->data) {
                CHECK(v >= -0.02);
                CHECK(v <= 0.02);
            }
        }
    }
    for (const LstmWeights* w : {&p.enc_fwd, &p.enc_bwd, &p.dec}) {
        const std::int64_t h = w->hidden();
        for (std::int64_t i = 0; i < w->b.numel(); ++i) {
            CHECK(w->b.at(i) == ((i >= h && i < 2 * h) ? 1.0 : 0.0));
        }
    }
    for (const Tensor* t : {&p.bridge_h_b, &p.bridge_c_b, &p.attn_b, &p.out_b1, &p.out_b2,
                            &p.pgen_b}) {
        for (real v : t->data) CHECK(v == 0.0);
    }
}

TEST_CASE("parameter count matches the hand-computed shape sum") {
    // V=20, d_e=4, d_h=8 (so d_a=8, per-direction hidden 4), summed term by
    // term from the declared shapes.
    const std::int64_t embedding = 20 * 4;
    const std::int64_t enc_one_dir = (4 + 4) * (4 * 4) + 4 * 4;
    const std::int64_t bridges = 2 * (8 * 8 + 8);
    const std::int64_t dec_lstm = (4 + 8 + 8) * (4 * 8) + 4 * 8;
    const std::int64_t attn = 8 * 8 + 8 * 8 + 8 + 8 + 8;
    const std::int64_t output = (2 * 8) * 8 + 8 + 8 * 20 + 20;
    const std::int64_t pgen = 8 + 8 + (4 + 8) + 1;
    const std::int64_t expected =
        embedding + 2 * enc_one_dir + bridges + dec_lstm + attn + output + pgen;
    CHECK(expected == 1681);

    const ModelParams p = init_params(20, 4, 8, 1);
    CHECK(p.param_count() == expected);
    CHECK(expected_param_count(20, 4, 8) == expected);
}

TEST_CASE("init_params validates its inputs") {
    CHECK_THROWS_AS(init_params(4, 4, 8, 1), ContractError);
    CHECK_THROWS_AS(init_params(20, 4, 7, 1), ContractError);
}

TEST_CASE("lstm_step zero case") {
    LstmWeights w{Tensor::zeros({5, 12}), Tensor::zeros({12})};
    Tensor h, c;
    lstm_step(Tensor::zeros({2}), Tensor::zeros({3}), Tensor::zeros({3}), w, &h, &c);
    CHECK(h.data == std::vector<real>(3, 0));
    CHECK(c.data == std::vector<real>(3, 0));
}

TEST_CASE("saturated gates preserve the cell state") {
    // f ~= 1 and i ~= 0 via large biases.
    const std::int64_t H = 3;
    LstmWeights w{Tensor::zeros({4 + H, 4 * H}), Tensor::zeros({4 * H})};
    for (std::int64_t j = 0; j < H; ++j) {
        w.b.at(j) = -50;          // input gate shut
        w.b.at(H + j) = 50;       // forget gate open
    }
    Rng rng(4);
    Tensor x = Tensor::zeros({4});
    Tensor h0 = Tensor::zeros({H});
    Tensor c0 = Tensor::zeros({H});
    testutil::fill_uniform(x, rng);
    testutil::fill_uniform(h0, rng);
    testutil::fill_uniform(c0, rng);
    Tensor h, c;
    lstm_step(x, h0, c0, w, &h, &c);
    for (std::int64_t j = 0; j < H; ++j) {
        CHECK(std::abs(c.at(j) - c0.at(j)) < 1e-6);
    }
}

TEST_CASE("lstm_step matches a direct transcription of the gate equations") {
    const std::int64_t in = 3, H = 4;
    Rng rng(9);
    LstmWeights w{Tensor::zeros({in + H, 4 * H}), Tensor::zeros({4 * H})};
    Tensor x = Tensor::zeros({in});
    Tensor h0 = Tensor::zeros({H});
    Tensor c0 = Tensor::zeros({H});
    testutil::fill_uniform(w.W, rng);
    testutil::fill_uniform(w.b, rng);
    testutil::fill_uniform(x, rng);
    testutil::fill_uniform(h0, rng);
    testutil::fill_uniform(c0, rng);

    Tensor h, c;
    lstm_step(x, h0, c0, w, &h, &c);

    std::vector<real> xh;
    for (real v : x.data) xh.push_back(v);
    for (real v : h0.data) xh.push_back(v);
    const auto sigmoid = [](real v) { return real(1) / (real(1) + std::exp(-v)); };
    for (std::int64_t j = 0; j < H; ++j) {
        std::array<real, 4> z{};
        for (int gate = 0; gate < 4; ++gate) {
            real acc = 0;
            for (std::size_t k = 0; k < xh.size(); ++k) {
                acc += xh[k] * w.W.at(static_cast<std::int64_t>(k), gate * H + j);
            }
            z[static_cast<std::size_t>(gate)] = acc + w.b.at(gate * H + j);
        }
        const real ig = sigmoid(z[0]), fg = sigmoid(z[1]), og = sigmoid(z[2]);
        const real gg = std::tanh(z[3]);
        const real cj = fg * c0.at(j) + ig * gg;
        const real hj = og * std::tanh(cj);
        CHECK(c.at(j) == doctest::Approx(cj).epsilon(1e-14));
        CHECK(h.at(j) == doctest::Approx(hj).epsilon(1e-14));
    }
}

TEST_CASE("encode: single token yields one row and zero coverage") {
    const ModelParams p = micro_params(2);
    const std::array<std::int32_t, 1> ids{4};
    const EncodeResult r = encode(p, ids);
    CHECK(r.H.shape == Shape{1, p.d_h});
    CHECK(r.state0.coverage.data == std::vector<real>{0});
    CHECK(r.state0.prev_context.data == std::vector<real>(static_cast<std::size_t>(p.d_h), 0));
}

TEST_CASE("encode is deterministic across identical inputs") {
    const ModelParams p = micro_params(12);
    const std::array<std::int32_t, 4> ids{4, 5, 6, 7};
    CHECK(encode(p, ids).H.data == encode(p, ids).H.data);
}

TEST_CASE("encode with tied directions mirrors states under reversal") {
    ModelParams p = micro_params(5, 8, 3, 6);
    p.enc_bwd = p.enc_fwd;  // tie the directions
    const std::vector<std::int32_t> ids{4, 5, 6, 7, 4};
    std::vector<std::int32_t> rids(ids.rbegin(), ids.rend());

    const EncodeResult fwd = encode(p, ids);
    const EncodeResult rev = encode(p, rids);
    const std::int64_t T = static_cast<std::int64_t>(ids.size());
    const std::int64_t half = p.d_h / 2;
    for (std::int64_t t = 0; t < T; ++t) {
        for (std::int64_t j = 0; j < half; ++j) {
            // bwd half of the reversed input equals the fwd half of the original
            // at the mirrored position
            CHECK(rev.H.at(t, half + j) ==
                  doctest::Approx(fwd.H.at(T - 1 - t, j)).epsilon(1e-14));
        }
    }
}

TEST_CASE("attention over a single unmasked position is one-hot") {
    const ModelParams p = micro_params(3);
    Rng rng(6);
    Tensor s = Tensor::zeros({p.d_h});
    Tensor H = Tensor::zeros({3, p.d_h});
    testutil::fill_uniform(s, rng);
    testutil::fill_uniform(H, rng);
    const Tensor cov = Tensor::zeros({3});
    const std::vector<std::uint8_t> mask{0, 1, 0};
    const AttentionResult a = attention(p, s, H, cov, mask);
    CHECK(a.attn.data == std::vector<real>{0, 1, 0});
}

TEST_CASE("zero coverage reproduces the coverage-free energies") {
    const ModelParams p = micro_params(31);
    Rng rng(32);
    Tensor s = Tensor::zeros({p.d_h});
    Tensor H = Tensor::zeros({4, p.d_h});
    testutil::fill_uniform(s, rng);
    testutil::fill_uniform(H, rng);
    const Tensor cov = Tensor::zeros({4});
    const std::vector<std::uint8_t> mask{1, 1, 1, 1};
    const AttentionResult with = attention(p, s, H, cov, mask, true);
    const AttentionResult without = attention(p, s, H, cov, mask, false);
    CHECK(with.attn.data == without.attn.data);
    CHECK(with.energies.data == without.energies.data);
}

TEST_CASE("negative coverage weights push attention away from covered positions") {
    ModelParams p = micro_params(41);
    Rng rng(42);
    for (real& v : p.attn_v.data) v = static_cast<real>(rng.uniform(0.1, 0.5));
    for (real& v : p.attn_wc.data) v = static_cast<real>(rng.uniform(-0.5, -0.1));
    Tensor s = Tensor::zeros({p.d_h});
    Tensor H = Tensor::zeros({5, p.d_h});
    testutil::fill_uniform(s, rng);
    testutil::fill_uniform(H, rng);
    const std::vector<std::uint8_t> mask{1, 1, 1, 1, 1};

    Tensor cov = Tensor::zeros({5});
    const AttentionResult before = attention(p, s, H, cov, mask);
    Tensor cov2 = cov;
    cov2.at(2) += real(0.7);
    const AttentionResult after = attention(p, s, H, cov2, mask);

    CHECK(after.attn.at(2) < before.attn.at(2));
    for (std::int64_t i = 0; i < 5; ++i) {
        if (i != 2) CHECK(after.energies.at(i) == before.energies.at(i));
    }
}

TEST_CASE("context selects, averages, and matches a naive loop") {
    const Tensor H = Tensor::from({3, 2}, {1, 2, 3, 4, 5, 6});
    const Tensor onehot = Tensor::vec({0, 1, 0});
    CHECK(context(onehot, H).data == std::vector<real>{3, 4});

    const Tensor uniform2 = Tensor::vec({0.5, 0.5, 0});
    CHECK(context(uniform2, H).data == std::vector<real>{2, 3});

    Rng rng(14);
    Tensor attn = Tensor::zeros({3});
    testutil::fill_uniform(attn, rng, 0.0, 1.0);
    const Tensor got = context(attn, H);
    for (std::int64_t j = 0; j < 2; ++j) {
        real want = 0;
        for (std::int64_t i = 0; i < 3; ++i) want += attn.at(i) * H.at(i, j);
        CHECK(got.at(j) == want);
    }
}

TEST_CASE("vocab_dist with zero weights is uniform and always sums to one") {
    ModelParams p = micro_params(1);
    for (auto& [name, t] : p.named()) {
        for (real& v : t->data) v = 0;
    }
    Rng rng(2);
    Tensor s = Tensor::zeros({p.d_h});
    Tensor ctx = Tensor::zeros({p.d_h});
    testutil::fill_uniform(s, rng);
    testutil::fill_uniform(ctx, rng);
    const Tensor uniform = vocab_dist(p, s, ctx);
    for (std::int64_t i = 0; i < p.vocab_size; ++i) {
        CHECK(uniform.at(i) == doctest::Approx(1.0 / p.vocab_size).epsilon(1e-12));
    }

    const ModelParams q = micro_params(19);
    const Tensor dist = vocab_dist(q, s, ctx);
    real total = 0;
    for (real v : dist.data) {
        CHECK(v >= 0);
        total += v;
    }
    CHECK(std::abs(total - 1.0) < 1e-9);
}

TEST_CASE("vocab_dist argmax agrees with an extended-precision oracle") {
    const ModelParams p = micro_params(77, 12, 3, 4);
    Rng rng(78);
    Tensor s = Tensor::zeros({p.d_h});
    Tensor ctx = Tensor::zeros({p.d_h});
    testutil::fill_uniform(s, rng);
    testutil::fill_uniform(ctx, rng);
    const Tensor dist = vocab_dist(p, s, ctx);

    std::vector<long double> cat;
    for (real v : s.data) cat.push_back(v);
    for (real v : ctx.data) cat.push_back(v);
    std::vector<long double> hidden(static_cast<std::size_t>(p.d_h), 0);
    for (std::size_t j = 0; j < hidden.size(); ++j) {
        for (std::size_t k = 0; k < cat.size(); ++k) {
            hidden[j] += cat[k] * static_cast<long double>(
                                      p.out_W1.at(static_cast<std::int64_t>(k),
                                                  static_cast<std::int64_t>(j)));
        }
        hidden[j] += p.out_b1.at(static_cast<std::int64_t>(j));
    }
    std::size_t best = 0;
    long double best_logit = -1e30L;
    for (std::int64_t v = 0; v < p.vocab_size; ++v) {
        long double logit = p.out_b2.at(v);
        for (std::size_t j = 0; j < hidden.size(); ++j) {
            logit += hidden[j] * static_cast<long double>(
                                     p.out_W2.at(static_cast<std::int64_t>(j), v));
        }
        if (logit > best_logit) {
            best_logit = logit;
            best = static_cast<std::size_t>(v);
        }
    }
    std::size_t got = 0;
    for (std::size_t i = 1; i < dist.data.size(); ++i) {
        if (dist.data[i] > dist.data[got]) got = i;
    }
    CHECK(got == best);
}

TEST_CASE("p_gen analytic values and transcription oracle") {
    ModelParams p = micro_params(50);
    Rng rng(51);
    Tensor ctx = Tensor::zeros({p.d_h});
    Tensor s = Tensor::zeros({p.d_h});
    Tensor x = Tensor::zeros({p.d_e + p.d_h});
    testutil::fill_uniform(ctx, rng);
    testutil::fill_uniform(s, rng);
    testutil::fill_uniform(x, rng);

    ModelParams zero = p;
    for (auto& [name, t] : zero.named()) {
        for (real& v : t->data) v = 0;
    }
    CHECK(::pgnet::p_gen(zero, ctx, x, s) == doctest::Approx(0.5));

    ModelParams big = p;
    big.pgen_b.at(0) = 60;
    CHECK(::pgnet::p_gen(big, ctx, x, s) > 1.0 - 1e-9);

    const real got = ::pgnet::p_gen(p, ctx, x, s);
    real z = p.pgen_b.at(0);
    for (std::int64_t i = 0; i < p.d_h; ++i) z += p.pgen_wh.at(i) * ctx.at(i);
    for (std::int64_t i = 0; i < p.d_h; ++i) z += p.pgen_ws.at(i) * s.at(i);
    for (std::int64_t i = 0; i < p.d_e + p.d_h; ++i) z += p.pgen_wx.at(i) * x.at(i);
    const real want = real(1) / (real(1) + std::exp(-z));
    CHECK(std::abs(got - want) < 1e-12);
}

TEST_CASE("final_dist worked cases") {
    const Tensor pv = Tensor::vec({0.5, 0.25, 0.25});
    const std::int32_t vocab = 3;

    // pure generation
    const std::vector<std::int32_t> ext{0, 3};
    const Tensor attn = Tensor::vec({0.4, 0.6});
    const Tensor gen = final_dist(pv, attn, 1.0, ext, vocab, 1);
    CHECK(gen.data == std::vector<real>{0.5, 0.25, 0.25, 0});

    // pure copy with one-hot attention on the extended slot
    const Tensor onehot = Tensor::vec({0, 1});
    const Tensor copy = final_dist(pv, onehot, 0.0, ext, vocab, 1);
    CHECK(copy.data == std::vector<real>{0, 0, 0, 1});

    // duplicate source word accumulates attention
    const std::vector<std::int32_t> dup{3, 3};
    const Tensor split = Tensor::vec({0.3, 0.2});
    const Tensor acc = final_dist(pv, split, 0.0, dup, vocab, 1);
    CHECK(acc.at(3) == doctest::Approx(0.5));

    const std::vector<std::int32_t> bad{4};
    CHECK_THROWS_AS(final_dist(pv, Tensor::vec({1.0}), 0.5, bad, vocab, 1), IndexError);
}

TEST_CASE("lowering p_gen raises the copy probability without changing total mass") {
    Rng rng(61);
    Tensor pv = Tensor::zeros({6});
    testutil::fill_uniform(pv, rng, 0.0, 1.0);
    real total = 0;
    for (real v : pv.data) total += v;
    for (real& v : pv.data) v /= total;

    const std::vector<std::int32_t> ext{6, 2, 6};  // OOV token appears twice
    Tensor attn = Tensor::vec({0.5, 0.2, 0.3});
    double prev = -1;
    for (const double pg : {0.9, 0.6, 0.3, 0.05}) {
        const Tensor out = final_dist(pv, attn, static_cast<real>(pg), ext, 6, 1);
        real sum = 0;
        for (real v : out.data) sum += v;
        CHECK(std::abs(sum - 1.0) < 1e-9);
        if (prev >= 0) CHECK(out.at(6) > prev);
        prev = out.at(6);
    }
}

TEST_CASE("decoder_step composes its constituent operations") {
    const ModelParams p = micro_params(90, 10, 3, 4);
    Rng rng(91);
    const std::vector<std::int32_t> enc_ids{4, 1, 6};
    const std::vector<std::int32_t> ext_ids{4, 10, 6};
    const std::vector<std::uint8_t> mask{1, 1, 1};
    const EncodeResult enc = encode(p, enc_ids);

    const std::int32_t y_prev = 5;
    const StepResult step =
        decoder_step(p, enc.state0, y_prev, enc.H, ext_ids, mask, 1, true);

    // Compose the same step from the individual value-level operations.
    Tensor emb = Tensor::zeros({p.d_e});
    for (std::int64_t j = 0; j < p.d_e; ++j) emb.at(j) = p.embedding.at(y_prev, j);
    std::vector<real> x_data(emb.data);
    x_data.insert(x_data.end(), enc.state0.prev_context.data.begin(),
                  enc.state0.prev_context.data.end());
    const Tensor x = Tensor::vec(x_data);
    Tensor h, c;
    lstm_step(x, enc.state0.s_h, enc.state0.s_c, p.dec, &h, &c);
    const AttentionResult att = attention(p, h, enc.H, enc.state0.coverage, mask, true);
    const Tensor ctx = context(att.attn, enc.H);
    const Tensor pv = vocab_dist(p, h, ctx);
    const real pg = ::pgnet::p_gen(p, ctx, x, h);
    const Tensor pf = final_dist(pv, att.attn, pg, ext_ids, p.vocab_size, 1);

    REQUIRE(step.p_final.numel() == pf.numel());
    for (std::int64_t i = 0; i < pf.numel(); ++i) {
        CHECK(std::abs(step.p_final.at(i) - pf.at(i)) < 1e-12);
    }
    CHECK(std::abs(step.p_gen - pg) < 1e-12);
    for (std::int64_t i = 0; i < 3; ++i) {
        CHECK(std::abs(step.attn.at(i) - att.attn.at(i)) < 1e-12);
        CHECK(step.next.coverage.at(i) ==
              doctest::Approx(enc.state0.coverage.at(i) + step.attn.at(i)).epsilon(1e-15));
    }
}

TEST_CASE("coverage accumulates the attention history exactly") {
    const ModelParams p = micro_params(70, 9, 3, 4);
    const std::vector<std::int32_t> enc_ids{4, 5, 6, 7};
    const std::vector<std::int32_t> ext_ids = enc_ids;
    const std::vector<std::uint8_t> mask{1, 1, 1, 1};
    const EncodeResult enc = encode(p, enc_ids);

    DecoderState state = enc.state0;
    std::vector<real> want(4, 0);
    for (const std::int32_t y : {Vocabulary::kStart, 4, 6}) {
        const StepResult step = decoder_step(p, state, y, enc.H, ext_ids, mask, 0, true);
        for (std::size_t i = 0; i < 4; ++i) want[i] += step.attn.data[i];
        state = step.next;
        CHECK(state.coverage.data == want);
    }
}

TEST_CASE("a forced copy setup drives the loss to zero") {
    // One-token OOV article: attention is a singleton softmax (exactly 1)
    // and p_gen is pushed to 0, so P_final(gold) ~= 1.
    ModelParams p = micro_params(100, 5, 3, 4);
    p.pgen_b.at(0) = -60;
    EncodedExample ex;
    ex.enc_ids = {Vocabulary::kUnk};
    ex.enc_ext_ids = {5};
    ex.oov_list = {"zzz"};
    ex.dec_input = {Vocabulary::kStart};
    ex.dec_target = {5};
    const Batch batch = make_batch(std::span<const EncodedExample>(&ex, 1));
    const LossValue lv = loss(batch, p, 0.0, false);
    CHECK(lv.loss < 1e-9);
    CHECK(lv.tokens == 1);
}

TEST_CASE("the first-step coverage term is zero") {
    ModelParams p = micro_params(101, 8, 3, 4);
    Rng rng(102);
    Batch batch = micro_batch(p, rng, 1, 3, 1, 0);  // a single decoder step
    const LossValue small = loss(batch, p, 0.0, true);
    const LossValue huge = loss(batch, p, 1e6, true);
    CHECK(small.loss == huge.loss);  // min(a, 0) contributes nothing
    CHECK(small.coverage_mean == 0.0);
}

TEST_CASE("loss gradients match finite differences on a micro model") {
    ModelParams p = micro_params(110, 8, 3, 4);
    Rng rng(111);
    const Batch batch = micro_batch(p, rng, 2, 3, 3, 1);

    const auto forward = [&]() {
        return static_cast<double>(compute_loss(p, batch, 1.0, true, false).loss);
    };
    const auto backward = [&]() { compute_loss(p, batch, 1.0, true, true); };

    std::vector<Tensor*> leaves;
    for (auto& [name, t] : p.named()) leaves.push_back(t);
    const double err = testutil::check_grads(leaves, forward, backward, 1e-5);
    CHECK(err < 1e-3);
}

TEST_CASE("distribution invariants hold on fuzzed micro instances") {
    Rng rng(123);
    for (int trial = 0; trial < 50; ++trial) {
        const ModelParams p = micro_params(1000 + static_cast<std::uint64_t>(trial), 9, 3, 4);
        const std::int64_t t_enc = 1 + static_cast<std::int64_t>(rng.below(5));
        std::vector<std::int32_t> enc_ids, ext_ids;
        std::int32_t oov = 0;
        for (std::int64_t i = 0; i < t_enc; ++i) {
            if (rng.below(4) == 0) {
                enc_ids.push_back(Vocabulary::kUnk);
                ext_ids.push_back(p.vocab_size + oov++);
            } else {
                const std::int32_t id = 4 + static_cast<std::int32_t>(rng.below(5));
                enc_ids.push_back(id);
                ext_ids.push_back(id);
            }
        }
        const std::vector<std::uint8_t> mask(enc_ids.size(), 1);
        const EncodeResult enc = encode(p, enc_ids);
        const StepResult step = decoder_step(p, enc.state0,
                                             static_cast<std::int32_t>(rng.below(9)), enc.H,
                                             ext_ids, mask, oov, true);
        real sum = 0;
        for (real v : step.p_final.data) {
            CHECK(v >= 0);
            CHECK(std::isfinite(v));
            sum += v;
        }
        CHECK(std::abs(sum - 1.0) < 1e-6);
    }
}

TEST_CASE("gradients stay finite on fuzzed micro instances") {
    Rng rng(321);
    for (int trial = 0; trial < 20; ++trial) {
        ModelParams p = micro_params(2000 + static_cast<std::uint64_t>(trial), 8, 3, 4);
        Batch batch = micro_batch(p, rng, 2, 4, 3, 1);
        compute_loss(p, batch, 1.0, true, true);
        for (auto& [name, t] : p.named()) {
            for (real g : t->grad) CHECK(std::isfinite(g));
        }
    }
}

TEST_CASE("forcing p_gen toward one leaves no extended mass") {
    ModelParams p = micro_params(130, 8, 3, 4);
    p.pgen_b.at(0) = 60;
    const std::vector<std::int32_t> enc_ids{Vocabulary::kUnk, 4};
    const std::vector<std::int32_t> ext_ids{8, 4};
    const std::vector<std::uint8_t> mask{1, 1};
    const EncodeResult enc = encode(p, enc_ids);
    const StepResult step = decoder_step(p, enc.state0, Vocabulary::kStart, enc.H, ext_ids,
                                         mask, 1, false);
    CHECK(step.p_final.at(8) < 1e-15);
    CHECK(step.p_gen > 1.0 - 1e-15);
}

TEST_SUITE_END();
