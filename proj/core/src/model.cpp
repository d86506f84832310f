#include "pgnet/model.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "pgnet/rng.hpp"

namespace pgnet {

std::vector<std::pair<std::string, Tensor*>> ModelParams::named() {
    return {
        {"embedding", &embedding},
        {"enc_fwd.W", &enc_fwd.W},   {"enc_fwd.b", &enc_fwd.b},
        {"enc_bwd.W", &enc_bwd.W},   {"enc_bwd.b", &enc_bwd.b},
        {"bridge_h.W", &bridge_h_W}, {"bridge_h.b", &bridge_h_b},
        {"bridge_c.W", &bridge_c_W}, {"bridge_c.b", &bridge_c_b},
        {"dec.W", &dec.W},           {"dec.b", &dec.b},
        {"attn.W_h", &attn_Wh},      {"attn.W_s", &attn_Ws},
        {"attn.w_c", &attn_wc},      {"attn.b", &attn_b},
        {"attn.v", &attn_v},
        {"out.W1", &out_W1},         {"out.b1", &out_b1},
        {"out.W2", &out_W2},         {"out.b2", &out_b2},
        {"pgen.w_hstar", &pgen_wh},  {"pgen.w_s", &pgen_ws},
        {"pgen.w_x", &pgen_wx},      {"pgen.b", &pgen_b},
    };
}

std::vector<std::pair<std::string, const Tensor*>> ModelParams::named() const {
    auto mutable_view = const_cast<ModelParams*>(this)->named();
    std::vector<std::pair<std::string, const Tensor*>> out;
    out.reserve(mutable_view.size());
    for (auto& [name, t] : mutable_view) out.emplace_back(name, t);
    return out;
}

std::int64_t ModelParams::param_count() const {
    std::int64_t n = 0;
    for (const auto& [name, t] : named()) n += t->numel();
    return n;
}

void ModelParams::zero_grads() {
    for (auto& [name, t] : named()) {
        t->ensure_grad();
        t->zero_grad();
    }
}

std::int64_t expected_param_count(std::int32_t vocab_size, std::int32_t d_e, std::int32_t d_h) {
    const std::int64_t V = vocab_size, de = d_e, dh = d_h, da = d_h, dh2 = d_h / 2;
    std::int64_t n = 0;
    n += V * de;                              // embedding
    n += 2 * ((de + dh2) * 4 * dh2 + 4 * dh2);  // encoder LSTMs
    n += 2 * (dh * dh + dh);                  // state bridges
    n += (de + 2 * dh) * 4 * dh + 4 * dh;     // decoder LSTM
    n += dh * da + dh * da + da + da + da;    // attention W_h, W_s, w_c, b, v
    n += 2 * dh * dh + dh + dh * V + V;       // output layers
    n += dh + dh + (de + dh) + 1;             // generation probability
    return n;
}

ModelParams init_params(std::int32_t vocab_size, std::int32_t d_e, std::int32_t d_h,
                        std::uint64_t seed) {
    if (vocab_size < 5) throw ContractError("vocab_size must be at least 5");
    if (d_e < 1) throw ContractError("embedding size must be positive");
    if (d_h < 2 || d_h % 2 != 0) {
        throw ContractError("hidden size must be even (bidirectional encoder halves)");
    }
    const std::int64_t V = vocab_size, de = d_e, dh = d_h, da = d_h, dh2 = d_h / 2;

    ModelParams p;
    p.vocab_size = vocab_size;
    p.d_e = d_e;
    p.d_h = d_h;
    p.embedding = Tensor::zeros({V, de});
    p.enc_fwd = {Tensor::zeros({de + dh2, 4 * dh2}), Tensor::zeros({4 * dh2})};
    p.enc_bwd = {Tensor::zeros({de + dh2, 4 * dh2}), Tensor::zeros({4 * dh2})};
    p.bridge_h_W = Tensor::zeros({dh, dh});
    p.bridge_h_b = Tensor::zeros({dh});
    p.bridge_c_W = Tensor::zeros({dh, dh});
    p.bridge_c_b = Tensor::zeros({dh});
    p.dec = {Tensor::zeros({de + 2 * dh, 4 * dh}), Tensor::zeros({4 * dh})};
    p.attn_Wh = Tensor::zeros({dh, da});
    p.attn_Ws = Tensor::zeros({dh, da});
    p.attn_wc = Tensor::zeros({1, da});
    p.attn_b = Tensor::zeros({da});
    p.attn_v = Tensor::zeros({da});
    p.out_W1 = Tensor::zeros({2 * dh, dh});
    p.out_b1 = Tensor::zeros({dh});
    p.out_W2 = Tensor::zeros({dh, V});
    p.out_b2 = Tensor::zeros({V});
    p.pgen_wh = Tensor::zeros({dh});
    p.pgen_ws = Tensor::zeros({dh});
    p.pgen_wx = Tensor::zeros({de + dh});
    p.pgen_b = Tensor::zeros({1});

    const auto is_bias = [](const std::string& name) {
        return name.ends_with(".b") || name.ends_with(".b1") || name.ends_with(".b2");
    };
    Rng rng(seed);
    for (auto& [name, t] : p.named()) {
        if (is_bias(name)) continue;  // biases stay zero
        for (real& v : t->data) v = static_cast<real>(rng.uniform(-0.02, 0.02));
    }
    // Forget-gate bias 1.0 keeps early memory cells open.
    for (LstmWeights* w : {&p.enc_fwd, &p.enc_bwd, &p.dec}) {
        const std::int64_t h = w->hidden();
        for (std::int64_t i = h; i < 2 * h; ++i) w->b.at(i) = real(1);
    }
    return p;
}

// ---------------------------------------------------------------------------

namespace {

ParamVars bind_with(Tape& tape, const ModelParams& params, bool learnable) {
    ParamVars pv;
    pv.vocab_size = params.vocab_size;
    pv.d_e = params.d_e;
    pv.d_h = params.d_h;
    auto put = [&](const Tensor& t) {
        return learnable ? tape.leaf(const_cast<Tensor&>(t)) : tape.constant_ref(t);
    };
    pv.embedding = put(params.embedding);
    pv.enc_fwd_W = put(params.enc_fwd.W);
    pv.enc_fwd_b = put(params.enc_fwd.b);
    pv.enc_bwd_W = put(params.enc_bwd.W);
    pv.enc_bwd_b = put(params.enc_bwd.b);
    pv.bridge_h_W = put(params.bridge_h_W);
    pv.bridge_h_b = put(params.bridge_h_b);
    pv.bridge_c_W = put(params.bridge_c_W);
    pv.bridge_c_b = put(params.bridge_c_b);
    pv.dec_W = put(params.dec.W);
    pv.dec_b = put(params.dec.b);
    pv.attn_Wh = put(params.attn_Wh);
    pv.attn_Ws = put(params.attn_Ws);
    pv.attn_wc = put(params.attn_wc);
    pv.attn_b = put(params.attn_b);
    pv.attn_v = put(params.attn_v);
    pv.out_W1 = put(params.out_W1);
    pv.out_b1 = put(params.out_b1);
    pv.out_W2 = put(params.out_W2);
    pv.out_b2 = put(params.out_b2);
    pv.pgen_wh = put(params.pgen_wh);
    pv.pgen_ws = put(params.pgen_ws);
    pv.pgen_wx = put(params.pgen_wx);
    pv.pgen_b = put(params.pgen_b);
    return pv;
}

Var embed_token(Tape& tape, const ParamVars& pv, std::int32_t id) {
    const std::array<std::int32_t, 1> ids = {id};
    return tape.reshape(tape.gather_rows(pv.embedding, ids), {pv.d_e});
}

}  // namespace

ParamVars bind_params(Tape& tape, ModelParams& params) { return bind_with(tape, params, true); }

LstmStepVars lstm_step_graph(Tape& tape, Var x, Var h_prev, Var c_prev, Var W, Var b) {
    const std::int64_t h_size = tape.value(b).numel() / 4;
    const std::array<Var, 2> xh_parts = {x, h_prev};
    Var z = tape.add(tape.matmul(tape.concat(xh_parts), W), b);
    Var i = tape.sigmoid(tape.slice(z, 0, h_size));
    Var f = tape.sigmoid(tape.slice(z, h_size, h_size));
    Var o = tape.sigmoid(tape.slice(z, 2 * h_size, h_size));
    Var g = tape.tanh(tape.slice(z, 3 * h_size, h_size));
    Var c = tape.add(tape.mul(f, c_prev), tape.mul(i, g));
    Var h = tape.mul(o, tape.tanh(c));
    return {h, c};
}

EncodeGraph encode_graph(Tape& tape, const ParamVars& pv, std::span<const std::int32_t> enc_ids) {
    if (enc_ids.empty()) throw EmptyInputError("encode of an empty token sequence");
    const std::int64_t t_enc = static_cast<std::int64_t>(enc_ids.size());
    const std::int64_t dh2 = pv.d_h / 2;

    std::vector<Var> embedded(enc_ids.size());
    for (std::size_t t = 0; t < enc_ids.size(); ++t) embedded[t] = embed_token(tape, pv, enc_ids[t]);

    std::vector<Var> fwd_h(enc_ids.size());
    Var h = tape.zeros({dh2});
    Var c = tape.zeros({dh2});
    for (std::size_t t = 0; t < enc_ids.size(); ++t) {
        const LstmStepVars s = lstm_step_graph(tape, embedded[t], h, c, pv.enc_fwd_W, pv.enc_fwd_b);
        h = s.h;
        c = s.c;
        fwd_h[t] = h;
    }
    const Var fwd_last_h = h;
    const Var fwd_last_c = c;

    std::vector<Var> bwd_h(enc_ids.size());
    h = tape.zeros({dh2});
    c = tape.zeros({dh2});
    for (std::size_t k = enc_ids.size(); k-- > 0;) {
        const LstmStepVars s = lstm_step_graph(tape, embedded[k], h, c, pv.enc_bwd_W, pv.enc_bwd_b);
        h = s.h;
        c = s.c;
        bwd_h[k] = h;
    }
    const Var bwd_first_h = h;
    const Var bwd_first_c = c;

    std::vector<Var> rows(enc_ids.size());
    for (std::size_t t = 0; t < enc_ids.size(); ++t) {
        const std::array<Var, 2> parts = {fwd_h[t], bwd_h[t]};
        rows[t] = tape.concat(parts);
    }

    EncodeGraph out;
    out.H = tape.stack_rows(rows);
    out.t_enc = t_enc;
    const std::array<Var, 2> hcat = {fwd_last_h, bwd_first_h};
    const std::array<Var, 2> ccat = {fwd_last_c, bwd_first_c};
    out.state0.s_h = tape.add(tape.matmul(tape.concat(hcat), pv.bridge_h_W), pv.bridge_h_b);
    out.state0.s_c = tape.add(tape.matmul(tape.concat(ccat), pv.bridge_c_W), pv.bridge_c_b);
    out.state0.coverage = tape.zeros({t_enc});
    out.state0.prev_context = tape.zeros({pv.d_h});
    return out;
}

AttentionGraph attention_graph(Tape& tape, const ParamVars& pv, Var s_t, Var H, Var coverage,
                               std::span<const std::uint8_t> enc_mask, bool coverage_enabled) {
    const std::int64_t t_enc = tape.value(H).rows();
    if (tape.value(coverage).numel() != t_enc) {
        throw DimensionError("coverage length " + std::to_string(tape.value(coverage).numel()) +
                             " does not match " + std::to_string(t_enc) + " encoder positions");
    }
    Var features = tape.add(tape.matmul(H, pv.attn_Wh), tape.matmul(s_t, pv.attn_Ws));
    if (coverage_enabled) {
        const Var cov_features = tape.matmul(tape.reshape(coverage, {t_enc, 1}), pv.attn_wc);
        features = tape.add(features, cov_features);
    }
    features = tape.add(features, pv.attn_b);
    const Var energies = tape.matmul(tape.tanh(features), pv.attn_v);
    const Var attn = tape.masked_softmax(energies, enc_mask);
    return {attn, energies};
}

Var context_graph(Tape& tape, Var attn, Var H) { return tape.matmul(attn, H); }

Var vocab_dist_graph(Tape& tape, const ParamVars& pv, Var s_t, Var context) {
    const std::array<Var, 2> parts = {s_t, context};
    const Var hidden = tape.add(tape.matmul(tape.concat(parts), pv.out_W1), pv.out_b1);
    const Var logits = tape.add(tape.matmul(hidden, pv.out_W2), pv.out_b2);
    const std::vector<std::uint8_t> all(static_cast<std::size_t>(pv.vocab_size), 1);
    return tape.masked_softmax(logits, all);
}

Var p_gen_graph(Tape& tape, const ParamVars& pv, Var context, Var x, Var s_t) {
    Var z = tape.add(tape.dot(pv.pgen_wh, context), tape.dot(pv.pgen_ws, s_t));
    z = tape.add(z, tape.dot(pv.pgen_wx, x));
    z = tape.add(z, pv.pgen_b);
    return tape.sigmoid(z);
}

Var final_dist_graph(Tape& tape, Var p_vocab, Var attn, Var p_gen,
                     std::span<const std::int32_t> ext_ids, std::int32_t vocab_size,
                     std::int32_t max_oov) {
    if (tape.value(attn).numel() != static_cast<std::int64_t>(ext_ids.size())) {
        throw DimensionError("attention length " + std::to_string(tape.value(attn).numel()) +
                             " does not match " + std::to_string(ext_ids.size()) +
                             " extended source ids");
    }
    const std::int64_t ext_total = static_cast<std::int64_t>(vocab_size) + max_oov;
    Var generated = tape.scale(p_vocab, p_gen);
    if (max_oov > 0) {
        const std::array<Var, 2> parts = {generated, tape.zeros({max_oov})};
        generated = tape.concat(parts);
    }
    const Var copied = tape.scatter_add(tape.zeros({ext_total}), ext_ids,
                                        tape.scale(attn, tape.one_minus(p_gen)));
    return tape.add(generated, copied);
}

DecoderStepGraph decoder_step_graph(Tape& tape, const ParamVars& pv, const DecoderStateVars& state,
                                    std::int32_t y_prev_id, Var H,
                                    std::span<const std::int32_t> ext_ids,
                                    std::span<const std::uint8_t> enc_mask, std::int32_t max_oov,
                                    bool coverage_enabled) {
    if (y_prev_id < 0 || y_prev_id >= pv.vocab_size) {
        throw ContractError("decoder input id " + std::to_string(y_prev_id) +
                            " must be a plain vocabulary id below " +
                            std::to_string(pv.vocab_size));
    }
    const Var emb = embed_token(tape, pv, y_prev_id);
    const std::array<Var, 2> x_parts = {emb, state.prev_context};
    const Var x = tape.concat(x_parts);
    const LstmStepVars s = lstm_step_graph(tape, x, state.s_h, state.s_c, pv.dec_W, pv.dec_b);
    const AttentionGraph att = attention_graph(tape, pv, s.h, H, state.coverage, enc_mask,
                                               coverage_enabled);
    const Var ctx = context_graph(tape, att.attn, H);
    const Var pvocab = vocab_dist_graph(tape, pv, s.h, ctx);
    const Var pg = p_gen_graph(tape, pv, ctx, x, s.h);
    const Var pf = final_dist_graph(tape, pvocab, att.attn, pg, ext_ids, pv.vocab_size, max_oov);

    DecoderStepGraph out;
    out.p_final = pf;
    out.attn = att.attn;
    out.p_gen = pg;
    out.x = x;
    out.next.s_h = s.h;
    out.next.s_c = s.c;
    out.next.coverage = tape.add(state.coverage, att.attn);
    out.next.prev_context = ctx;
    return out;
}

LossGraph loss_graph(Tape& tape, const ParamVars& pv, const Batch& batch, real coverage_weight,
                     bool coverage_enabled) {
    Var nll_total;
    Var cov_total;
    std::int64_t tokens = 0;

    for (std::int32_t b = 0; b < batch.batch_size; ++b) {
        const std::int64_t t_enc = batch.enc_true_len(b);
        const std::int64_t t_dec = batch.dec_true_len(b);
        const auto enc_ids = batch.enc_ids_row(b).subspan(0, static_cast<std::size_t>(t_enc));
        const auto ext_ids = batch.enc_ext_ids_row(b).subspan(0, static_cast<std::size_t>(t_enc));
        const auto mask = batch.enc_mask_row(b).subspan(0, static_cast<std::size_t>(t_enc));
        const auto dec_in = batch.dec_input_row(b);
        const auto dec_tgt = batch.dec_target_row(b);

        const EncodeGraph enc = encode_graph(tape, pv, enc_ids);
        DecoderStateVars state = enc.state0;
        for (std::int64_t t = 0; t < t_dec; ++t) {
            const DecoderStepGraph step =
                decoder_step_graph(tape, pv, state, dec_in[static_cast<std::size_t>(t)], enc.H,
                                   ext_ids, mask, batch.max_oov, coverage_enabled);
            const Var nll = tape.neg(
                tape.log(tape.pick(step.p_final, dec_tgt[static_cast<std::size_t>(t)])));
            nll_total = nll_total.valid() ? tape.add(nll_total, nll) : nll;
            if (coverage_enabled) {
                const Var cov = tape.sum(tape.min(step.attn, state.coverage));
                cov_total = cov_total.valid() ? tape.add(cov_total, cov) : cov;
            }
            state = step.next;
            ++tokens;
        }
    }
    if (tokens == 0) throw ContractError("loss over a batch with no unmasked decoder steps");

    LossGraph out;
    out.tokens = tokens;
    const real inv = real(1) / static_cast<real>(tokens);
    out.nll_mean = tape.scale_const(nll_total, inv);
    out.coverage_mean = coverage_enabled ? tape.scale_const(cov_total, inv)
                                         : tape.constant(Tensor::scalar(0));
    out.loss = coverage_enabled
                   ? tape.add(out.nll_mean, tape.scale_const(out.coverage_mean, coverage_weight))
                   : out.nll_mean;
    return out;
}

// ---------------------------------------------------------------------------

namespace {

ParamVars bind_params_const(Tape& tape, const ModelParams& params) {
    return bind_with(tape, params, false);
}

}  // namespace

void lstm_step(const Tensor& x, const Tensor& h_prev, const Tensor& c_prev, const LstmWeights& w,
               Tensor* h_out, Tensor* c_out) {
    Tape tape;
    const Var xv = tape.constant_ref(x);
    const Var hv = tape.constant_ref(h_prev);
    const Var cv = tape.constant_ref(c_prev);
    const Var Wv = tape.constant_ref(w.W);
    const Var bv = tape.constant_ref(w.b);
    const LstmStepVars s = lstm_step_graph(tape, xv, hv, cv, Wv, bv);
    *h_out = tape.value(s.h);
    *c_out = tape.value(s.c);
}

EncodeResult encode(const ModelParams& params, std::span<const std::int32_t> enc_ids) {
    Tape tape;
    const ParamVars pv = bind_params_const(tape, params);
    const EncodeGraph g = encode_graph(tape, pv, enc_ids);
    EncodeResult out;
    out.H = tape.value(g.H);
    out.state0.s_h = tape.value(g.state0.s_h);
    out.state0.s_c = tape.value(g.state0.s_c);
    out.state0.coverage = tape.value(g.state0.coverage);
    out.state0.prev_context = tape.value(g.state0.prev_context);
    return out;
}

AttentionResult attention(const ModelParams& params, const Tensor& s_t, const Tensor& H,
                          const Tensor& coverage, std::span<const std::uint8_t> enc_mask,
                          bool coverage_enabled) {
    Tape tape;
    const ParamVars pv = bind_params_const(tape, params);
    const AttentionGraph g = attention_graph(tape, pv, tape.constant_ref(s_t),
                                             tape.constant_ref(H), tape.constant_ref(coverage),
                                             enc_mask, coverage_enabled);
    return {tape.value(g.attn), tape.value(g.energies)};
}

Tensor context(const Tensor& attn, const Tensor& H) {
    Tape tape;
    return tape.value(context_graph(tape, tape.constant_ref(attn), tape.constant_ref(H)));
}

Tensor vocab_dist(const ModelParams& params, const Tensor& s_t, const Tensor& ctx) {
    Tape tape;
    const ParamVars pv = bind_params_const(tape, params);
    return tape.value(vocab_dist_graph(tape, pv, tape.constant_ref(s_t), tape.constant_ref(ctx)));
}

real p_gen(const ModelParams& params, const Tensor& ctx, const Tensor& x, const Tensor& s_t) {
    Tape tape;
    const ParamVars pv = bind_params_const(tape, params);
    const Var g = p_gen_graph(tape, pv, tape.constant_ref(ctx), tape.constant_ref(x),
                              tape.constant_ref(s_t));
    return tape.value(g).at(0);
}

Tensor final_dist(const Tensor& p_vocab, const Tensor& attn, real p_gen_value,
                  std::span<const std::int32_t> ext_ids, std::int32_t vocab_size,
                  std::int32_t max_oov) {
    Tape tape;
    const Var g = final_dist_graph(tape, tape.constant_ref(p_vocab), tape.constant_ref(attn),
                                   tape.constant(Tensor::scalar(p_gen_value)), ext_ids, vocab_size,
                                   max_oov);
    return tape.value(g);
}

StepResult decoder_step(const ModelParams& params, const DecoderState& state,
                        std::int32_t y_prev_id, const Tensor& H,
                        std::span<const std::int32_t> ext_ids,
                        std::span<const std::uint8_t> enc_mask, std::int32_t max_oov,
                        bool coverage_enabled) {
    Tape tape;
    const ParamVars pv = bind_params_const(tape, params);
    DecoderStateVars sv;
    sv.s_h = tape.constant_ref(state.s_h);
    sv.s_c = tape.constant_ref(state.s_c);
    sv.coverage = tape.constant_ref(state.coverage);
    sv.prev_context = tape.constant_ref(state.prev_context);
    const DecoderStepGraph g = decoder_step_graph(tape, pv, sv, y_prev_id, tape.constant_ref(H),
                                                  ext_ids, enc_mask, max_oov, coverage_enabled);
    StepResult out;
    out.p_final = tape.value(g.p_final);
    out.attn = tape.value(g.attn);
    out.p_gen = tape.value(g.p_gen).at(0);
    out.next.s_h = tape.value(g.next.s_h);
    out.next.s_c = tape.value(g.next.s_c);
    out.next.coverage = tape.value(g.next.coverage);
    out.next.prev_context = tape.value(g.next.prev_context);
    return out;
}

LossValue compute_loss(ModelParams& params, const Batch& batch, real coverage_weight,
                       bool coverage_enabled, bool with_grad) {
    Tape tape;
    const ParamVars pv = with_grad ? bind_params(tape, params) : bind_with(tape, params, false);
    const LossGraph g = loss_graph(tape, pv, batch, coverage_weight, coverage_enabled);
    LossValue out;
    out.loss = tape.value(g.loss).at(0);
    out.nll_mean = tape.value(g.nll_mean).at(0);
    out.coverage_mean = tape.value(g.coverage_mean).at(0);
    out.tokens = g.tokens;
    if (with_grad) tape.backward(g.loss);
    return out;
}

}  // namespace pgnet
