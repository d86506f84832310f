#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pgnet/tensor.hpp"
#include "pgnet/text.hpp"

namespace pgnet {

// Fused LSTM cell weights. W is (input + hidden) x 4*hidden with gate
// order i, f, o, g; b is 4*hidden.
struct LstmWeights {
    Tensor W;
    Tensor b;
    std::int64_t hidden() const { return b.numel() / 4; }
};

// All learnable tensors. The encoder is bidirectional with d_h/2 units
// per direction so that h_i = [fwd_i ; bwd_i] has width d_h; the decoder
// state is d_h; the attention inner size equals d_h.
struct ModelParams {
    std::int32_t vocab_size = 0;
    std::int32_t d_e = 128;
    std::int32_t d_h = 512;

    Tensor embedding;  // V x d_e

    LstmWeights enc_fwd;  // input d_e, hidden d_h/2
    LstmWeights enc_bwd;

    Tensor bridge_h_W, bridge_h_b;  // d_h x d_h, d_h
    Tensor bridge_c_W, bridge_c_b;

    LstmWeights dec;  // input d_e + d_h, hidden d_h

    Tensor attn_Wh;  // d_h x d_a
    Tensor attn_Ws;  // d_h x d_a
    Tensor attn_wc;  // 1 x d_a
    Tensor attn_b;   // d_a
    Tensor attn_v;   // d_a

    Tensor out_W1, out_b1;  // 2*d_h x d_h, d_h
    Tensor out_W2, out_b2;  // d_h x V, V

    Tensor pgen_wh;  // d_h
    Tensor pgen_ws;  // d_h
    Tensor pgen_wx;  // d_e + d_h
    Tensor pgen_b;   // scalar

    // Fixed iteration order; also the checkpoint tensor order.
    std::vector<std::pair<std::string, Tensor*>> named();
    std::vector<std::pair<std::string, const Tensor*>> named() const;
    std::int64_t param_count() const;
    void zero_grads();
};

// Closed-form parameter count for the shapes above.
std::int64_t expected_param_count(std::int32_t vocab_size, std::int32_t d_e, std::int32_t d_h);

// Weights uniform in [-0.02, 0.02] from the seeded generator; biases 0
// except LSTM forget gates, which start at 1.
ModelParams init_params(std::int32_t vocab_size, std::int32_t d_e, std::int32_t d_h,
                        std::uint64_t seed);

struct DecoderState {
    Tensor s_h;           // d_h
    Tensor s_c;           // d_h
    Tensor coverage;      // T_enc; running sum of past attention
    Tensor prev_context;  // d_h
};

// ---------------------------------------------------------------------------
// Graph-building API (training path). All functions append to the given
// tape; parameters are bound once per tape via bind_params.

struct ParamVars {
    Var embedding;
    Var enc_fwd_W, enc_fwd_b, enc_bwd_W, enc_bwd_b;
    Var bridge_h_W, bridge_h_b, bridge_c_W, bridge_c_b;
    Var dec_W, dec_b;
    Var attn_Wh, attn_Ws, attn_wc, attn_b, attn_v;
    Var out_W1, out_b1, out_W2, out_b2;
    Var pgen_wh, pgen_ws, pgen_wx, pgen_b;
    std::int32_t vocab_size = 0;
    std::int32_t d_e = 0;
    std::int32_t d_h = 0;
};

ParamVars bind_params(Tape& tape, ModelParams& params);

struct LstmStepVars {
    Var h;
    Var c;
};

LstmStepVars lstm_step_graph(Tape& tape, Var x, Var h_prev, Var c_prev, Var W, Var b);

struct DecoderStateVars {
    Var s_h, s_c, coverage, prev_context;
};

struct EncodeGraph {
    Var H;  // T_enc x d_h
    DecoderStateVars state0;
    std::int64_t t_enc = 0;
};

// Runs both directions over the true (unpadded) token prefix.
EncodeGraph encode_graph(Tape& tape, const ParamVars& pv, std::span<const std::int32_t> enc_ids);

struct AttentionGraph {
    Var attn;      // a_t, masked softmax over encoder positions
    Var energies;  // e_t
};

AttentionGraph attention_graph(Tape& tape, const ParamVars& pv, Var s_t, Var H, Var coverage,
                               std::span<const std::uint8_t> enc_mask, bool coverage_enabled);

Var context_graph(Tape& tape, Var attn, Var H);
Var vocab_dist_graph(Tape& tape, const ParamVars& pv, Var s_t, Var context);
Var p_gen_graph(Tape& tape, const ParamVars& pv, Var context, Var x, Var s_t);
Var final_dist_graph(Tape& tape, Var p_vocab, Var attn, Var p_gen,
                     std::span<const std::int32_t> ext_ids, std::int32_t vocab_size,
                     std::int32_t max_oov);

struct DecoderStepGraph {
    Var p_final;
    Var attn;
    Var p_gen;
    Var x;  // decoder input [embedding ; prev_context]
    DecoderStateVars next;
};

DecoderStepGraph decoder_step_graph(Tape& tape, const ParamVars& pv, const DecoderStateVars& state,
                                    std::int32_t y_prev_id, Var H,
                                    std::span<const std::int32_t> ext_ids,
                                    std::span<const std::uint8_t> enc_mask, std::int32_t max_oov,
                                    bool coverage_enabled);

struct LossGraph {
    Var loss;
    Var nll_mean;
    Var coverage_mean;  // unweighted coverage penalty per token
    std::int64_t tokens = 0;
};

// Teacher-forced batch loss: mean over unmasked decoder steps of
// nll_t + lambda * cov_t. With coverage disabled the w_c energy term and
// the penalty both drop out.
LossGraph loss_graph(Tape& tape, const ParamVars& pv, const Batch& batch, real coverage_weight,
                     bool coverage_enabled);

// ---------------------------------------------------------------------------
// Value-level API (inference and unit tests). Each call runs on a private
// tape and returns plain tensors.

void lstm_step(const Tensor& x, const Tensor& h_prev, const Tensor& c_prev,
               const LstmWeights& w, Tensor* h_out, Tensor* c_out);

struct EncodeResult {
    Tensor H;
    DecoderState state0;
};

EncodeResult encode(const ModelParams& params, std::span<const std::int32_t> enc_ids);

struct AttentionResult {
    Tensor attn;
    Tensor energies;
};

AttentionResult attention(const ModelParams& params, const Tensor& s_t, const Tensor& H,
                          const Tensor& coverage, std::span<const std::uint8_t> enc_mask,
                          bool coverage_enabled = true);

Tensor context(const Tensor& attn, const Tensor& H);
Tensor vocab_dist(const ModelParams& params, const Tensor& s_t, const Tensor& ctx);
real p_gen(const ModelParams& params, const Tensor& ctx, const Tensor& x, const Tensor& s_t);
Tensor final_dist(const Tensor& p_vocab, const Tensor& attn, real p_gen_value,
                  std::span<const std::int32_t> ext_ids, std::int32_t vocab_size,
                  std::int32_t max_oov);

struct StepResult {
    Tensor p_final;
    Tensor attn;
    real p_gen = 0;
    DecoderState next;
};

StepResult decoder_step(const ModelParams& params, const DecoderState& state,
                        std::int32_t y_prev_id, const Tensor& H,
                        std::span<const std::int32_t> ext_ids,
                        std::span<const std::uint8_t> enc_mask, std::int32_t max_oov,
                        bool coverage_enabled = true);

struct LossValue {
    real loss = 0;
    real nll_mean = 0;
    real coverage_mean = 0;
    std::int64_t tokens = 0;
};

// with_grad accumulates gradients into the params' grad buffers.
LossValue compute_loss(ModelParams& params, const Batch& batch, real coverage_weight,
                       bool coverage_enabled, bool with_grad);

inline LossValue loss(const Batch& batch, ModelParams& params, real coverage_weight,
                      bool coverage_enabled) {
    return compute_loss(params, batch, coverage_weight, coverage_enabled, false);
}

}  // namespace pgnet
