#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "pgnet/errors.hpp"

namespace pgnet {

// Scalar type for all tensor math. Tests and oracles assume the 64-bit
// default; define PGNET_REAL_FLOAT32 for the faster 32-bit mode.
#if defined(PGNET_REAL_FLOAT32)
using real = float;
#else
using real = double;
#endif

const char* real_dtype_name();

using Shape = std::vector<std::int64_t>;

std::string shape_str(const Shape& s);

// Dense row-major tensor. Rank 1 and 2 cover everything the model needs.
struct Tensor {
    Shape shape;
    std::vector<real> data;
    std::vector<real> grad;      // empty until a backward pass touches this leaf
    std::int32_t node_id = -1;   // position on the active tape, -1 when detached
    bool learnable = false;

    Tensor() = default;
    explicit Tensor(Shape s);

    static Tensor zeros(Shape s);
    static Tensor full(Shape s, real v);
    static Tensor from(Shape s, std::vector<real> values);
    static Tensor scalar(real v);
    static Tensor vec(std::vector<real> values);

    std::int64_t numel() const;
    int rank() const { return static_cast<int>(shape.size()); }
    std::int64_t rows() const;
    std::int64_t cols() const;

    real& at(std::int64_t i) { return data[static_cast<std::size_t>(i)]; }
    real at(std::int64_t i) const { return data[static_cast<std::size_t>(i)]; }
    real& at(std::int64_t r, std::int64_t c) { return data[static_cast<std::size_t>(r * cols() + c)]; }
    real at(std::int64_t r, std::int64_t c) const { return data[static_cast<std::size_t>(r * cols() + c)]; }

    bool same_shape(const Tensor& other) const { return shape == other.shape; }
    bool all_finite() const;

    // Allocates a zeroed grad buffer if absent.
    void ensure_grad();
    void zero_grad();
};

// Handle to a node on a Tape.
struct Var {
    std::int32_t id = -1;
    bool valid() const { return id >= 0; }
};

// Reverse-mode tape. Append-only: every op records its inputs and a
// backward closure; backward() walks the nodes once in reverse order.
// Single-threaded per tape; distinct tapes are independent.
class Tape {
public:
    Tape();
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // Learnable leaf. `t` must outlive the tape; after backward() its
    // grad buffer holds the accumulated gradient.
    Var leaf(Tensor& t);
    // Non-learnable input, stored by value.
    Var constant(Tensor t);
    // Non-learnable input referenced in place (no copy, no grad write-back).
    // Caller guarantees the tensor outlives the tape.
    Var constant_ref(const Tensor& t);
    Var zeros(Shape s);

    const Tensor& value(Var v) const;
    // Accumulated gradient of any node; valid after backward().
    std::span<const real> grad_of(Var v) const;

    // --- differentiable operations ---
    Var matmul(Var a, Var b);
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);
    Var tanh(Var a);
    Var sigmoid(Var a);
    // Masked positions get probability exactly 0; the rest is a
    // max-subtracted softmax over the unmasked logits.
    Var masked_softmax(Var logits, std::span<const std::uint8_t> mask);
    // Per-position minimum; on ties the gradient routes to `a`.
    Var min(Var a, Var b);
    Var gather_rows(Var table, std::span<const std::int32_t> ids);
    Var scatter_add(Var base, std::span<const std::int32_t> ids, Var values);
    Var concat(std::span<const Var> parts);
    Var stack_rows(std::span<const Var> row_vectors);
    Var slice(Var a, std::int64_t start, std::int64_t len);
    Var reshape(Var a, Shape s);
    Var dot(Var a, Var b);
    Var sum(Var a);
    Var log(Var a);
    Var pick(Var a, std::int64_t index);
    Var scale(Var t, Var scalar);
    Var scale_const(Var t, real k);
    Var neg(Var a);
    // 1 - s for a scalar node.
    Var one_minus(Var s);

    // Propagates from a scalar loss; writes gradients into every
    // learnable leaf's grad buffer. The tape is consumed afterwards.
    void backward(Var loss);

    bool consumed() const { return consumed_; }
    std::size_t size() const { return nodes_.size(); }
    const char* op_kind(Var v) const;

    // NaN/Inf checking after every op. Defaults to on in debug builds.
    bool check_finite;

private:
    struct Node {
        Tensor own;
        const Tensor* external = nullptr;
        Tensor* leaf_out = nullptr;  // learnable leaves only
        std::vector<real> grad;
        std::vector<std::int32_t> parents;
        std::function<void(Tape&)> back;
        const char* op = "";
    };

    const Tensor& val(std::int32_t id) const {
        const Node& n = nodes_[static_cast<std::size_t>(id)];
        return n.external ? *n.external : n.own;
    }
    std::vector<real>& grad_buf(std::int32_t id);
    Var push(Node node);
    bool val_ok(const Node& node) const;
    void require_live(const char* op) const;
    void require_node(Var v, const char* op) const;
    Var binary_elementwise(Var a, Var b, const char* op_name, int kind);

    std::vector<Node> nodes_;
    bool consumed_ = false;
};

}  // namespace pgnet
