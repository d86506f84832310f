#include "pgnet/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <sstream>

namespace pgnet {

namespace {

std::int64_t shape_numel(const Shape& s) {
    std::int64_t n = 1;
    for (std::int64_t d : s) n *= d;
    return n;
}

void validate_shape(const Shape& s) {
    for (std::int64_t d : s) {
        if (d < 0) throw DimensionError("negative dimension in shape " + shape_str(s));
    }
    if (s.empty()) throw DimensionError("rank-0 shapes are not supported");
}

// C(m,n) += A(m,k) * B(k,n)
void gemm_nn(std::int64_t m, std::int64_t n, std::int64_t k,
             const real* a, const real* b, real* c) {
    for (std::int64_t i = 0; i < m; ++i) {
        const real* arow = a + i * k;
        real* crow = c + i * n;
        for (std::int64_t l = 0; l < k; ++l) {
            const real av = arow[l];
            if (av == real(0)) continue;
            const real* brow = b + l * n;
            for (std::int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// C(m,k) += A(m,n) * B(k,n)^T
void gemm_nt(std::int64_t m, std::int64_t k, std::int64_t n,
             const real* a, const real* b, real* c) {
    for (std::int64_t i = 0; i < m; ++i) {
        const real* arow = a + i * n;
        real* crow = c + i * k;
        for (std::int64_t j = 0; j < k; ++j) {
            const real* brow = b + j * n;
            real acc = 0;
            for (std::int64_t l = 0; l < n; ++l) acc += arow[l] * brow[l];
            crow[j] += acc;
        }
    }
}

// C(k,n) += A(m,k)^T * B(m,n)
void gemm_tn(std::int64_t k, std::int64_t n, std::int64_t m,
             const real* a, const real* b, real* c) {
    for (std::int64_t l = 0; l < m; ++l) {
        const real* arow = a + l * k;
        const real* brow = b + l * n;
        for (std::int64_t i = 0; i < k; ++i) {
            const real av = arow[i];
            if (av == real(0)) continue;
            real* crow = c + i * n;
            for (std::int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

real stable_sigmoid(real x) {
    if (x >= 0) {
        return real(1) / (real(1) + std::exp(-x));
    }
    const real e = std::exp(x);
    return e / (real(1) + e);
}

}  // namespace

const char* real_dtype_name() { return sizeof(real) == 8 ? "float64" : "float32"; }

std::string shape_str(const Shape& s) {
    std::ostringstream oss;
    oss << '[';
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) oss << 'x';
        oss << s[i];
    }
    oss << ']';
    return oss.str();
}

Tensor::Tensor(Shape s) : shape(std::move(s)) {
    validate_shape(shape);
    data.assign(static_cast<std::size_t>(shape_numel(shape)), real(0));
}

Tensor Tensor::zeros(Shape s) { return Tensor(std::move(s)); }

Tensor Tensor::full(Shape s, real v) {
    Tensor t(std::move(s));
    std::fill(t.data.begin(), t.data.end(), v);
    return t;
}

Tensor Tensor::from(Shape s, std::vector<real> values) {
    validate_shape(s);
    if (shape_numel(s) != static_cast<std::int64_t>(values.size())) {
        throw DimensionError("value count " + std::to_string(values.size()) +
                             " does not fill shape " + shape_str(s));
    }
    Tensor t;
    t.shape = std::move(s);
    t.data = std::move(values);
    return t;
}

Tensor Tensor::scalar(real v) { return from({1}, {v}); }

Tensor Tensor::vec(std::vector<real> values) {
    const std::int64_t n = static_cast<std::int64_t>(values.size());
    return from({n}, std::move(values));
}

std::int64_t Tensor::numel() const { return static_cast<std::int64_t>(data.size()); }

std::int64_t Tensor::rows() const {
    if (rank() != 2) throw DimensionError("rows() on non-matrix shape " + shape_str(shape));
    return shape[0];
}

std::int64_t Tensor::cols() const {
    if (rank() != 2) throw DimensionError("cols() on non-matrix shape " + shape_str(shape));
    return shape[1];
}

bool Tensor::all_finite() const {
    for (real v : data) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

void Tensor::ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), real(0));
}

void Tensor::zero_grad() { std::fill(grad.begin(), grad.end(), real(0)); }

// ---------------------------------------------------------------------------

Tape::Tape() {
#if defined(NDEBUG)
    check_finite = false;
#else
    check_finite = true;
#endif
}

void Tape::require_live(const char* op) const {
    if (consumed_) throw ContractError(std::string(op) + " on a consumed tape");
}

void Tape::require_node(Var v, const char* op) const {
    if (!v.valid() || static_cast<std::size_t>(v.id) >= nodes_.size()) {
        throw ContractError(std::string(op) + ": invalid node handle");
    }
}

Var Tape::push(Node node) {
    const std::int32_t id = static_cast<std::int32_t>(nodes_.size());
    if (!node.external) node.own.node_id = id;
    if (check_finite && !val_ok(node)) {
        throw NumericalError(std::string("non-finite values produced by op '") + node.op + "'");
    }
    nodes_.push_back(std::move(node));
    return Var{id};
}

bool Tape::val_ok(const Node& node) const {
    const Tensor& t = node.external ? *node.external : node.own;
    return t.all_finite();
}

std::vector<real>& Tape::grad_buf(std::int32_t id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    const std::size_t want = (n.external ? n.external->data.size() : n.own.data.size());
    if (n.grad.size() != want) n.grad.assign(want, real(0));
    return n.grad;
}

Var Tape::leaf(Tensor& t) {
    require_live("leaf");
    Node n;
    n.external = &t;
    n.leaf_out = &t;
    n.op = "leaf";
    t.learnable = true;
    Var v = push(std::move(n));
    t.node_id = v.id;
    return v;
}

Var Tape::constant(Tensor t) {
    require_live("constant");
    Node n;
    n.own = std::move(t);
    n.op = "constant";
    return push(std::move(n));
}

Var Tape::constant_ref(const Tensor& t) {
    require_live("constant_ref");
    Node n;
    n.external = &t;
    n.op = "constant";
    return push(std::move(n));
}

Var Tape::zeros(Shape s) { return constant(Tensor::zeros(std::move(s))); }

const Tensor& Tape::value(Var v) const {
    require_node(v, "value");
    return val(v.id);
}

std::span<const real> Tape::grad_of(Var v) const {
    require_node(v, "grad_of");
    return nodes_[static_cast<std::size_t>(v.id)].grad;
}

const char* Tape::op_kind(Var v) const {
    require_node(v, "op_kind");
    return nodes_[static_cast<std::size_t>(v.id)].op;
}

Var Tape::matmul(Var a, Var b) {
    require_live("matmul");
    require_node(a, "matmul");
    require_node(b, "matmul");
    const Tensor& A = val(a.id);
    const Tensor& B = val(b.id);

    std::int64_t m, k, n;
    Shape out_shape;
    if (A.rank() == 2 && B.rank() == 2) {
        m = A.shape[0]; k = A.shape[1]; n = B.shape[1];
        if (B.shape[0] != k) {
            throw DimensionError("matmul inner dimensions disagree: " + shape_str(A.shape) +
                                 " vs " + shape_str(B.shape));
        }
        out_shape = {m, n};
    } else if (A.rank() == 1 && B.rank() == 2) {
        m = 1; k = A.shape[0]; n = B.shape[1];
        if (B.shape[0] != k) {
            throw DimensionError("matmul inner dimensions disagree: " + shape_str(A.shape) +
                                 " vs " + shape_str(B.shape));
        }
        out_shape = {n};
    } else if (A.rank() == 2 && B.rank() == 1) {
        m = A.shape[0]; k = A.shape[1]; n = 1;
        if (B.shape[0] != k) {
            throw DimensionError("matmul inner dimensions disagree: " + shape_str(A.shape) +
                                 " vs " + shape_str(B.shape));
        }
        out_shape = {m};
    } else {
        throw DimensionError("matmul requires rank 1 or 2 operands, got " +
                             shape_str(A.shape) + " and " + shape_str(B.shape));
    }

    Node node;
    node.own = Tensor::zeros(out_shape);
    gemm_nn(m, n, k, A.data.data(), B.data.data(), node.own.data.data());
    node.op = "matmul";
    node.parents = {a.id, b.id};
    std::int32_t aid = a.id, bid = b.id;
    Var out{static_cast<std::int32_t>(nodes_.size())};
    node.back = [aid, bid, out, m, n, k](Tape& tape) {
        const std::vector<real>& g = tape.grad_buf(out.id);
        const Tensor& A2 = tape.val(aid);
        const Tensor& B2 = tape.val(bid);
        gemm_nt(m, k, n, g.data(), B2.data.data(), tape.grad_buf(aid).data());
        gemm_tn(k, n, m, A2.data.data(), g.data(), tape.grad_buf(bid).data());
    };
    return push(std::move(node));
}

// kind: 0 add, 1 sub, 2 mul
Var Tape::binary_elementwise(Var a, Var b, const char* op_name, int kind) {
    require_live(op_name);
    require_node(a, op_name);
    require_node(b, op_name);
    const Tensor& A = val(a.id);
    const Tensor& B = val(b.id);

    // broadcast = 0: equal shapes; 1: B is a bias vector over A's rows;
    // 2: A is a bias vector over B's rows.
    int broadcast = -1;
    if (A.shape == B.shape) {
        broadcast = 0;
    } else if (A.rank() == 2 && B.rank() == 1 && B.shape[0] == A.shape[1]) {
        broadcast = 1;
    } else if (A.rank() == 1 && B.rank() == 2 && A.shape[0] == B.shape[1]) {
        broadcast = 2;
    } else {
        throw DimensionError(std::string(op_name) + ": incompatible shapes " +
                             shape_str(A.shape) + " and " + shape_str(B.shape));
    }

    const Tensor& big = (broadcast == 2) ? B : A;
    Node node;
    node.own = Tensor::zeros(big.shape);
    const std::int64_t cols = (broadcast == 0) ? big.numel() : big.shape[1];
    const std::int64_t total = big.numel();
    for (std::int64_t i = 0; i < total; ++i) {
        const real av = (broadcast == 2) ? A.data[static_cast<std::size_t>(i % cols)]
                                         : A.data[static_cast<std::size_t>(i)];
        const real bv = (broadcast == 1) ? B.data[static_cast<std::size_t>(i % cols)]
                                         : B.data[static_cast<std::size_t>(i)];
        real r = 0;
        switch (kind) {
            case 0: r = av + bv; break;
            case 1: r = av - bv; break;
            default: r = av * bv; break;
        }
        node.own.data[static_cast<std::size_t>(i)] = r;
    }
    node.op = op_name;
    node.parents = {a.id, b.id};
    std::int32_t aid = a.id, bid = b.id;
    Var out{static_cast<std::int32_t>(nodes_.size())};
    node.back = [aid, bid, out, kind, broadcast, cols, total](Tape& tape) {
        const std::vector<real>& g = tape.grad_buf(out.id);
        std::vector<real>& ga = tape.grad_buf(aid);
        std::vector<real>& gb = tape.grad_buf(bid);
        const Tensor& A2 = tape.val(aid);
        const Tensor& B2 = tape.val(bid);
        for (std::int64_t i = 0; i < total; ++i) {
            const std::size_t ia = (broadcast == 2) ? static_cast<std::size_t>(i % cols)
                                                    : static_cast<std::size_t>(i);
            const std::size_t ib = (broadcast == 1) ? static_cast<std::size_t>(i % cols)
                                                    : static_cast<std::size_t>(i);
            const real gi = g[static_cast<std::size_t>(i)];
            switch (kind) {
                case 0:
                    ga[ia] += gi;
                    gb[ib] += gi;
                    break;
                case 1:
                    ga[ia] += gi;
                    gb[ib] -= gi;
                    break;
                default:
                    ga[ia] += gi * B2.data[ib];
                    gb[ib] += gi * A2.data[ia];
                    break;
            }
        }
    };
    return push(std::move(node));
}

Var Tape::add(Var a, Var b) { return binary_elementwise(a, b, "add", 0); }
Var Tape::sub(Var a, Var b) { return binary_elementwise(a, b, "sub", 1); }
Var Tape::mul(Var a, Var b) { return binary_elementwise(a, b, "mul", 2); }

Var Tape::tanh(Var a) {
    require_live("tanh");
    require_node(a, "tanh");
    const Tensor& A = val(a.id);
    Node node;
    node.own = Tensor::zeros(A.shape);
    for (std::size_t i = 0; i < A.data.size(); ++i) node.own.data[i] = std::tanh(A.data[i]);
    node.op = "tanh";
    node.parents = {a.id};
    std::int32_t aid = a.id;
    Var out{static_cast<std::int32_t>(nodes_.size())};
    node.back = [aid, out](Tape& tape) {
        const std::vector<real>& g = tape.grad_buf(out.id);
        const Tensor& y = tape.val(out.id);
        std::vector<real>& ga = tape.grad_buf(aid);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (real(1) - y.data[i] * y.data[i]);
    };
    return push(std::move(node));
}

Var Tape::sigmoid(Var a) {
    require_live("sigmoid");
    require_node(a, "sigmoid");
    const Tensor& A = val(a.id);
    Node node;
    node.own = Tensor::zeros(A.shape);
    for (std::size_t i = 0; i < A.data.size(); ++i) node.own.data[i] = stable_sigmoid(A.data[i]);
    node.op = "sigmoid";
    node.parents = {a.id};
    std::int32_t aid = a.id;
    Var out{static_cast<std::int32_t>(nodes_.size())};
    node.back = [aid, out](Tape& tape) {
        const std::vector<real>& g = tape.grad_buf(out.id);
        const Tensor& y = tape.val(out.id);
        std::vector<real>& ga = tape.grad_buf(aid);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y.data[i] * (real(1) - y.data[i]);
    };
    return push(std::move(node));
}

Var Tape::masked_softmax(Var logits, std::span<const std::uint8_t> mask) {
    require_live("masked_softmax");
    require_node(logits, "masked_softmax");
    const Tensor& L = val(logits.id);
    if (L.rank() != 1) {
        throw DimensionError("masked_softmax expects a vector, got " + shape_str(L.shape));
    }
    if (static_cast<std::int64_t>(mask.size()) != L.numel()) {
        throw DimensionError("masked_softmax mask length " + std::to_string(mask.size()) +
                             " does not match logits " + shape_str(L.shape));
    }
    real max_val = -std::numeric_limits<real>::infinity();
    bool any = false;
    for (std::size_t i = 0; i < mask.size(); ++i) {
        if (mask[i]) {
            any = true;
            max_val = std::max(max_val, L.data[i]);
        }
    }
    if (!any) throw DegenerateMaskError("masked_softmax: all positions masked");

    Node node;
    node.own = Tensor::zeros(L.shape);
    real denom = 0;
    for (std::size_t i = 0; i < mask.size(); ++i) {
        if (mask[i]) {
            const real e = std::exp(L.data[i] - max_val);
            node.own.data[i] = e;
            denom += e;
        }
    }
    for (std::size_t i = 0; i < mask.size(); ++i) {
        if (mask[i]) node.own.data[i] /= denom;
    }
    node.op = "masked_softmax";
    node.parents = {logits.id};
    std::int32_t lid = logits.id;
    Var out{static_cast<std::int32_t>(nodes_.size())};
    node.back = [lid, out](Tape& tape) {
        const std::vector<real>& g = tape.grad_buf(out.id);
        const Tensor& y = tape.val(out.id);
        std::vector<real>& gl = tape.grad_buf(lid);
        real inner = 0;
        for (std::size_t i = 0; i < g.size(); ++i) inner += g[i] * y.data[i];
        for (std::size_t i = 0; i < g.size(); ++i) gl[i] += y.data[i] * (g[i] - inner);
    };
    return push(std::move(node));
}

Var Tape::min(Var a, Var b) {
    require_live("min");
    require_node(a, "min");
    require_node(b, "min");
    const Tensor& A = val(a.id);
    const Tensor& B = val(b.id);
    if (A.shape != B.shape) {
        throw DimensionError("min: shapes differ: " + shape_str(A.shape) + " vs " +
                             shape_str(B.shape));
    }
    Node node;
    node.own = Tensor::zeros(A.shape);
    for (std::size_t i = 0; i < A.data.size(); ++i) {
        node.own.data[i] = (A.data[i] <= B.data[i]) ? A.data[i] : B.data[i];
    }
    node.op = "min";
    node.parents = {a.id, b.id};
    std::int32_t aid = a.id, bid = b.id;
    Var out{static_cast<std::int32_t>(nodes_.size())};
    node.back = [aid, bid, out](Tape& tape) {
        const std::vector<real>& g = tape.grad_buf(out.id);
        const Tensor& A2 = tape.val(aid);
        const Tensor& B2 = tape.val(bid);
        std::vector<real>& ga = tape.grad_buf(aid);
        std::vector<real>& gb = tape.grad_buf(bid);
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (A2.data[i] <= B2.data[i]) {
                ga[i] += g[i];
            } else {
                gb[i] += g[i];
            }
        }
    };
    return push(std::move(node));
}

Var Tape::gather_rows(Var table, std::span<const std::int32_t> ids) {
    require_live("gather_rows");
    require_node(table, "gather_rows");
    const Tensor& T = val(table.id);
    if (T.rank() != 2) {
        throw DimensionError("gather_rows expects a matrix, got " + shape_str(T.shape));
    }
    const std::int64_t v = T.shape[0];
    const std::int64_t d = T.shape[1];
    for (std::int32_t id : ids) {
        if (id < 0 || id >= v) {
            throw IndexError("gather_rows: id " + std::to_string(id) + " out of range [0," +
                             std::to_string(v) + ")");
        }
    }
    Node node;
    node.own = Tensor::zeros({static_cast<std::int64_t>(ids.size()), d});
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const real* src = T.data.data() + static_cast<std::int64_t>(ids[i]) * d;
        std::copy(src, src + d, node.own.data.data() + static_cast<std::int64_t>(i) * d);
    }
    node.op = "gather_rows";
    node.parents = {table.id};
    std::int32_t tid = table.id;
    std::vector<std::int32_t> ids_copy(ids.begin(), ids.end());
    Var out{static_cast<std::int32_t>(nodes_.size())};
    node.back = [tid, out, ids_copy = std::move(ids_copy), d](Tape& tape) {
        const std::vector<real>& g = tape.grad_buf(out.id);
        std::vector<real>& gt = tape.grad_buf(tid);
        for (std::size_t i = 0; i < ids_copy.size(); ++i) {
            real* dst = gt.data() + static_cast<std::int64_t>(ids_copy[i]) * d;
            const real* src = g.data() + static_cast<std::int64_t>(i) * d;
            for (std::int64_t j = 0; j < d; ++j) dst[j] += src[j];
        }
    };
    return push(std::move(node));
}

Var Tape::scatter_add(Var base, std::span<const std::int32_t> ids, Var values) {
    require_live("scatter_add");
    require_node(base, "scatter_add");
    require_node(values, "scatter_add");
    const Tensor& B = val(base.id);
    const Tensor& V = val(values.id);
    if (B.rank() != 1 || V.rank() != 1) {
        throw DimensionError("scatter_add expects vectors, got " + shape_str(B.shape) + " and " +
                             shape_str(V.shape));
    }
    if (static_cast<std::int64_t>(ids.size()) != V.numel()) {
        throw DimensionError("scatter_add: " + std::to_string(ids.size()) + " ids vs " +
                             std::to_string(V.numel()) + " values");
    }
    const std::int64_t n = B.numel();
    for (std::int32_t id : ids) {
        if (id < 0 || id >= n) {
            throw IndexError("scatter_add: id " + std::to_string(id) + " out of range [0," +
                             std::to_string(n) + ")");
        }
    }
    Node node;
    node.own = B;
    node.own.node_id = -1;
    node.own.grad.clear();
    node.own.learnable = false;
    for (std::size_t j = 0; j < ids.size(); ++j) {
        node.own.data[static_cast<std::size_t>(ids[j])] += V.data[j];
    }
    node.op = "scatter_add";
    node.parents = {base.id, values.id};
    std::int32_t bid = base.id, vid = values.id;
    std::vector<std::int32_t> ids_copy(ids.begin(), ids.end());
    Var out{static_cast<std::int32_t>(nodes_.size())};
    node.back = [bid, vid, out, ids_copy = std::move(ids_copy)](Tape& tape) {
        const std::vector<real>& g = tape.grad_buf(out.id);
        std::vector<real>& gb = tape.grad_buf(bid);
        std::vector<real>& gv = tape.grad_buf(vid);
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
        for (std::size_t j = 0; j < ids_copy.size(); ++j) {
            gv[j] += g[static_cast<std::size_t>(ids_copy[j])];
        }
    };
    return push(std::move(node));
}

Var Tape::concat(std::span<const Var> parts) {
    require_live("concat");
    if (parts.empty()) throw ContractError("concat of zero tensors");
    std::int64_t total = 0;
    for (Var p : parts) {
        require_node(p, "concat");
        const Tensor& t = val(p.id);
        if (t.rank() != 1) {
            throw DimensionError("concat expects vectors, got " + shape_str(t.shape));
        }
        total += t.numel();
    }
    Node node;
    node.own = Tensor::zeros({total});
    std::int64_t off = 0;
    std::vector<std::int32_t> pids;
    std::vector<std::int64_t> sizes;
    for (Var p : parts) {
        const Tensor& t = val(p.id);
        std::copy(t.data.begin(), t.data.end(), node.own.data.begin() + off);
        off += t.numel();
        pids.push_back(p.id);
        sizes.push_back(t.numel());
    }
    node.op = "concat";
    node.parents = pids;
    Var out{static_cast<std::int32_t>(nodes_.size())};
    node.back = [pids, sizes, out](Tape& tape) {
        const std::vector<real>& g = tape.grad_buf(out.id);
        std::int64_t off2 = 0;
        for (std::size_t i = 0; i < pids.size(); ++i) {
            std::vector<real>& gp = tape.grad_buf(pids[i]);
            for (std::int64_t j = 0; j < sizes[i]; ++j) {
                gp[static_cast<std::size_t>(j)] += g[static_cast<std::size_t>(off2 + j)];
            }
            off2 += sizes[i];
        }
    };
    return push(std::move(node));
}

Var Tape::stack_rows(std::span<const Var> row_vectors) {
    require_live("stack_rows");
    if (row_vectors.empty()) throw ContractError("stack_rows of zero rows");
    const std::int64_t n = val(row_vectors[0].id).numel();
    for (Var r : row_vectors) {
        require_node(r, "stack_rows");
        const Tensor& t = val(r.id);
        if (t.rank() != 1 || t.numel() != n) {
            throw DimensionError("stack_rows: row shape " + shape_str(t.shape) +
                                 " does not match width " + std::to_string(n));
        }
    }
    Node node;
    node.own = Tensor::zeros({static_cast<std::int64_t>(row_vectors.size()), n});
    std::vector<std::int32_t> pids;
    for (std::size_t i = 0; i < row_vectors.size(); ++i) {
        const Tensor& t = val(row_vectors[i].id);
        std::copy(t.data.begin(), t.data.end(),
                  node.own.data.begin() + static_cast<std::int64_t>(i) * n);
        pids.push_back(row_vectors[i].id);
    }
    node.op = "stack_rows";
    node.parents = pids;
    Var out{static_cast<std::int32_t>(nodes_.size())};
    node.back = [pids, n, out](Tape& tape) {
        const std::vector<real>& g = tape.grad_buf(out.id);
        for (std::size_t i = 0; i < pids.size(); ++i) {
            std::vector<real>& gp = tape.grad_buf(pids[i]);
            const real* src = g.data() + static_cast<std::int64_t>(i) * n;
            for (std::int64_t j = 0; j < n; ++j) gp[static_cast<std::size_t>(j)] += src[j];
        }
    };
    return push(std::move(node));
}

Var Tape::slice(Var a, std::int64_t start, std::int64_t len) {
    require_live("slice");
    require_node(a, "slice");
    const Tensor& A = val(a.id);
    if (A.rank() != 1) throw DimensionError("slice expects a vector, got " + shape_str(A.shape));
    if (start < 0 || len < 0 || start + len > A.numel()) {
        throw IndexError("slice [" + std::to_string(start) + "," + std::to_string(start + len) +
                         ") out of range for length " + std::to_string(A.numel()));
    }
    Node node;
    node.own = Tensor::zeros({len});
    std::copy(A.data.begin() + start, A.data.begin() + start + len, node.own.data.begin());
    node.op = "slice";
    node.parents = {a.id};
    std::int32_t aid = a.id;
    Var out{static_cast<std::int32_t>(nodes_.size())};
    node.back = [aid, out, start, len](Tape& tape) {
        const std::vector<real>& g = tape.grad_buf(out.id);
        std::vector<real>& ga = tape.grad_buf(aid);
        for (std::int64_t j = 0; j < len; ++j) {
            ga[static_cast<std::size_t>(start + j)] += g[static_cast<std::size_t>(j)];
        }
    };
    return push(std::move(node));
}

Var Tape::reshape(Var a, Shape s) {
    require_live("reshape");
    require_node(a, "reshape");
    const Tensor& A = val(a.id);
    validate_shape(s);
    if (shape_numel(s) != A.numel()) {
        throw DimensionError("reshape " + shape_str(A.shape) + " -> " + shape_str(s) +
                             " changes element count");
    }
    Node node;
    node.own.shape = std::move(s);
    node.own.data = A.data;
    node.op = "reshape";
    node.parents = {a.id};
    std::int32_t aid = a.id;
    Var out{static_cast<std::int32_t>(nodes_.size())};
    node.back = [aid, out](Tape& tape) {
        const std::vector<real>& g = tape.grad_buf(out.id);
        std::vector<real>& ga = tape.grad_buf(aid);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    };
    return push(std::move(node));
}

Var Tape::dot(Var a, Var b) {
    require_live("dot");
    require_node(a, "dot");
    require_node(b, "dot");
    const Tensor& A = val(a.id);
    const Tensor& B = val(b.id);
    if (A.shape != B.shape || A.rank() != 1) {
        throw DimensionError("dot: expected equal-length vectors, got " + shape_str(A.shape) +
                             " and " + shape_str(B.shape));
    }
    real acc = 0;
    for (std::size_t i = 0; i < A.data.size(); ++i) acc += A.data[i] * B.data[i];
    Node node;
    node.own = Tensor::scalar(acc);
    node.op = "dot";
    node.parents = {a.id, b.id};
    std::int32_t aid = a.id, bid = b.id;
    Var out{static_cast<std::int32_t>(nodes_.size())};
    node.back = [aid, bid, out](Tape& tape) {
        const real g = tape.grad_buf(out.id)[0];
        const Tensor& A2 = tape.val(aid);
        const Tensor& B2 = tape.val(bid);
        std::vector<real>& ga = tape.grad_buf(aid);
        std::vector<real>& gb = tape.grad_buf(bid);
        for (std::size_t i = 0; i < ga.size(); ++i) {
            ga[i] += g * B2.data[i];
            gb[i] += g * A2.data[i];
        }
    };
    return push(std::move(node));
}

Var Tape::sum(Var a) {
    require_live("sum");
    require_node(a, "sum");
    const Tensor& A = val(a.id);
    real acc = 0;
    for (real v : A.data) acc += v;
    Node node;
    node.own = Tensor::scalar(acc);
    node.op = "sum";
    node.parents = {a.id};
    std::int32_t aid = a.id;
    Var out{static_cast<std::int32_t>(nodes_.size())};
    node.back = [aid, out](Tape& tape) {
        const real g = tape.grad_buf(out.id)[0];
        std::vector<real>& ga = tape.grad_buf(aid);
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g;
    };
    return push(std::move(node));
}

Var Tape::log(Var a) {
    require_live("log");
    require_node(a, "log");
    const Tensor& A = val(a.id);
    Node node;
    node.own = Tensor::zeros(A.shape);
    for (std::size_t i = 0; i < A.data.size(); ++i) node.own.data[i] = std::log(A.data[i]);
    node.op = "log";
    node.parents = {a.id};
    std::int32_t aid = a.id;
    Var out{static_cast<std::int32_t>(nodes_.size())};
    node.back = [aid, out](Tape& tape) {
        const std::vector<real>& g = tape.grad_buf(out.id);
        const Tensor& A2 = tape.val(aid);
        std::vector<real>& ga = tape.grad_buf(aid);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / A2.data[i];
    };
    return push(std::move(node));
}

Var Tape::pick(Var a, std::int64_t index) {
    require_live("pick");
    require_node(a, "pick");
    const Tensor& A = val(a.id);
    if (index < 0 || index >= A.numel()) {
        throw IndexError("pick: index " + std::to_string(index) + " out of range [0," +
                         std::to_string(A.numel()) + ")");
    }
    Node node;
    node.own = Tensor::scalar(A.data[static_cast<std::size_t>(index)]);
    node.op = "pick";
    node.parents = {a.id};
    std::int32_t aid = a.id;
    Var out{static_cast<std::int32_t>(nodes_.size())};
    node.back = [aid, out, index](Tape& tape) {
        const real g = tape.grad_buf(out.id)[0];
        tape.grad_buf(aid)[static_cast<std::size_t>(index)] += g;
    };
    return push(std::move(node));
}

Var Tape::scale(Var t, Var scalar) {
    require_live("scale");
    require_node(t, "scale");
    require_node(scalar, "scale");
    const Tensor& T = val(t.id);
    const Tensor& S = val(scalar.id);
    if (S.numel() != 1) {
        throw DimensionError("scale expects a scalar multiplier, got " + shape_str(S.shape));
    }
    const real s = S.data[0];
    Node node;
    node.own = Tensor::zeros(T.shape);
    for (std::size_t i = 0; i < T.data.size(); ++i) node.own.data[i] = T.data[i] * s;
    node.op = "scale";
    node.parents = {t.id, scalar.id};
    std::int32_t tid = t.id, sid = scalar.id;
    Var out{static_cast<std::int32_t>(nodes_.size())};
    node.back = [tid, sid, out](Tape& tape) {
        const std::vector<real>& g = tape.grad_buf(out.id);
        const Tensor& T2 = tape.val(tid);
        const real s2 = tape.val(sid).data[0];
        std::vector<real>& gt = tape.grad_buf(tid);
        std::vector<real>& gs = tape.grad_buf(sid);
        real acc = 0;
        for (std::size_t i = 0; i < g.size(); ++i) {
            gt[i] += g[i] * s2;
            acc += g[i] * T2.data[i];
        }
        gs[0] += acc;
    };
    return push(std::move(node));
}

Var Tape::scale_const(Var t, real k) {
    require_live("scale_const");
    require_node(t, "scale_const");
    const Tensor& T = val(t.id);
    Node node;
    node.own = Tensor::zeros(T.shape);
    for (std::size_t i = 0; i < T.data.size(); ++i) node.own.data[i] = T.data[i] * k;
    node.op = "scale_const";
    node.parents = {t.id};
    std::int32_t tid = t.id;
    Var out{static_cast<std::int32_t>(nodes_.size())};
    node.back = [tid, out, k](Tape& tape) {
        const std::vector<real>& g = tape.grad_buf(out.id);
        std::vector<real>& gt = tape.grad_buf(tid);
        for (std::size_t i = 0; i < g.size(); ++i) gt[i] += g[i] * k;
    };
    return push(std::move(node));
}

Var Tape::neg(Var a) { return scale_const(a, real(-1)); }

Var Tape::one_minus(Var s) {
    require_live("one_minus");
    require_node(s, "one_minus");
    const Tensor& S = val(s.id);
    if (S.numel() != 1) {
        throw DimensionError("one_minus expects a scalar, got " + shape_str(S.shape));
    }
    Node node;
    node.own = Tensor::scalar(real(1) - S.data[0]);
    node.op = "one_minus";
    node.parents = {s.id};
    std::int32_t sid = s.id;
    Var out{static_cast<std::int32_t>(nodes_.size())};
    node.back = [sid, out](Tape& tape) {
        tape.grad_buf(sid)[0] -= tape.grad_buf(out.id)[0];
    };
    return push(std::move(node));
}

void Tape::backward(Var loss) {
    require_live("backward");
    require_node(loss, "backward");
    if (val(loss.id).numel() != 1) {
        throw ContractError("backward requires a scalar loss, got shape " +
                            shape_str(val(loss.id).shape));
    }
    consumed_ = true;
    grad_buf(loss.id)[0] = real(1);
    for (std::int32_t i = loss.id; i >= 0; --i) {
        Node& n = nodes_[static_cast<std::size_t>(i)];
        if (n.grad.empty()) continue;  // not on the path to the loss
        if (n.back) n.back(*this);
        if (n.leaf_out) {
            n.leaf_out->ensure_grad();
            for (std::size_t j = 0; j < n.grad.size(); ++j) n.leaf_out->grad[j] += n.grad[j];
        }
    }
    if (check_finite) {
        for (const Node& n : nodes_) {
            for (real g : n.grad) {
                if (!std::isfinite(g)) {
                    throw NumericalError(std::string("non-finite gradient at op '") + n.op + "'");
                }
            }
        }
    }
}

}  // namespace pgnet
