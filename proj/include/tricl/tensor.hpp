#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <span>
#include <unordered_map>
#include <vector>

#include "tricl/check.hpp"

namespace tricl {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (std::size_t d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "x" : "") + std::to_string(s[i]);
    return out + "]";
}

// Dense row-major tensor of f64 values. When an op involving a
// requires_grad tensor runs with grad mode enabled, the op is recorded on
// the thread's active Graph; `node_id` caches the tensor's handle into
// that graph for the current epoch. The cache is engine-managed — user
// code only ever sets requires_grad.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(Shape shape, double fill = 0.0)
        : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {}

    Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
        TRICL_CHECK(shape_numel(shape_) == data_.size(),
                    "Tensor: shape " << shape_str(shape_) << " does not match data length " << data_.size());
    }

    static Tensor scalar(double v) { return Tensor(Shape{}, std::vector<double>{v}); }

    static Tensor vec(std::initializer_list<double> vals) {
        return Tensor(Shape{vals.size()}, std::vector<double>(vals));
    }

    static Tensor mat(std::initializer_list<std::initializer_list<double>> rows) {
        const std::size_t r = rows.size();
        const std::size_t c = r ? rows.begin()->size() : 0;
        std::vector<double> data;
        data.reserve(r * c);
        for (const auto& row : rows) {
            TRICL_CHECK(row.size() == c, "Tensor::mat: ragged rows");
            data.insert(data.end(), row.begin(), row.end());
        }
        return Tensor(Shape{r, c}, std::move(data));
    }

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }
    std::size_t dim(std::size_t i) const {
        TRICL_CHECK(i < shape_.size(), "Tensor::dim: axis " << i << " out of range for " << shape_str(shape_));
        return shape_[i];
    }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    double operator[](std::size_t i) const { return data_[i]; }
    double& operator[](std::size_t i) { return data_[i]; }

    double at(std::size_t r, std::size_t c) const {
        TRICL_CHECK(rank() == 2, "Tensor::at(r,c) on non-matrix " << shape_str(shape_));
        return data_[r * shape_[1] + c];
    }
    double& at(std::size_t r, std::size_t c) {
        TRICL_CHECK(rank() == 2, "Tensor::at(r,c) on non-matrix " << shape_str(shape_));
        return data_[r * shape_[1] + c];
    }

    std::span<const double> row(std::size_t r) const {
        TRICL_CHECK(rank() == 2 && r < shape_[0], "Tensor::row: bad row " << r << " for " << shape_str(shape_));
        return {data_.data() + r * shape_[1], shape_[1]};
    }

    double item() const {
        TRICL_CHECK(size() == 1, "Tensor::item: tensor " << shape_str(shape_) << " is not a scalar");
        return data_[0];
    }

    bool requires_grad() const { return requires_grad_; }
    Tensor& set_requires_grad(bool b = true) {
        requires_grad_ = b;
        return *this;
    }

    mutable int node_id = -1;
    mutable std::uint64_t node_epoch = 0;

private:
    Shape shape_;
    std::vector<double> data_;
    bool requires_grad_ = false;
};

enum class Op : std::uint8_t {
    Leaf,
    Add,
    Sub,
    Mul,
    Div,
    AddScalar,
    MulScalar,
    Neg,
    Exp,
    Log,
    Relu,
    Tanh,
    Pow2,
    Sqrt,
    ClampTinyNeg,
    Matmul,
    Transpose,
    Reshape,
    ReduceSum,
    ReduceMean,
    L2NormRows,
    GatherRows,
    StackRows,
    Select,
    Custom,
};

constexpr int kAxisAll = -1;

class Graph;

// One recorded op: kind, input node ids, and whatever activations its
// backward rule needs (copied at record time, so intermediate Tensors may
// die freely).
struct OpNode {
    Op op = Op::Leaf;
    bool needs_grad = false;
    std::array<int, 2> in{-1, -1};
    std::vector<int> many; // StackRows / Custom inputs
    Shape shape;
    std::vector<double> saved_a;
    std::vector<double> saved_b;
    std::vector<double> grad; // adjoint, lazily allocated
    double scalar = 0.0;
    int axis = kAxisAll;
    std::vector<std::size_t> indices;
    std::function<void(Graph&, const OpNode&)> custom_backward;
};

// Define-by-run tape. Rebuilt every forward pass; insertion order is a
// topological order, so backward is a single reverse sweep. Confined to
// one thread of control.
class Graph {
public:
    static Graph& active() {
        static thread_local Graph g;
        return g;
    }

    void reset() {
        nodes_.clear();
        consumed_ = false;
        ++epoch_;
    }

    std::uint64_t epoch() const { return epoch_; }
    bool consumed() const { return consumed_; }
    void mark_consumed() { consumed_ = true; }

    int push(OpNode n) {
        nodes_.push_back(std::move(n));
        return static_cast<int>(nodes_.size()) - 1;
    }

    OpNode& node(int id) { return nodes_[static_cast<std::size_t>(id)]; }
    const OpNode& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }
    int size() const { return static_cast<int>(nodes_.size()); }

    void accumulate(int id, const double* g, std::size_t n) {
        OpNode& nd = node(id);
        if (!nd.needs_grad) return;
        if (nd.grad.empty()) nd.grad.assign(shape_numel(nd.shape), 0.0);
        for (std::size_t i = 0; i < n; ++i) nd.grad[i] += g[i];
    }

    static bool grad_enabled() { return no_grad_depth() == 0; }

    static int& no_grad_depth() {
        static thread_local int depth = 0;
        return depth;
    }

private:
    std::vector<OpNode> nodes_;
    std::uint64_t epoch_ = 1;
    bool consumed_ = false;
};

struct NoGradGuard {
    NoGradGuard() { ++Graph::no_grad_depth(); }
    ~NoGradGuard() { --Graph::no_grad_depth(); }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;
};

namespace detail {

inline bool has_node(const Tensor& t) { return t.node_id >= 0 && t.node_epoch == Graph::active().epoch(); }

inline bool tracked(const Tensor& t) {
    if (t.requires_grad()) return true;
    return has_node(t) && Graph::active().node(t.node_id).needs_grad;
}

inline int ensure_node(const Tensor& t) {
    Graph& g = Graph::active();
    if (has_node(t)) return t.node_id;
    OpNode leaf;
    leaf.op = Op::Leaf;
    leaf.shape = t.shape();
    leaf.needs_grad = t.requires_grad();
    t.node_id = g.push(std::move(leaf));
    t.node_epoch = g.epoch();
    return t.node_id;
}

inline bool recording(const Tensor& a) { return Graph::grad_enabled() && tracked(a); }
inline bool recording(const Tensor& a, const Tensor& b) {
    return Graph::grad_enabled() && (tracked(a) || tracked(b));
}

inline void check_not_consumed() {
    TRICL_CHECK(!Graph::active().consumed(),
                "graph already consumed by backward(); call Graph::active().reset() before recording new ops");
}

inline void attach(Tensor& out, OpNode node) {
    check_not_consumed();
    Graph& g = Graph::active();
    node.shape = out.shape();
    node.needs_grad = true;
    out.node_id = g.push(std::move(node));
    out.node_epoch = g.epoch();
}

inline void check_finite(const Tensor& t, const char* op) {
    for (double v : t.data())
        TRICL_CHECK_NUM(std::isfinite(v), op << " produced a non-finite value");
}

// Broadcasting is deliberately narrow: equal shapes, or one side a single
// element. Keeps every backward rule auditable.
inline Shape binary_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() == b.shape()) return a.shape();
    if (b.size() == 1) return a.shape();
    if (a.size() == 1) return b.shape();
    throw Error(std::string(op) + ": incompatible shapes " + shape_str(a.shape()) + " vs " + shape_str(b.shape()) +
                " (only equal-shape and scalar broadcasting supported)");
}

template <typename F>
inline Tensor binary_ew(const Tensor& a, const Tensor& b, const char* opname, Op kind, F f, bool save_inputs) {
    Tensor out(binary_shape(a, b, opname));
    const bool abc = a.size() == 1, bbc = b.size() == 1;
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = f(a[abc ? 0 : i], b[bbc ? 0 : i]);
    check_finite(out, opname);
    if (recording(a, b)) {
        OpNode n;
        n.op = kind;
        n.in = {ensure_node(a), ensure_node(b)};
        if (save_inputs) {
            n.saved_a = a.data();
            n.saved_b = b.data();
        }
        attach(out, std::move(n));
    }
    return out;
}

template <typename F>
inline Tensor unary_ew(const Tensor& a, const char* opname, Op kind, F f, bool save_input, bool save_output) {
    Tensor out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i]);
    check_finite(out, opname);
    if (recording(a)) {
        OpNode n;
        n.op = kind;
        n.in = {ensure_node(a), -1};
        if (save_input) n.saved_a = a.data();
        if (save_output) n.saved_a = out.data();
        attach(out, std::move(n));
    }
    return out;
}

// C(m,n) += or = A(m,k) * B(k,n)
inline void mm_nn(const double* A, const double* B, double* C, std::size_t m, std::size_t k, std::size_t n,
                  bool accumulate) {
    if (!accumulate)
        for (std::size_t i = 0; i < m * n; ++i) C[i] = 0.0;
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t l = 0; l < k; ++l) {
            const double av = A[i * k + l];
            if (av == 0.0) continue;
            const double* brow = B + l * n;
            double* crow = C + i * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
}

// C(m,n) += A(m,k) * B(n,k)^T
inline void mm_nt(const double* A, const double* B, double* C, std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            const double* arow = A + i * k;
            const double* brow = B + j * k;
            for (std::size_t l = 0; l < k; ++l) acc += arow[l] * brow[l];
            C[i * n + j] += acc;
        }
}

// C(k,n) += A(m,k)^T * B(m,n)
inline void mm_tn(const double* A, const double* B, double* C, std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t l = 0; l < k; ++l) {
            const double av = A[i * k + l];
            if (av == 0.0) continue;
            const double* brow = B + i * n;
            double* crow = C + l * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
}

} // namespace detail

// ---- elementwise ops --------------------------------------------------

inline Tensor add(const Tensor& a, const Tensor& b) {
    return detail::binary_ew(a, b, "add", Op::Add, [](double x, double y) { return x + y; }, false);
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
    return detail::binary_ew(a, b, "sub", Op::Sub, [](double x, double y) { return x - y; }, false);
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
    return detail::binary_ew(a, b, "mul", Op::Mul, [](double x, double y) { return x * y; }, true);
}

inline Tensor div(const Tensor& a, const Tensor& b) {
    for (double v : b.data()) TRICL_CHECK(v != 0.0, "div: division by zero");
    return detail::binary_ew(a, b, "div", Op::Div, [](double x, double y) { return x / y; }, true);
}

inline Tensor add_scalar(const Tensor& a, double s) {
    Tensor out = detail::unary_ew(a, "add", Op::AddScalar, [s](double x) { return x + s; }, false, false);
    if (detail::has_node(out)) Graph::active().node(out.node_id).scalar = s;
    return out;
}

inline Tensor mul_scalar(const Tensor& a, double s) {
    Tensor out = detail::unary_ew(a, "mul", Op::MulScalar, [s](double x) { return x * s; }, false, false);
    if (detail::has_node(out)) Graph::active().node(out.node_id).scalar = s;
    return out;
}

inline Tensor neg(const Tensor& a) {
    return detail::unary_ew(a, "neg", Op::Neg, [](double x) { return -x; }, false, false);
}

inline Tensor exp(const Tensor& a) {
    return detail::unary_ew(a, "exp", Op::Exp, [](double x) { return std::exp(x); }, false, true);
}

inline Tensor log(const Tensor& a) {
    for (double v : a.data()) TRICL_CHECK(v > 0.0, "log: argument " << v << " outside domain (must be > 0)");
    return detail::unary_ew(a, "log", Op::Log, [](double x) { return std::log(x); }, true, false);
}

inline Tensor relu(const Tensor& a) {
    return detail::unary_ew(a, "relu", Op::Relu, [](double x) { return x > 0.0 ? x : 0.0; }, true, false);
}

inline Tensor tanh(const Tensor& a) {
    return detail::unary_ew(a, "tanh", Op::Tanh, [](double x) { return std::tanh(x); }, false, true);
}

inline Tensor pow2(const Tensor& a) {
    return detail::unary_ew(a, "pow2", Op::Pow2, [](double x) { return x * x; }, true, false);
}

inline Tensor sqrt(const Tensor& a) {
    for (double v : a.data()) TRICL_CHECK(v >= 0.0, "sqrt: argument " << v << " outside domain (must be >= 0)");
    return detail::unary_ew(a, "sqrt", Op::Sqrt, [](double x) { return std::sqrt(x); }, false, true);
}

// Floating-point cancellation on near-degenerate triangles can push an
// algebraically non-negative quantity slightly below zero. Values in
// [-1e-15, 0) are snapped to 0 (zero gradient there); anything lower is a
// bug, not noise.
inline Tensor clamp_tiny_neg(const Tensor& a) {
    for (double v : a.data())
        TRICL_CHECK(v >= -1e-15, "clamp_tiny_neg: value " << v << " below -1e-15 indicates a computation bug");
    return detail::unary_ew(a, "clamp_tiny_neg", Op::ClampTinyNeg, [](double x) { return x < 0.0 ? 0.0 : x; },
                            true, false);
}

// ---- structural ops ----------------------------------------------------

// (m,k)x(k,n)->(m,n); (m,k)x(k)->(m); (k)x(k,n)->(n)
inline Tensor matmul(const Tensor& a, const Tensor& b) {
    std::size_t m, k, n;
    Shape out_shape;
    if (a.rank() == 2 && b.rank() == 2) {
        m = a.dim(0), k = a.dim(1), n = b.dim(1);
        TRICL_CHECK(b.dim(0) == k, "matmul: inner dimensions differ, " << shape_str(a.shape()) << " x "
                                                                       << shape_str(b.shape()));
        out_shape = {m, n};
    } else if (a.rank() == 2 && b.rank() == 1) {
        m = a.dim(0), k = a.dim(1), n = 1;
        TRICL_CHECK(b.dim(0) == k, "matmul: inner dimensions differ, " << shape_str(a.shape()) << " x "
                                                                       << shape_str(b.shape()));
        out_shape = {m};
    } else if (a.rank() == 1 && b.rank() == 2) {
        m = 1, k = a.dim(0), n = b.dim(1);
        TRICL_CHECK(b.dim(0) == k, "matmul: inner dimensions differ, " << shape_str(a.shape()) << " x "
                                                                       << shape_str(b.shape()));
        out_shape = {n};
    } else {
        throw Error("matmul: unsupported ranks " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
    }
    Tensor out(out_shape);
    detail::mm_nn(a.data().data(), b.data().data(), out.data().data(), m, k, n, false);
    detail::check_finite(out, "matmul");
    if (detail::recording(a, b)) {
        OpNode nd;
        nd.op = Op::Matmul;
        nd.in = {detail::ensure_node(a), detail::ensure_node(b)};
        nd.saved_a = a.data();
        nd.saved_b = b.data();
        detail::attach(out, std::move(nd));
    }
    return out;
}

inline Tensor transpose(const Tensor& a) {
    TRICL_CHECK(a.rank() == 2, "transpose: expected matrix, got " << shape_str(a.shape()));
    const std::size_t m = a.dim(0), n = a.dim(1);
    Tensor out(Shape{n, m});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[j * m + i] = a[i * n + j];
    if (detail::recording(a)) {
        OpNode nd;
        nd.op = Op::Transpose;
        nd.in = {detail::ensure_node(a), -1};
        detail::attach(out, std::move(nd));
    }
    return out;
}

inline Tensor reshape(const Tensor& a, Shape new_shape) {
    TRICL_CHECK(shape_numel(new_shape) == a.size(),
                "reshape: cannot view " << shape_str(a.shape()) << " as " << shape_str(new_shape));
    Tensor out(std::move(new_shape), a.data());
    if (detail::recording(a)) {
        OpNode nd;
        nd.op = Op::Reshape;
        nd.in = {detail::ensure_node(a), -1};
        detail::attach(out, std::move(nd));
    }
    return out;
}

enum class Reduce { Sum, Mean };

inline Tensor reduce(Reduce op, const Tensor& a, int axis = kAxisAll) {
    TRICL_CHECK(a.size() > 0, "reduce: empty tensor");
    Tensor out;
    if (axis == kAxisAll) {
        double s = 0.0;
        for (double v : a.data()) s += v;
        out = Tensor::scalar(op == Reduce::Mean ? s / static_cast<double>(a.size()) : s);
    } else {
        TRICL_CHECK(axis >= 0 && static_cast<std::size_t>(axis) < a.rank(),
                    "reduce: axis " << axis << " out of range for " << shape_str(a.shape()));
        const std::size_t len = a.dim(static_cast<std::size_t>(axis));
        TRICL_CHECK(len > 0, "reduce: empty axis " << axis);
        std::size_t outer = 1, inner = 1;
        for (std::size_t i = 0; i < static_cast<std::size_t>(axis); ++i) outer *= a.dim(i);
        for (std::size_t i = static_cast<std::size_t>(axis) + 1; i < a.rank(); ++i) inner *= a.dim(i);
        Shape os = a.shape();
        os.erase(os.begin() + axis);
        out = Tensor(os);
        for (std::size_t o = 0; o < outer; ++o)
            for (std::size_t l = 0; l < len; ++l)
                for (std::size_t i = 0; i < inner; ++i)
                    out[o * inner + i] += a[(o * len + l) * inner + i];
        if (op == Reduce::Mean)
            for (double& v : out.data()) v /= static_cast<double>(len);
    }
    detail::check_finite(out, "reduce");
    if (detail::recording(a)) {
        OpNode nd;
        nd.op = op == Reduce::Sum ? Op::ReduceSum : Op::ReduceMean;
        nd.in = {detail::ensure_node(a), -1};
        nd.axis = axis;
        detail::attach(out, std::move(nd));
    }
    return out;
}

inline Tensor sum(const Tensor& a, int axis = kAxisAll) { return reduce(Reduce::Sum, a, axis); }
inline Tensor mean(const Tensor& a, int axis = kAxisAll) { return reduce(Reduce::Mean, a, axis); }

constexpr double kEpsNorm = 1e-12;

// Normalizes a vector, or each row of a matrix, to unit L2 norm. A norm at
// or below kEpsNorm means the embedding is degenerate; training should halt
// loudly rather than emit exploding gradients.
inline Tensor l2_normalize(const Tensor& a) {
    TRICL_CHECK(a.rank() == 1 || a.rank() == 2, "l2_normalize: expected vector or matrix, got "
                                                    << shape_str(a.shape()));
    const std::size_t rows = a.rank() == 2 ? a.dim(0) : 1;
    const std::size_t d = a.rank() == 2 ? a.dim(1) : a.dim(0);
    Tensor out(a.shape());
    std::vector<double> norms(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        double sq = 0.0;
        for (std::size_t j = 0; j < d; ++j) sq += a[r * d + j] * a[r * d + j];
        const double nrm = std::sqrt(sq);
        TRICL_CHECK_NUM(nrm > kEpsNorm, "l2_normalize: row " << r << " has degenerate norm " << nrm);
        norms[r] = nrm;
        for (std::size_t j = 0; j < d; ++j) out[r * d + j] = a[r * d + j] / nrm;
    }
    if (detail::recording(a)) {
        OpNode nd;
        nd.op = Op::L2NormRows;
        nd.in = {detail::ensure_node(a), -1};
        nd.saved_a = out.data();
        nd.saved_b = std::move(norms);
        detail::attach(out, std::move(nd));
    }
    return out;
}

inline Tensor gather_rows(const Tensor& a, std::vector<std::size_t> rows) {
    TRICL_CHECK(a.rank() == 2, "gather_rows: expected matrix, got " << shape_str(a.shape()));
    const std::size_t d = a.dim(1);
    Tensor out(Shape{rows.size(), d});
    for (std::size_t r = 0; r < rows.size(); ++r) {
        TRICL_CHECK(rows[r] < a.dim(0), "gather_rows: index " << rows[r] << " out of range for "
                                                              << shape_str(a.shape()));
        for (std::size_t j = 0; j < d; ++j) out[r * d + j] = a[rows[r] * d + j];
    }
    if (detail::recording(a)) {
        OpNode nd;
        nd.op = Op::GatherRows;
        nd.in = {detail::ensure_node(a), -1};
        nd.indices = std::move(rows);
        detail::attach(out, std::move(nd));
    }
    return out;
}

inline Tensor stack_rows(const std::vector<Tensor>& rows) {
    TRICL_CHECK(!rows.empty(), "stack_rows: no rows");
    const std::size_t d = rows.front().size();
    Tensor out(Shape{rows.size(), d});
    bool track = false;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        TRICL_CHECK(rows[r].rank() == 1 && rows[r].size() == d, "stack_rows: row " << r << " has shape "
                                                                                   << shape_str(rows[r].shape()));
        for (std::size_t j = 0; j < d; ++j) out[r * d + j] = rows[r][j];
        track = track || detail::tracked(rows[r]);
    }
    if (Graph::grad_enabled() && track) {
        OpNode nd;
        nd.op = Op::StackRows;
        nd.many.reserve(rows.size());
        for (const Tensor& r : rows) nd.many.push_back(detail::ensure_node(r));
        detail::attach(out, std::move(nd));
    }
    return out;
}

inline Tensor select(const Tensor& a, std::size_t flat_index) {
    TRICL_CHECK(flat_index < a.size(), "select: index " << flat_index << " out of range");
    Tensor out = Tensor::scalar(a[flat_index]);
    if (detail::recording(a)) {
        OpNode nd;
        nd.op = Op::Select;
        nd.in = {detail::ensure_node(a), -1};
        nd.indices = {flat_index};
        detail::attach(out, std::move(nd));
    }
    return out;
}

inline Tensor dot(const Tensor& a, const Tensor& b) { return sum(mul(a, b)); }

// ---- operator sugar ---------------------------------------------------

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator-(const Tensor& a) { return neg(a); }
inline Tensor operator+(const Tensor& a, double s) { return add_scalar(a, s); }
inline Tensor operator+(double s, const Tensor& a) { return add_scalar(a, s); }
inline Tensor operator-(const Tensor& a, double s) { return add_scalar(a, -s); }
inline Tensor operator-(double s, const Tensor& a) { return add_scalar(neg(a), s); }
inline Tensor operator*(const Tensor& a, double s) { return mul_scalar(a, s); }
inline Tensor operator*(double s, const Tensor& a) { return mul_scalar(a, s); }
inline Tensor operator/(const Tensor& a, double s) {
    TRICL_CHECK(s != 0.0, "div: division by zero");
    return mul_scalar(a, 1.0 / s);
}

// ---- backward ----------------------------------------------------------

// Result of a backward pass: leaf gradients keyed by node id. Lookups are
// stamped with the graph epoch they came from, so a map held across a
// graph reset answers nullptr rather than aliasing a new tape's ids.
class Gradients {
public:
    void insert(int node, Tensor g) { by_node_.emplace(node, std::move(g)); }
    void stamp_epoch(std::uint64_t e) { epoch_ = e; }

    const Tensor* find(const Tensor& t) const {
        if (t.node_id < 0 || t.node_epoch != epoch_) return nullptr;
        auto it = by_node_.find(t.node_id);
        return it == by_node_.end() ? nullptr : &it->second;
    }

    const Tensor& at(const Tensor& t) const {
        const Tensor* g = find(t);
        TRICL_CHECK(g != nullptr, "Gradients::at: tensor did not receive a gradient");
        return *g;
    }

    bool empty() const { return by_node_.empty(); }
    std::size_t size() const { return by_node_.size(); }
    const std::unordered_map<int, Tensor>& by_node() const { return by_node_; }

private:
    std::unordered_map<int, Tensor> by_node_;
    std::uint64_t epoch_ = 0;
};

namespace detail {

inline void backward_step(Graph& g, int id) {
    OpNode& nd = g.node(id);
    const std::vector<double>& gr = nd.grad;
    const std::size_t n = gr.size();

    // adjoint of a broadcast input: reduce to a single element
    auto acc_binary = [&](int input, auto per_elem) {
        if (input < 0 || !g.node(input).needs_grad) return;
        const std::size_t in_size = shape_numel(g.node(input).shape);
        if (in_size == n) {
            std::vector<double> buf(n);
            for (std::size_t i = 0; i < n; ++i) buf[i] = per_elem(i);
            g.accumulate(input, buf.data(), n);
        } else {
            double s = 0.0;
            for (std::size_t i = 0; i < n; ++i) s += per_elem(i);
            g.accumulate(input, &s, 1);
        }
    };
    auto aval = [&](std::size_t i) { return nd.saved_a.size() == 1 ? nd.saved_a[0] : nd.saved_a[i]; };
    auto bval = [&](std::size_t i) { return nd.saved_b.size() == 1 ? nd.saved_b[0] : nd.saved_b[i]; };

    switch (nd.op) {
    case Op::Leaf:
        break;
    case Op::Add:
        acc_binary(nd.in[0], [&](std::size_t i) { return gr[i]; });
        acc_binary(nd.in[1], [&](std::size_t i) { return gr[i]; });
        break;
    case Op::Sub:
        acc_binary(nd.in[0], [&](std::size_t i) { return gr[i]; });
        acc_binary(nd.in[1], [&](std::size_t i) { return -gr[i]; });
        break;
    case Op::Mul:
        acc_binary(nd.in[0], [&](std::size_t i) { return gr[i] * bval(i); });
        acc_binary(nd.in[1], [&](std::size_t i) { return gr[i] * aval(i); });
        break;
    case Op::Div:
        acc_binary(nd.in[0], [&](std::size_t i) { return gr[i] / bval(i); });
        acc_binary(nd.in[1], [&](std::size_t i) { return -gr[i] * aval(i) / (bval(i) * bval(i)); });
        break;
    case Op::AddScalar:
        g.accumulate(nd.in[0], gr.data(), n);
        break;
    case Op::MulScalar: {
        std::vector<double> buf(n);
        for (std::size_t i = 0; i < n; ++i) buf[i] = gr[i] * nd.scalar;
        g.accumulate(nd.in[0], buf.data(), n);
        break;
    }
    case Op::Neg: {
        std::vector<double> buf(n);
        for (std::size_t i = 0; i < n; ++i) buf[i] = -gr[i];
        g.accumulate(nd.in[0], buf.data(), n);
        break;
    }
    case Op::Exp: {
        std::vector<double> buf(n);
        for (std::size_t i = 0; i < n; ++i) buf[i] = gr[i] * nd.saved_a[i];
        g.accumulate(nd.in[0], buf.data(), n);
        break;
    }
    case Op::Log: {
        std::vector<double> buf(n);
        for (std::size_t i = 0; i < n; ++i) buf[i] = gr[i] / nd.saved_a[i];
        g.accumulate(nd.in[0], buf.data(), n);
        break;
    }
    case Op::Relu: {
        std::vector<double> buf(n);
        for (std::size_t i = 0; i < n; ++i) buf[i] = nd.saved_a[i] > 0.0 ? gr[i] : 0.0;
        g.accumulate(nd.in[0], buf.data(), n);
        break;
    }
    case Op::Tanh: {
        std::vector<double> buf(n);
        for (std::size_t i = 0; i < n; ++i) buf[i] = gr[i] * (1.0 - nd.saved_a[i] * nd.saved_a[i]);
        g.accumulate(nd.in[0], buf.data(), n);
        break;
    }
    case Op::Pow2: {
        std::vector<double> buf(n);
        for (std::size_t i = 0; i < n; ++i) buf[i] = gr[i] * 2.0 * nd.saved_a[i];
        g.accumulate(nd.in[0], buf.data(), n);
        break;
    }
    case Op::Sqrt: {
        std::vector<double> buf(n);
        for (std::size_t i = 0; i < n; ++i)
            buf[i] = gr[i] == 0.0 ? 0.0 : gr[i] / (2.0 * nd.saved_a[i]);
        g.accumulate(nd.in[0], buf.data(), n);
        break;
    }
    case Op::ClampTinyNeg: {
        std::vector<double> buf(n);
        for (std::size_t i = 0; i < n; ++i) buf[i] = nd.saved_a[i] < 0.0 ? 0.0 : gr[i];
        g.accumulate(nd.in[0], buf.data(), n);
        break;
    }
    case Op::Matmul: {
        const Shape& sa = g.node(nd.in[0]).shape;
        const Shape& sb = g.node(nd.in[1]).shape;
        const std::size_t m = sa.size() == 2 ? sa[0] : 1;
        const std::size_t k = sa.size() == 2 ? sa[1] : sa[0];
        const std::size_t nn = sb.size() == 2 ? sb[1] : 1;
        if (g.node(nd.in[0]).needs_grad) {
            std::vector<double> da(m * k, 0.0);
            mm_nt(gr.data(), nd.saved_b.data(), da.data(), m, nn, k); // G(m,n) * B(k,n)^T
            g.accumulate(nd.in[0], da.data(), da.size());
        }
        if (g.node(nd.in[1]).needs_grad) {
            std::vector<double> db(k * nn, 0.0);
            mm_tn(nd.saved_a.data(), gr.data(), db.data(), m, k, nn); // A(m,k)^T * G(m,n)
            g.accumulate(nd.in[1], db.data(), db.size());
        }
        break;
    }
    case Op::Transpose: {
        const Shape& so = nd.shape; // (n,m); input was (m,n)
        const std::size_t tn = so[0], tm = so[1];
        std::vector<double> buf(n);
        for (std::size_t i = 0; i < tn; ++i)
            for (std::size_t j = 0; j < tm; ++j) buf[j * tn + i] = gr[i * tm + j];
        g.accumulate(nd.in[0], buf.data(), n);
        break;
    }
    case Op::Reshape:
        g.accumulate(nd.in[0], gr.data(), n);
        break;
    case Op::ReduceSum:
    case Op::ReduceMean: {
        const Shape& si = g.node(nd.in[0]).shape;
        const std::size_t in_size = shape_numel(si);
        std::vector<double> buf(in_size);
        if (nd.axis == kAxisAll) {
            const double v = nd.op == Op::ReduceMean ? gr[0] / static_cast<double>(in_size) : gr[0];
            std::fill(buf.begin(), buf.end(), v);
        } else {
            const std::size_t ax = static_cast<std::size_t>(nd.axis);
            const std::size_t len = si[ax];
            std::size_t outer = 1, inner = 1;
            for (std::size_t i = 0; i < ax; ++i) outer *= si[i];
            for (std::size_t i = ax + 1; i < si.size(); ++i) inner *= si[i];
            const double scale = nd.op == Op::ReduceMean ? 1.0 / static_cast<double>(len) : 1.0;
            for (std::size_t o = 0; o < outer; ++o)
                for (std::size_t l = 0; l < len; ++l)
                    for (std::size_t i = 0; i < inner; ++i)
                        buf[(o * len + l) * inner + i] = gr[o * inner + i] * scale;
        }
        g.accumulate(nd.in[0], buf.data(), in_size);
        break;
    }
    case Op::L2NormRows: {
        // y = x/|x| per row: dx = (g - (g.y) y) / |x|
        const Shape& si = g.node(nd.in[0]).shape;
        const std::size_t rows = si.size() == 2 ? si[0] : 1;
        const std::size_t d = si.size() == 2 ? si[1] : si[0];
        std::vector<double> buf(n);
        for (std::size_t r = 0; r < rows; ++r) {
            double gy = 0.0;
            for (std::size_t j = 0; j < d; ++j) gy += gr[r * d + j] * nd.saved_a[r * d + j];
            for (std::size_t j = 0; j < d; ++j)
                buf[r * d + j] = (gr[r * d + j] - gy * nd.saved_a[r * d + j]) / nd.saved_b[r];
        }
        g.accumulate(nd.in[0], buf.data(), n);
        break;
    }
    case Op::GatherRows: {
        const Shape& si = g.node(nd.in[0]).shape;
        const std::size_t d = si[1];
        std::vector<double> buf(shape_numel(si), 0.0);
        for (std::size_t r = 0; r < nd.indices.size(); ++r)
            for (std::size_t j = 0; j < d; ++j) buf[nd.indices[r] * d + j] += gr[r * d + j];
        g.accumulate(nd.in[0], buf.data(), buf.size());
        break;
    }
    case Op::StackRows: {
        const std::size_t d = nd.shape[1];
        for (std::size_t r = 0; r < nd.many.size(); ++r) g.accumulate(nd.many[r], gr.data() + r * d, d);
        break;
    }
    case Op::Select: {
        const std::size_t in_size = shape_numel(g.node(nd.in[0]).shape);
        std::vector<double> buf(in_size, 0.0);
        buf[nd.indices[0]] = gr[0];
        g.accumulate(nd.in[0], buf.data(), in_size);
        break;
    }
    case Op::Custom:
        nd.custom_backward(g, nd);
        break;
    }
}

} // namespace detail

// Reverse sweep from a scalar loss. Returns gradients for every
// requires_grad leaf the loss actually depends on; a loss with no recorded
// dependencies yields an empty map. The graph is marked consumed — reset it
// before the next forward pass.
inline Gradients backward(const Tensor& loss) {
    TRICL_CHECK(loss.size() == 1, "backward: loss must be scalar, got " << shape_str(loss.shape()));
    Gradients out;
    out.stamp_epoch(Graph::active().epoch());
    if (!detail::has_node(loss)) return out; // constant: nothing to differentiate
    Graph& g = Graph::active();
    TRICL_CHECK(!g.consumed(), "backward: graph already consumed; reset it first");
    g.mark_consumed();
    g.node(loss.node_id).grad.assign(1, 1.0);
    for (int id = loss.node_id; id >= 0; --id) {
        OpNode& nd = g.node(id);
        if (nd.grad.empty() || !nd.needs_grad) continue;
        detail::backward_step(g, id);
    }
    for (int id = loss.node_id; id >= 0; --id) {
        OpNode& nd = g.node(id);
        if (nd.op == Op::Leaf && nd.needs_grad && !nd.grad.empty())
            out.insert(id, Tensor(nd.shape, nd.grad));
    }
    return out;
}

// Central-difference gradient of a scalar-valued function: the independent
// oracle every backward rule is checked against. Runs f with gradient
// recording disabled.
inline Tensor finite_diff_gradient(const std::function<double(const Tensor&)>& f, const Tensor& x, double h) {
    TRICL_CHECK(h > 0.0, "finite_diff_gradient: h must be positive");
    NoGradGuard ng;
    Tensor probe(x.shape(), x.data());
    Tensor grad(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double orig = probe[i];
        probe[i] = orig + h;
        const double fp = f(probe);
        probe[i] = orig - h;
        const double fm = f(probe);
        probe[i] = orig;
        TRICL_CHECK(std::isfinite(fp) && std::isfinite(fm), "finite_diff_gradient: f returned non-finite value");
        grad[i] = (fp - fm) / (2.0 * h);
    }
    return grad;
}

} // namespace tricl
