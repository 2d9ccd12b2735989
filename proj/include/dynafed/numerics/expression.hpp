#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "dynafed/errors.hpp"
#include "dynafed/numerics/tensor.hpp"

namespace dynafed {

enum class Op {
    Input,
    Constant,
    MatMul,
    Transpose,
    Add,
    Sub,
    Mul,
    Div,
    Scale,
    Relu,
    Step,  // Heaviside indicator x > 0; carries the relu derivative, has zero gradient itself
    Exp,
    Sqrt,
    LogSoftmax,
    Sum,
    SumRows,
    SumCols,
    BroadcastRows,
    BroadcastCols,
    BroadcastScalar,
};

inline const char* op_name(Op op) {
    switch (op) {
        case Op::Input: return "input";
        case Op::Constant: return "constant";
        case Op::MatMul: return "matmul";
        case Op::Transpose: return "transpose";
        case Op::Add: return "add";
        case Op::Sub: return "subtract";
        case Op::Mul: return "elementwise-mul";
        case Op::Div: return "divide";
        case Op::Scale: return "scale";
        case Op::Relu: return "relu";
        case Op::Step: return "step";
        case Op::Exp: return "exp";
        case Op::Sqrt: return "sqrt";
        case Op::LogSoftmax: return "log-softmax";
        case Op::Sum: return "sum";
        case Op::SumRows: return "sum-rows";
        case Op::SumCols: return "sum-cols";
        case Op::BroadcastRows: return "broadcast-rows";
        case Op::BroadcastCols: return "broadcast-cols";
        case Op::BroadcastScalar: return "broadcast-scalar";
    }
    return "?";
}

namespace detail {

inline std::atomic<std::uint64_t>& node_counter() {
    static std::atomic<std::uint64_t> counter{0};
    return counter;
}

inline int& current_step() {
    thread_local int step = -1;
    return step;
}

}  // namespace detail

/// Tags every node built on this thread while alive with an unroll step
/// index, so evaluation errors can report where a divergence started.
class StepScope {
public:
    explicit StepScope(int step) : previous_(detail::current_step()) { detail::current_step() = step; }
    ~StepScope() { detail::current_step() = previous_; }
    StepScope(const StepScope&) = delete;
    StepScope& operator=(const StepScope&) = delete;

private:
    int previous_;
};

/// Immutable graph node. Shared between expressions, safe to read from many threads.
struct Node {
    Op op;
    Shape shape;
    std::vector<std::shared_ptr<const Node>> children;
    std::string name;                      // Input
    std::shared_ptr<const Tensor> value;   // Constant
    double factor = 0.0;                   // Scale
    std::uint64_t id = detail::node_counter().fetch_add(1, std::memory_order_relaxed);
    int step = detail::current_step();

    Node(Op op_, Shape shape_) : op(op_), shape(shape_) {}

    Node(const Node&) = delete;
    Node& operator=(const Node&) = delete;

    // Unrolled graphs are thousands of nodes deep; release children with an
    // explicit stack instead of recursive shared_ptr destruction.
    ~Node() {
        std::vector<std::shared_ptr<const Node>> pending = std::move(children);
        while (!pending.empty()) {
            std::shared_ptr<const Node> n = std::move(pending.back());
            pending.pop_back();
            if (n.use_count() == 1) {
                auto& grandchildren = const_cast<Node&>(*n).children;
                for (auto& c : grandchildren) pending.push_back(std::move(c));
                grandchildren.clear();
            }
        }
    }

    std::string describe() const {
        std::string s = std::string(op_name(op)) + " node #" + std::to_string(id) + " " + shape.str();
        if (!name.empty()) s += " '" + name + "'";
        if (step >= 0) s += " (unroll step " + std::to_string(step) + ")";
        return s;
    }
};

using NodePtr = std::shared_ptr<const Node>;

/// Handle to a node in a differentiable computation graph.
class Expr {
public:
    Expr() = default;
    explicit Expr(NodePtr node) : node_(std::move(node)) {}

    const Node& node() const { return *node_; }
    const NodePtr& ptr() const { return node_; }
    const Shape& shape() const { return node_->shape; }
    Op op() const { return node_->op; }
    bool valid() const { return static_cast<bool>(node_); }

    friend bool operator==(const Expr& a, const Expr& b) { return a.node_ == b.node_; }

private:
    NodePtr node_;
};

namespace expr {

namespace detail {

inline Expr make(Op op, Shape shape, std::vector<NodePtr> children) {
    auto n = std::make_shared<Node>(op, shape);
    n->children = std::move(children);
    return Expr(std::move(n));
}

inline void require_same(Op op, const Expr& a, const Expr& b) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string("cannot build ") + op_name(op) + " node: operand shapes " + a.shape().str() +
                         " and " + b.shape().str() + " differ");
    }
}

inline Expr binary(Op op, const Expr& a, const Expr& b) {
    require_same(op, a, b);
    return make(op, a.shape(), {a.ptr(), b.ptr()});
}

inline Expr unary(Op op, const Expr& a) { return make(op, a.shape(), {a.ptr()}); }

}  // namespace detail

inline Expr input(std::string name, Shape shape) {
    auto n = std::make_shared<Node>(Op::Input, shape);
    n->name = std::move(name);
    return Expr(std::move(n));
}

inline Expr constant(Tensor value) {
    auto n = std::make_shared<Node>(Op::Constant, value.shape());
    n->value = std::make_shared<const Tensor>(std::move(value));
    return Expr(std::move(n));
}

inline Expr zeros(Shape shape) { return constant(Tensor(shape)); }

inline Expr matmul(const Expr& a, const Expr& b) {
    if (a.shape().cols != b.shape().rows) {
        throw ShapeError("cannot build matmul node: " + a.shape().str() + " x " + b.shape().str());
    }
    return detail::make(Op::MatMul, Shape{a.shape().rows, b.shape().cols}, {a.ptr(), b.ptr()});
}

inline Expr transpose(const Expr& a) {
    return detail::make(Op::Transpose, Shape{a.shape().cols, a.shape().rows}, {a.ptr()});
}

inline Expr add(const Expr& a, const Expr& b) { return detail::binary(Op::Add, a, b); }
inline Expr sub(const Expr& a, const Expr& b) { return detail::binary(Op::Sub, a, b); }
inline Expr mul(const Expr& a, const Expr& b) { return detail::binary(Op::Mul, a, b); }
inline Expr div(const Expr& a, const Expr& b) { return detail::binary(Op::Div, a, b); }

inline Expr scale(const Expr& a, double k) {
    auto n = std::make_shared<Node>(Op::Scale, a.shape());
    n->children = {a.ptr()};
    n->factor = k;
    return Expr(std::move(n));
}

inline Expr relu(const Expr& a) { return detail::unary(Op::Relu, a); }
inline Expr step(const Expr& a) { return detail::unary(Op::Step, a); }
inline Expr exp(const Expr& a) { return detail::unary(Op::Exp, a); }
inline Expr sqrt(const Expr& a) { return detail::unary(Op::Sqrt, a); }
inline Expr log_softmax(const Expr& a) { return detail::unary(Op::LogSoftmax, a); }
inline Expr softmax(const Expr& a) { return exp(log_softmax(a)); }

inline Expr sum(const Expr& a) { return detail::make(Op::Sum, Shape{1, 1}, {a.ptr()}); }
inline Expr sum_rows(const Expr& a) { return detail::make(Op::SumRows, Shape{1, a.shape().cols}, {a.ptr()}); }
inline Expr sum_cols(const Expr& a) { return detail::make(Op::SumCols, Shape{a.shape().rows, 1}, {a.ptr()}); }

inline Expr broadcast_rows(const Expr& a, std::size_t rows) {
    if (a.shape().rows != 1) throw ShapeError("cannot build broadcast-rows node from " + a.shape().str());
    return detail::make(Op::BroadcastRows, Shape{rows, a.shape().cols}, {a.ptr()});
}

inline Expr broadcast_cols(const Expr& a, std::size_t cols) {
    if (a.shape().cols != 1) throw ShapeError("cannot build broadcast-cols node from " + a.shape().str());
    return detail::make(Op::BroadcastCols, Shape{a.shape().rows, cols}, {a.ptr()});
}

inline Expr broadcast_scalar(const Expr& a, Shape shape) {
    if (!a.shape().is_scalar()) throw ShapeError("cannot build broadcast-scalar node from " + a.shape().str());
    return detail::make(Op::BroadcastScalar, shape, {a.ptr()});
}

/// a (r x c) + b (1 x c) broadcast over rows.
inline Expr add_row(const Expr& a, const Expr& b) { return add(a, broadcast_rows(b, a.shape().rows)); }

inline Expr square_sum(const Expr& a) { return sum(mul(a, a)); }

}  // namespace expr

inline Expr operator+(const Expr& a, const Expr& b) { return expr::add(a, b); }
inline Expr operator-(const Expr& a, const Expr& b) { return expr::sub(a, b); }
inline Expr operator*(const Expr& a, const Expr& b) { return expr::mul(a, b); }
inline Expr operator*(double k, const Expr& a) { return expr::scale(a, k); }
inline Expr operator-(const Expr& a) { return expr::scale(a, -1.0); }

using Bindings = std::unordered_map<std::string, Tensor>;

/// A set of output expressions flattened into a fixed evaluation schedule.
///
/// Compiling once and running many times avoids re-walking large unrolled
/// graphs. Nodes are evaluated in one fixed post-order, and intermediate
/// values are released as soon as their last consumer has run.
class Program {
public:
    explicit Program(std::span<const Expr> outputs) {
        std::unordered_map<const Node*, std::size_t> index;
        struct Frame {
            const Node* node;
            std::size_t next_child;
        };
        std::vector<Frame> stack;
        for (const Expr& out : outputs) {
            if (!out.valid()) throw ValidationError("cannot compile an empty expression");
            if (index.contains(out.ptr().get())) continue;
            stack.push_back({out.ptr().get(), 0});
            while (!stack.empty()) {
                Frame& f = stack.back();
                if (f.next_child < f.node->children.size()) {
                    const Node* c = f.node->children[f.next_child++].get();
                    // In a DAG an unfinished node is always an ancestor, so only finished nodes repeat.
                    if (!index.contains(c)) stack.push_back({c, 0});
                    continue;
                }
                const Node* done = f.node;
                stack.pop_back();
                index.emplace(done, order_.size());
                order_.push_back(done);
            }
        }
        child_slots_.resize(order_.size());
        uses_.assign(order_.size(), 0);
        for (std::size_t i = 0; i < order_.size(); ++i) {
            for (const auto& c : order_[i]->children) {
                const std::size_t ci = index.at(c.get());
                child_slots_[i].push_back(ci);
                ++uses_[ci];
            }
            if (order_[i]->op == Op::Input) inputs_.push_back(i);
        }
        for (const Expr& out : outputs) output_slots_.push_back(index.at(out.ptr().get()));
        // Outputs must survive until the end.
        for (std::size_t s : output_slots_) uses_[s] += 1;
        for (const Expr& out : outputs) holds_.push_back(out.ptr());
    }

    std::size_t size() const noexcept { return order_.size(); }

    /// Names and shapes of every input node reachable from the outputs.
    std::vector<std::pair<std::string, Shape>> inputs() const {
        std::vector<std::pair<std::string, Shape>> result;
        for (std::size_t i : inputs_) result.emplace_back(order_[i]->name, order_[i]->shape);
        return result;
    }

    std::vector<Tensor> run(const Bindings& bindings) const {
        // Inputs and constants are viewed in place; everything else is owned until its last use.
        std::vector<std::optional<Tensor>> owned(order_.size());
        std::vector<const Tensor*> values(order_.size(), nullptr);
        std::vector<std::size_t> remaining = uses_;
        for (std::size_t i = 0; i < order_.size(); ++i) {
            const Node& n = *order_[i];
            if (n.op == Op::Input) {
                values[i] = &lookup(n, bindings);
            } else if (n.op == Op::Constant) {
                values[i] = n.value.get();
            } else {
                owned[i] = compute(n, i, values);
                values[i] = &*owned[i];
            }
            if (!values[i]->all_finite()) {
                throw NumericOverflowError("non-finite value produced by " + n.describe(), n.step);
            }
            for (std::size_t c : child_slots_[i]) {
                if (--remaining[c] == 0) {
                    owned[c].reset();
                    values[c] = nullptr;
                }
            }
        }
        std::vector<Tensor> out;
        out.reserve(output_slots_.size());
        for (std::size_t s : output_slots_) out.push_back(*values[s]);
        return out;
    }

private:
    static const Tensor& lookup(const Node& n, const Bindings& bindings) {
        auto it = bindings.find(n.name);
        if (it == bindings.end()) throw ValidationError("no binding for " + n.describe());
        if (it->second.shape() != n.shape) {
            throw ShapeError("binding for " + n.describe() + " has shape " + it->second.shape().str());
        }
        return it->second;
    }

    Tensor compute(const Node& n, std::size_t i, const std::vector<const Tensor*>& values) const {
        auto arg = [&](std::size_t k) -> const Tensor& { return *values[child_slots_[i][k]]; };
        switch (n.op) {
            case Op::Input:
            case Op::Constant: break;
            case Op::MatMul: return kernels::matmul(arg(0), arg(1));
            case Op::Transpose: return kernels::transpose(arg(0));
            case Op::Add: return kernels::add(arg(0), arg(1));
            case Op::Sub: return kernels::sub(arg(0), arg(1));
            case Op::Mul: return kernels::mul(arg(0), arg(1));
            case Op::Div: return kernels::div(arg(0), arg(1));
            case Op::Scale: return kernels::scale(arg(0), n.factor);
            case Op::Relu: return kernels::relu(arg(0));
            case Op::Step: return kernels::step(arg(0));
            case Op::Exp: return kernels::exp(arg(0));
            case Op::Sqrt: return kernels::sqrt(arg(0));
            case Op::LogSoftmax: return kernels::log_softmax(arg(0));
            case Op::Sum: return kernels::sum(arg(0));
            case Op::SumRows: return kernels::sum_rows(arg(0));
            case Op::SumCols: return kernels::sum_cols(arg(0));
            case Op::BroadcastRows: return kernels::broadcast_rows(arg(0), n.shape.rows);
            case Op::BroadcastCols: return kernels::broadcast_cols(arg(0), n.shape.cols);
            case Op::BroadcastScalar: return kernels::broadcast_scalar(arg(0), n.shape);
        }
        throw ValidationError("unknown op");
    }

    std::vector<const Node*> order_;
    std::vector<std::vector<std::size_t>> child_slots_;
    std::vector<std::size_t> uses_;
    std::vector<std::size_t> inputs_;
    std::vector<std::size_t> output_slots_;
    std::vector<NodePtr> holds_;
};

/// Evaluates several expressions that share one memo.
inline std::vector<Tensor> evaluate(std::span<const Expr> outputs, const Bindings& bindings) {
    return Program(outputs).run(bindings);
}

inline Tensor evaluate(const Expr& e, const Bindings& bindings = {}) {
    return Program(std::span<const Expr>(&e, 1)).run(bindings).front();
}

/// Reverse-mode gradient of the scalar `f` with respect to each node in `wrt`.
///
/// The result is itself an ordinary expression, so `grad` can be applied to
/// it again. Each `wrt` node is treated as a free variable: propagation stops
/// there. A node that `f` does not depend on gets a zero constant of its shape.
inline std::vector<Expr> grad(const Expr& f, std::span<const Expr> wrt) {
    if (!f.shape().is_scalar()) throw ShapeError("grad requires a scalar expression, got " + f.shape().str());

    std::unordered_map<const Node*, std::size_t> target;
    for (std::size_t i = 0; i < wrt.size(); ++i) target.emplace(wrt[i].ptr().get(), i);

    // Post-order over the graph, not descending below wrt targets.
    std::unordered_map<const Node*, std::size_t> index;
    std::vector<const Node*> order;
    {
        struct Frame {
            const Node* node;
            std::size_t next_child;
        };
        std::vector<Frame> stack{{f.ptr().get(), 0}};
        std::unordered_map<const Node*, bool> pushed{{f.ptr().get(), true}};
        while (!stack.empty()) {
            Frame& fr = stack.back();
            const bool leaf = target.contains(fr.node);
            if (!leaf && fr.next_child < fr.node->children.size()) {
                const Node* c = fr.node->children[fr.next_child++].get();
                if (!pushed.contains(c)) {
                    pushed.emplace(c, true);
                    stack.push_back({c, 0});
                }
                continue;
            }
            index.emplace(fr.node, order.size());
            order.push_back(fr.node);
            stack.pop_back();
        }
    }

    // Which nodes lie on a path to some target.
    std::vector<char> reaches(order.size(), 0);
    for (std::size_t i = 0; i < order.size(); ++i) {
        const Node* n = order[i];
        if (target.contains(n)) {
            reaches[i] = 1;
            continue;
        }
        for (const auto& c : n->children)
            if (reaches[index.at(c.get())]) reaches[i] = 1;
    }

    // Children are not owned by `order`; keep a NodePtr per slot so we can wrap them as Expr.
    std::vector<NodePtr> owner(order.size());
    owner[index.at(f.ptr().get())] = f.ptr();
    for (const Node* n : order)
        for (const auto& c : n->children)
            if (index.contains(c.get())) owner[index.at(c.get())] = c;

    std::vector<std::optional<Expr>> adj(order.size());
    adj[index.at(f.ptr().get())] = expr::constant(Tensor::scalar(1.0));

    auto accumulate = [&](const NodePtr& child, Expr contribution) {
        const std::size_t ci = index.at(child.get());
        if (!reaches[ci]) return;
        adj[ci] = adj[ci] ? expr::add(*adj[ci], contribution) : std::move(contribution);
    };

    using namespace expr;
    for (std::size_t k = order.size(); k-- > 0;) {
        const Node* n = order[k];
        if (!adj[k] || !reaches[k] || target.contains(n)) continue;
        const Expr g = *adj[k];
        const Expr self(owner[k]);
        const auto& ch = n->children;
        auto child = [&](std::size_t j) { return Expr(ch[j]); };
        switch (n->op) {
            case Op::Input:
            case Op::Constant:
            case Op::Step: break;
            case Op::MatMul:
                if (reaches[index.at(ch[0].get())]) accumulate(ch[0], matmul(g, transpose(child(1))));
                if (reaches[index.at(ch[1].get())]) accumulate(ch[1], matmul(transpose(child(0)), g));
                break;
            case Op::Transpose: accumulate(ch[0], transpose(g)); break;
            case Op::Add:
                accumulate(ch[0], g);
                accumulate(ch[1], g);
                break;
            case Op::Sub:
                accumulate(ch[0], g);
                if (reaches[index.at(ch[1].get())]) accumulate(ch[1], scale(g, -1.0));
                break;
            case Op::Mul:
                if (reaches[index.at(ch[0].get())]) accumulate(ch[0], mul(g, child(1)));
                if (reaches[index.at(ch[1].get())]) accumulate(ch[1], mul(g, child(0)));
                break;
            case Op::Div:
                if (reaches[index.at(ch[0].get())]) accumulate(ch[0], div(g, child(1)));
                if (reaches[index.at(ch[1].get())])
                    accumulate(ch[1], scale(div(mul(g, self), child(1)), -1.0));
                break;
            case Op::Scale: accumulate(ch[0], scale(g, n->factor)); break;
            case Op::Relu: accumulate(ch[0], mul(g, step(child(0)))); break;
            case Op::Exp: accumulate(ch[0], mul(g, self)); break;
            case Op::Sqrt: accumulate(ch[0], div(g, scale(self, 2.0))); break;
            case Op::LogSoftmax: {
                // d/dx: g - softmax(x) * rowsum(g)
                const Expr rowsum = broadcast_cols(sum_cols(g), n->shape.cols);
                accumulate(ch[0], sub(g, mul(exp(self), rowsum)));
                break;
            }
            case Op::Sum: accumulate(ch[0], broadcast_scalar(g, ch[0]->shape)); break;
            case Op::SumRows: accumulate(ch[0], broadcast_rows(g, ch[0]->shape.rows)); break;
            case Op::SumCols: accumulate(ch[0], broadcast_cols(g, ch[0]->shape.cols)); break;
            case Op::BroadcastRows: accumulate(ch[0], sum_rows(g)); break;
            case Op::BroadcastCols: accumulate(ch[0], sum_cols(g)); break;
            case Op::BroadcastScalar: accumulate(ch[0], sum(g)); break;
        }
    }

    std::vector<Expr> result;
    result.reserve(wrt.size());
    for (const Expr& w : wrt) {
        auto it = index.find(w.ptr().get());
        if (it != index.end() && adj[it->second]) {
            result.push_back(*adj[it->second]);
        } else {
            result.push_back(expr::zeros(w.shape()));
        }
    }
    return result;
}

inline Expr grad(const Expr& f, const Expr& wrt) { return grad(f, std::span<const Expr>(&wrt, 1)).front(); }

}  // namespace dynafed
