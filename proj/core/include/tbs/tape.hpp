#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <unordered_map>
#include <vector>

#include "tbs/tensor.hpp"

namespace tbs {

// Handle to a value recorded on a Tape.
struct Var {
    static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();
    std::size_t id = npos;
    std::uint64_t tape = 0;

    bool valid() const noexcept { return id != npos; }
};

// Reverse-mode tape. Every op appends one node holding its output value and a
// backward closure; backward() walks nodes in reverse insertion order and
// accumulates gradients additively into each node's inputs.
//
// A tape belongs to one logical execution and is not thread-safe.
template <typename T>
class Tape {
public:
    // Receives the tape and the id of the node being differentiated. The
    // node's upstream gradient is available through grad_at(self).
    using Backward = std::function<void(Tape&, std::size_t self)>;

    Tape();
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var constant(Tensor<T> value);

    // Binds a learnable tensor. Binding the same object twice returns the same
    // Var, so a parameter reused along several paths has a single gradient.
    Var param(const Tensor<T>& p);

    // Records an op output. The closure is kept only if some input needs a
    // gradient and gradients are enabled.
    Var push(Tensor<T> value, std::initializer_list<Var> inputs, Backward backward);
    Var push(Tensor<T> value, const std::vector<Var>& inputs, Backward backward);

    const Tensor<T>& value(Var v) const;
    bool requires_grad(Var v) const;

    // Gradient of v after backward(); zero tensor if nothing reached it.
    Tensor<T> grad(Var v) const;
    // Gradient with respect to a bound parameter object; zeros if unbound.
    Tensor<T> grad_of(const Tensor<T>& p) const;
    bool is_bound(const Tensor<T>& p) const { return bound_.count(&p) != 0; }
    std::size_t bound_count() const noexcept { return bound_.size(); }

    // For backward closures.
    const Tensor<T>& grad_at(std::size_t id) const { return nodes_[id].grad; }
    const Tensor<T>& value_at(std::size_t id) const { return nodes_[id].value; }
    bool needs_grad(Var v) const { return nodes_[v.id].requires_grad; }
    // Zero-initialised on first use; callers add into it.
    Tensor<T>& grad_buffer(Var v);

    void backward(Var loss);

    void set_grad_enabled(bool on) noexcept { grad_enabled_ = on; }
    bool grad_enabled() const noexcept { return grad_enabled_; }

    // Ops with non-smooth points (relu, clamps, norm floors) fold the branch
    // they took into this signature. Finite-difference checks compare it
    // across perturbed evaluations to discard probes that straddle a kink.
    void note_branch(bool taken) noexcept {
        branch_sig_ = (branch_sig_ ^ (taken ? 0x9e3779b97f4a7c15ULL : 0x632be59bd9b4e019ULL)) * 0x100000001b3ULL;
    }
    std::uint64_t branch_signature() const noexcept { return branch_sig_; }

    std::size_t size() const noexcept { return nodes_.size(); }
    // Node ids whose closures ran during the last backward(), in call order.
    const std::vector<std::size_t>& last_backward_order() const noexcept { return backward_order_; }

private:
    struct Node {
        Tensor<T> value;
        Tensor<T> grad;
        Backward backward;
        bool requires_grad = false;
    };

    void check(Var v) const;

    std::deque<Node> nodes_;  // deque: value references survive push()
    std::unordered_map<const Tensor<T>*, std::size_t> bound_;
    std::vector<std::size_t> backward_order_;
    std::uint64_t id_;
    std::uint64_t branch_sig_ = 0xcbf29ce484222325ULL;
    bool grad_enabled_ = true;
};

extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace tbs
