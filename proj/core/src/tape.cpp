#include "tbs/tape.hpp"

#include <atomic>

namespace tbs {

namespace {
std::atomic<std::uint64_t> next_tape_id{1};
}

template <typename T>
Tape<T>::Tape() : id_(next_tape_id.fetch_add(1)) {}

template <typename T>
void Tape<T>::check(Var v) const {
    if (v.tape != id_ || v.id >= nodes_.size()) throw TapeError("value is not recorded on this tape");
}

template <typename T>
Var Tape<T>::constant(Tensor<T> value) {
    nodes_.push_back(Node{std::move(value), {}, {}, false});
    return Var{nodes_.size() - 1, id_};
}

template <typename T>
Var Tape<T>::param(const Tensor<T>& p) {
    if (auto it = bound_.find(&p); it != bound_.end()) return Var{it->second, id_};
    nodes_.push_back(Node{p, {}, {}, grad_enabled_});
    bound_.emplace(&p, nodes_.size() - 1);
    return Var{nodes_.size() - 1, id_};
}

template <typename T>
Var Tape<T>::push(Tensor<T> value, std::initializer_list<Var> inputs, Backward backward) {
    return push(std::move(value), std::vector<Var>(inputs), std::move(backward));
}

template <typename T>
Var Tape<T>::push(Tensor<T> value, const std::vector<Var>& inputs, Backward backward) {
    bool rg = false;
    for (const Var& v : inputs) {
        check(v);
        rg = rg || nodes_[v.id].requires_grad;
    }
    rg = rg && grad_enabled_;
    nodes_.push_back(Node{std::move(value), {}, rg ? std::move(backward) : Backward{}, rg});
    return Var{nodes_.size() - 1, id_};
}

template <typename T>
const Tensor<T>& Tape<T>::value(Var v) const {
    check(v);
    return nodes_[v.id].value;
}

template <typename T>
bool Tape<T>::requires_grad(Var v) const {
    check(v);
    return nodes_[v.id].requires_grad;
}

template <typename T>
Tensor<T> Tape<T>::grad(Var v) const {
    check(v);
    const Node& n = nodes_[v.id];
    if (n.grad.empty()) return Tensor<T>::zeros(n.value.shape());
    return n.grad;
}

template <typename T>
Tensor<T> Tape<T>::grad_of(const Tensor<T>& p) const {
    auto it = bound_.find(&p);
    if (it == bound_.end() || nodes_[it->second].grad.empty()) return Tensor<T>::zeros(p.shape());
    return nodes_[it->second].grad;
}

template <typename T>
Tensor<T>& Tape<T>::grad_buffer(Var v) {
    Node& n = nodes_[v.id];
    if (n.grad.empty()) n.grad = Tensor<T>::zeros(n.value.shape());
    return n.grad;
}

template <typename T>
void Tape<T>::backward(Var loss) {
    check(loss);
    if (nodes_[loss.id].value.size() != 1)
        throw TapeError("backward() needs a scalar loss, got shape " + shape_str(nodes_[loss.id].value.shape()));
    for (Node& n : nodes_) n.grad = Tensor<T>();
    backward_order_.clear();
    nodes_[loss.id].grad = Tensor<T>::full(nodes_[loss.id].value.shape(), T(1));
    for (std::size_t i = loss.id + 1; i-- > 0;) {
        Node& n = nodes_[i];
        if (!n.backward || n.grad.empty()) continue;
        backward_order_.push_back(i);
        n.backward(*this, i);
    }
}

template class Tape<float>;
template class Tape<double>;

}  // namespace tbs
