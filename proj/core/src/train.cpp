#include "tbs/train.hpp"

#include <cmath>

namespace tbs {

void Adam::step(const std::vector<Tensor<float>*>& params, const std::vector<Tensor<float>>& grads, double lr) {
    if (params.size() != grads.size()) throw DimensionError("Adam: parameter and gradient counts differ");
    if (m_.empty()) {
        for (const auto* p : params) {
            m_.push_back(Tensor<float>::zeros(p->shape()));
            v_.push_back(Tensor<float>::zeros(p->shape()));
        }
    }
    if (m_.size() != params.size()) throw DimensionError("Adam: parameter list changed between steps");
    ++steps_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, double(steps_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, double(steps_));
    for (std::size_t k = 0; k < params.size(); ++k) {
        Tensor<float>& p = *params[k];
        const Tensor<float>& g = grads[k];
        if (g.shape() != p.shape())
            throw DimensionError("Adam: gradient " + shape_str(g.shape()) + " for parameter " + shape_str(p.shape()));
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double gi = g[i];
            const double m = cfg_.beta1 * m_[k][i] + (1.0 - cfg_.beta1) * gi;
            const double v = cfg_.beta2 * v_[k][i] + (1.0 - cfg_.beta2) * gi * gi;
            m_[k][i] = static_cast<float>(m);
            v_[k][i] = static_cast<float>(v);
            const double update = (m / c1) / (std::sqrt(v / c2) + cfg_.eps);
            p[i] = static_cast<float>(p[i] - lr * update);
        }
    }
}

std::vector<Tensor<float>*> parameter_list(ModelParams<float>& p) {
    std::vector<Tensor<float>*> out;
    p.for_each([&out](const std::string&, Tensor<float>& t) { out.push_back(&t); });
    return out;
}

double batch_gradients(const ModelParams<float>& p, const std::vector<Episode>& batch, const Ablation& ablation,
                       std::vector<Tensor<float>>& grads) {
    if (batch.empty()) throw ConfigError("training batch is empty");
    grads.clear();
    p.for_each([&grads](const std::string&, const Tensor<float>& t) { grads.push_back(Tensor<float>::zeros(t.shape())); });
    const float inv = 1.0f / float(batch.size());
    double total = 0;
    for (const Episode& ep : batch) {
        Tape<float> t;
        const EpisodeForward f = forward_episode(t, p, ep, ablation);
        const float loss = t.value(f.loss)[0];
        if (!std::isfinite(loss))
            throw NumericError("non-finite loss on episode with seed " + std::to_string(ep.seed));
        total += loss;
        t.backward(f.loss);
        std::size_t k = 0;
        p.for_each([&](const std::string&, const Tensor<float>& param) {
            const Tensor<float> g = t.grad_of(param);
            for (std::size_t i = 0; i < g.size(); ++i) grads[k][i] += inv * g[i];
            ++k;
        });
    }
    return total / double(batch.size());
}

double train_step(TrainState& state, const std::vector<Episode>& batch, double lr, const Ablation& ablation) {
    std::vector<Tensor<float>> grads;
    const double loss = batch_gradients(state.params, batch, ablation, grads);
    for (const auto& g : grads)
        if (!g.all_finite()) throw NumericError("non-finite gradient in batch starting with seed " +
                                                std::to_string(batch.front().seed));
    state.optimizer.step(parameter_list(state.params), grads, lr);
    return loss;
}

}  // namespace tbs
