#pragma once

#include <cstdint>
#include <vector>

#include "tbs/model.hpp"

namespace tbs {

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Adam with bias correction. Moment buffers are sized on the first step and
// mirror the parameter list passed to it.
class Adam {
public:
    explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

    void step(const std::vector<Tensor<float>*>& params, const std::vector<Tensor<float>>& grads, double lr);

    std::uint64_t steps() const noexcept { return steps_; }
    const std::vector<Tensor<float>>& first_moments() const noexcept { return m_; }
    const std::vector<Tensor<float>>& second_moments() const noexcept { return v_; }

private:
    AdamConfig cfg_;
    std::vector<Tensor<float>> m_;
    std::vector<Tensor<float>> v_;
    std::uint64_t steps_ = 0;
};

struct TrainState {
    ModelParams<float> params;
    Adam optimizer;

    static TrainState init(std::uint64_t seed) { return {ModelParams<float>::init(seed), Adam{}}; }
    std::uint64_t step() const noexcept { return optimizer.steps(); }
};

// Pointers to every parameter tensor in ModelParams::for_each order.
std::vector<Tensor<float>*> parameter_list(ModelParams<float>& p);

// Gradient of the mean batch loss, aligned with parameter_list(); returns the
// mean loss. Throws NumericError naming the episode seed on a non-finite loss.
double batch_gradients(const ModelParams<float>& p, const std::vector<Episode>& batch, const Ablation& ablation,
                       std::vector<Tensor<float>>& grads);

// One Adam update on the mean loss of the batch. Returns the mean loss.
double train_step(TrainState& state, const std::vector<Episode>& batch, double lr, const Ablation& ablation);

}  // namespace tbs
