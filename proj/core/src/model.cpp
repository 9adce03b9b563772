#include "tbs/model.hpp"

#include "tbs/ops.hpp"

namespace tbs {

template <typename T>
ModelParams<T> ModelParams<T>::init(std::uint64_t seed) {
    Rng rng(derive_seed(seed, 0x1e57ULL));
    ModelParams p;
    p.encoder = EncoderParams<T>::init(rng);
    p.tbs = TbsParams<T>::init(kFeatureChannels, rng);
    p.head = HeadParams<T>::init(kFeatureChannels, rng);
    return p;
}

template <typename T>
std::size_t ModelParams<T>::parameter_count() const {
    std::size_t n = 0;
    for_each([&n](const std::string&, const Tensor<T>& t) { n += t.size(); });
    return n;
}

template <typename T>
EpisodeForward forward_episode(Tape<T>& t, const ModelParams<T>& p, const Episode& ep, const Ablation& ablation) {
    if (ep.supports.empty()) throw DegenerateSupportError("episode has no support shots");
    EpisodeForward out;
    out.query_mask = downsample_mask(ep.query.mask);
    const std::size_t fh = out.query_mask.height(), fw = out.query_mask.width();

    const Var query = to_tokens(t, extract_features(t, p.encoder, ep.query.image.template cast<T>()));
    out.support_masks.reserve(ep.supports.size());
    for (const auto& s : ep.supports) out.support_masks.push_back(downsample_mask(s.mask));

    std::vector<ShotFeatures> shots;
    for (std::size_t j = 0; j < ep.supports.size(); ++j) {
        const Var support = to_tokens(t, extract_features(t, p.encoder, ep.supports[j].image.template cast<T>()));
        out.traces.push_back(tbs_forward(t, p.tbs, query, support, out.support_masks[j], ablation));
        shots.push_back({out.traces.back().adapted, &out.support_masks[j]});
    }
    out.head = predict_mask(t, p.head, query, shots, fh, fw);
    out.loss = ops::bce_loss(t, out.head.probs, out.query_mask.as_tensor<T>());
    return out;
}

template <typename T>
T episode_loss(const ModelParams<T>& p, const Episode& ep, const Ablation& ablation) {
    Tape<T> t;
    t.set_grad_enabled(false);
    const EpisodeForward f = forward_episode(t, p, ep, ablation);
    return t.value(f.loss)[0];
}

template struct ModelParams<float>;
template struct ModelParams<double>;
template EpisodeForward forward_episode(Tape<float>&, const ModelParams<float>&, const Episode&, const Ablation&);
template EpisodeForward forward_episode(Tape<double>&, const ModelParams<double>&, const Episode&, const Ablation&);
template float episode_loss(const ModelParams<float>&, const Episode&, const Ablation&);
template double episode_loss(const ModelParams<double>&, const Episode&, const Ablation&);

}  // namespace tbs
