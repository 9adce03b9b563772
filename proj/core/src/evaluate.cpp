#include "tbs/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>

namespace tbs {

Mask upsample_threshold(const Tensor<float>& probs, std::size_t factor, float threshold) {
    if (probs.rank() != 2) throw DimensionError("upsample_threshold: expected an h x w plane");
    const std::size_t h = probs.dim(0), w = probs.dim(1), H = h * factor, W = w * factor;
    Mask out(H, W);
    auto coord = [factor](std::size_t o, std::size_t n, std::size_t& i0, std::size_t& i1, double& frac) {
        double x = (double(o) + 0.5) / double(factor) - 0.5;
        x = std::clamp(x, 0.0, double(n - 1));
        i0 = static_cast<std::size_t>(std::floor(x));
        i1 = std::min(i0 + 1, n - 1);
        frac = x - double(i0);
    };
    for (std::size_t y = 0; y < H; ++y) {
        std::size_t y0, y1;
        double fy;
        coord(y, h, y0, y1, fy);
        for (std::size_t x = 0; x < W; ++x) {
            std::size_t x0, x1;
            double fx;
            coord(x, w, x0, x1, fx);
            const double top = probs.at(y0, x0) * (1 - fx) + probs.at(y0, x1) * fx;
            const double bot = probs.at(y1, x0) * (1 - fx) + probs.at(y1, x1) * fx;
            out.set(y, x, top * (1 - fy) + bot * fy >= threshold);
        }
    }
    return out;
}

Predictor model_predictor(const ModelParams<float>& params, const Ablation& ablation) {
    return [&params, ablation](const Episode& ep) {
        Tape<float> t;
        t.set_grad_enabled(false);
        const EpisodeForward f = forward_episode(t, params, ep, ablation);
        Prediction p;
        p.mask = upsample_threshold(t.value(f.head.probs), ep.query.mask.height() / f.query_mask.height());
        p.attention = averaged_attention(t.value(f.head.attn), f.query_mask, f.support_masks);
        return p;
    };
}

FoldReport evaluate_fold(const Predictor& predict, const GenConfig& base, int fold, std::uint64_t seed,
                         std::size_t episodes, MiouMode mode) {
    const FoldSplit split = fold_split(fold);
    GenConfig cfg = base;
    cfg.classes = split.test_classes;
    const std::uint64_t stream = derive_seed(seed, kEvalStreamTag + static_cast<std::uint64_t>(fold));

    FoldReport report;
    report.fold = fold;
    report.test_classes = split.test_classes;
    std::vector<EpisodeResult> results;
    double sums[4] = {0, 0, 0, 0};
    std::size_t counts[4] = {0, 0, 0, 0};
    auto add = [&](int k, const std::optional<double>& v) {
        if (v) {
            sums[k] += *v;
            ++counts[k];
        }
    };
    for (std::size_t i = 0; i < episodes; ++i) {
        const Episode ep = stream_episode(cfg, stream, i);
        report.episode_seeds.push_back(ep.seed);
        const Prediction p = predict(ep);
        results.push_back(score_episode(ep.category, p.mask, ep.query.mask));
        if (p.attention) {
            add(0, p.attention->sf_qf_mass);
            add(1, p.attention->sb_qb_mass);
            add(2, p.attention->sf_qf_pair);
            add(3, p.attention->sb_qb_pair);
        }
    }
    report.miou = miou(results, split.test_classes, mode);
    report.fb_iou = fb_iou(results);
    auto mean = [&](int k) -> std::optional<double> {
        if (!counts[k]) return std::nullopt;
        return sums[k] / double(counts[k]);
    };
    report.attention = {mean(0), mean(1), mean(2), mean(3)};
    return report;
}

namespace {

std::string fmt(const std::optional<double>& v) {
    if (!v) return "";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", *v);
    return buf;
}

}  // namespace

void write_metrics_csv(std::ostream& os, const EvalReport& report) {
    os << "fold,class,iou,miou,fb_iou,aa_sf_qf,aa_sb_qb,aa_avg\n";
    for (const auto& [fold, fr] : report.per_fold) {
        for (const auto& [cls, v] : fr.miou.per_class) {
            os << fold << ',' << shape_class_name(cls) << ',' << fmt(v) << ',' << fmt(fr.miou.miou) << ','
               << fmt(fr.fb_iou) << ',' << fmt(fr.attention.sf_qf) << ',' << fmt(fr.attention.sb_qb) << ','
               << fmt(fr.attention.average()) << '\n';
        }
    }
}

void write_summary(std::ostream& os, const EvalReport& report, bool verbose) {
    os << "ablation: " << report.ablation.label() << "  seed: " << report.seed
       << "  episodes/fold: " << report.episode_count << '\n';
    for (const auto& [fold, fr] : report.per_fold) {
        os << "fold " << fold << ": mIoU " << fmt(fr.miou.miou) << "  FB-IoU " << fmt(fr.fb_iou) << '\n';
        for (const auto& [cls, v] : fr.miou.per_class)
            os << "  " << shape_class_name(cls) << ": " << (v ? fmt(v) : std::string("absent")) << '\n';
        os << "  AA SF&QF " << fmt(fr.attention.sf_qf) << "  SB&QB " << fmt(fr.attention.sb_qb) << "  avg "
           << fmt(fr.attention.average()) << '\n';
        if (verbose)
            os << "  AA per-pair SF&QF " << fmt(fr.attention.sf_qf_pair) << "  SB&QB "
               << fmt(fr.attention.sb_qb_pair) << '\n';
        for (const auto& w : fr.miou.warnings) os << "  warning: " << w << '\n';
    }
}

}  // namespace tbs
