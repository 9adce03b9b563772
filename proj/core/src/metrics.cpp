#include "tbs/metrics.hpp"

#include "tbs/error.hpp"

namespace tbs {

IouCounts iou_counts(const Mask& pred, const Mask& gt) {
    if (pred.height() != gt.height() || pred.width() != gt.width())
        throw DimensionError("iou: prediction " + std::to_string(pred.height()) + "x" + std::to_string(pred.width()) +
                             " vs ground truth " + std::to_string(gt.height()) + "x" + std::to_string(gt.width()));
    IouCounts c;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        c.intersection += (pred[i] & gt[i]);
        c.union_ += (pred[i] | gt[i]);
    }
    return c;
}

double iou(const Mask& pred, const Mask& gt) { return iou_counts(pred, gt).ratio(); }

EpisodeResult score_episode(int category, const Mask& pred, const Mask& gt) {
    EpisodeResult r;
    r.category = category;
    r.foreground = iou_counts(pred, gt);
    const IouCounts both = r.foreground;
    // Background overlap from the foreground counts: |~p & ~g| = N - |p | g|,
    // |~p | ~g| = N - |p & g|.
    r.background.intersection = pred.size() - both.union_;
    r.background.union_ = pred.size() - both.intersection;
    return r;
}

MiouResult miou(const std::vector<EpisodeResult>& results, const std::vector<int>& classes, MiouMode mode) {
    MiouResult out;
    double total = 0;
    std::size_t present = 0;
    for (int c : classes) {
        IouCounts acc;
        double episode_sum = 0;
        std::size_t n = 0;
        for (const auto& r : results) {
            if (r.category != c) continue;
            acc += r.foreground;
            episode_sum += r.foreground.ratio();
            ++n;
        }
        if (n == 0) {
            out.per_class[c] = std::nullopt;
            out.warnings.push_back("class " + std::to_string(c) + " has no evaluated episodes");
            continue;
        }
        const double v = mode == MiouMode::accumulate ? acc.ratio() : episode_sum / double(n);
        out.per_class[c] = v;
        total += v;
        ++present;
    }
    if (present) out.miou = total / double(present);
    return out;
}

double fb_iou(const std::vector<EpisodeResult>& results) {
    IouCounts fg, bg;
    for (const auto& r : results) {
        fg += r.foreground;
        bg += r.background;
    }
    return (fg.ratio() + bg.ratio()) / 2.0;
}

}  // namespace tbs
