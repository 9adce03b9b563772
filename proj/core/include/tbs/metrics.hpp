#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tbs/mask.hpp"

namespace tbs {

struct IouCounts {
    std::uint64_t intersection = 0;
    std::uint64_t union_ = 0;

    // Both-empty counts as a perfect match.
    double ratio() const noexcept { return union_ == 0 ? 1.0 : double(intersection) / double(union_); }
    IouCounts& operator+=(const IouCounts& o) noexcept {
        intersection += o.intersection;
        union_ += o.union_;
        return *this;
    }
};

IouCounts iou_counts(const Mask& pred, const Mask& gt);
double iou(const Mask& pred, const Mask& gt);

// Foreground and background overlap of one evaluated episode.
struct EpisodeResult {
    int category = 0;
    IouCounts foreground;
    IouCounts background;
};

EpisodeResult score_episode(int category, const Mask& pred, const Mask& gt);

enum class MiouMode {
    accumulate,   // per class: sum I / sum U over episodes
    per_episode,  // per class: mean of per-episode IoU
};

struct MiouResult {
    std::map<int, std::optional<double>> per_class;  // absent: no episodes of that class
    std::optional<double> miou;                      // mean over present classes
    std::vector<std::string> warnings;
};

MiouResult miou(const std::vector<EpisodeResult>& results, const std::vector<int>& classes,
                MiouMode mode = MiouMode::accumulate);

// Mean of foreground and background IoU, each accumulated over all episodes.
double fb_iou(const std::vector<EpisodeResult>& results);

}  // namespace tbs
