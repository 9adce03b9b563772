#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <vector>

#include "tbs/episodes.hpp"
#include "tbs/head.hpp"
#include "tbs/metrics.hpp"
#include "tbs/model.hpp"

namespace tbs {

inline constexpr float kPredictionThreshold = 0.5f;

// Stream tags separating training and evaluation episodes of one run seed.
inline constexpr std::uint64_t kTrainStreamTag = 0x7a11;
inline constexpr std::uint64_t kEvalStreamTag = 0xe7a1;

// Bilinear (half-pixel centres) upsampling of an h x w probability plane by
// `factor`, thresholded at 0.5.
Mask upsample_threshold(const Tensor<float>& probs, std::size_t factor, float threshold = kPredictionThreshold);

struct Prediction {
    Mask mask;  // image resolution
    std::optional<AttentionStats> attention;
};

using Predictor = std::function<Prediction(const Episode&)>;

Predictor model_predictor(const ModelParams<float>& params, const Ablation& ablation);

// Mean over episodes of each attention statistic that was present.
struct AttentionSummary {
    std::optional<double> sf_qf;
    std::optional<double> sb_qb;
    std::optional<double> sf_qf_pair;
    std::optional<double> sb_qb_pair;

    std::optional<double> average() const {
        if (!sf_qf || !sb_qb) return std::nullopt;
        return (*sf_qf + *sb_qb) / 2.0;
    }
};

struct FoldReport {
    int fold = 0;
    std::vector<int> test_classes;
    MiouResult miou;
    double fb_iou = 0;
    AttentionSummary attention;
    std::vector<std::uint64_t> episode_seeds;
};

struct EvalReport {
    std::map<int, FoldReport> per_fold;
    std::size_t episode_count = 0;
    std::uint64_t seed = 0;
    Ablation ablation;
};

// Evaluates `episodes` test-class episodes of the fold, drawn from the
// evaluation stream of `seed`.
FoldReport evaluate_fold(const Predictor& predict, const GenConfig& base, int fold, std::uint64_t seed,
                         std::size_t episodes, MiouMode mode = MiouMode::accumulate);

// Rows: fold,class,iou,miou,fb_iou,aa_sf_qf,aa_sb_qb,aa_avg. Absent values are empty fields.
void write_metrics_csv(std::ostream& os, const EvalReport& report);
void write_summary(std::ostream& os, const EvalReport& report, bool verbose = false);

}  // namespace tbs
