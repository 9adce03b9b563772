#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>

#include "tbs/episodes.hpp"
#include "tbs/metrics.hpp"
#include "tbs/tbs_module.hpp"

namespace tbs {

// Run configuration. Text form is one `key = value` per line, `#` starts a
// comment, section keys are dotted (gen.shots = 1). Unknown or repeated keys
// are errors.
struct RunConfig {
    std::uint64_t seed = 1;
    std::size_t image_size = kImageSize;
    int fold = 0;
    std::string out_dir = "out";

    std::size_t shots = 1;
    int classes = kNumShapeClasses;
    double noise = 0.05;
    // clean, irrelevant_bg, target_similar_bg, mixed
    std::array<double, 4> mix{0.0, 0.0, 0.0, 1.0};
    std::size_t gen_episodes = 100;

    double lr = 1e-3;
    std::size_t steps = 2000;
    std::size_t batch = 4;
    std::size_t checkpoint_every = 500;

    Ablation ablation;

    std::size_t eval_episodes = 1000;
    MiouMode miou_mode = MiouMode::accumulate;

    // Generator settings restricted to the fold's train or test classes.
    GenConfig gen_config(bool test_classes) const;

    friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

RunConfig parse_config(const std::string& text);
std::string serialize_config(const RunConfig& cfg);
RunConfig load_config(const std::filesystem::path& path);

}  // namespace tbs
