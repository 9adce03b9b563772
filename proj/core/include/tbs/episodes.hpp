#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "tbs/mask.hpp"
#include "tbs/random.hpp"
#include "tbs/tensor.hpp"

// Synthetic few-shot segmentation tasks built from eight grayscale shape
// classes. Distractor shapes in the support backgrounds reproduce the two
// failure cases TBS targets: backgrounds unrelated to the query, and
// backgrounds containing a look-alike of the target class.
namespace tbs {

enum class ShapeClass : int { disk = 0, square, triangle, ring, cross, diamond, hbar, vbar };

inline constexpr int kNumShapeClasses = 8;
inline constexpr int kNumFolds = 4;
inline constexpr std::size_t kImageSize = 64;
inline constexpr std::size_t kFeatureStride = 8;
inline constexpr std::size_t kFeatureSize = kImageSize / kFeatureStride;

const char* shape_class_name(int cls);
// Designated look-alike partner (disk/ring, square/diamond, triangle/cross, hbar/vbar).
int lookalike_class(int cls);

enum class Difficulty : std::uint8_t { clean = 0, irrelevant_bg = 1, target_similar_bg = 2, mixed = 3 };

const char* difficulty_name(Difficulty d);
std::optional<Difficulty> parse_difficulty(const std::string& s);

struct GenConfig {
    std::size_t image_size = kImageSize;
    std::size_t shots = 1;
    int num_classes = kNumShapeClasses;
    // Candidate episode categories (a fold's train or test classes).
    std::vector<int> classes{0, 1, 2, 3, 4, 5, 6, 7};
    // Sampling weights for clean, irrelevant_bg, target_similar_bg, mixed.
    std::array<double, 4> mix{0.0, 0.0, 0.0, 1.0};
    double noise_sigma = 0.05;
};

// One rendered shape. Every shape fits inside the circle (cx, cy, radius).
struct ShapeInstance {
    int cls = 0;
    double cx = 0;
    double cy = 0;
    double radius = 0;
    double intensity = 0;
};

struct ImageRecord {
    Tensor<float> image;  // 1 x H x W in [0, 1]
    Mask mask;            // H x W, 1 on pixels of the episode category
    std::vector<ShapeInstance> shapes;
    double background_level = 0;
};

struct Episode {
    ImageRecord query;
    std::vector<ImageRecord> supports;
    int category = 0;
    Difficulty difficulty = Difficulty::clean;
    std::uint64_t seed = 0;

    std::size_t shots() const noexcept { return supports.size(); }
};

struct FoldSplit {
    int fold_id = 0;
    std::vector<int> train_classes;
    std::vector<int> test_classes;
};

FoldSplit fold_split(int fold_id);

// Shape membership test for a pixel centre.
bool shape_contains(const ShapeInstance& s, double px, double py);

// Pixels covered by shapes of class `category`.
Mask rasterize_mask(const std::vector<ShapeInstance>& shapes, int category, std::size_t size);

// Block-majority downsampling; a cell is foreground when at least half of its
// factor x factor block is.
Mask downsample_mask(const Mask& m, std::size_t factor = kFeatureStride);

// Deterministic in (cfg, seed). Category drawn uniformly from cfg.classes and
// difficulty from cfg.mix unless given. Retries with derived sub-seeds until
// every feature-resolution mask has both foreground and background cells.
Episode generate_episode(const GenConfig& cfg, std::uint64_t seed, std::optional<int> category = std::nullopt,
                         std::optional<Difficulty> difficulty = std::nullopt);

// Episode `index` of a stream: seed derive_seed(stream_seed, index) and a
// round-robin category so every class appears equally often.
Episode stream_episode(const GenConfig& cfg, std::uint64_t stream_seed, std::uint64_t index);

// "TBSE" episode dump. Layout (little-endian):
//   magic "TBSE", u32 version, u32 count, then per episode:
//   u64 seed, u32 category, u8 difficulty, u32 shots, u32 height, u32 width,
//   and for the query followed by each support:
//   H*W f32 image values, H*W u8 mask values.
inline constexpr std::uint32_t kEpisodeDumpVersion = 1;
void write_episode_dump(std::ostream& os, const std::vector<Episode>& episodes);
// Restores images, masks, category, difficulty and seed (shape metadata is not stored).
std::vector<Episode> read_episode_dump(std::istream& is);

}  // namespace tbs
