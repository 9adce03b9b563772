#include "tbs/episodes.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <istream>
#include <numbers>
#include <ostream>

#include "binary_io.hpp"

namespace tbs {

namespace {

constexpr int kMaxAttempts = 100;
constexpr int kMaxPlacementTries = 200;

constexpr double kTargetRadiusMin = 9.0;
constexpr double kTargetRadiusMax = 14.0;
constexpr double kDistractorRadiusMin = 6.0;
constexpr double kDistractorRadiusMax = 10.0;
constexpr double kIntensityMin = 0.55;
constexpr double kIntensityMax = 1.0;
constexpr double kBackgroundMin = 0.05;
constexpr double kBackgroundMax = 0.30;
constexpr double kIntensityJitter = 0.03;
constexpr double kIrrelevantGap = 0.15;

// Sign of the cross product (b - a) x (p - a).
double edge(double ax, double ay, double bx, double by, double px, double py) {
    return (bx - ax) * (py - ay) - (by - ay) * (px - ax);
}

bool in_triangle(const ShapeInstance& s, double px, double py) {
    // Equilateral, inscribed in the bounding circle, apex up.
    const double r = s.radius;
    const double s3 = std::sqrt(3.0) / 2.0;
    const double ax = s.cx, ay = s.cy - r;
    const double bx = s.cx + r * s3, by = s.cy + r / 2;
    const double cx = s.cx - r * s3, cy = s.cy + r / 2;
    const double e1 = edge(ax, ay, bx, by, px, py);
    const double e2 = edge(bx, by, cx, cy, px, py);
    const double e3 = edge(cx, cy, ax, ay, px, py);
    return (e1 >= 0 && e2 >= 0 && e3 >= 0) || (e1 <= 0 && e2 <= 0 && e3 <= 0);
}

struct Placer {
    Rng& rng;
    std::size_t size;
    std::vector<ShapeInstance>& shapes;

    // Places a non-overlapping shape; false when no free spot was found.
    bool place(int cls, double rmin, double rmax, std::optional<double> intensity = std::nullopt) {
        for (int attempt = 0; attempt < kMaxPlacementTries; ++attempt) {
            ShapeInstance s;
            s.cls = cls;
            s.radius = rng.uniform(rmin, rmax);
            const double lo = s.radius + 1.0, hi = double(size) - s.radius - 1.0;
            s.cx = rng.uniform(lo, hi);
            s.cy = rng.uniform(lo, hi);
            s.intensity = rng.uniform(kIntensityMin, kIntensityMax);
            if (intensity) s.intensity = *intensity;
            bool clear = true;
            for (const auto& o : shapes)
                if (std::hypot(o.cx - s.cx, o.cy - s.cy) < o.radius + s.radius + 2.0) {
                    clear = false;
                    break;
                }
            if (clear) {
                shapes.push_back(s);
                return true;
            }
        }
        return false;
    }
};

double near_intensity(Rng& rng, double base) {
    return std::clamp(base + rng.uniform(-kIntensityJitter, kIntensityJitter), kIntensityMin, kIntensityMax);
}

// At least kIrrelevantGap away from `avoid`; the allowed band is never empty.
double far_intensity(Rng& rng, double avoid) {
    for (;;) {
        const double v = rng.uniform(kIntensityMin, kIntensityMax);
        if (std::abs(v - avoid) >= kIrrelevantGap) return v;
    }
}

// Uniform draw from [0, num_classes) minus `excluded`.
int draw_class_excluding(Rng& rng, int num_classes, const std::vector<int>& excluded) {
    std::vector<int> pool;
    for (int c = 0; c < num_classes; ++c)
        if (std::find(excluded.begin(), excluded.end(), c) == excluded.end()) pool.push_back(c);
    if (pool.empty()) throw GenerationError("no distractor class available outside the excluded set");
    return pool[rng.below(pool.size())];
}

Difficulty draw_difficulty(Rng& rng, const std::array<double, 4>& mix) {
    double total = 0;
    for (double w : mix) {
        if (!(w >= 0)) throw GenerationError("difficulty weights must be non-negative");
        total += w;
    }
    if (!(total > 0)) throw GenerationError("difficulty weights sum to zero");
    double u = rng.uniform() * total;
    for (std::size_t i = 0; i < mix.size(); ++i) {
        if (u < mix[i]) return static_cast<Difficulty>(i);
        u -= mix[i];
    }
    for (std::size_t i = mix.size(); i-- > 0;)
        if (mix[i] > 0) return static_cast<Difficulty>(i);
    return Difficulty::clean;
}

ImageRecord render(Rng& rng, const GenConfig& cfg, std::vector<ShapeInstance> shapes, int category) {
    const std::size_t n = cfg.image_size;
    ImageRecord rec;
    rec.background_level = rng.uniform(kBackgroundMin, kBackgroundMax);
    rec.image = Tensor<float>({1, n, n});
    for (std::size_t y = 0; y < n; ++y)
        for (std::size_t x = 0; x < n; ++x) {
            double v = rec.background_level;
            for (const auto& s : shapes)
                if (shape_contains(s, x + 0.5, y + 0.5)) v = s.intensity;
            v += cfg.noise_sigma * rng.normal();
            rec.image[y * n + x] = static_cast<float>(std::clamp(v, 0.0, 1.0));
        }
    rec.mask = rasterize_mask(shapes, category, n);
    rec.shapes = std::move(shapes);
    return rec;
}

bool feature_mask_ok(const Mask& m, std::size_t factor) {
    const Mask d = downsample_mask(m, factor);
    const std::size_t c = d.count();
    return c > 0 && c < d.size();
}

}  // namespace

const char* shape_class_name(int cls) {
    static constexpr const char* names[] = {"disk", "square", "triangle", "ring", "cross", "diamond", "hbar", "vbar"};
    if (cls < 0 || cls >= kNumShapeClasses) return "?";
    return names[cls];
}

int lookalike_class(int cls) {
    static constexpr int partner[] = {3, 5, 4, 0, 2, 1, 7, 6};
    if (cls < 0 || cls >= kNumShapeClasses) throw GenerationError("class id " + std::to_string(cls) + " out of range");
    return partner[cls];
}

const char* difficulty_name(Difficulty d) {
    switch (d) {
        case Difficulty::clean: return "clean";
        case Difficulty::irrelevant_bg: return "irrelevant_bg";
        case Difficulty::target_similar_bg: return "target_similar_bg";
        case Difficulty::mixed: return "mixed";
    }
    return "?";
}

std::optional<Difficulty> parse_difficulty(const std::string& s) {
    for (int i = 0; i < 4; ++i)
        if (s == difficulty_name(static_cast<Difficulty>(i))) return static_cast<Difficulty>(i);
    return std::nullopt;
}

FoldSplit fold_split(int fold_id) {
    if (fold_id < 0 || fold_id >= kNumFolds)
        throw ConfigError("fold must be in 0..3, got " + std::to_string(fold_id));
    FoldSplit f;
    f.fold_id = fold_id;
    for (int c = 0; c < kNumShapeClasses; ++c)
        (c / 2 == fold_id ? f.test_classes : f.train_classes).push_back(c);
    return f;
}

bool shape_contains(const ShapeInstance& s, double px, double py) {
    const double dx = px - s.cx, dy = py - s.cy, r = s.radius;
    const double adx = std::abs(dx), ady = std::abs(dy);
    switch (static_cast<ShapeClass>(s.cls)) {
        case ShapeClass::disk: return dx * dx + dy * dy <= r * r;
        case ShapeClass::ring: {
            const double d2 = dx * dx + dy * dy;
            return d2 <= r * r && d2 >= 0.3 * r * r;
        }
        case ShapeClass::square: return std::max(adx, ady) <= r * std::numbers::sqrt2 / 2;
        case ShapeClass::diamond: return adx + ady <= r;
        case ShapeClass::triangle: return in_triangle(s, px, py);
        case ShapeClass::cross:
            return (adx <= r / 3 && ady <= 0.94 * r) || (ady <= r / 3 && adx <= 0.94 * r);
        case ShapeClass::hbar: return adx <= 0.94 * r && ady <= r / 3;
        case ShapeClass::vbar: return ady <= 0.94 * r && adx <= r / 3;
    }
    return false;
}

Mask rasterize_mask(const std::vector<ShapeInstance>& shapes, int category, std::size_t size) {
    Mask m(size, size);
    for (std::size_t y = 0; y < size; ++y)
        for (std::size_t x = 0; x < size; ++x) {
            // Later shapes paint over earlier ones, as in render().
            int top = -1;
            for (const auto& s : shapes)
                if (shape_contains(s, x + 0.5, y + 0.5)) top = s.cls;
            m.set(y, x, top == category);
        }
    return m;
}

Mask downsample_mask(const Mask& m, std::size_t factor) {
    if (factor == 0 || m.height() % factor || m.width() % factor)
        throw DimensionError("downsample_mask: " + std::to_string(m.height()) + "x" + std::to_string(m.width()) +
                             " is not divisible by " + std::to_string(factor));
    const std::size_t h = m.height() / factor, w = m.width() / factor;
    Mask out(h, w);
    for (std::size_t cy = 0; cy < h; ++cy)
        for (std::size_t cx = 0; cx < w; ++cx) {
            std::size_t on = 0;
            for (std::size_t y = 0; y < factor; ++y)
                for (std::size_t x = 0; x < factor; ++x) on += m.at(cy * factor + y, cx * factor + x);
            out.set(cy, cx, 2 * on >= factor * factor);
        }
    return out;
}

Episode generate_episode(const GenConfig& cfg, std::uint64_t seed, std::optional<int> category,
                         std::optional<Difficulty> difficulty) {
    if (cfg.num_classes < 2 || cfg.num_classes > kNumShapeClasses)
        throw GenerationError("num_classes must be in 2..8, got " + std::to_string(cfg.num_classes));
    if (cfg.classes.empty()) throw GenerationError("no candidate categories configured");
    if (cfg.shots < 1) throw GenerationError("shots must be at least 1");
    if (cfg.image_size % kFeatureStride || cfg.image_size < 2 * kFeatureStride)
        throw GenerationError("image size must be a multiple of 8 and at least 16");
    for (int c : cfg.classes)
        if (c < 0 || c >= cfg.num_classes) throw GenerationError("category " + std::to_string(c) + " out of range");

    for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(attempt)));
        Episode ep;
        ep.seed = seed;
        ep.category = category ? *category : cfg.classes[rng.below(cfg.classes.size())];
        ep.difficulty = difficulty ? *difficulty : draw_difficulty(rng, cfg.mix);
        const int c = ep.category;
        if (c < 0 || c >= cfg.num_classes) throw GenerationError("category " + std::to_string(c) + " out of range");

        const bool need_lookalike =
            ep.difficulty == Difficulty::target_similar_bg || ep.difficulty == Difficulty::mixed;
        const int look = lookalike_class(c);
        if (need_lookalike && look >= cfg.num_classes)
            throw GenerationError(std::string("look-alike class for ") + shape_class_name(c) + " is unavailable");

        bool placed = true;
        // One target appearance per episode, shared by query, supports and
        // look-alikes.
        const double target_intensity = rng.uniform(kIntensityMin, kIntensityMax);
        // Query: the target plus, unless clean, one background object.
        std::vector<ShapeInstance> qshapes;
        Placer qp{rng, cfg.image_size, qshapes};
        placed &= qp.place(c, kTargetRadiusMin, kTargetRadiusMax, near_intensity(rng, target_intensity));
        int query_distractor = -1;
        if (ep.difficulty != Difficulty::clean) {
            query_distractor = draw_class_excluding(rng, cfg.num_classes, {c, look});
            placed &= qp.place(query_distractor, kDistractorRadiusMin, kDistractorRadiusMax);
        }
        const double shared_intensity = qshapes.size() > 1 ? qshapes[1].intensity : target_intensity;

        std::vector<std::vector<ShapeInstance>> sshapes(cfg.shots);
        for (auto& shapes : sshapes) {
            Placer sp{rng, cfg.image_size, shapes};
            placed &= sp.place(c, kTargetRadiusMin, kTargetRadiusMax, near_intensity(rng, target_intensity));
            const std::vector<int> not_in_query{c, look, query_distractor};
            const auto irrelevant = [&] {
                placed &= sp.place(draw_class_excluding(rng, cfg.num_classes, not_in_query), kDistractorRadiusMin,
                                   kDistractorRadiusMax, far_intensity(rng, target_intensity));
            };
            switch (ep.difficulty) {
                case Difficulty::clean: break;
                case Difficulty::irrelevant_bg: {
                    const int n = 1 + static_cast<int>(rng.below(2));
                    for (int i = 0; i < n; ++i) irrelevant();
                    break;
                }
                case Difficulty::target_similar_bg:
                    placed &= sp.place(look, kDistractorRadiusMin, kDistractorRadiusMax,
                                       near_intensity(rng, target_intensity));
                    break;
                case Difficulty::mixed:
                    placed &= sp.place(look, kDistractorRadiusMin, kDistractorRadiusMax,
                                       near_intensity(rng, target_intensity));
                    irrelevant();
                    // The same object as in the query background.
                    placed &= sp.place(query_distractor, kDistractorRadiusMin, kDistractorRadiusMax,
                                       near_intensity(rng, shared_intensity));
                    break;
            }
        }
        if (!placed) continue;

        ep.query = render(rng, cfg, std::move(qshapes), c);
        bool ok = feature_mask_ok(ep.query.mask, kFeatureStride);
        for (auto& shapes : sshapes) {
            ep.supports.push_back(render(rng, cfg, std::move(shapes), c));
            ok = ok && feature_mask_ok(ep.supports.back().mask, kFeatureStride);
        }
        if (ok) return ep;
    }
    throw GenerationError("could not generate a valid episode for seed " + std::to_string(seed) + " in " +
                          std::to_string(kMaxAttempts) + " attempts");
}

Episode stream_episode(const GenConfig& cfg, std::uint64_t stream_seed, std::uint64_t index) {
    if (cfg.classes.empty()) throw GenerationError("no candidate categories configured");
    const int category = cfg.classes[index % cfg.classes.size()];
    return generate_episode(cfg, derive_seed(stream_seed, index), category);
}

void write_episode_dump(std::ostream& os, const std::vector<Episode>& episodes) {
    using detail::put_le;
    os.write("TBSE", 4);
    put_le<std::uint32_t>(os, kEpisodeDumpVersion);
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(episodes.size()));
    auto put_record = [&os](const ImageRecord& r) {
        for (float v : r.image.span()) detail::put_f32(os, v);
        for (auto b : r.mask.bits()) put_le<std::uint8_t>(os, b);
    };
    for (const auto& ep : episodes) {
        put_le<std::uint64_t>(os, ep.seed);
        put_le<std::uint32_t>(os, static_cast<std::uint32_t>(ep.category));
        put_le<std::uint8_t>(os, static_cast<std::uint8_t>(ep.difficulty));
        put_le<std::uint32_t>(os, static_cast<std::uint32_t>(ep.supports.size()));
        put_le<std::uint32_t>(os, static_cast<std::uint32_t>(ep.query.mask.height()));
        put_le<std::uint32_t>(os, static_cast<std::uint32_t>(ep.query.mask.width()));
        put_record(ep.query);
        for (const auto& s : ep.supports) put_record(s);
    }
    if (!os) throw IoError("failed writing episode dump");
}

std::vector<Episode> read_episode_dump(std::istream& is) {
    using detail::get_le;
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, "TBSE", 4) != 0) throw IoError("not an episode dump (bad magic)");
    const auto version = get_le<std::uint32_t>(is, "version");
    if (version != kEpisodeDumpVersion) throw IoError("unsupported episode dump version " + std::to_string(version));
    const auto count = get_le<std::uint32_t>(is, "count");
    std::vector<Episode> out;
    for (std::uint32_t e = 0; e < count; ++e) {
        Episode ep;
        ep.seed = get_le<std::uint64_t>(is, "seed");
        ep.category = static_cast<int>(get_le<std::uint32_t>(is, "category"));
        const auto diff = get_le<std::uint8_t>(is, "difficulty");
        if (diff > 3) throw IoError("bad difficulty tag " + std::to_string(diff));
        ep.difficulty = static_cast<Difficulty>(diff);
        const auto shots = get_le<std::uint32_t>(is, "shots");
        const auto h = get_le<std::uint32_t>(is, "height");
        const auto w = get_le<std::uint32_t>(is, "width");
        if (h == 0 || w == 0 || shots == 0 || h > 4096 || w > 4096) throw IoError("implausible episode header");
        auto get_record = [&]() {
            ImageRecord r;
            r.image = Tensor<float>({1, h, w});
            for (auto& v : r.image.span()) v = detail::get_f32(is, "image");
            std::vector<std::uint8_t> bits(std::size_t{h} * w);
            for (auto& b : bits) b = get_le<std::uint8_t>(is, "mask");
            r.mask = Mask(h, w, std::move(bits));
            return r;
        };
        ep.query = get_record();
        for (std::uint32_t s = 0; s < shots; ++s) ep.supports.push_back(get_record());
        out.push_back(std::move(ep));
    }
    return out;
}

}  // namespace tbs
