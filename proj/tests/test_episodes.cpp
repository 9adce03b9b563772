#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include "tbs/encoder.hpp"
#include "tbs/episodes.hpp"
#include "tbs/evaluate.hpp"

using tbs::Difficulty;
using tbs::Episode;
using tbs::GenConfig;
using tbs::Mask;

namespace {

GenConfig config_for(Difficulty d, std::size_t shots = 1) {
    GenConfig cfg;
    cfg.shots = shots;
    cfg.mix = {0, 0, 0, 0};
    cfg.mix[static_cast<std::size_t>(d)] = 1;
    return cfg;
}

std::set<int> classes_in(const tbs::ImageRecord& r) {
    std::set<int> out;
    for (const auto& s : r.shapes) out.insert(s.cls);
    return out;
}

}  // namespace

TEST_CASE("clean episodes carry no distractors") {
    const GenConfig cfg = config_for(Difficulty::clean, 3);
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const Episode ep = tbs::generate_episode(cfg, seed);
        CHECK(ep.difficulty == Difficulty::clean);
        CHECK(ep.query.shapes.size() == 1);
        for (const auto& s : ep.supports) CHECK(s.shapes.size() == 1);
    }
}

TEST_CASE("generation is deterministic in config and seed") {
    GenConfig cfg;
    cfg.shots = 2;
    cfg.mix = {1, 1, 1, 1};
    for (std::uint64_t seed : {0ull, 7ull, 123456789ull}) {
        const Episode a = tbs::generate_episode(cfg, seed), b = tbs::generate_episode(cfg, seed);
        CHECK(a.category == b.category);
        CHECK(a.difficulty == b.difficulty);
        CHECK(tbs::bit_equal(a.query.image, b.query.image));
        CHECK(a.query.mask == b.query.mask);
        for (std::size_t j = 0; j < 2; ++j) {
            CHECK(tbs::bit_equal(a.supports[j].image, b.supports[j].image));
            CHECK(a.supports[j].mask == b.supports[j].mask);
        }
    }
    CHECK_FALSE(tbs::bit_equal(tbs::generate_episode(cfg, 1).query.image, tbs::generate_episode(cfg, 2).query.image));
}

TEST_CASE("irrelevant distractors never appear in the query") {
    const GenConfig cfg = config_for(Difficulty::irrelevant_bg, 2);
    std::size_t distractors = 0;
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
        const Episode ep = tbs::generate_episode(cfg, seed);
        const auto q = classes_in(ep.query);
        for (const auto& s : ep.supports)
            for (const auto& sh : s.shapes) {
                if (sh.cls == ep.category) continue;
                ++distractors;
                CHECK(q.count(sh.cls) == 0);
            }
    }
    CHECK(distractors >= 2000);
}

TEST_CASE("target-similar supports hold the look-alike as background") {
    const GenConfig cfg = config_for(Difficulty::target_similar_bg);
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        const Episode ep = tbs::generate_episode(cfg, seed);
        const int look = tbs::lookalike_class(ep.category);
        const auto& s = ep.supports[0];
        CHECK(classes_in(s).count(look) == 1);
        for (const auto& sh : s.shapes) {
            if (sh.cls != look) continue;
            Mask only(64, 64);
            for (std::size_t y = 0; y < 64; ++y)
                for (std::size_t x = 0; x < 64; ++x)
                    if (tbs::shape_contains(sh, x + 0.5, y + 0.5)) CHECK(s.mask.at(y, x) == 0);
        }
    }
}

TEST_CASE("look-alike pairs are symmetric") {
    for (int c = 0; c < tbs::kNumShapeClasses; ++c) {
        CHECK(tbs::lookalike_class(c) != c);
        CHECK(tbs::lookalike_class(tbs::lookalike_class(c)) == c);
    }
}

TEST_CASE("unavailable look-alike is a generation error") {
    GenConfig cfg = config_for(Difficulty::target_similar_bg);
    cfg.num_classes = 3;
    cfg.classes = {0};
    CHECK_THROWS_AS(tbs::generate_episode(cfg, 1), tbs::GenerationError);
}

TEST_CASE("fold_split examples") {
    const auto f0 = tbs::fold_split(0);
    CHECK(f0.test_classes == std::vector<int>{0, 1});
    CHECK(f0.train_classes == std::vector<int>{2, 3, 4, 5, 6, 7});
    std::set<int> all;
    for (int f = 0; f < 4; ++f) {
        const auto s = tbs::fold_split(f);
        for (int c : s.test_classes) {
            all.insert(c);
            CHECK(std::find(s.train_classes.begin(), s.train_classes.end(), c) == s.train_classes.end());
        }
        CHECK(s.test_classes.size() + s.train_classes.size() == 8);
    }
    CHECK(all.size() == 8);
    CHECK_THROWS_AS(tbs::fold_split(4), tbs::ConfigError);
    CHECK_THROWS_AS(tbs::fold_split(-1), tbs::ConfigError);
}

TEST_CASE("downsample_mask examples") {
    const Mask ones = tbs::downsample_mask(Mask(64, 64, 1));
    CHECK(ones.height() == 8);
    CHECK(ones.all());

    Mask block(64, 64);
    for (std::size_t y = 16; y < 24; ++y)
        for (std::size_t x = 40; x < 48; ++x) block.set(y, x, true);
    const Mask d = tbs::downsample_mask(block);
    CHECK(d.count() == 1);
    CHECK(d.at(2, 5) == 1);

    const auto fraction = [](std::size_t on) {
        Mask m(64, 64);
        for (std::size_t i = 0; i < on; ++i) m.set(i / 8, i % 8, true);
        return tbs::downsample_mask(m).at(0, 0);
    };
    CHECK(fraction(31) == 0);
    CHECK(fraction(32) == 1);
    CHECK_THROWS_AS(tbs::downsample_mask(Mask(60, 64)), tbs::DimensionError);
}

TEST_CASE("every feature-resolution mask has foreground and background") {
    GenConfig cfg;
    cfg.shots = 3;
    cfg.mix = {1, 1, 1, 1};
    for (std::uint64_t seed = 0; seed < 300; ++seed) {
        const Episode ep = tbs::generate_episode(cfg, seed);
        for (const auto* r : {&ep.query, &ep.supports[0], &ep.supports[1], &ep.supports[2]}) {
            const Mask d = tbs::downsample_mask(r->mask);
            CHECK(d.any());
            CHECK_FALSE(d.all());
            CHECK(r->mask.any());
            CHECK_FALSE(r->mask.all());
        }
    }
}

TEST_CASE("metadata re-rasterizes to the stored masks") {
    GenConfig cfg;
    cfg.shots = 2;
    cfg.mix = {1, 1, 1, 1};
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const Episode ep = tbs::generate_episode(cfg, seed);
        CHECK(tbs::rasterize_mask(ep.query.shapes, ep.category, 64) == ep.query.mask);
        for (const auto& s : ep.supports) CHECK(tbs::rasterize_mask(s.shapes, ep.category, 64) == s.mask);
    }
}

TEST_CASE("images stay in the unit interval") {
    const GenConfig cfg = config_for(Difficulty::mixed);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const Episode ep = tbs::generate_episode(cfg, seed);
        for (float v : ep.query.image.span()) {
            CHECK(v >= 0.0f);
            CHECK(v <= 1.0f);
        }
    }
}

TEST_CASE("target appearance is shared across an episode") {
    const GenConfig cfg = config_for(Difficulty::mixed, 2);
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        const Episode ep = tbs::generate_episode(cfg, seed);
        const int look = tbs::lookalike_class(ep.category);
        const double t = ep.query.shapes.front().intensity;
        for (const auto& s : ep.supports)
            for (const auto& sh : s.shapes) {
                if (sh.cls == ep.category || sh.cls == look) CHECK(std::abs(sh.intensity - t) <= 0.06 + 1e-12);
                else if (classes_in(ep.query).count(sh.cls) == 0) CHECK(std::abs(sh.intensity - t) >= 0.15 - 0.03 - 1e-12);
            }
    }
}

TEST_CASE("stream episodes balance the test classes") {
    for (int fold = 0; fold < 4; ++fold) {
        GenConfig cfg;
        cfg.classes = tbs::fold_split(fold).test_classes;
        std::map<int, int> counts;
        const std::size_t n = 1000;
        for (std::size_t i = 0; i < n; ++i) ++counts[tbs::stream_episode(cfg, 99, i).category];
        CHECK(counts.size() == 2);
        for (auto [cls, k] : counts) {
            CHECK(std::abs(k - int(n / 2)) <= int(0.05 * n / 2));
            CHECK(std::find(cfg.classes.begin(), cfg.classes.end(), cls) != cfg.classes.end());
        }
    }
}

TEST_CASE("random category draws are roughly balanced") {
    GenConfig cfg;
    cfg.classes = tbs::fold_split(2).test_classes;
    std::map<int, int> counts;
    for (std::uint64_t seed = 0; seed < 1000; ++seed) ++counts[tbs::generate_episode(cfg, seed).category];
    for (auto [cls, k] : counts) CHECK(std::abs(k - 500) <= 50);
}

TEST_CASE("episode dump round trip") {
    GenConfig cfg;
    cfg.shots = 2;
    cfg.mix = {1, 1, 1, 1};
    std::vector<Episode> eps;
    for (std::uint64_t i = 0; i < 5; ++i) eps.push_back(tbs::stream_episode(cfg, 3, i));
    std::stringstream buf;
    tbs::write_episode_dump(buf, eps);
    CHECK(buf.str().substr(0, 4) == "TBSE");
    const auto back = tbs::read_episode_dump(buf);
    REQUIRE(back.size() == eps.size());
    for (std::size_t i = 0; i < eps.size(); ++i) {
        CHECK(back[i].seed == eps[i].seed);
        CHECK(back[i].category == eps[i].category);
        CHECK(back[i].difficulty == eps[i].difficulty);
        CHECK(tbs::bit_equal(back[i].query.image, eps[i].query.image));
        CHECK(back[i].supports[1].mask == eps[i].supports[1].mask);
    }
    std::stringstream bad("TBSX....");
    CHECK_THROWS_AS(tbs::read_episode_dump(bad), tbs::IoError);
}

TEST_CASE("encoder shape contract and zero input") {
    tbs::Rng rng(1);
    auto p = tbs::EncoderParams<double>::init(rng);
    tbs::Tape<double> t;
    tbs::Tensor<double> img({1, 64, 64});
    for (auto& v : img.span()) v = rng.uniform();
    CHECK(t.value(tbs::extract_features(t, p, img)).shape() == tbs::Shape{32, 8, 8});
    for (double v : t.value(tbs::extract_features(t, p, tbs::Tensor<double>({1, 64, 64}))).span()) CHECK(v == 0.0);
    CHECK_THROWS_AS(tbs::extract_features(t, p, tbs::Tensor<double>({1, 32, 32})), tbs::DimensionError);
    CHECK_THROWS_AS(tbs::extract_features(t, p, tbs::Tensor<double>({3, 64, 64})), tbs::DimensionError);
}

TEST_CASE("an 8-pixel shift moves interior features by one cell") {
    tbs::Rng rng(2);
    auto p = tbs::EncoderParams<double>::init(rng);
    for (auto& v : p.patch_embed.bias->span()) v = rng.uniform(-0.1, 0.1);
    std::vector<double> canvas(64 * 72);
    for (auto& v : canvas) v = rng.uniform();
    tbs::Tensor<double> a({1, 64, 64}), b({1, 64, 64});
    for (std::size_t y = 0; y < 64; ++y)
        for (std::size_t x = 0; x < 64; ++x) {
            a[y * 64 + x] = canvas[y * 72 + x + 8];
            b[y * 64 + x] = canvas[y * 72 + x];
        }
    tbs::Tape<double> t;
    const auto& fa = t.value(tbs::extract_features(t, p, a));
    const auto& fb = t.value(tbs::extract_features(t, p, b));
    // Cells 2..5 of `a` see no padding, nor do cells 3..6 of `b`.
    for (std::size_t c = 0; c < 32; ++c)
        for (std::size_t y = 0; y < 8; ++y)
            for (std::size_t x = 2; x <= 5; ++x) CHECK(std::abs(fa[(c * 8 + y) * 8 + x] - fb[(c * 8 + y) * 8 + x + 1]) < 1e-5);
}

TEST_CASE("patchify lays patches out h-major") {
    tbs::Tensor<float> img({1, 8, 8});
    for (std::size_t i = 0; i < 64; ++i) img[i] = float(i);
    const auto p = tbs::patchify(img, 4);
    CHECK(p.shape() == tbs::Shape{4, 16});
    CHECK(p.at(1, 0) == 4.0f);
    CHECK(p.at(2, 0) == 32.0f);
    CHECK(p.at(3, 15) == 63.0f);
}
