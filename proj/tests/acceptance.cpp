// Acceptance suite: one PASS/FAIL line per criterion, exit status 0 iff all pass.
// TBS_ACCEPT_SEEDS overrides the number of training seeds of the ablation grid
// (default 5) for quick local runs.
#include <sys/wait.h>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <sstream>
#include <string>

#include "oracles.hpp"
#include "tbs/checkpoint.hpp"
#include "tbs/commands.hpp"
#include "tbs/encoder.hpp"
#include "tbs/gradcheck.hpp"

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

// Tolerances and thresholds.
constexpr double kGradTol = 1e-4;
constexpr std::size_t kGradProbes = 100;
constexpr double kGradSeconds = 120;
constexpr double kOracleTol = 1e-6;
constexpr int kOracleInstances = 60;
constexpr double kRangeSlack = 1e-6;
constexpr int kRangeEpisodes = 1000;
constexpr double kAblationMargin = 0.01;  // one mIoU point
constexpr double kGridSeconds = 30 * 60;
constexpr int kAaWins = 4;

int failures = 0;

void report(int id, bool ok, const std::string& what, const std::string& detail) {
    std::printf("%s criterion %d: %s (%s)\n", ok ? "PASS" : "FAIL", id, what.c_str(), detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c, d);
    return buf;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) return "<missing " + p.string() + ">";
    return {std::istreambuf_iterator<char>(in), {}};
}

int shell(const std::string& cmd) {
    const int st = std::system((cmd + " >/dev/null 2>&1").c_str());
    return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

void gradcheck() {
    const auto t0 = Clock::now();
    std::ostringstream log;
    std::vector<tbs::GradcheckResult> results;
    tbs::GradcheckOptions opts;
    opts.probes = kGradProbes;
    opts.tolerance = kGradTol;
    const bool ok = tbs::run_gradcheck_suite(tbs::default_gradcheck_cases(1), opts, log, &results);
    const double secs = seconds_since(t0);
    double worst = 0;
    std::size_t min_probes = kGradProbes;
    for (const auto& r : results) {
        worst = std::max(worst, r.max_rel_error);
        min_probes = std::min(min_probes, r.probes);
    }
    report(1, ok && min_probes >= kGradProbes && secs < kGradSeconds, "gradcheck suite",
           std::to_string(results.size()) + " cases, worst rel err " + fmt("%.2e", worst) + ", min probes " +
               std::to_string(min_probes) + fmt(", %.1f s", secs));
}

void attention_oracle() {
    tbs::Rng rng(2024);
    double worst = 0;
    int instances = 0;
    for (int rep = 0; rep < kOracleInstances; ++rep) {
        const std::size_t c = 1 + rng.below(8), d = 1 + rng.below(8);
        const std::size_t ns = 1 + rng.below(8), nc = 1 + rng.below(8);
        auto q = oracle::random_linear(c, d, rng.uniform() < 0.5, rng);
        auto k = oracle::random_linear(c, d, rng.uniform() < 0.5, rng);
        auto v = oracle::random_linear(c, d, rng.uniform() < 0.5, rng);
        const auto src = oracle::random_tensor({ns, c}, rng), ctx = oracle::random_tensor({nc, c}, rng);
        tbs::Tape<double> t;
        const auto out =
            tbs::cross_reconstruct(t, tbs::AttentionHeads<double>{q, k, v}, t.constant(src), t.constant(ctx));
        const auto want = oracle::cross_reconstruct(q, k, v, oracle::to_mat(src), oracle::to_mat(ctx));
        for (std::size_t i = 0; i < ns; ++i) {
            for (std::size_t j = 0; j < d; ++j)
                worst = std::max(worst, std::abs(t.value(out.recon).at(i, j) - want.recon[i][j]));
            for (std::size_t j = 0; j < nc; ++j)
                worst = std::max(worst, std::abs(t.value(out.attn).at(i, j) - want.attn[i][j]));
        }
        ++instances;

        // Head: a query plane of h x w tokens against K shots of 1..8 tokens.
        const std::size_t h = 1 + rng.below(2), w = 1 + rng.below(4), shots = 1 + rng.below(3);
        tbs::HeadParams<double> hp{oracle::random_linear(c, d, false, rng), oracle::random_linear(c, d, false, rng)};
        const auto query = oracle::random_tensor({h * w, c}, rng);
        std::vector<tbs::Tensor<double>> feats;
        std::vector<tbs::Mask> masks;
        for (std::size_t j = 0; j < shots; ++j) {
            const std::size_t sh = 1 + rng.below(2), sw = 1 + rng.below(4);
            feats.push_back(oracle::random_tensor({sh * sw, c}, rng));
            tbs::Mask m(sh, sw);
            for (std::size_t i = 0; i < m.size(); ++i) m.set(i, rng.uniform() < 0.5);
            masks.push_back(m);
        }
        tbs::Tape<double> th;
        std::vector<tbs::ShotFeatures> sf;
        std::vector<oracle::Mat> mats;
        for (std::size_t j = 0; j < shots; ++j) {
            sf.push_back({th.constant(feats[j]), &masks[j]});
            mats.push_back(oracle::to_mat(feats[j]));
        }
        const auto got = tbs::predict_mask(th, hp, th.constant(query), sf, h, w);
        const auto ref = oracle::predict_mask(hp.q_head, hp.k_head, oracle::to_mat(query), mats, masks);
        const auto& probs = th.value(got.probs);
        const auto& attn = th.value(got.attn);
        for (std::size_t i = 0; i < h * w; ++i) {
            worst = std::max(worst, std::abs(probs[i] - ref.probs[i]));
            for (std::size_t j = 0; j < attn.shape()[1]; ++j)
                worst = std::max(worst, std::abs(attn.at(i, j) - ref.attn[i][j]));
        }
        ++instances;
    }
    report(2, worst < kOracleTol, "attention and head match scalar-loop oracles",
           std::to_string(instances) + " instances, max abs diff " + fmt("%.2e", worst));
}

void ranges_and_pinning() {
    const tbs::Ablation rows[4] = {{true, true}, {true, false}, {false, true}, {false, false}};
    tbs::GenConfig gen;
    std::size_t violations = 0, checked = 0;
    for (int e = 0; e < kRangeEpisodes; ++e) {
        gen.shots = 1 + std::size_t(e % 3);
        const auto ep = tbs::generate_episode(gen, 50000 + std::uint64_t(e));
        const auto params = tbs::ModelParams<float>::init(std::uint64_t(e % 50));
        tbs::Tape<float> t;
        t.set_grad_enabled(false);
        const auto q = tbs::to_tokens(t, tbs::extract_features(t, params.encoder, ep.query.image));
        for (const auto& sup : ep.supports) {
            const auto s = tbs::to_tokens(t, tbs::extract_features(t, params.encoder, sup.image));
            const auto m = tbs::downsample_mask(sup.mask);
            for (const auto& a : rows) {
                const auto tr = tbs::tbs_forward(t, params.tbs, q, s, m, a);
                auto bad = [&](bool cond) {
                    ++checked;
                    if (cond) ++violations;
                };
                if (a.bypass()) {
                    const auto& x = t.value(tr.adapted);
                    const auto& f = t.value(s);
                    bad(x.size() != f.size() || std::memcmp(x.data(), f.data(), x.size() * sizeof(float)) != 0);
                    continue;
                }
                for (const auto* sm : {tr.query ? &*tr.query : nullptr, tr.target ? &*tr.target : nullptr}) {
                    if (!sm) continue;
                    for (float v : t.value(sm->values).span()) bad(!(v >= -1 - kRangeSlack && v <= 1 + kRangeSlack));
                }
                const auto& rb = t.value(tr.background->values);
                const auto& rr = t.value(tr.refined->values);
                const auto& rp = t.value(tr.pinned->values);
                for (std::size_t i = 0; i < m.size(); ++i) {
                    bad(!(rr[i] > 0 && rr[i] < 1));
                    if (m[i]) {
                        bad(rb[i] != 0.0f);
                        bad(rp[i] != 1.0f);
                    }
                }
            }
        }
    }
    report(3, violations == 0, "score ranges, pinning and bypass identity",
           std::to_string(kRangeEpisodes) + " episodes, " + std::to_string(checked) + " checks, " +
               std::to_string(violations) + " violations");
}

struct GridRow {
    tbs::Ablation ablation;
    std::vector<double> miou, aa_sf;
};

void ablation_grid() {
    int seeds = 5;
    if (const char* s = std::getenv("TBS_ACCEPT_SEEDS")) seeds = std::max(1, std::atoi(s));
    std::array<GridRow, 4> rows{{{{false, false}, {}, {}},
                                 {{true, false}, {}, {}},
                                 {{false, true}, {}, {}},
                                 {{true, true}, {}, {}}}};
    const auto t0 = Clock::now();
    for (int seed = 1; seed <= seeds; ++seed) {
        for (auto& row : rows) {
            tbs::RunConfig cfg;
            cfg.seed = std::uint64_t(seed);
            cfg.ablation = row.ablation;
            const auto state = tbs::train_model(cfg);
            const auto rep = tbs::evaluate_model(state.params, cfg, row.ablation);
            const auto& fr = rep.per_fold.at(cfg.fold);
            row.miou.push_back(fr.miou.miou.value_or(0));
            row.aa_sf.push_back(fr.attention.sf_qf.value_or(0));
            std::printf("  seed %d %-8s miou %.4f fb_iou %.4f aa_sf_qf %.4f\n", seed, row.ablation.label().c_str(),
                        row.miou.back(), fr.fb_iou, row.aa_sf.back());
            std::fflush(stdout);
        }
    }
    const double secs = seconds_since(t0);
    auto mean = [](const std::vector<double>& v) {
        double s = 0;
        for (double x : v) s += x;
        return s / double(v.size());
    };
    const double base = mean(rows[0].miou), qs = mean(rows[1].miou), ts = mean(rows[2].miou), both = mean(rows[3].miou);
    const bool ok = both - base >= kAblationMargin && both >= qs && secs <= kGridSeconds;
    report(4, ok, "ablation direction over " + std::to_string(seeds) + " seeds",
           fmt("mean mIoU baseline %.4f qs %.4f ts %.4f qs+ts %.4f", base, qs, ts, both) + fmt(", %.0f s", secs));

    int wins = 0;
    std::string per_seed;
    for (int i = 0; i < seeds; ++i) {
        wins += rows[3].aa_sf[std::size_t(i)] > rows[0].aa_sf[std::size_t(i)];
        per_seed += fmt(" %.3f/%.3f", rows[3].aa_sf[std::size_t(i)], rows[0].aa_sf[std::size_t(i)]);
    }
    const int need = (kAaWins * seeds + 4) / 5;
    report(5, wins >= need, "averaged attention SF-QF with scores above baseline",
           std::to_string(wins) + "/" + std::to_string(seeds) + " seeds, tbs/baseline" + per_seed);
}

void metric_examples() {
    using tbs::Mask;
    bool ok = true;
    const Mask a(2, 2, std::vector<std::uint8_t>{1, 1, 0, 0});
    const Mask b(2, 2, std::vector<std::uint8_t>{1, 0, 1, 0});
    const Mask d(2, 2, std::vector<std::uint8_t>{0, 0, 1, 1});
    ok &= tbs::iou(a, a) == 1.0;
    ok &= tbs::iou(a, d) == 0.0;
    ok &= tbs::iou(a, b) == 1.0 / 3.0;
    ok &= *tbs::miou({tbs::score_episode(0, a, b)}, {0}).miou == tbs::iou(a, b);

    auto ep = [](int cls, std::uint64_t i, std::uint64_t u) {
        tbs::EpisodeResult r;
        r.category = cls;
        r.foreground = {i, u};
        return r;
    };
    ok &= *tbs::miou({ep(0, 1, 5), ep(1, 4, 5)}, {0, 1}).miou == 0.5;
    ok &= *tbs::miou({ep(2, 1, 3), ep(2, 3, 5)}, {2}).miou == 0.5;

    tbs::EpisodeResult fb;
    fb.foreground = {2, 4};
    fb.background = {6, 8};
    ok &= tbs::fb_iou({fb}) == 0.625;
    ok &= tbs::fb_iou({tbs::score_episode(0, b, b)}) == 1.0;
    const Mask left(2, 2, std::vector<std::uint8_t>{1, 0, 1, 0});
    const Mask right(2, 2, std::vector<std::uint8_t>{0, 1, 0, 1});
    ok &= tbs::fb_iou({tbs::score_episode(0, right, left)}) == 0.0;
    report(6, ok, "metric examples", "iou 1/3, accumulation 4/8, fb-iou 0.625");
}

void determinism(const fs::path& root) {
    tbs::RunConfig cfg;
    cfg.steps = 60;
    cfg.batch = 2;
    cfg.checkpoint_every = 30;
    cfg.eval_episodes = 100;
    const char* files[] = {"loss_log.csv", "checkpoint_000030.tbsc", "checkpoint_000060.tbsc", "checkpoint.tbsc",
                           "metrics.csv"};
    std::string first[5];
    bool ok = true;
    std::string detail;
    for (int run = 0; run < 2; ++run) {
        const fs::path dir = root / ("det" + std::to_string(run));
        fs::create_directories(dir);
        cfg.out_dir = (dir / "out").string();
        {
            std::ofstream(dir / "run.cfg") << tbs::serialize_config(cfg);
        }
        const std::string base = std::string("\"") + TBS_BINARY + "\" %s --config \"" + (dir / "run.cfg").string() + "\"";
        char cmd[1024];
        std::snprintf(cmd, sizeof cmd, base.c_str(), "train");
        ok &= shell(cmd) == 0;
        std::snprintf(cmd, sizeof cmd, base.c_str(), "eval");
        ok &= shell(cmd) == 0;
        for (int f = 0; f < 5; ++f) {
            const std::string bytes = slurp(fs::path(cfg.out_dir) / files[f]);
            if (run == 0) first[f] = bytes;
            else if (bytes != first[f]) {
                ok = false;
                detail += std::string(" differs:") + files[f];
            }
        }
    }
    report(7, ok, "train and eval twice are byte-identical", "loss log, 3 checkpoints, metrics csv" + detail);
}

void persistence(const fs::path& root) {
    tbs::RunConfig cfg;
    cfg.steps = 40;
    cfg.batch = 2;
    cfg.eval_episodes = 200;
    cfg.out_dir = (root / "persist").string();
    fs::create_directories(cfg.out_dir);
    const auto state = tbs::train_model(cfg);
    const fs::path ckpt = fs::path(cfg.out_dir) / "checkpoint.tbsc";
    tbs::save_model(ckpt, state.params);
    const auto loaded = tbs::load_model(ckpt);
    std::ostringstream a, b;
    tbs::write_metrics_csv(a, tbs::evaluate_model(state.params, cfg, cfg.ablation));
    tbs::write_metrics_csv(b, tbs::evaluate_model(loaded, cfg, cfg.ablation));
    bool same_params = true;
    std::vector<const tbs::Tensor<float>*> pa, pb;
    state.params.for_each([&](const std::string&, const tbs::Tensor<float>& t) { pa.push_back(&t); });
    loaded.for_each([&](const std::string&, const tbs::Tensor<float>& t) { pb.push_back(&t); });
    same_params &= pa.size() == pb.size();
    for (std::size_t i = 0; same_params && i < pa.size(); ++i)
        same_params &= pa[i]->shape() == pb[i]->shape() &&
                       std::memcmp(pa[i]->data(), pb[i]->data(), pa[i]->size() * sizeof(float)) == 0;

    std::string bytes = slurp(ckpt);
    bytes[bytes.size() / 2] ^= 0x04;
    const fs::path bad = fs::path(cfg.out_dir) / "corrupt.tbsc";
    std::ofstream(bad, std::ios::binary) << bytes;
    std::ofstream(fs::path(cfg.out_dir) / "run.cfg") << tbs::serialize_config(cfg);
    const int code = shell(std::string("\"") + TBS_BINARY + "\" eval --config \"" +
                           (fs::path(cfg.out_dir) / "run.cfg").string() + "\" --checkpoint \"" + bad.string() + "\"");
    const bool ok = same_params && a.str() == b.str() && code == tbs::kExitCheckpoint;
    report(8, ok, "checkpoint round trip and corruption detection",
           std::string("params ") + (same_params ? "bit-exact" : "differ") + ", eval csv " +
               (a.str() == b.str() ? "identical" : "differs") + ", corrupt eval exit " + std::to_string(code));
}

}  // namespace

int main() {
    const fs::path root = fs::temp_directory_path() / "tbs_acceptance";
    fs::remove_all(root);
    fs::create_directories(root);
    try {
        gradcheck();
        attention_oracle();
        ranges_and_pinning();
        ablation_grid();
        metric_examples();
        determinism(root);
        persistence(root);
    } catch (const std::exception& e) {
        std::printf("FAIL acceptance aborted: %s\n", e.what());
        return 1;
    }
    std::printf("%d criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
