#include "tbs/commands.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "tbs/checkpoint.hpp"
#include "tbs/gradcheck.hpp"
#include "tbs/image_io.hpp"

namespace tbs {

namespace fs = std::filesystem;

namespace {

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

std::ofstream open_out(const fs::path& path, bool binary = false) {
    std::ofstream os(path, binary ? std::ios::binary | std::ios::trunc : std::ios::trunc);
    if (!os) throw IoError("cannot open " + path.string() + " for writing");
    return os;
}

std::string file_label(const Ablation& a) {
    std::string s = a.label();
    for (auto& ch : s)
        if (ch == '+') ch = '_';
    return s;
}

std::uint64_t seed_digest(const std::vector<std::uint64_t>& seeds) {
    std::uint64_t h = 0x5eed;
    for (auto s : seeds) h = mix64(h ^ s);
    return h;
}

std::string hex(std::uint64_t v) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string fmt6(const std::optional<double>& v) {
    if (!v) return "";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", *v);
    return buf;
}

}  // namespace

RunConfig resolve_config(const CommandOptions& opts) {
    RunConfig cfg = load_config(opts.config);
    if (opts.seed) cfg.seed = *opts.seed;
    if (opts.shots) cfg.shots = *opts.shots;
    if (opts.out) cfg.out_dir = opts.out->string();
    // Overrides go through the parser again so they are validated the same way.
    return parse_config(serialize_config(cfg));
}

fs::path default_checkpoint(const RunConfig& cfg) { return fs::path(cfg.out_dir) / "checkpoint.tbsc"; }

TrainState train_model(const RunConfig& cfg, const StepHook& on_step) {
    TrainState state = TrainState::init(cfg.seed);
    const GenConfig gen = cfg.gen_config(false);
    const std::uint64_t stream = derive_seed(cfg.seed, kTrainStreamTag);
    std::vector<Episode> batch;
    for (std::size_t step = 1; step <= cfg.steps; ++step) {
        batch.clear();
        for (std::size_t i = 0; i < cfg.batch; ++i) batch.push_back(stream_episode(gen, stream, (step - 1) * cfg.batch + i));
        const double loss = train_step(state, batch, cfg.lr, cfg.ablation);
        if (on_step) on_step(step, loss, state);
    }
    return state;
}

EvalReport evaluate_predictor(const Predictor& predict, const RunConfig& cfg, const Ablation& ablation) {
    EvalReport report;
    report.seed = cfg.seed;
    report.episode_count = cfg.eval_episodes;
    report.ablation = ablation;
    report.per_fold[cfg.fold] =
        evaluate_fold(predict, cfg.gen_config(true), cfg.fold, cfg.seed, cfg.eval_episodes, cfg.miou_mode);
    return report;
}

EvalReport evaluate_model(const ModelParams<float>& params, const RunConfig& cfg, const Ablation& ablation) {
    return evaluate_predictor(model_predictor(params, ablation), cfg, ablation);
}

void cmd_gen(const RunConfig& cfg, std::ostream& log) {
    ensure_dir(cfg.out_dir);
    const GenConfig gen = cfg.gen_config(false);
    const std::uint64_t stream = derive_seed(cfg.seed, kTrainStreamTag);
    std::vector<Episode> eps;
    for (std::size_t i = 0; i < cfg.gen_episodes; ++i) eps.push_back(stream_episode(gen, stream, i));
    const fs::path path = fs::path(cfg.out_dir) / "episodes.tbse";
    auto os = open_out(path, true);
    write_episode_dump(os, eps);
    if (!os) throw IoError("failed writing " + path.string());
    log << "wrote " << eps.size() << " episodes to " << path.string() << '\n';
}

void cmd_train(const RunConfig& cfg, std::ostream& log) {
    const fs::path out(cfg.out_dir);
    ensure_dir(out);
    {
        auto os = open_out(out / "config.txt");
        os << serialize_config(cfg);
    }
    auto loss_log = open_out(out / "loss_log.csv");
    loss_log << "step,loss\n";
    char line[64];
    const TrainState state = train_model(cfg, [&](std::size_t step, double loss, const TrainState& st) {
        std::snprintf(line, sizeof line, "%zu,%.9g\n", step, loss);
        loss_log << line;
        if (step % cfg.checkpoint_every == 0) {
            char name[48];
            std::snprintf(name, sizeof name, "checkpoint_%06zu.tbsc", step);
            save_model(out / name, st.params);
        }
        if (step % 100 == 0 || step == cfg.steps) log << "step " << step << " loss " << loss << '\n';
    });
    save_model(default_checkpoint(cfg), state.params);
    if (!loss_log) throw IoError("failed writing " + (out / "loss_log.csv").string());
    log << "checkpoint: " << default_checkpoint(cfg).string() << '\n';
}

void cmd_eval(const RunConfig& cfg, const fs::path& checkpoint, bool ablation, std::ostream& log) {
    const ModelParams<float> params = load_model(checkpoint);
    const fs::path out(cfg.out_dir);
    ensure_dir(out);
    if (!ablation) {
        const EvalReport report = evaluate_model(params, cfg, cfg.ablation);
        auto csv = open_out(out / "metrics.csv");
        write_metrics_csv(csv, report);
        std::ostringstream summary;
        write_summary(summary, report);
        open_out(out / "summary.txt") << summary.str();
        log << summary.str();
        return;
    }
    const Ablation rows[4] = {{false, false}, {true, false}, {false, true}, {true, true}};
    auto grid = open_out(out / "ablation.csv");
    grid << "ablation,use_qs,use_ts,miou,fb_iou,aa_sf_qf,aa_sb_qb,aa_avg\n";
    std::ostringstream meta, summary;
    std::optional<std::uint64_t> first_digest;
    for (const auto& a : rows) {
        const EvalReport report = evaluate_model(params, cfg, a);
        const FoldReport& fr = report.per_fold.at(cfg.fold);
        const std::uint64_t digest = seed_digest(fr.episode_seeds);
        if (first_digest && *first_digest != digest) throw Error("ablation rows saw different episode seeds");
        first_digest = digest;
        auto csv = open_out(out / ("metrics_" + file_label(a) + ".csv"));
        write_metrics_csv(csv, report);
        grid << a.label() << ',' << a.use_qs << ',' << a.use_ts << ',' << fmt6(fr.miou.miou) << ','
             << fmt6(fr.fb_iou) << ',' << fmt6(fr.attention.sf_qf) << ',' << fmt6(fr.attention.sb_qb) << ','
             << fmt6(fr.attention.average()) << '\n';
        meta << a.label() << " episodes " << fr.episode_seeds.size() << " seed_digest " << hex(digest) << '\n';
        write_summary(summary, report);
    }
    meta << "identical_episode_seeds true\n";
    open_out(out / "ablation_meta.txt") << meta.str();
    open_out(out / "summary.txt") << summary.str();
    log << summary.str();
}

bool cmd_gradcheck(const RunConfig& cfg, std::ostream& log) {
    GradcheckOptions opts;
    opts.seed = cfg.seed;
    return run_gradcheck_suite(default_gradcheck_cases(cfg.seed), opts, log);
}

void cmd_visualize(const RunConfig& cfg, const fs::path& checkpoint, std::ostream& log) {
    if (cfg.ablation.bypass()) throw ConfigError("visualize needs ablation.use_qs or ablation.use_ts");
    const ModelParams<float> params = load_model(checkpoint);
    const Episode ep = generate_episode(cfg.gen_config(true), cfg.seed);
    Tape<float> t;
    t.set_grad_enabled(false);
    const EpisodeForward f = forward_episode(t, params, ep, cfg.ablation);

    const fs::path out(cfg.out_dir);
    ensure_dir(out);
    const std::size_t factor = ep.query.mask.height() / f.query_mask.height();
    std::ostringstream ranges;
    char line[160];
    for (std::size_t j = 0; j < f.traces.size(); ++j) {
        const TbsTrace& tr = f.traces[j];
        const struct {
            const char* stem;
            const ScoreMap& map;
        } planes[2] = {{"rb", *tr.background}, {"rdot", *tr.pinned}};
        for (const auto& p : planes) {
            ScoreRange range;
            const GrayImage img = score_image(t.value(p.map.values), factor, range);
            const std::string name = std::string(p.stem) + "_" + std::to_string(j) + ".pgm";
            write_pgm(out / name, img);
            std::snprintf(line, sizeof line, "%s %.9g %.9g\n", name.c_str(), range.lo, range.hi);
            ranges << line;
        }
        RgbImage sup = intensity_rgb(ep.supports[j].image);
        draw_contour(sup, ep.supports[j].mask, {0, 255, 0});
        write_ppm(out / ("support_" + std::to_string(j) + ".ppm"), sup);
    }
    RgbImage query = intensity_rgb(ep.query.image);
    draw_contour(query, ep.query.mask, {0, 255, 0});
    draw_contour(query, upsample_threshold(t.value(f.head.probs), factor), {255, 0, 0});
    write_ppm(out / "query.ppm", query);
    open_out(out / "ranges.txt") << ranges.str();
    log << "episode seed " << ep.seed << " class " << shape_class_name(ep.category) << " difficulty "
        << difficulty_name(ep.difficulty) << ": wrote " << f.traces.size() << " shot(s) to " << out.string() << '\n';
}

int run_command(const std::string& command, const CommandOptions& opts, std::ostream& out, std::ostream& err) {
    try {
        const RunConfig cfg = resolve_config(opts);
        const fs::path ckpt = opts.checkpoint.value_or(default_checkpoint(cfg));
        if (command == "gen") cmd_gen(cfg, out);
        else if (command == "train") cmd_train(cfg, out);
        else if (command == "eval") cmd_eval(cfg, ckpt, opts.ablation, out);
        else if (command == "visualize") cmd_visualize(cfg, ckpt, out);
        else if (command == "gradcheck") {
            if (!cmd_gradcheck(cfg, out)) {
                err << "error: gradcheck failed\n";
                return kExitGradcheck;
            }
        } else {
            err << "error: unknown command '" << command << "'\n";
            return kExitConfig;
        }
        return kExitOk;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const NumericError& e) {
        err << "numeric error: " << e.what() << '\n';
        return kExitNumeric;
    } catch (const CheckpointError& e) {
        err << "checkpoint error: " << e.what() << '\n';
        return kExitCheckpoint;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitFailure;
    }
}

}  // namespace tbs
