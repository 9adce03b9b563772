#include <CLI11.hpp>

#include <iostream>

#include "tbs/commands.hpp"

int main(int argc, char** argv) {
    CLI::App app{"tbs: background suppression for few-shot segmentation on synthetic episodes"};
    app.require_subcommand(1);

    tbs::CommandOptions opts;
    std::uint64_t seed = 0;
    std::string checkpoint, out;
    std::size_t shots = 0;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", opts.config, "config file (key = value lines)")->required();
        sub->add_option("--seed", seed, "override the run seed");
        sub->add_option("--checkpoint", checkpoint, "checkpoint path (default: <out_dir>/checkpoint.tbsc)");
        sub->add_option("--out", out, "override out_dir");
        sub->add_option("--shots", shots, "override gen.shots")->check(CLI::Range(1, 5));
    };
    add_common(app.add_subcommand("gen", "write a dump of training episodes"));
    add_common(app.add_subcommand("train", "train and write checkpoints and the loss log"));
    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on the fold's test classes");
    add_common(eval);
    eval->add_flag("--ablation", opts.ablation, "run the four score-switch rows on identical episodes");
    add_common(app.add_subcommand("gradcheck", "finite-difference check of every differentiable op"));
    add_common(app.add_subcommand("visualize", "write score maps and contour images for one episode"));

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return tbs::kExitConfig;
    }

    CLI::App* sub = app.get_subcommands().front();
    if (sub->count("--seed")) opts.seed = seed;
    if (sub->count("--checkpoint")) opts.checkpoint = checkpoint;
    if (sub->count("--out")) opts.out = out;
    if (sub->count("--shots")) opts.shots = shots;
    return tbs::run_command(sub->get_name(), opts, std::cout, std::cerr);
}
