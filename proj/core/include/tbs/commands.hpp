#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>

#include "tbs/config.hpp"
#include "tbs/evaluate.hpp"
#include "tbs/train.hpp"

namespace tbs {

// Stable process exit codes.
enum ExitCode : int {
    kExitOk = 0,
    kExitFailure = 1,
    kExitConfig = 2,
    kExitNumeric = 3,
    kExitCheckpoint = 4,
    kExitGradcheck = 5,
};

struct CommandOptions {
    std::filesystem::path config;
    std::optional<std::uint64_t> seed;
    std::optional<std::filesystem::path> checkpoint;
    std::optional<std::filesystem::path> out;
    std::optional<std::size_t> shots;
    bool ablation = false;
};

// Loads the config file and applies command-line overrides, re-validating.
RunConfig resolve_config(const CommandOptions& opts);

// Trains on the fold's train classes from the run seed. `on_step` sees the
// 1-based step, the batch loss and the updated state.
using StepHook = std::function<void(std::size_t step, double loss, const TrainState& state)>;
TrainState train_model(const RunConfig& cfg, const StepHook& on_step = {});

// Evaluates the fold's test classes with the given score switches.
EvalReport evaluate_model(const ModelParams<float>& params, const RunConfig& cfg, const Ablation& ablation);
EvalReport evaluate_predictor(const Predictor& predict, const RunConfig& cfg, const Ablation& ablation);

std::filesystem::path default_checkpoint(const RunConfig& cfg);

// Commands. They throw tbs::Error subclasses; run_command maps those to exit
// codes.
void cmd_gen(const RunConfig& cfg, std::ostream& log);
void cmd_train(const RunConfig& cfg, std::ostream& log);
void cmd_eval(const RunConfig& cfg, const std::filesystem::path& checkpoint, bool ablation, std::ostream& log);
// Returns false when some case fails.
bool cmd_gradcheck(const RunConfig& cfg, std::ostream& log);
void cmd_visualize(const RunConfig& cfg, const std::filesystem::path& checkpoint, std::ostream& log);

int run_command(const std::string& command, const CommandOptions& opts, std::ostream& out, std::ostream& err);

}  // namespace tbs
