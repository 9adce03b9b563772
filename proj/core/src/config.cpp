#include "tbs/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace tbs {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

template <typename N>
N parse_number(const std::string& key, const std::string& v) {
    N out{};
    const auto* end = v.data() + v.size();
    const auto [ptr, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || ptr != end) throw ConfigError("invalid value for " + key + ": '" + v + "'");
    return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true") return true;
    if (v == "false") return false;
    throw ConfigError("invalid boolean for " + key + ": '" + v + "' (expected true or false)");
}

std::string format_double(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

constexpr const char* kMixKeys[4] = {"gen.mix.clean", "gen.mix.irrelevant_bg", "gen.mix.target_similar_bg",
                                     "gen.mix.mixed"};

void validate(const RunConfig& c) {
    if (c.image_size != kImageSize) throw ConfigError("image_size must be 64");
    if (c.fold < 0 || c.fold >= kNumFolds) throw ConfigError("fold must be in 0..3");
    if (c.shots < 1 || c.shots > 5) throw ConfigError("gen.shots must be in 1..5");
    if (c.classes != kNumShapeClasses) throw ConfigError("gen.classes must be 8");
    if (!(c.noise >= 0) || c.noise > 1) throw ConfigError("gen.noise must be in [0, 1]");
    double total = 0;
    for (double w : c.mix) {
        if (!(w >= 0)) throw ConfigError("gen.mix weights must be non-negative");
        total += w;
    }
    if (!(total > 0)) throw ConfigError("gen.mix weights must not all be zero");
    if (!(c.lr >= 0)) throw ConfigError("train.lr must be non-negative");
    if (c.batch < 1) throw ConfigError("train.batch must be at least 1");
    if (c.checkpoint_every < 1) throw ConfigError("train.checkpoint_every must be at least 1");
    if (c.eval_episodes < 1) throw ConfigError("eval.episodes must be at least 1");
    if (c.out_dir.empty()) throw ConfigError("out_dir must not be empty");
}

using Setter = std::function<void(RunConfig&, const std::string& key, const std::string& value)>;

const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = [] {
        std::map<std::string, Setter> t;
        t["seed"] = [](RunConfig& c, const std::string& k, const std::string& v) {
            c.seed = parse_number<std::uint64_t>(k, v);
        };
        t["image_size"] = [](RunConfig& c, const std::string& k, const std::string& v) {
            c.image_size = parse_number<std::size_t>(k, v);
        };
        t["fold"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.fold = parse_number<int>(k, v); };
        t["out_dir"] = [](RunConfig& c, const std::string&, const std::string& v) { c.out_dir = v; };
        t["gen.shots"] = [](RunConfig& c, const std::string& k, const std::string& v) {
            c.shots = parse_number<std::size_t>(k, v);
        };
        t["gen.classes"] = [](RunConfig& c, const std::string& k, const std::string& v) {
            c.classes = parse_number<int>(k, v);
        };
        t["gen.noise"] = [](RunConfig& c, const std::string& k, const std::string& v) {
            c.noise = parse_number<double>(k, v);
        };
        for (int i = 0; i < 4; ++i)
            t[kMixKeys[i]] = [i](RunConfig& c, const std::string& k, const std::string& v) {
                c.mix[i] = parse_number<double>(k, v);
            };
        t["gen.episodes"] = [](RunConfig& c, const std::string& k, const std::string& v) {
            c.gen_episodes = parse_number<std::size_t>(k, v);
        };
        t["train.lr"] = [](RunConfig& c, const std::string& k, const std::string& v) {
            c.lr = parse_number<double>(k, v);
        };
        t["train.steps"] = [](RunConfig& c, const std::string& k, const std::string& v) {
            c.steps = parse_number<std::size_t>(k, v);
        };
        t["train.batch"] = [](RunConfig& c, const std::string& k, const std::string& v) {
            c.batch = parse_number<std::size_t>(k, v);
        };
        t["train.checkpoint_every"] = [](RunConfig& c, const std::string& k, const std::string& v) {
            c.checkpoint_every = parse_number<std::size_t>(k, v);
        };
        t["ablation.use_qs"] = [](RunConfig& c, const std::string& k, const std::string& v) {
            c.ablation.use_qs = parse_bool(k, v);
        };
        t["ablation.use_ts"] = [](RunConfig& c, const std::string& k, const std::string& v) {
            c.ablation.use_ts = parse_bool(k, v);
        };
        t["eval.episodes"] = [](RunConfig& c, const std::string& k, const std::string& v) {
            c.eval_episodes = parse_number<std::size_t>(k, v);
        };
        t["eval.miou_mode"] = [](RunConfig& c, const std::string& k, const std::string& v) {
            if (v == "accumulate") c.miou_mode = MiouMode::accumulate;
            else if (v == "per_episode") c.miou_mode = MiouMode::per_episode;
            else throw ConfigError("invalid value for " + k + ": '" + v + "' (accumulate or per_episode)");
        };
        return t;
    }();
    return table;
}

}  // namespace

GenConfig RunConfig::gen_config(bool test_classes) const {
    GenConfig g;
    g.image_size = image_size;
    g.shots = shots;
    g.num_classes = classes;
    const FoldSplit split = fold_split(fold);
    g.classes = test_classes ? split.test_classes : split.train_classes;
    g.mix = mix;
    g.noise_sigma = noise;
    return g;
}

RunConfig parse_config(const std::string& text) {
    RunConfig cfg;
    std::set<std::string> seen;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        const auto it = setters().find(key);
        if (it == setters().end()) throw ConfigError("line " + std::to_string(lineno) + ": unknown key '" + key + "'");
        if (!seen.insert(key).second)
            throw ConfigError("line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
        it->second(cfg, key, value);
    }
    validate(cfg);
    return cfg;
}

std::string serialize_config(const RunConfig& c) {
    std::ostringstream os;
    os << "seed = " << c.seed << '\n';
    os << "image_size = " << c.image_size << '\n';
    os << "fold = " << c.fold << '\n';
    os << "out_dir = " << c.out_dir << '\n';
    os << "gen.shots = " << c.shots << '\n';
    os << "gen.classes = " << c.classes << '\n';
    os << "gen.noise = " << format_double(c.noise) << '\n';
    for (int i = 0; i < 4; ++i) os << kMixKeys[i] << " = " << format_double(c.mix[i]) << '\n';
    os << "gen.episodes = " << c.gen_episodes << '\n';
    os << "train.lr = " << format_double(c.lr) << '\n';
    os << "train.steps = " << c.steps << '\n';
    os << "train.batch = " << c.batch << '\n';
    os << "train.checkpoint_every = " << c.checkpoint_every << '\n';
    os << "ablation.use_qs = " << (c.ablation.use_qs ? "true" : "false") << '\n';
    os << "ablation.use_ts = " << (c.ablation.use_ts ? "true" : "false") << '\n';
    os << "eval.episodes = " << c.eval_episodes << '\n';
    os << "eval.miou_mode = " << (c.miou_mode == MiouMode::accumulate ? "accumulate" : "per_episode") << '\n';
    return os.str();
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

}  // namespace tbs
