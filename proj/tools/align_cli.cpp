#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "align/data.hpp"
#include "align/errors.hpp"
#include "align/gradcheck.hpp"
#include "align/model.hpp"
#include "align/trainer.hpp"

namespace {

using namespace align;

std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot read " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

std::string default_out_dir(const std::string& fallback) {
    const char* env = std::getenv("NEUALIGN_OUT_DIR");
    return env && *env ? std::string(env) : fallback;
}

std::string fmt17(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// ---------------------------------------------------------------------------
// gen-data
// ---------------------------------------------------------------------------

struct GenDataOptions {
    GeneratorConfig gen;
    int train_episodes = 200;
    int val_episodes = 40;
    int test_episodes = 40;
};

GenDataOptions parse_gen_config(const std::string& text) {
    GenDataOptions opt;
    nlohmann::json j = nlohmann::json::parse(text);
    for (auto& [key, value] : j.items()) {
        if (key == "gen.train_episodes") opt.train_episodes = value.get<int>();
        else if (key == "gen.val_episodes") opt.val_episodes = value.get<int>();
        else if (key == "gen.test_episodes") opt.test_episodes = value.get<int>();
        else if (key == "gen.clips_min") opt.gen.clips_min = value.get<int>();
        else if (key == "gen.clips_max") opt.gen.clips_max = value.get<int>();
        else if (key == "gen.texts_min") opt.gen.texts_min = value.get<int>();
        else if (key == "gen.texts_max") opt.gen.texts_max = value.get<int>();
        else if (key == "gen.clips_per_text_min") opt.gen.clips_per_text_min = value.get<int>();
        else if (key == "gen.clips_per_text_max") opt.gen.clips_per_text_max = value.get<int>();
        else if (key == "gen.unmatched_prob") opt.gen.unmatched_prob = value.get<double>();
        else if (key == "gen.latent_dim") opt.gen.latent_dim = value.get<int>();
        else if (key == "gen.noise_scale") opt.gen.noise_scale = value.get<double>();
        else if (key == "gen.video_dim") opt.gen.video_dim = value.get<int>();
        else if (key == "gen.text_dim") opt.gen.text_dim = value.get<int>();
        else if (key == "gen.seed") opt.gen.seed = value.get<std::uint64_t>();
        else throw ParameterError("unknown config key: " + key);
    }
    return opt;
}

int cmd_gen_data(const std::string& config_path, const std::string& out_dir,
                 std::uint64_t seed_override, bool seed_given) {
    GenDataOptions opt;
    if (!config_path.empty()) opt = parse_gen_config(read_file(config_path));
    if (seed_given) opt.gen.seed = seed_override;
    opt.gen.num_episodes = opt.train_episodes + opt.val_episodes + opt.test_episodes;

    std::vector<Episode> all = generate(opt.gen);
    std::vector<Episode> train(all.begin(), all.begin() + opt.train_episodes);
    std::vector<Episode> val(all.begin() + opt.train_episodes,
                             all.begin() + opt.train_episodes + opt.val_episodes);
    std::vector<Episode> test(all.begin() + opt.train_episodes + opt.val_episodes, all.end());

    std::filesystem::create_directories(out_dir);
    write_episodes(out_dir + "/train.jsonl", train);
    write_episodes(out_dir + "/val.jsonl", val);
    write_episodes(out_dir + "/test.jsonl", test);
    write_standardizer(out_dir + "/standardizer.json", fit_standardizer(train));
    std::cout << "wrote " << train.size() << "/" << val.size() << "/" << test.size()
              << " episodes to " << out_dir << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

void apply_preset(RunConfig& cfg, const std::string& preset) {
    std::vector<std::string> parts;
    std::stringstream ss(preset);
    std::string item;
    while (std::getline(ss, item, '+')) parts.push_back(item);
    if (parts.size() != 3)
        throw ParameterError("preset must be feature+optimizer+norm, got: " + preset);
    if (parts[0] == "rp") cfg.model.use_rp = true;
    else if (parts[0] == "full") cfg.model.use_rp = false;
    else throw ParameterError("unknown preset feature: " + parts[0]);
    if (parts[1] == "lars") cfg.lars = true;
    else if (parts[1] == "adam") cfg.lars = false;
    else throw ParameterError("unknown preset optimizer: " + parts[1]);
    cfg.model.norm = norm_from_name(parts[2]);

    // per-ablation initial learning rates; explicit --eta still overrides
    static const std::map<std::string, double> preset_eta = {
        {"full+adam+none", 1e-3}, {"full+lars+sbn", 5e-3}, {"full+lars+ln2", 4e-3},
        {"full+lars+ln4", 5e-3},  {"rp+adam+sbn", 5e-4},   {"rp+adam+ln2", 1e-2},
        {"rp+adam+ln4", 7e-3},    {"rp+lars+sbn", 7e-3},   {"rp+lars+ln2", 5e-3},
        {"rp+lars+ln4", 8e-3},
    };
    auto it = preset_eta.find(preset);
    if (it != preset_eta.end()) cfg.eta = it->second;
}

int cmd_train(RunConfig cfg) {
    TrainResult res = run_training(cfg);
    nlohmann::json j;
    j["epochs"] = cfg.epochs;
    j["final_train_loss"] = res.final_train_loss;
    j["best_val_action_accuracy"] = res.best_val_action_accuracy;
    j["best_checkpoint"] = res.best_checkpoint;
    j["final_checkpoint"] = res.final_checkpoint;
    std::cout << j.dump(2) << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

int cmd_eval(const std::string& checkpoint, const std::string& data_dir, const std::string& split,
             const std::string& out_path) {
    auto [model, adam] = load_checkpoint(checkpoint);
    (void)adam;
    std::vector<Episode> episodes = read_episodes(data_dir + "/" + split + ".jsonl");
    Standardizer st = read_standardizer(data_dir + "/standardizer.json");
    for (Episode& ep : episodes) st.apply(ep);
    model.set_train(false);
    EvalResult ev = evaluate(model, episodes);

    std::ostringstream out;
    out << "{\n"
        << "  \"split\": \"" << split << "\",\n"
        << "  \"episodes\": " << episodes.size() << ",\n"
        << "  \"video_accuracy\": " << fmt17(ev.video_accuracy) << ",\n"
        << "  \"text_iou\": " << fmt17(ev.text_iou) << ",\n"
        << "  \"action_accuracy\": " << fmt17(ev.action_accuracy) << ",\n"
        << "  \"loss\": " << fmt17(ev.loss) << "\n"
        << "}\n";
    std::cout << out.str();
    if (!out_path.empty()) {
        std::ofstream f(out_path, std::ios::binary);
        if (!f) throw IoError("cannot write " + out_path);
        f << out.str();
    }
    return 0;
}

// ---------------------------------------------------------------------------
// gradcheck / diag
// ---------------------------------------------------------------------------

int cmd_gradcheck(const std::string& scope, std::uint64_t seed) {
    std::vector<GradCheckResult> results = run_gradcheck(scope, seed);
    bool all_pass = true;
    for (const GradCheckResult& r : results) {
        std::printf("%-18s worst %.3e  tol %.0e  %s\n", r.op.c_str(), r.worst_error, r.tolerance,
                    r.pass() ? "pass" : "FAIL");
        all_pass = all_pass && r.pass();
    }
    return all_pass ? 0 : 2;
}

int cmd_diag(const std::string& ratios_path, int window) {
    DiagnosticsLog log = DiagnosticsLog::read_ratios_csv(ratios_path);
    std::printf("%-24s %-14s %-10s %s\n", "group", "mean_ratio", "inf_count", "window");
    for (const GroupSummary& s : log.summarize(window))
        std::printf("%-24s %-14.6g %-10d %d%s\n", group_name(s.group).c_str(), s.mean_ratio,
                    s.inf_count, s.window, s.truncated ? " (truncated)" : "");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Stack-based video/text sequence alignment"};
    app.require_subcommand(1);

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "Generate a synthetic dataset");
    std::string gen_config, gen_out = default_out_dir("data_out");
    std::uint64_t gen_seed = 0;
    gen->add_option("--config", gen_config, "Generator config JSON");
    gen->add_option("--out", gen_out, "Output directory");
    auto* gen_seed_opt = gen->add_option("--seed", gen_seed, "Generator seed override");

    // train
    auto* train = app.add_subcommand("train", "Train a model");
    std::string train_config, preset;
    RunConfig run;
    run.out_dir = default_out_dir(run.out_dir);
    std::string train_data, train_out, norm_override;
    std::uint64_t train_seed = 0;
    double eta = 0.0;
    int epochs = 0, batch_size = 0;
    bool lars_on = false, lars_off = false, warmup_on = false;
    train->add_option("--config", train_config, "Run config JSON");
    train->add_option("--preset", preset, "Ablation preset, e.g. rp+lars+sbn");
    train->add_option("--data", train_data, "Dataset directory");
    train->add_option("--out", train_out, "Output directory");
    auto* seed_opt = train->add_option("--seed", train_seed, "Run seed");
    auto* eta_opt = train->add_option("--eta", eta, "Initial learning rate");
    auto* epochs_opt = train->add_option("--epochs", epochs, "Training epochs");
    auto* bs_opt = train->add_option("--batch-size", batch_size, "Batch size");
    train->add_option("--norm", norm_override, "Normalization: sbn|ln2|ln4|none");
    train->add_flag("--lars", lars_on, "Enable LARS scaling");
    train->add_flag("--no-lars", lars_off, "Disable LARS scaling");
    train->add_flag("--warmup", warmup_on, "Enable the standard warm-up schedule");

    // eval
    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
    std::string eval_ckpt, eval_data, eval_split = "test", eval_out;
    eval->add_option("--checkpoint", eval_ckpt, "Checkpoint JSON")->required();
    eval->add_option("--data", eval_data, "Dataset directory")->required();
    eval->add_option("--split", eval_split, "Split: train|val|test");
    eval->add_option("--out", eval_out, "Also write the metrics JSON here");

    // gradcheck
    auto* grad = app.add_subcommand("gradcheck", "Finite-difference gradient checks");
    std::string scope = "all";
    std::uint64_t grad_seed = 42;
    grad->add_option("--scope", scope, "fc|lstm|ln|ln_lstm|sbn|softmax_ce|model|all");
    grad->add_option("--seed", grad_seed, "Check seed");

    // diag
    auto* diag = app.add_subcommand("diag", "Re-summarize a ratios.csv log");
    std::string ratios_path;
    int window = 20;
    diag->add_option("--ratios", ratios_path, "Path to ratios.csv")->required();
    diag->add_option("--window", window, "Trailing epoch window");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (gen->parsed()) return cmd_gen_data(gen_config, gen_out, gen_seed, gen_seed_opt->count() > 0);
        if (train->parsed()) {
            if (!train_config.empty()) run = run_config_from_json(read_file(train_config));
            if (!preset.empty()) apply_preset(run, preset);
            if (!train_data.empty()) run.data_dir = train_data;
            if (!train_out.empty()) run.out_dir = train_out;
            if (seed_opt->count()) run.seed = train_seed;
            if (eta_opt->count()) run.eta = eta;
            if (epochs_opt->count()) run.epochs = epochs;
            if (bs_opt->count()) run.batch_size = batch_size;
            if (!norm_override.empty()) run.model.norm = norm_from_name(norm_override);
            if (lars_on && lars_off) throw ParameterError("--lars conflicts with --no-lars");
            if (lars_on) run.lars = true;
            if (lars_off) run.lars = false;
            if (warmup_on) run.warmup = WarmupSpec{};
            if (run.data_dir.empty()) throw ParameterError("no dataset directory configured");
            return cmd_train(run);
        }
        if (eval->parsed()) return cmd_eval(eval_ckpt, eval_data, eval_split, eval_out);
        if (grad->parsed()) return cmd_gradcheck(scope, grad_seed);
        if (diag->parsed()) return cmd_diag(ratios_path, window);
    } catch (const DivergedError& e) {
        std::cerr << "diverged: " << e.what() << "\n";
        return 2;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
