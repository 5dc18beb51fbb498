// Command-line front end: train, eval, sweep, verify and interp.
//
// Exit codes: 0 success, 1 other failure, 2 config error, 3 divergence, 4 IO error.

#include "divgan/checkpoint.hpp"
#include "divgan/config.hpp"
#include "divgan/metrics.hpp"
#include "divgan/theory.hpp"
#include "divgan/trainer.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace divgan;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitDivergence = 3;
constexpr int kExitIo = 4;

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

TrainConfig load_config(const std::string& path, const std::optional<std::uint64_t>& seed)
{
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    TrainConfig cfg = parse_config(buf.str());
    if (seed) cfg.seed = *seed;
    return cfg;
}

std::ofstream open_out(const fs::path& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    return out;
}

void write_text(const fs::path& path, const std::string& text)
{
    std::ofstream out = open_out(path);
    out << text;
    if (!out) throw IoError("failed writing '" + path.string() + "'");
}

void ensure_dir(const fs::path& dir)
{
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory '" + dir.string() + "': " + ec.message());
}

Checkpoint load_ckpt(const std::string& path)
{
    if (!fs::exists(path)) throw IoError("checkpoint '" + path + "' does not exist");
    return read_checkpoint_file(path);
}

// A representative condition for single-condition commands.
std::optional<Tensor> probe_condition(const TrainConfig& cfg)
{
    switch (cfg.task) {
    case Task::ring: return std::nullopt;
    case Task::conditional_ring: return one_hot({0}, cfg.conditional.n_labels).reshaped(Shape{cfg.conditional.n_labels});
    case Task::trajectory: {
        Rng rng(cfg.seed, 3);
        const LabeledBatch b = sample_trajectories(cfg.trajectory, 1, rng);
        return b.conditions->row_at(0);
    }
    }
    return std::nullopt;
}

int cmd_train(const std::string& config_path, const std::string& out_dir, const std::optional<std::uint64_t>& seed)
{
    const TrainConfig cfg = load_config(config_path, seed);
    const fs::path dir(out_dir);
    ensure_dir(dir);
    std::ofstream metrics = open_out(dir / "metrics.csv");
    const TrainResult result = train(cfg, &metrics);
    metrics.close();
    if (!metrics) throw IoError("failed writing metrics.csv");

    const Checkpoint final_ckpt{cfg.generator_spec(), cfg.discriminator_spec(), result.final_state};
    const Checkpoint best_ckpt{cfg.generator_spec(), cfg.discriminator_spec(), result.best_state};
    write_text(dir / "final.ckpt.json", save_checkpoint(final_ckpt));
    write_text(dir / "best.ckpt.json", save_checkpoint(best_ckpt));
    const EvalReport report = result.final_report ? *result.final_report : evaluate(cfg, result.final_state.g);
    write_text(dir / "eval.json", nlohmann::json(report).dump(2) + "\n");

    if (result.divergence) {
        std::cerr << "divgan: " << *result.divergence << '\n';
        return kExitDivergence;
    }
    std::cout << "trained " << result.final_state.step << " steps; modes " << report.modes_captured << ", hq "
              << report.hq_fraction << '\n';
    return kExitOk;
}

int cmd_eval(const std::string& checkpoint, const std::string& config_path, const std::string& out_path,
             const std::optional<std::uint64_t>& seed)
{
    const TrainConfig cfg = load_config(config_path, seed);
    const Checkpoint ckpt = load_ckpt(checkpoint);
    if (!(ckpt.spec_g == cfg.generator_spec())) {
        throw ConfigError("checkpoint generator does not match the config's network spec");
    }
    const EvalReport report = evaluate(cfg, ckpt.state.g);
    write_text(out_path, nlohmann::json(report).dump(2) + "\n");
    return kExitOk;
}

std::vector<double> parse_lambdas(const std::string& text)
{
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw ConfigError("--lambdas: '" + item + "' is not a number");
        }
    }
    if (out.empty()) throw ConfigError("--lambdas: empty list");
    return out;
}

int cmd_sweep(const std::string& config_path, const std::string& lambdas, const std::string& out_dir,
              std::size_t jobs, const std::optional<std::uint64_t>& seed)
{
    const TrainConfig cfg = load_config(config_path, seed);
    const std::vector<double> values = parse_lambdas(lambdas);
    const fs::path dir(out_dir);
    ensure_dir(dir);
    const std::vector<SweepEntry> entries = sweep(cfg, values, jobs);

    std::ostringstream csv;
    write_sweep_csv(csv, entries);
    write_text(dir / "sweep.csv", csv.str());
    nlohmann::json reports = nlohmann::json::array();
    bool failed = false;
    for (const SweepEntry& e : entries) {
        nlohmann::json item{{"lambda", e.lambda}};
        if (e.report) item["report"] = *e.report;
        if (e.error) {
            item["error"] = *e.error;
            failed = true;
        }
        reports.push_back(std::move(item));
    }
    write_text(dir / "sweep.json", reports.dump(2) + "\n");
    return failed ? kExitDivergence : kExitOk;
}

int cmd_verify(const std::string& config_path, const std::string& checkpoint, const std::string& out_path,
               const std::optional<std::uint64_t>& seed)
{
    if (config_path.empty() && checkpoint.empty()) throw ConfigError("verify needs --config or --checkpoint");
    std::optional<TrainConfig> cfg;
    if (!config_path.empty()) cfg = load_config(config_path, seed);
    NetworkSpec spec;
    NetworkParams params;
    if (!checkpoint.empty()) {
        const Checkpoint ckpt = load_ckpt(checkpoint);
        spec = ckpt.spec_g;
        params = ckpt.state.g;
    } else {
        spec = cfg->generator_spec();
        params = mlp_init(spec, cfg->seed * 2 + 1);
    }
    const std::optional<Tensor> condition = cfg ? probe_condition(*cfg) : std::nullopt;
    const std::uint64_t verify_seed = seed ? *seed : (cfg ? cfg->seed : 0);
    const VerifySummary summary = run_verification(spec, params, condition, 100, 10000, verify_seed);
    write_text(out_path, nlohmann::json(summary).dump(2) + "\n");
    std::cout << "bound: " << summary.bound_violations << " violations over " << summary.bound_pairs
              << " pairs; attraction: " << summary.attraction_counterexamples << " counterexamples over "
              << summary.attraction_conditions << " qualifying probes\n";
    return summary.passed() ? kExitOk : kExitFailure;
}

int cmd_interp(const std::string& checkpoint, const std::string& config_path, const std::string& out_path,
               std::size_t steps, const std::string& mode, const std::optional<std::uint64_t>& seed)
{
    const Checkpoint ckpt = load_ckpt(checkpoint);
    std::optional<TrainConfig> cfg;
    if (!config_path.empty()) cfg = load_config(config_path, seed);
    const std::optional<Tensor> condition = cfg ? probe_condition(*cfg) : std::nullopt;
    const std::size_t z_dim = ckpt.spec_g.input_dim - (condition ? condition->size() : 0);
    InterpolationMode m = InterpolationMode::slerp;
    if (mode == "linear") {
        m = InterpolationMode::linear;
    } else if (mode != "slerp") {
        throw ConfigError("--mode must be linear or slerp");
    }

    Rng rng(seed ? *seed : 0, 4);
    Tensor z_a(Shape{z_dim});
    Tensor z_b(Shape{z_dim});
    for (double& v : z_a.values()) v = rng.normal();
    for (double& v : z_b.values()) v = rng.normal();
    const Interpolation interp = latent_interpolation(ckpt.spec_g, ckpt.state.g, condition, z_a, z_b, steps, m);

    std::ostringstream csv;
    csv << "index,t";
    for (std::size_t i = 0; i < z_dim; ++i) csv << ",z" << i;
    for (std::size_t i = 0; i < ckpt.spec_g.output_dim; ++i) csv << ",y" << i;
    csv << '\n';
    for (std::size_t s = 0; s < steps; ++s) {
        csv << s << ',' << format_double(static_cast<double>(s) / static_cast<double>(steps - 1));
        for (std::size_t i = 0; i < z_dim; ++i) csv << ',' << format_double(interp.latents.at(s, i));
        for (std::size_t i = 0; i < ckpt.spec_g.output_dim; ++i) csv << ',' << format_double(interp.outputs.at(s, i));
        csv << '\n';
    }
    write_text(out_path, csv.str());
    if (interp.fell_back_to_linear) std::cerr << "divgan: latents are (anti)parallel; used linear interpolation\n";
    return kExitOk;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Diversity-regularized GAN toolkit for 2D synthetic tasks"};
    app.require_subcommand(1);

    std::string config;
    std::string out;
    std::string checkpoint;
    std::string lambdas;
    std::string mode = "slerp";
    std::size_t jobs = 1;
    std::size_t steps = 9;
    std::optional<std::uint64_t> seed;

    auto* train_cmd = app.add_subcommand("train", "Train a GAN from a JSON config");
    train_cmd->add_option("--config", config, "Run config (JSON)")->required();
    train_cmd->add_option("--out", out, "Output directory")->required();
    train_cmd->add_option("--seed", seed, "Override the config seed");

    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
    eval_cmd->add_option("--checkpoint", checkpoint, "Checkpoint JSON")->required();
    eval_cmd->add_option("--config", config, "Run config (JSON)")->required();
    eval_cmd->add_option("--out", out, "Output EvalReport JSON")->required();
    eval_cmd->add_option("--seed", seed, "Override the config seed");

    auto* sweep_cmd = app.add_subcommand("sweep", "Train one run per lambda");
    sweep_cmd->add_option("--config", config, "Base run config (JSON)")->required();
    sweep_cmd->add_option("--lambdas", lambdas, "Comma-separated lambda values")->required();
    sweep_cmd->add_option("--out", out, "Output directory")->required();
    sweep_cmd->add_option("--jobs", jobs, "Concurrent runs")->check(CLI::PositiveNumber);
    sweep_cmd->add_option("--seed", seed, "Override the config seed");

    auto* verify_cmd = app.add_subcommand("verify", "Run the gradient-bound and attraction checks");
    verify_cmd->add_option("--config", config, "Run config (JSON)");
    verify_cmd->add_option("--checkpoint", checkpoint, "Checkpoint whose generator is checked");
    verify_cmd->add_option("--out", out, "Output JSON")->required();
    verify_cmd->add_option("--seed", seed, "Seed for latent pairs and probes");

    auto* interp_cmd = app.add_subcommand("interp", "Export a latent interpolation");
    interp_cmd->add_option("--checkpoint", checkpoint, "Checkpoint JSON")->required();
    interp_cmd->add_option("--config", config, "Run config, for conditional generators");
    interp_cmd->add_option("--out", out, "Output CSV")->required();
    interp_cmd->add_option("--steps", steps, "Number of interpolation points")->check(CLI::Range(2, 100000));
    interp_cmd->add_option("--mode", mode, "linear or slerp");
    interp_cmd->add_option("--seed", seed, "Seed for the endpoint latents");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (*train_cmd) return cmd_train(config, out, seed);
        if (*eval_cmd) return cmd_eval(checkpoint, config, out, seed);
        if (*sweep_cmd) return cmd_sweep(config, lambdas, out, jobs, seed);
        if (*verify_cmd) return cmd_verify(config, checkpoint, out, seed);
        if (*interp_cmd) return cmd_interp(checkpoint, config, out, steps, mode, seed);
    } catch (const ConfigError& e) {
        std::cerr << "divgan: " << e.what() << '\n';
        return kExitConfig;
    } catch (const ShapeError& e) {
        std::cerr << "divgan: " << e.what() << '\n';
        return kExitConfig;
    } catch (const DivergenceError& e) {
        std::cerr << "divgan: " << e.what() << '\n';
        return kExitDivergence;
    } catch (const IoError& e) {
        std::cerr << "divgan: " << e.what() << '\n';
        return kExitIo;
    } catch (const CheckpointError& e) {
        std::cerr << "divgan: " << e.what() << '\n';
        return kExitIo;
    } catch (const std::exception& e) {
        std::cerr << "divgan: " << e.what() << '\n';
        return kExitFailure;
    }
    return kExitFailure;
}
