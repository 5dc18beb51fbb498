// Acceptance suite: one PASS/FAIL line per criterion.
//
// Usage: divgan_acceptance [criterion numbers...]
// With no arguments every criterion runs. Training runs are cached as
// checkpoints under $DIVGAN_ACCEPTANCE_CACHE (default: the build tree), keyed
// by a hash of the fully resolved config, so a rerun only recomputes the
// evaluations.

#include "divgan/checkpoint.hpp"
#include "divgan/config.hpp"
#include "divgan/metrics.hpp"
#include "divgan/objectives.hpp"
#include "divgan/theory.hpp"
#include "divgan/trainer.hpp"

#include "test_util.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace divgan;
namespace fs = std::filesystem;

namespace {

constexpr std::size_t kSeeds = 10;
constexpr std::size_t kWarmSeeds = 5;
constexpr std::size_t kRingSteps = 30000;

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(double v, int precision = 3)
{
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(precision);
    os << v;
    return os.str();
}

std::string join(const std::vector<std::size_t>& v)
{
    std::string s;
    for (std::size_t x : v) s += (s.empty() ? "" : " ") + std::to_string(x);
    return s;
}

// ---------------------------------------------------------------------------
// Run cache

std::uint64_t fnv1a(const std::string& s)
{
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

fs::path cache_dir()
{
    if (const char* env = std::getenv("DIVGAN_ACCEPTANCE_CACHE")) return env;
    return DIVGAN_ACCEPTANCE_CACHE_DIR;
}

struct CachedRun {
    fs::path checkpoint;
    TrainState state;
    bool diverged = false;
};

// Trains `cfg` unless an identical config already has a cached final state.
CachedRun run_cached(const TrainConfig& cfg, const std::string& label)
{
    const std::string key_text = config_to_json(cfg).dump();
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(fnv1a(key_text)));
    const fs::path dir = cache_dir();
    fs::create_directories(dir);
    const fs::path ckpt = dir / (std::string(hex) + ".ckpt.json");
    const fs::path meta = dir / (std::string(hex) + ".json");

    CachedRun run;
    run.checkpoint = ckpt;
    if (fs::exists(ckpt) && fs::exists(meta)) {
        std::ifstream in(meta);
        const nlohmann::json m = nlohmann::json::parse(in);
        if (m.at("config") == nlohmann::json::parse(key_text)) {
            run.state = read_checkpoint_file(ckpt.string()).state;
            run.diverged = m.at("diverged").get<bool>();
            return run;
        }
    }

    std::cerr << "  training " << label << " (" << cfg.steps << " steps)..." << std::flush;
    const auto t0 = std::chrono::steady_clock::now();
    TrainResult r = train(cfg);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cerr << " " << fmt(secs, 0) << "s" << (r.divergence ? " DIVERGED" : "") << '\n';

    run.state = std::move(r.final_state);
    run.diverged = r.divergence.has_value();
    write_checkpoint_file(ckpt.string(), Checkpoint{cfg.generator_spec(), cfg.discriminator_spec(), run.state});
    std::ofstream(meta) << nlohmann::json{{"config", nlohmann::json::parse(key_text)},
                                          {"diverged", run.diverged},
                                          {"seconds", secs}}
                               .dump(2);
    return run;
}

TrainConfig ring_config(double lambda, std::uint64_t seed)
{
    TrainConfig cfg = default_config(Task::ring);
    cfg.steps = kRingSteps;
    cfg.batch_size = 128;
    cfg.objective.diversity.lambda = lambda;
    cfg.seed = seed;
    return cfg;
}

EvalReport ring_report(double lambda, std::uint64_t seed)
{
    const TrainConfig cfg = ring_config(lambda, seed);
    const CachedRun run = run_cached(cfg, "ring lambda=" + fmt(lambda, 2) + " seed=" + std::to_string(seed));
    return evaluate(cfg, run.state.g);
}

// ---------------------------------------------------------------------------
// Criteria

Outcome ring_mode_recovery()
{
    double ds_sum = 0.0;
    double va_sum = 0.0;
    std::size_t wins = 0;
    std::vector<std::size_t> ds_modes;
    std::vector<std::size_t> va_modes;
    for (std::uint64_t s = 0; s < kSeeds; ++s) {
        const EvalReport ds = ring_report(0.1, s);
        const EvalReport va = ring_report(0.0, s);
        ds_modes.push_back(ds.modes_captured);
        va_modes.push_back(va.modes_captured);
        ds_sum += static_cast<double>(ds.modes_captured);
        va_sum += static_cast<double>(va.modes_captured);
        if (ds.modes_captured > va.modes_captured) ++wins;
    }
    const double ds_mean = ds_sum / kSeeds;
    const double va_mean = va_sum / kSeeds;
    Outcome o;
    o.pass = ds_mean >= 7.0 && va_mean <= 4.0 && wins >= 8;
    o.detail = "DSGAN mean modes " + fmt(ds_mean, 1) + " [" + join(ds_modes) + "] (need >= 7.0), vanilla mean " +
               fmt(va_mean, 1) + " [" + join(va_modes) + "] (need <= 4.0), DSGAN ahead in " +
               std::to_string(wins) + "/10 seeds (need >= 8)";
    return o;
}

Outcome ring_high_quality()
{
    double sum = 0.0;
    for (std::uint64_t s = 0; s < kSeeds; ++s) sum += ring_report(0.1, s).hq_fraction;
    const double mean = sum / kSeeds;
    return {mean >= 0.5, "DSGAN mean high-quality fraction " + fmt(mean) + " (need >= 0.50)"};
}

Outcome diversity_trend()
{
    const std::vector<double> lambdas{0.0, 0.05, 0.1, 0.5};
    std::size_t monotone = 0;
    std::size_t frechet_better = 0;
    std::string rows;
    for (std::uint64_t s = 0; s < kSeeds; ++s) {
        std::vector<EvalReport> reports;
        for (double l : lambdas) reports.push_back(ring_report(l, s));
        bool ok = true;
        for (std::size_t i = 1; i < reports.size(); ++i) {
            ok = ok && reports[i].pairwise_diversity >= reports[i - 1].pairwise_diversity;
        }
        if (ok) ++monotone;
        if (reports[2].frechet2 < reports[0].frechet2) ++frechet_better;
        std::cerr << "  seed " << s << " diversity";
        for (const EvalReport& r : reports) std::cerr << ' ' << fmt(r.pairwise_diversity);
        std::cerr << " frechet(0)=" << fmt(reports[0].frechet2, 4) << " frechet(0.1)=" << fmt(reports[2].frechet2, 4)
                  << '\n';
    }
    return {monotone >= 8 && frechet_better >= 8,
            "diversity non-decreasing over lambda {0, 0.05, 0.1, 0.5} in " + std::to_string(monotone) +
                "/10 seeds (need >= 8), frechet(0.1) < frechet(0) in " + std::to_string(frechet_better) +
                "/10 seeds (need >= 8)"};
}

NetworkSpec random_tanh_generator(Rng& rng)
{
    NetworkSpec s;
    s.input_dim = 2 + rng.uniform_int(5);
    s.hidden_dims = {8 + rng.uniform_int(57), 8 + rng.uniform_int(57)};
    s.output_dim = 2 + rng.uniform_int(3);
    s.hidden_activation = HiddenActivation::tanh;
    s.init_scale = 0.5 + 2.5 * rng.uniform();
    return s;
}

Outcome gradient_bound_suite()
{
    Rng rng(404);
    std::size_t violations = 0;
    std::size_t pairs = 0;
    double worst = 0.0;
    for (std::uint64_t net = 0; net < 10; ++net) {
        const NetworkSpec s = random_tanh_generator(rng);
        const NetworkParams p = mlp_init(s, 1000 + net);
        for (int i = 0; i < 100; ++i) {
            const Tensor z1 = testing::random_normal(Shape{s.input_dim}, rng);
            const Tensor z2 = testing::random_normal(Shape{s.input_dim}, rng);
            const BoundCheckReport r = checked_gradient_bound(s, p, std::nullopt, z1, z2, 64, 256);
            ++pairs;
            if (!r.holds()) ++violations;
            if (r.rhs > 0.0) worst = std::max(worst, r.lhs / r.rhs);
        }
    }
    return {violations == 0 && pairs == 1000, std::to_string(violations) + " violations over " +
                                                  std::to_string(pairs) + " pairs on 10 nets, max lhs/rhs " +
                                                  fmt(worst, 6)};
}

Outcome attraction_suite()
{
    Rng rng(505);
    std::size_t counterexamples = 0;
    std::size_t conditions = 0;
    std::size_t probes = 0;
    std::size_t scenarios = 0;
    for (std::uint64_t i = 0; i < 20; ++i) {
        const NetworkSpec s = random_tanh_generator(rng);
        const NetworkParams p = mlp_init(s, 2000 + i);
        const VerifySummary v = run_verification(s, p, std::nullopt, 0, 10000, 3000 + i);
        if (v.attraction_probes == 10000 && v.epsilon > 0.0) ++scenarios;
        counterexamples += v.attraction_counterexamples;
        conditions += v.attraction_conditions;
        probes += v.attraction_probes;
    }
    return {counterexamples == 0 && scenarios == 20 && conditions > 0,
            std::to_string(counterexamples) + " counterexamples; " + std::to_string(conditions) + " of " +
                std::to_string(probes) + " probes met the neighbourhood condition across " +
                std::to_string(scenarios) + "/20 scenarios with eps > 0"};
}

Outcome autodiff_correctness()
{
    using testing::gradient_check;
    using testing::random_normal;
    Rng rng(606);
    double worst = 0.0;
    std::size_t checks = 0;
    auto record = [&](double err) {
        worst = std::max(worst, err);
        ++checks;
    };

    for (int trial = 0; trial < 5; ++trial) {
        const Tensor lr = random_normal(Shape{6}, rng);
        const Tensor lf = random_normal(Shape{6}, rng);
        record(gradient_check([](Tape&, std::span<const Var> v) { return d_loss(v[0], v[1]); }, {lr, lf}));
        for (GLossForm form : {GLossForm::non_saturating, GLossForm::minimax}) {
            record(gradient_check([form](Tape&, std::span<const Var> v) { return g_adv_loss(v[0], form); }, {lf}));
        }
        const Tensor a = random_normal(Shape{4, 3}, rng);
        const Tensor b = random_normal(Shape{4, 3}, rng);
        record(gradient_check([](Tape&, std::span<const Var> v) { return reconstruction_loss(v[0], v[1]); }, {a, b}));

        const Tensor z1 = random_normal(Shape{4, 2}, rng);
        const Tensor z2 = random_normal(Shape{4, 2}, rng);
        for (Norm norm : {Norm::l1, Norm::l2}) {
            for (std::optional<double> tau : {std::optional<double>{}, std::optional<double>{1e3}}) {
                DiversityConfig cfg;
                cfg.norm = norm;
                cfg.tau = tau;
                record(gradient_check(
                    [&](Tape&, std::span<const Var> v) { return mean(diversity_ratios(v[0], v[1], z1, z2, cfg).clamped); },
                    {a.reshaped(Shape{4, 3}), b}));
            }
        }
        DiversityConfig seq;
        seq.space = DiversitySpace::sequence;
        const Tensor s1 = random_normal(Shape{4, 6}, rng);
        const Tensor s2 = random_normal(Shape{4, 6}, rng);
        record(gradient_check(
            [&](Tape&, std::span<const Var> v) {
                return mean(sequence_diversity_ratios(v[0], v[1], 3, z1, z2, seq).clamped);
            },
            {s1, s2}));
        DiversityConfig feat;
        feat.space = DiversitySpace::feature;
        record(gradient_check(
            [&](Tape&, std::span<const Var> v) {
                const std::vector<Var> f1{v[0], v[1]};
                const std::vector<Var> f2{v[2], v[3]};
                return mean(feature_diversity_ratios(f1, f2, z1, z2, feat).clamped);
            },
            {a, random_normal(Shape{4, 5}, rng), b, random_normal(Shape{4, 5}, rng)}));
    }

    // Full generator objective through G's parameters, per loss form, norm and
    // regularizer space.
    NetworkSpec g_spec;
    g_spec.input_dim = 4;
    g_spec.hidden_dims = {6, 5};
    g_spec.output_dim = 2;
    NetworkSpec d_spec = default_discriminator_spec(3);
    d_spec.hidden_dims = {7, 4};
    d_spec.hidden_activation = HiddenActivation::leaky_relu;
    const NetworkParams g = mlp_init(g_spec, 1);
    const NetworkParams d = mlp_init(d_spec, 2);
    GeneratorBatch batch;
    batch.condition = random_normal(Shape{5, 1}, rng);
    batch.target = random_normal(Shape{5, 2}, rng);
    batch.z1 = random_normal(Shape{5, 3}, rng);
    batch.z2 = random_normal(Shape{5, 3}, rng);
    std::vector<ObjectiveConfig> configs;
    for (GLossForm form : {GLossForm::non_saturating, GLossForm::minimax}) {
        for (Norm norm : {Norm::l1, Norm::l2}) {
            ObjectiveConfig c;
            c.g_loss_form = form;
            c.beta = 0.5;
            c.diversity.lambda = 0.8;
            c.diversity.norm = norm;
            configs.push_back(c);
        }
    }
    ObjectiveConfig feature;
    feature.diversity.space = DiversitySpace::feature;
    feature.diversity.lambda = 2.0;
    configs.push_back(feature);
    ObjectiveConfig sequence;
    sequence.diversity.space = DiversitySpace::sequence;
    sequence.diversity.sequence_length = 2;
    sequence.diversity.lambda = 2.0;
    configs.push_back(sequence);
    for (const ObjectiveConfig& cfg : configs) {
        record(gradient_check(
            [&](Tape& tape, std::span<const Var> params) {
                const BoundParams bg{std::vector<Var>(params.begin(), params.end())};
                return build_generator_loss(tape, g_spec, bg, d_spec, bind(tape, d, false), batch, cfg).total;
            },
            g.tensors));
    }
    return {worst <= 1e-4, std::to_string(checks) + " gradient checks at h=1e-5, max relative error " +
                               [&] {
                                   char buf[32];
                                   std::snprintf(buf, sizeof buf, "%.2e", worst);
                                   return std::string(buf);
                               }() +
                               " (need <= 1e-4)"};
}

Outcome regularizer_semantics()
{
    Rng rng(707);
    std::vector<std::string> failures;

    // Collapsed generator: identical outputs for every latent.
    {
        const Tensor y = testing::random_normal(Shape{1, 2}, rng);
        Tensor y1(Shape{8, 2});
        for (std::size_t r = 0; r < 8; ++r) {
            y1.at(r, 0) = y.at(0, 0);
            y1.at(r, 1) = y.at(0, 1);
        }
        const Tensor z1 = testing::random_normal(Shape{8, 3}, rng);
        const Tensor z2 = testing::random_normal(Shape{8, 3}, rng);
        for (Norm norm : {Norm::l1, Norm::l2}) {
            DiversityConfig cfg;
            cfg.norm = norm;
            if (diversity_ratio(y1, y1, z1, z2, cfg) != 0.0) failures.push_back("collapsed l_z != 0");
        }
        NetworkSpec g = default_generator_spec(2, 2);
        NetworkParams p = mlp_init(g, 3);
        p.weight(0) = Tensor(p.weight(0).shape(), 0.0);
        const NetworkParams d = mlp_init(default_discriminator_spec(2), 4);
        GeneratorBatch batch{std::nullopt, std::nullopt, testing::random_normal(Shape{16, 2}, rng),
                             testing::random_normal(Shape{16, 2}, rng)};
        const GeneratorObjective obj =
            generator_total_loss(batch, g, p, default_discriminator_spec(2), d, ObjectiveConfig{});
        if (obj.parts.l_z != 0.0) failures.push_back("collapsed generator l_z != 0");
    }

    // tau clamp: l_z <= tau for any outputs, including huge ones.
    std::size_t clamp_checks = 0;
    for (int trial = 0; trial < 2000; ++trial) {
        const double spread = std::pow(10.0, -3.0 + 9.0 * rng.uniform());
        Tensor y1 = testing::random_normal(Shape{8, 2}, rng);
        Tensor y2 = testing::random_normal(Shape{8, 2}, rng);
        for (double& v : y1.values()) v *= spread;
        for (double& v : y2.values()) v *= spread;
        const Tensor z1 = testing::random_normal(Shape{8, 2}, rng);
        const Tensor z2 = testing::random_normal(Shape{8, 2}, rng);
        DiversityConfig cfg;
        cfg.tau = 0.1 + 20.0 * rng.uniform();
        cfg.norm = trial % 2 ? Norm::l1 : Norm::l2;
        const double lz = diversity_ratio(y1, y2, z1, z2, cfg);
        ++clamp_checks;
        // The row mean of values all equal to tau can round one ulp above it.
        if (!(lz <= *cfg.tau * (1.0 + 1e-12) && lz >= 0.0)) {
            failures.push_back("l_z " + fmt(lz) + " outside [0, " + fmt(*cfg.tau) + "]");
            break;
        }
    }

    // Sequence regularizer with a single step is the l1 output regularizer.
    std::size_t seq_checks = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const Tensor y1 = testing::random_normal(Shape{6, 3}, rng);
        const Tensor y2 = testing::random_normal(Shape{6, 3}, rng);
        const Tensor z1 = testing::random_normal(Shape{6, 4}, rng);
        const Tensor z2 = testing::random_normal(Shape{6, 4}, rng);
        DiversityConfig out;
        out.norm = Norm::l1;
        out.tau = std::nullopt;
        DiversityConfig seq = out;
        seq.space = DiversitySpace::sequence;
        const Tensor s1[] = {y1};
        const Tensor s2[] = {y2};
        ++seq_checks;
        if (sequence_diversity_ratio(s1, s2, z1, z2, seq) != diversity_ratio(y1, y2, z1, z2, out)) {
            failures.push_back("sequence T=1 differs from l1 output variant");
            break;
        }
        Tape tape;
        const Var a = tape.constant(y1);
        const Var b = tape.constant(y2);
        const Tensor seq_rows = sequence_diversity_ratios(a, b, 1, z1, z2, seq).clamped.value();
        const Tensor out_rows = diversity_ratios(a, b, z1, z2, out).clamped.value();
        if (seq_rows != out_rows) {
            failures.push_back("tape sequence T=1 differs from l1 output variant");
            break;
        }
    }

    std::string detail = failures.empty() ? "collapsed l_z = 0 exactly; " + std::to_string(clamp_checks) +
                                                "/2000 clamp checks within [0, tau]; sequence T=1 bit-identical to l1 "
                                                "output in " + std::to_string(seq_checks) + "/200 draws"
                                          : failures.front();
    return {failures.empty(), detail};
}

Outcome conditional_coverage()
{
    std::size_t full = 0;
    double owned_hq = 0.0;
    double total_hq = 0.0;
    std::vector<std::size_t> covered_modes;
    for (std::uint64_t s = 0; s < kSeeds; ++s) {
        TrainConfig cfg = default_config(Task::conditional_ring);
        cfg.steps = kRingSteps;
        cfg.objective.diversity.lambda = 1.0;
        cfg.seed = s;
        const CachedRun run = run_cached(cfg, "conditional seed=" + std::to_string(s));
        Rng rng(cfg.seed, 2);
        const ConditionalCoverage cov = evaluate_conditional_ring(cfg.generator_spec(), run.state.g, cfg.z_dim,
                                                                  cfg.conditional, cfg.eval_samples, rng);
        if (cov.all_labels_cover_both()) ++full;
        std::size_t n_covered = 0;
        for (const auto& c : cov.covered) n_covered += static_cast<std::size_t>(c[0]) + static_cast<std::size_t>(c[1]);
        covered_modes.push_back(n_covered);
        const double hq = cov.report.hq_fraction * static_cast<double>(cov.report.n_samples);
        total_hq += hq;
        owned_hq += cov.owned_fraction * hq;
    }
    const double owned = total_hq > 0.0 ? owned_hq / total_hq : 0.0;
    return {full >= 7 && owned >= 0.95,
            "every label covers both owned modes in " + std::to_string(full) + "/10 seeds (need >= 7; owned modes hit [" +
                join(covered_modes) + "] of 8), " + fmt(100.0 * owned, 2) +
                "% of high-quality samples in label-owned modes (need >= 95%)"};
}

Outcome warm_start()
{
    double sum = 0.0;
    std::vector<std::size_t> modes;
    for (std::uint64_t s = 0; s < kWarmSeeds; ++s) {
        // The vanilla ring run doubles as the pretrained model.
        const TrainConfig pre = ring_config(0.0, s);
        const CachedRun pretrained = run_cached(pre, "ring lambda=0.00 seed=" + std::to_string(s));

        TrainConfig cfg = ring_config(0.1, 100 + s);
        cfg.warm_start_discriminator = pretrained.checkpoint.string();
        cfg.warm_start_freeze_steps = 2000;
        const CachedRun run = run_cached(cfg, "warm start seed=" + std::to_string(100 + s));
        const EvalReport r = evaluate(cfg, run.state.g);
        modes.push_back(r.modes_captured);
        sum += static_cast<double>(r.modes_captured);
    }
    const double mean = sum / kWarmSeeds;
    return {mean >= 6.0, "warm-started DSGAN mean modes " + fmt(mean, 1) + " [" + join(modes) +
                             "] over 5 seeds (need >= 6.0)"};
}

Outcome determinism_and_io()
{
    std::vector<std::string> failures;
    TrainConfig cfg = default_config(Task::ring);
    cfg.steps = 300;
    cfg.eval_every = 100;
    cfg.seed = 12;
    std::ostringstream a;
    std::ostringstream b;
    const TrainResult ra = train(cfg, &a);
    train(cfg, &b);
    if (a.str() != b.str() || a.str().empty()) failures.push_back("metrics.csv differs between seeded runs");

    const Checkpoint ckpt{cfg.generator_spec(), cfg.discriminator_spec(), ra.final_state};
    const std::string text = save_checkpoint(ckpt);
    const Checkpoint back = load_checkpoint(text);
    if (!(back.state == ckpt.state) || save_checkpoint(back) != text) failures.push_back("checkpoint round trip");

    try {
        parse_config(R"({"task": "ring", "lamda": 0.1})");
        failures.push_back("unknown key accepted");
    } catch (const ConfigError& e) {
        if (e.keys() != std::vector<std::string>{"lamda"}) failures.push_back("unknown key not named");
    }
    return {failures.empty(), failures.empty() ? "metrics.csv byte-identical across seeded runs (" +
                                                     std::to_string(a.str().size()) +
                                                     " bytes); checkpoint round trip exact; unknown key 'lamda' "
                                                     "rejected by name"
                                               : failures.front()};
}

struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
};

} // namespace

int main(int argc, char** argv)
{
    const std::vector<Criterion> criteria{
        {1, "ring mode recovery", ring_mode_recovery},
        {2, "high-quality fraction", ring_high_quality},
        {3, "diversity-lambda trend", diversity_trend},
        {4, "gradient-bound suite", gradient_bound_suite},
        {5, "attraction-inequality suite", attraction_suite},
        {6, "autodiff correctness", autodiff_correctness},
        {7, "regularizer unit semantics", regularizer_semantics},
        {8, "conditional coverage", conditional_coverage},
        {9, "warm-start experiment", warm_start},
        {10, "determinism and I/O", determinism_and_io},
    };
    std::set<int> selected;
    for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

    int failed = 0;
    for (const Criterion& c : criteria) {
        if (!selected.empty() && !selected.count(c.id)) continue;
        std::cerr << "[" << c.id << "] " << c.name << '\n';
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        if (!o.pass) ++failed;
        std::cout << (o.pass ? "PASS" : "FAIL") << " [" << c.id << "] " << c.name << ": " << o.detail << std::endl;
    }
    return failed == 0 ? 0 : 1;
}
