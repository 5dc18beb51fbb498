#include "divgan/trainer.hpp"

#include "divgan/checkpoint.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <mutex>
#include <ostream>
#include <thread>

namespace divgan {

std::string to_string(Task t)
{
    switch (t) {
    case Task::ring: return "ring";
    case Task::conditional_ring: return "conditional_ring";
    case Task::trajectory: return "trajectory";
    }
    return "?";
}

Task parse_task(const std::string& s)
{
    if (s == "ring") return Task::ring;
    if (s == "conditional_ring") return Task::conditional_ring;
    if (s == "trajectory") return Task::trajectory;
    throw std::invalid_argument("unknown task '" + s + "' (expected ring, conditional_ring or trajectory)");
}

void TrainConfig::validate() const
{
    objective.validate();
    divgan::validate(adam);
    if (steps < 1) throw std::invalid_argument("train config: steps must be >= 1");
    if (batch_size < 2) throw std::invalid_argument("train config: batch_size must be >= 2");
    if (z_dim < 1) throw std::invalid_argument("train config: z_dim must be >= 1");
    if (d_steps_per_g < 1) throw std::invalid_argument("train config: d_steps_per_g must be >= 1");
    if (eval_every < 1) throw std::invalid_argument("train config: eval_every must be >= 1");
    if (log_every < 1) throw std::invalid_argument("train config: log_every must be >= 1");
    if (eval_samples < 3) throw std::invalid_argument("train config: eval_samples must be >= 3");
    switch (task) {
    case Task::ring: ring.validate(); break;
    case Task::conditional_ring: conditional.validate(); break;
    case Task::trajectory: trajectory.validate(); break;
    }
    if (objective.diversity.space == DiversitySpace::sequence && task != Task::trajectory) {
        throw std::invalid_argument("train config: the sequence regularizer needs the trajectory task");
    }
    generator_spec().validate();
    discriminator_spec().validate();
}

std::size_t TrainConfig::condition_dim() const
{
    switch (task) {
    case Task::ring: return 0;
    case Task::conditional_ring: return conditional.n_labels;
    case Task::trajectory: return 2 * trajectory.context_len;
    }
    return 0;
}

std::size_t TrainConfig::output_dim() const
{
    return task == Task::trajectory ? 2 * trajectory.horizon : 2;
}

NetworkSpec TrainConfig::generator_spec() const
{
    NetworkSpec s = generator_arch;
    s.input_dim = condition_dim() + z_dim;
    s.output_dim = output_dim();
    return s;
}

NetworkSpec TrainConfig::discriminator_spec() const
{
    NetworkSpec s = discriminator_arch;
    s.input_dim = condition_dim() + output_dim();
    s.output_dim = 1;
    return s;
}

TrainConfig default_config(Task task)
{
    TrainConfig cfg;
    cfg.task = task;
    switch (task) {
    case Task::ring:
        cfg.z_dim = 2;
        cfg.objective.diversity.lambda = 0.1;
        break;
    case Task::conditional_ring:
        cfg.z_dim = 8;
        cfg.objective.diversity.lambda = 1.0;
        break;
    case Task::trajectory:
        cfg.z_dim = 8;
        cfg.objective.diversity.lambda = 10.0;
        cfg.objective.diversity.space = DiversitySpace::sequence;
        break;
    }
    cfg.objective.diversity.sequence_length = task == Task::trajectory ? cfg.trajectory.horizon : 1;
    cfg.objective.diversity.tau = default_tau(cfg.generator_spec());
    return cfg;
}

DivergenceError::DivergenceError(std::int64_t step, const std::string& what)
    : std::runtime_error("diverged at step " + std::to_string(step) + ": " + what), step_(step)
{
}

TrainState init_state(const TrainConfig& cfg)
{
    cfg.validate();
    TrainState s;
    s.g = mlp_init(cfg.generator_spec(), cfg.seed * 2 + 1);
    s.d = mlp_init(cfg.discriminator_spec(), cfg.seed * 2 + 2);
    if (cfg.warm_start_discriminator) {
        const Checkpoint ckpt = read_checkpoint_file(*cfg.warm_start_discriminator);
        if (!(ckpt.spec_d == cfg.discriminator_spec())) {
            throw CheckpointError("warm start: checkpoint discriminator spec does not match the config");
        }
        s.d = ckpt.state.d;
    }
    s.adam_g = AdamState::zeros_like(s.g.tensors);
    s.adam_d = AdamState::zeros_like(s.d.tensors);
    s.rng = Rng(cfg.seed, 1);
    return s;
}

namespace {

struct DataBatch {
    std::optional<Tensor> condition;
    Tensor target;
};

DataBatch sample_data(const TrainConfig& cfg, std::size_t n, Rng& rng)
{
    switch (cfg.task) {
    case Task::ring: return {std::nullopt, sample_ring(cfg.ring, n, rng)};
    case Task::conditional_ring: {
        LabeledBatch b = sample_conditional_ring(cfg.conditional, n, rng);
        return {std::move(b.conditions), std::move(b.targets)};
    }
    case Task::trajectory: {
        LabeledBatch b = sample_trajectories(cfg.trajectory, n, rng);
        return {std::move(b.conditions), std::move(b.targets)};
    }
    }
    throw std::logic_error("unknown task");
}

Tensor standard_normal(std::size_t n, std::size_t d, Rng& rng)
{
    Tensor z(Shape{n, d});
    for (double& v : z.values()) v = rng.normal();
    return z;
}

std::vector<Tensor> grads_of(const Tape& tape, const BoundParams& p)
{
    std::vector<Tensor> g;
    g.reserve(p.vars.size());
    for (const Var& v : p.vars) g.push_back(tape.grad(v));
    return g;
}

void update(std::vector<Tensor>& params, const std::vector<Tensor>& grads, AdamState& state, const AdamHyper& hyper,
            std::int64_t step, const char* who)
{
    try {
        adam_step(params, grads, state, hyper);
    } catch (const DomainError& e) {
        throw DivergenceError(step, std::string(who) + ": " + e.what());
    }
}

} // namespace

MetricRow train_step(TrainState& state, const TrainConfig& cfg)
{
    const NetworkSpec g_spec = cfg.generator_spec();
    const NetworkSpec d_spec = cfg.discriminator_spec();
    const std::size_t n = cfg.batch_size;
    const std::int64_t step = state.step + 1;
    MetricRow row;
    row.step = step;

    const bool d_frozen =
        cfg.warm_start_discriminator && state.step < static_cast<std::int64_t>(cfg.warm_start_freeze_steps);
    for (std::size_t k = 0; k < cfg.d_steps_per_g; ++k) {
        Tape tape;
        const BoundParams d = bind(tape, state.d, true);
        const BoundParams g = bind(tape, state.g, false);
        const DataBatch real = sample_data(cfg, n, state.rng);
        const Tensor z = standard_normal(n, cfg.z_dim, state.rng);
        const Var fake = mlp_forward(g_spec, g, join_condition(tape, real.condition, tape.constant(z))).output;
        const Var logit_real =
            mlp_forward(d_spec, d, join_condition(tape, real.condition, tape.constant(real.target))).output;
        const Var logit_fake = mlp_forward(d_spec, d, join_condition(tape, real.condition, fake)).output;
        const Var loss = d_loss(logit_real, logit_fake);
        row.d_loss = loss.value().item();
        if (!std::isfinite(row.d_loss)) throw DivergenceError(step, "discriminator loss is not finite");
        if (d_frozen) continue;
        tape.backward(loss);
        update(state.d.tensors, grads_of(tape, d), state.adam_d, cfg.adam, step, "discriminator");
    }

    {
        Tape tape;
        const BoundParams g = bind(tape, state.g, true);
        const BoundParams d = bind(tape, state.d, false);
        DataBatch data = sample_data(cfg, n, state.rng);
        auto [z1, z2] = sample_latent_pairs(n, cfg.z_dim, cfg.objective.diversity, state.rng);
        // The unconditional ring has no (x, y) pairing, so there is nothing to reconstruct.
        std::optional<Tensor> target;
        if (cfg.task != Task::ring) target = std::move(data.target);
        GeneratorBatch batch{std::move(data.condition), std::move(target), std::move(z1), std::move(z2)};
        const GeneratorLossTerms terms = build_generator_loss(tape, g_spec, g, d_spec, d, batch, cfg.objective);
        row.g_adv = terms.parts.adv;
        row.g_rec = terms.parts.rec;
        row.l_z = terms.parts.l_z;
        row.ratio_mean = terms.parts.ratio_mean;
        if (!std::isfinite(terms.total.value().item())) throw DivergenceError(step, "generator loss is not finite");
        tape.backward(terms.total);
        update(state.g.tensors, grads_of(tape, g), state.adam_g, cfg.adam, step, "generator");
    }

    if (!state.g.all_finite() || !state.d.all_finite()) throw DivergenceError(step, "parameters are not finite");
    state.step = step;
    return row;
}

EvalReport evaluate(const TrainConfig& cfg, const NetworkParams& g)
{
    Rng rng(cfg.seed, 2);
    const NetworkSpec g_spec = cfg.generator_spec();
    switch (cfg.task) {
    case Task::ring: return evaluate_ring(g_spec, g, cfg.z_dim, cfg.ring, cfg.eval_samples, rng);
    case Task::conditional_ring:
        return evaluate_conditional_ring(g_spec, g, cfg.z_dim, cfg.conditional, cfg.eval_samples, rng).report;
    case Task::trajectory: return evaluate_trajectories(g_spec, g, cfg.z_dim, cfg.trajectory, cfg.eval_samples, rng);
    }
    throw std::logic_error("unknown task");
}

namespace {

bool better(const EvalReport& a, const std::optional<EvalReport>& b)
{
    if (!b) return true;
    if (a.modes_captured != b->modes_captured) return a.modes_captured > b->modes_captured;
    return a.hq_fraction > b->hq_fraction;
}

} // namespace

TrainResult train(const TrainConfig& cfg, std::ostream* row_sink)
{
    return train_from(init_state(cfg), cfg, row_sink);
}

TrainResult train_from(TrainState state, const TrainConfig& cfg, std::ostream* row_sink)
{
    cfg.validate();
    TrainResult result;
    result.best_state = state;
    const auto total = static_cast<std::int64_t>(cfg.steps);
    const auto eval_every = static_cast<std::int64_t>(cfg.eval_every);
    const auto log_every = static_cast<std::int64_t>(cfg.log_every);
    if (row_sink) write_metrics_header(*row_sink);
    for (std::int64_t i = 1; i <= total; ++i) {
        MetricRow row;
        try {
            row = train_step(state, cfg);
        } catch (const DivergenceError& e) {
            result.divergence = e.what();
            result.divergence_step = e.step();
            break;
        }
        const bool last = i == total;
        if (row.step % eval_every == 0 || last) {
            row.eval = evaluate(cfg, state.g);
            if (better(*row.eval, result.best_report)) {
                result.best_report = row.eval;
                result.best_state = state;
            }
            if (last) result.final_report = row.eval;
        }
        if (row.step % log_every == 0 || row.eval || last) {
            if (row_sink) write_metrics_row(*row_sink, row);
            result.log.push_back(std::move(row));
        }
    }
    result.final_state = std::move(state);
    return result;
}

std::vector<SweepEntry> sweep(const TrainConfig& base, const std::vector<double>& lambdas, std::size_t jobs)
{
    if (lambdas.empty()) throw std::invalid_argument("sweep: no lambda values");
    std::vector<SweepEntry> entries(lambdas.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < lambdas.size(); i = next++) {
            SweepEntry& e = entries[i];
            e.lambda = lambdas[i];
            try {
                TrainConfig cfg = base;
                cfg.objective.diversity.lambda = lambdas[i];
                TrainResult r = train(cfg);
                if (r.divergence) e.error = *r.divergence;
                e.report = r.final_report ? r.final_report : std::optional<EvalReport>(evaluate(cfg, r.final_state.g));
            } catch (const std::exception& ex) {
                e.error = ex.what();
            }
        }
    };
    const std::size_t threads = std::clamp<std::size_t>(jobs, 1, lambdas.size());
    std::vector<std::thread> pool;
    for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
    for (std::thread& t : pool) t.join();
    return entries;
}

std::string format_double(double v)
{
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

void write_metrics_header(std::ostream& os) { os << kMetricsHeader << '\n'; }

void write_metrics_row(std::ostream& os, const MetricRow& row)
{
    os << row.step << ',' << format_double(row.d_loss) << ',' << format_double(row.g_adv) << ','
       << format_double(row.g_rec) << ',' << format_double(row.l_z) << ',' << format_double(row.ratio_mean);
    if (row.eval) {
        const EvalReport& e = *row.eval;
        os << ',' << e.modes_captured << ',' << format_double(e.hq_fraction) << ','
           << format_double(e.pairwise_diversity) << ',' << format_double(e.dist_min) << ','
           << format_double(e.frechet2);
    } else {
        os << ",,,,,";
    }
    os << '\n';
}

void write_sweep_csv(std::ostream& os, const std::vector<SweepEntry>& entries)
{
    os << kSweepHeader << '\n';
    for (const SweepEntry& e : entries) {
        os << format_double(e.lambda);
        if (e.report) {
            os << ',' << e.report->modes_captured << ',' << format_double(e.report->hq_fraction) << ','
               << format_double(e.report->pairwise_diversity) << ',' << format_double(e.report->frechet2);
        } else {
            os << ",,,,";
        }
        os << '\n';
    }
}

} // namespace divgan
