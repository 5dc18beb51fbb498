#pragma once

#include "divgan/adam.hpp"
#include "divgan/metrics.hpp"
#include "divgan/nets.hpp"
#include "divgan/objectives.hpp"
#include "divgan/rng.hpp"
#include "divgan/synth_data.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace divgan {

enum class Task { ring, conditional_ring, trajectory };

std::string to_string(Task t);
Task parse_task(const std::string& s);

/// Everything needed to reproduce a training run.
struct TrainConfig {
    Task task = Task::ring;
    ObjectiveConfig objective;
    std::size_t z_dim = 2;
    std::size_t batch_size = 128;
    std::size_t steps = 30000;
    std::size_t d_steps_per_g = 1;
    AdamHyper adam;
    std::uint64_t seed = 0;
    std::size_t eval_every = 1000;
    std::size_t eval_samples = kEvalSamples;
    std::size_t log_every = 1;
    /// Checkpoint whose discriminator initialises D; G still starts fresh.
    std::optional<std::string> warm_start_discriminator;
    /// Steps during which a warm-started D is held fixed before fine-tuning.
    std::size_t warm_start_freeze_steps = 0;

    RingMixtureSpec ring;
    ConditionalRingSpec conditional;
    TrajectorySpec trajectory;

    /// Hidden layout of the two networks; input and output sizes are
    /// derived from the task.
    NetworkSpec generator_arch = default_generator_spec(2, 2);
    NetworkSpec discriminator_arch = default_discriminator_spec(2);

    void validate() const;
    std::size_t condition_dim() const;
    std::size_t output_dim() const;
    NetworkSpec generator_spec() const;
    NetworkSpec discriminator_spec() const;
};

/// Task defaults: z_dim 2 and lambda 0.1 on the ring, z_dim 8 and lambda 1
/// on the conditional ring, z_dim 8 and lambda 10 with the sequence
/// regularizer on trajectories. tau follows the generator's output.
TrainConfig default_config(Task task);

struct TrainState {
    NetworkParams g;
    NetworkParams d;
    AdamState adam_g;
    AdamState adam_d;
    std::int64_t step = 0;
    Rng rng;

    bool operator==(const TrainState&) const = default;
};

/// Fresh networks for `cfg` (plus the warm-start discriminator, if set).
TrainState init_state(const TrainConfig& cfg);

struct MetricRow {
    std::int64_t step = 0;
    double d_loss = 0.0;
    double g_adv = 0.0;
    double g_rec = 0.0;
    double l_z = 0.0;
    double ratio_mean = 0.0;
    std::optional<EvalReport> eval;

    bool operator==(const MetricRow&) const = default;
};

inline constexpr const char* kMetricsHeader = "step,d_loss,g_adv,g_rec,l_z,ratio_mean,modes,hq_frac,diversity,dist_min,frechet";

void write_metrics_header(std::ostream& os);
void write_metrics_row(std::ostream& os, const MetricRow& row);
std::string format_double(double v);

/// Raised when a loss or gradient stops being finite.
class DivergenceError : public std::runtime_error {
public:
    DivergenceError(std::int64_t step, const std::string& what);
    std::int64_t step() const noexcept { return step_; }

private:
    std::int64_t step_;
};

/// One discriminator update (d_steps_per_g times) followed by one generator
/// update. Losses in the row are measured before the updates.
MetricRow train_step(TrainState& state, const TrainConfig& cfg);

/// Task-appropriate evaluation with a generator sample stream derived from
/// cfg.seed, so the same parameters always produce the same report.
EvalReport evaluate(const TrainConfig& cfg, const NetworkParams& g);

struct TrainResult {
    TrainState final_state;
    TrainState best_state;
    std::optional<EvalReport> best_report;
    std::optional<EvalReport> final_report;
    std::vector<MetricRow> log;
    /// Set when training stopped early on divergence.
    std::optional<std::string> divergence;
    std::int64_t divergence_step = 0;
};

/// Runs cfg.steps steps, evaluating every eval_every steps and at the end.
/// The best state is the one with most modes (ties: higher hq fraction).
/// `row_sink`, when given, receives each logged row as it is produced.
TrainResult train(const TrainConfig& cfg, std::ostream* row_sink = nullptr);
TrainResult train_from(TrainState state, const TrainConfig& cfg, std::ostream* row_sink = nullptr);

struct SweepEntry {
    double lambda = 0.0;
    std::optional<EvalReport> report;
    std::optional<std::string> error;
};

/// Independent runs of `base` differing only in lambda. Up to `jobs` runs
/// execute concurrently.
std::vector<SweepEntry> sweep(const TrainConfig& base, const std::vector<double>& lambdas, std::size_t jobs = 1);

inline constexpr const char* kSweepHeader = "lambda,modes,hq_frac,diversity,frechet";
void write_sweep_csv(std::ostream& os, const std::vector<SweepEntry>& entries);

} // namespace divgan
