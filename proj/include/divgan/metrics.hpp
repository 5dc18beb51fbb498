#pragma once

#include "divgan/nets.hpp"
#include "divgan/rng.hpp"
#include "divgan/synth_data.hpp"

#include <json.hpp>

#include <array>
#include <optional>
#include <span>
#include <vector>

namespace divgan {

/// Evaluation summary. pairwise_diversity and frechet2 are raw-coordinate
/// surrogates for LPIPS and FID.
struct EvalReport {
    std::size_t modes_captured = 0;
    double hq_fraction = 0.0;
    double pairwise_diversity = 0.0;
    double dist_min = 0.0;
    double frechet2 = 0.0;
    std::size_t n_samples = 0;

    bool operator==(const EvalReport&) const = default;
};

void to_json(nlohmann::json& j, const EvalReport& r);
void from_json(const nlohmann::json& j, EvalReport& r);

struct ModeCoverage {
    std::size_t modes_captured = 0;
    double hq_fraction = 0.0;
    /// High-quality sample count per mode.
    std::vector<std::size_t> hq_per_mode;
};

/// A sample is high quality when it lies within 3 std of its nearest mode.
ModeCoverage mode_coverage(const Tensor& samples, const RingMixtureSpec& spec);

/// Mean over unordered pairs of the per-coordinate mean squared difference.
/// Rows of `samples` are the generated outputs.
double pairwise_diversity(const Tensor& samples);
/// Same, for a list of outputs of any (common) shape.
double pairwise_diversity(std::span<const Tensor> sample_sets);

/// Smallest mean squared error between any sample row and `ground_truth`.
double dist_min(const Tensor& samples, const Tensor& ground_truth);

/// Fréchet distance between Gaussians fitted to two sets of 2D points,
/// using the closed-form square root of a 2x2 matrix product.
double frechet_2d(const Tensor& set_a, const Tensor& set_b);

/// Unbiased (n - 1) sample covariance of the rows.
Tensor sample_covariance(const Tensor& points);

enum class InterpolationMode { linear, slerp };

struct Interpolation {
    /// (steps x z_dim) latents, endpoints equal to z_a and z_b.
    Tensor latents;
    /// (steps x output_dim) generator outputs.
    Tensor outputs;
    /// Set when slerp was requested but the latents were (anti)parallel.
    bool fell_back_to_linear = false;
};

Interpolation latent_interpolation(const NetworkSpec& g_spec, const NetworkParams& g_params,
                                   const std::optional<Tensor>& condition, const Tensor& z_a, const Tensor& z_b,
                                   std::size_t steps, InterpolationMode mode);

/// 2,500 samples, matching the ring evaluation protocol.
inline constexpr std::size_t kEvalSamples = 2500;

/// Samples G(z) and scores it against the ring.
EvalReport evaluate_ring(const NetworkSpec& g_spec, const NetworkParams& g_params, std::size_t z_dim,
                         const RingMixtureSpec& spec, std::size_t n, Rng& rng);

struct ConditionalCoverage {
    EvalReport report;
    /// covered[label][j]: owned mode 2*label + j has a high-quality sample
    /// generated under `label`.
    std::vector<std::array<bool, 2>> covered;
    /// High-quality samples landing in a mode owned by their label, over
    /// all high-quality samples (1 when there are none).
    double owned_fraction = 1.0;

    bool all_labels_cover_both() const;
};

ConditionalCoverage evaluate_conditional_ring(const NetworkSpec& g_spec, const NetworkParams& g_params,
                                              std::size_t z_dim, const ConditionalRingSpec& spec, std::size_t n,
                                              Rng& rng);

/// Futures are scored per context: diversity among the generated futures,
/// the closest one to the recorded future, and whether each follows a
/// clean circular continuation in either direction.
EvalReport evaluate_trajectories(const NetworkSpec& g_spec, const NetworkParams& g_params, std::size_t z_dim,
                                 const TrajectorySpec& spec, std::size_t n, Rng& rng);

} // namespace divgan
