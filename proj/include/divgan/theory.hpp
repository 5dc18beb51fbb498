#pragma once

#include "divgan/nets.hpp"
#include "divgan/rng.hpp"

#include <json.hpp>

#include <optional>
#include <vector>

namespace divgan {

enum class JacobianNorm { spectral, frobenius };

/// Difference quotient of G along a latent segment against the average
/// Jacobian norm over the segment.
struct BoundCheckReport {
    /// ||G(z2) - G(z1)||_2 / ||z2 - z1||_2
    double lhs = 0.0;
    /// Midpoint-rule integral over t in [0, 1] of ||dG/dz(t z2 + (1 - t) z1)||.
    double rhs = 0.0;
    double slack = 0.0;
    std::size_t n_quad = 0;

    /// lhs <= rhs (1 + 1e-6) + 1e-8
    bool holds() const { return lhs <= rhs * (1.0 + 1e-6) + 1e-8; }
};

/// Largest singular value (or Frobenius norm) of a small matrix.
double matrix_norm(const Tensor& m, JacobianNorm norm);

/// d G(x, z) / d z at a single latent, shaped (output_dim x z_dim).
Tensor generator_jacobian(const NetworkSpec& g_spec, const NetworkParams& g_params,
                          const std::optional<Tensor>& condition, const Tensor& z);

BoundCheckReport path_gradient_bound(const NetworkSpec& g_spec, const NetworkParams& g_params,
                                     const std::optional<Tensor>& condition, const Tensor& z1, const Tensor& z2,
                                     std::size_t n_quad, JacobianNorm norm = JacobianNorm::spectral);

/// Checks at `n_quad` and, if that misses, once more at `refined_quad`
/// before reporting.
BoundCheckReport checked_gradient_bound(const NetworkSpec& g_spec, const NetworkParams& g_params,
                                        const std::optional<Tensor>& condition, const Tensor& z1, const Tensor& z2,
                                        std::size_t n_quad = 64, std::size_t refined_quad = 256,
                                        JacobianNorm norm = JacobianNorm::spectral);

struct AttractionProbe {
    Tensor z2;
    double gap = 0.0;
    double ratio_t = 0.0;
    double ratio_t1 = 0.0;
    bool condition_holds = false;
    bool attracted = false;
};

struct AttractionReport {
    /// ||y* - G_t(z1)|| - ||y* - G_t1(z1)||
    double epsilon = 0.0;
    std::vector<AttractionProbe> probes;
    /// eps / (4 min max(ratio_t, ratio_t1)) with the min over sampled
    /// latents. The true infimum can only be smaller, so this estimate never
    /// exceeds the radius it approximates.
    double radius_estimate = 0.0;

    std::size_t condition_count() const;
    /// Probes meeting the condition that were not attracted.
    std::size_t counterexamples() const;
};

/// How probe latents z2 are drawn.
struct ProbeSampling {
    /// When set, z2 = z1 + scale * N(0, I); otherwise z2 ~ N(0, I).
    std::optional<double> local_scale;
};

/// Tests the neighbourhood-attraction implication for one parameter update
/// theta_t -> theta_t1 that moved G(z1) toward y_star. Throws DomainError
/// when the update did not attract z1 (epsilon <= 0).
AttractionReport attraction_check(const NetworkSpec& g_spec, const NetworkParams& params_t,
                                  const NetworkParams& params_t1, const std::optional<Tensor>& condition,
                                  const Tensor& z1, const Tensor& y_star, std::size_t probes, Rng& rng,
                                  ProbeSampling sampling = {});

/// One Adam step on ||y_star - G(z1)||_2 from fresh moments.
NetworkParams adam_step_toward(const NetworkSpec& g_spec, const NetworkParams& params,
                               const std::optional<Tensor>& condition, const Tensor& z1, const Tensor& y_star,
                               double lr);

struct VerifySummary {
    std::size_t bound_pairs = 0;
    std::size_t bound_violations = 0;
    double max_lhs_over_rhs = 0.0;
    std::size_t attraction_probes = 0;
    std::size_t attraction_conditions = 0;
    std::size_t attraction_counterexamples = 0;
    double epsilon = 0.0;
    double radius_estimate = 0.0;

    bool passed() const { return bound_violations == 0 && attraction_counterexamples == 0; }
};

/// The bound on `pairs` random latent pairs plus one attraction check with
/// `probes` probes (half global, half local to z1).
VerifySummary run_verification(const NetworkSpec& g_spec, const NetworkParams& g_params,
                               const std::optional<Tensor>& condition, std::size_t pairs, std::size_t probes,
                               std::uint64_t seed);

void to_json(nlohmann::json& j, const BoundCheckReport& r);
void to_json(nlohmann::json& j, const AttractionReport& r);
void to_json(nlohmann::json& j, const VerifySummary& s);

} // namespace divgan
