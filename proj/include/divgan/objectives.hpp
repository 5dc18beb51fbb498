#pragma once

#include "divgan/autodiff.hpp"
#include "divgan/nets.hpp"
#include "divgan/rng.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace divgan {

enum class Norm { l1, l2 };
enum class DiversitySpace { output, feature, sequence };
enum class GLossForm { minimax, non_saturating };

std::string to_string(Norm n);
std::string to_string(DiversitySpace s);
std::string to_string(GLossForm f);
Norm parse_norm(const std::string& s);
DiversitySpace parse_space(const std::string& s);
GLossForm parse_g_loss_form(const std::string& s);

double norm_of(std::span<const double> v, Norm norm);

/// Raised when a latent pair is too close for the ratio to be defined.
class DegenerateLatentPair : public DomainError {
public:
    using DomainError::DomainError;
};

/// Hyper-parameters of the latent diversity term.
struct DiversityConfig {
    double lambda = 0.1;
    /// Upper clamp on the ratio; nullopt disables it.
    std::optional<double> tau = 10.0;
    Norm norm = Norm::l1;
    DiversitySpace space = DiversitySpace::output;
    double min_z_gap = 1e-8;
    /// Number of equally sized steps the generator output is split into
    /// for the sequence variant.
    std::size_t sequence_length = 1;

    void validate() const;
};

/// Margin default: none for bounded generator outputs, 10 otherwise.
std::optional<double> default_tau(const NetworkSpec& generator);

struct ObjectiveConfig {
    double beta = 0.0;
    GLossForm g_loss_form = GLossForm::non_saturating;
    DiversityConfig diversity;

    void validate() const;
};

// Tape-level building blocks, batched over rows.

/// -mean log sigmoid(real) - mean log(1 - sigmoid(fake)), in logit form.
Var d_loss(Var logits_real, Var logits_fake);
Var g_adv_loss(Var logits_fake, GLossForm form);
/// Mean absolute error.
Var reconstruction_loss(Var y_hat, Var y);

/// Per-row latent distances ||z1 - z2||; throws DegenerateLatentPair when a
/// row falls below min_gap.
Tensor latent_gaps(const Tensor& z1, const Tensor& z2, Norm norm, double min_gap);

struct RatioTerms {
    /// Per-row ratios after the tau clamp (length n).
    Var clamped;
    /// Per-row ratios before clamping.
    Tensor raw;
};

/// min(||y1 - y2|| / ||z1 - z2||, tau) per row.
RatioTerms diversity_ratios(Var y1, Var y2, const Tensor& z1, const Tensor& z2, const DiversityConfig& cfg);
/// (1/L) sum_l ||f1_l - f2_l|| / ||z1 - z2|| per row; never clamped.
RatioTerms feature_diversity_ratios(std::span<const Var> feats1, std::span<const Var> feats2, const Tensor& z1,
                                    const Tensor& z2, const DiversityConfig& cfg);
/// Outputs are split into `steps` column blocks; (1/T) sum_t ||y1_t - y2_t||_1
/// over ||z1 - z2||_1 per row; never clamped.
RatioTerms sequence_diversity_ratios(Var seq1, Var seq2, std::size_t steps, const Tensor& z1, const Tensor& z2,
                                     const DiversityConfig& cfg);

// Value-level operations.

double d_loss(std::span<const double> logits_real, std::span<const double> logits_fake);
double g_adv_loss(std::span<const double> logits_fake, GLossForm form);
double diversity_ratio(const Tensor& y1, const Tensor& y2, const Tensor& z1, const Tensor& z2,
                       const DiversityConfig& cfg);
double feature_diversity_ratio(std::span<const Tensor> feats1, std::span<const Tensor> feats2, const Tensor& z1,
                               const Tensor& z2, const DiversityConfig& cfg);
double sequence_diversity_ratio(std::span<const Tensor> seq1, std::span<const Tensor> seq2, const Tensor& z1,
                                const Tensor& z2, const DiversityConfig& cfg);
double reconstruction_loss(const Tensor& y_hat, const Tensor& y);

/// One training example per row: optional condition and target, plus two
/// independently drawn latents.
struct GeneratorBatch {
    std::optional<Tensor> condition;
    std::optional<Tensor> target;
    Tensor z1;
    Tensor z2;
};

/// Draws (z1, z2) ~ N(0, I) per row, redrawing z2 up to 8 times when the
/// pair is closer than cfg.min_z_gap.
std::pair<Tensor, Tensor> sample_latent_pairs(std::size_t n, std::size_t z_dim, const DiversityConfig& cfg, Rng& rng);

struct LossParts {
    double adv = 0.0;
    double rec = 0.0;
    /// Batch mean of the clamped ratio, before lambda.
    double l_z = 0.0;
    /// Batch mean of the unclamped ratio.
    double ratio_mean = 0.0;
};

struct GeneratorLossTerms {
    Var total;
    LossParts parts;
};

/// adv(G(x, z1)) + beta * rec(G(x, z1), y) - lambda * mean ratio(G(x, z1), G(x, z2)).
GeneratorLossTerms build_generator_loss(Tape& tape, const NetworkSpec& g_spec, const BoundParams& g,
                                        const NetworkSpec& d_spec, const BoundParams& d, const GeneratorBatch& batch,
                                        const ObjectiveConfig& cfg);

struct GeneratorObjective {
    double total = 0.0;
    LossParts parts;
};

GeneratorObjective generator_total_loss(const GeneratorBatch& batch, const NetworkSpec& g_spec,
                                        const NetworkParams& g_params, const NetworkSpec& d_spec,
                                        const NetworkParams& d_params, const ObjectiveConfig& cfg);

} // namespace divgan
