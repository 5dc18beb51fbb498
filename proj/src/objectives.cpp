#include "divgan/objectives.hpp"

#include <cmath>
#include <stdexcept>

namespace divgan {

std::string to_string(Norm n) { return n == Norm::l1 ? "l1" : "l2"; }

std::string to_string(DiversitySpace s)
{
    switch (s) {
    case DiversitySpace::output: return "output";
    case DiversitySpace::feature: return "feature";
    case DiversitySpace::sequence: return "sequence";
    }
    return "?";
}

std::string to_string(GLossForm f) { return f == GLossForm::minimax ? "minimax" : "non_saturating"; }

Norm parse_norm(const std::string& s)
{
    if (s == "l1") return Norm::l1;
    if (s == "l2") return Norm::l2;
    throw std::invalid_argument("unknown norm '" + s + "' (expected l1 or l2)");
}

DiversitySpace parse_space(const std::string& s)
{
    if (s == "output") return DiversitySpace::output;
    if (s == "feature") return DiversitySpace::feature;
    if (s == "sequence") return DiversitySpace::sequence;
    throw std::invalid_argument("unknown diversity space '" + s + "' (expected output, feature or sequence)");
}

GLossForm parse_g_loss_form(const std::string& s)
{
    if (s == "minimax") return GLossForm::minimax;
    if (s == "non_saturating") return GLossForm::non_saturating;
    throw std::invalid_argument("unknown generator loss form '" + s + "' (expected minimax or non_saturating)");
}

double norm_of(std::span<const double> v, Norm norm) { return norm == Norm::l1 ? l1_norm(v) : l2_norm(v); }

void DiversityConfig::validate() const
{
    if (!(lambda >= 0.0)) throw std::invalid_argument("diversity: lambda must be >= 0");
    if (tau && !(*tau > 0.0)) throw std::invalid_argument("diversity: tau must be > 0 when bounded");
    if (!(min_z_gap > 0.0)) throw std::invalid_argument("diversity: min_z_gap must be > 0");
    if (sequence_length < 1) throw std::invalid_argument("diversity: sequence_length must be >= 1");
}

std::optional<double> default_tau(const NetworkSpec& generator)
{
    if (generator.bounded_output()) return std::nullopt;
    return 10.0;
}

void ObjectiveConfig::validate() const
{
    if (!(beta >= 0.0)) throw std::invalid_argument("objective: beta must be >= 0");
    diversity.validate();
}

Var d_loss(Var logits_real, Var logits_fake)
{
    if (logits_real.value().size() == 0 || logits_fake.value().size() == 0) {
        throw std::invalid_argument("d_loss: empty batch");
    }
    return mean(softplus(-logits_real)) + mean(softplus(logits_fake));
}

Var g_adv_loss(Var logits_fake, GLossForm form)
{
    if (logits_fake.value().size() == 0) throw std::invalid_argument("g_adv_loss: empty batch");
    if (form == GLossForm::non_saturating) return mean(softplus(-logits_fake));
    // log(1 - sigmoid(l)) = -softplus(l)
    return -mean(softplus(logits_fake));
}

Var reconstruction_loss(Var y_hat, Var y)
{
    return mean(abs(y_hat - y));
}

namespace {

Var as_rows(Var v)
{
    if (v.value().rank() == 2) return v;
    return reshape(v, Shape{1, v.value().size()});
}

Tensor as_rows(const Tensor& t)
{
    if (t.rank() == 2) return t;
    return t.reshaped(Shape{1, t.size()});
}

Var row_norm(Var diff, Norm norm)
{
    if (norm == Norm::l1) return row_sum(abs(diff));
    return sqrt(row_sum(square(diff)));
}

} // namespace

Tensor latent_gaps(const Tensor& z1, const Tensor& z2, Norm norm, double min_gap)
{
    const Tensor a = as_rows(z1);
    const Tensor b = as_rows(z2);
    require_same_shape(a, b, "latent_gaps");
    Tensor gaps(Shape{a.rows()});
    std::vector<double> diff(a.cols());
    for (std::size_t r = 0; r < a.rows(); ++r) {
        for (std::size_t c = 0; c < a.cols(); ++c) diff[c] = a.at(r, c) - b.at(r, c);
        gaps[r] = norm_of(diff, norm);
        if (!(gaps[r] >= min_gap)) {
            throw DegenerateLatentPair("latent pair " + std::to_string(r) + " has gap " + std::to_string(gaps[r]) +
                                       " below min_z_gap " + std::to_string(min_gap) + "; resample z2");
        }
    }
    return gaps;
}

RatioTerms diversity_ratios(Var y1, Var y2, const Tensor& z1, const Tensor& z2, const DiversityConfig& cfg)
{
    Tape& tape = y1.tape();
    const Var gaps = tape.constant(latent_gaps(z1, z2, cfg.norm, cfg.min_z_gap));
    const Var ratio = row_norm(as_rows(y1) - as_rows(y2), cfg.norm) / gaps;
    RatioTerms out{ratio, ratio.value()};
    if (cfg.tau) out.clamped = min_const(ratio, *cfg.tau);
    return out;
}

RatioTerms feature_diversity_ratios(std::span<const Var> feats1, std::span<const Var> feats2, const Tensor& z1,
                                    const Tensor& z2, const DiversityConfig& cfg)
{
    if (feats1.size() != feats2.size()) {
        throw ShapeError("feature_diversity_ratio: layer counts differ (" + std::to_string(feats1.size()) + " vs " +
                         std::to_string(feats2.size()) + ")");
    }
    if (feats1.empty()) throw ShapeError("feature_diversity_ratio: no feature layers");
    Tape& tape = feats1.front().tape();
    Var total;
    for (std::size_t l = 0; l < feats1.size(); ++l) {
        const Var d = row_norm(as_rows(feats1[l]) - as_rows(feats2[l]), cfg.norm);
        total = total.valid() ? total + d : d;
    }
    const Var gaps = tape.constant(latent_gaps(z1, z2, cfg.norm, cfg.min_z_gap));
    const Var ratio = scale(total, 1.0 / static_cast<double>(feats1.size())) / gaps;
    return RatioTerms{ratio, ratio.value()};
}

RatioTerms sequence_diversity_ratios(Var seq1, Var seq2, std::size_t steps, const Tensor& z1, const Tensor& z2,
                                     const DiversityConfig& cfg)
{
    const Var a = as_rows(seq1);
    const Var b = as_rows(seq2);
    require_same_shape(a.value(), b.value(), "sequence_diversity_ratio");
    if (steps < 1 || a.value().cols() % steps != 0) {
        throw ShapeError("sequence_diversity_ratio: " + std::to_string(a.value().cols()) +
                         " output columns do not split into " + std::to_string(steps) + " steps");
    }
    const std::size_t width = a.value().cols() / steps;
    Var total;
    for (std::size_t t = 0; t < steps; ++t) {
        const Var d = row_norm(slice_cols(a, t * width, (t + 1) * width) - slice_cols(b, t * width, (t + 1) * width),
                               Norm::l1);
        total = total.valid() ? total + d : d;
    }
    const Var gaps = a.tape().constant(latent_gaps(z1, z2, Norm::l1, cfg.min_z_gap));
    const Var ratio = scale(total, 1.0 / static_cast<double>(steps)) / gaps;
    return RatioTerms{ratio, ratio.value()};
}

double d_loss(std::span<const double> logits_real, std::span<const double> logits_fake)
{
    Tape tape;
    const Var r = tape.constant(Tensor::vector({logits_real.begin(), logits_real.end()}));
    const Var f = tape.constant(Tensor::vector({logits_fake.begin(), logits_fake.end()}));
    return d_loss(r, f).value().item();
}

double g_adv_loss(std::span<const double> logits_fake, GLossForm form)
{
    Tape tape;
    const Var f = tape.constant(Tensor::vector({logits_fake.begin(), logits_fake.end()}));
    return g_adv_loss(f, form).value().item();
}

double diversity_ratio(const Tensor& y1, const Tensor& y2, const Tensor& z1, const Tensor& z2,
                       const DiversityConfig& cfg)
{
    Tape tape;
    return mean(diversity_ratios(tape.constant(y1), tape.constant(y2), z1, z2, cfg).clamped).value().item();
}

double feature_diversity_ratio(std::span<const Tensor> feats1, std::span<const Tensor> feats2, const Tensor& z1,
                               const Tensor& z2, const DiversityConfig& cfg)
{
    if (feats1.size() != feats2.size()) {
        throw ShapeError("feature_diversity_ratio: layer counts differ (" + std::to_string(feats1.size()) + " vs " +
                         std::to_string(feats2.size()) + ")");
    }
    Tape tape;
    std::vector<Var> a;
    std::vector<Var> b;
    for (std::size_t l = 0; l < feats1.size(); ++l) {
        require_same_shape(feats1[l], feats2[l], "feature_diversity_ratio");
        a.push_back(tape.constant(feats1[l]));
        b.push_back(tape.constant(feats2[l]));
    }
    return mean(feature_diversity_ratios(a, b, z1, z2, cfg).clamped).value().item();
}

double sequence_diversity_ratio(std::span<const Tensor> seq1, std::span<const Tensor> seq2, const Tensor& z1,
                                const Tensor& z2, const DiversityConfig& cfg)
{
    if (seq1.size() != seq2.size()) {
        throw ShapeError("sequence_diversity_ratio: sequence lengths differ (" + std::to_string(seq1.size()) +
                         " vs " + std::to_string(seq2.size()) + ")");
    }
    if (seq1.empty()) throw ShapeError("sequence_diversity_ratio: empty sequence");
    Tape tape;
    std::vector<Var> a;
    std::vector<Var> b;
    for (std::size_t t = 0; t < seq1.size(); ++t) {
        require_same_shape(seq1[t], seq2[t], "sequence_diversity_ratio");
        a.push_back(as_rows(tape.constant(seq1[t])));
        b.push_back(as_rows(tape.constant(seq2[t])));
    }
    return mean(sequence_diversity_ratios(concat_cols(a), concat_cols(b), seq1.size(), z1, z2, cfg).clamped).value().item();
}

double reconstruction_loss(const Tensor& y_hat, const Tensor& y)
{
    require_same_shape(y_hat, y, "reconstruction_loss");
    Tape tape;
    return reconstruction_loss(tape.constant(y_hat), tape.constant(y)).value().item();
}

std::pair<Tensor, Tensor> sample_latent_pairs(std::size_t n, std::size_t z_dim, const DiversityConfig& cfg, Rng& rng)
{
    constexpr int max_redraws = 8;
    const Norm norm = cfg.space == DiversitySpace::sequence ? Norm::l1 : cfg.norm;
    Tensor z1(Shape{n, z_dim});
    Tensor z2(Shape{n, z_dim});
    std::vector<double> diff(z_dim);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < z_dim; ++c) z1.at(r, c) = rng.normal();
        for (int attempt = 0;; ++attempt) {
            for (std::size_t c = 0; c < z_dim; ++c) {
                z2.at(r, c) = rng.normal();
                diff[c] = z1.at(r, c) - z2.at(r, c);
            }
            if (norm_of(diff, norm) >= cfg.min_z_gap) break;
            if (attempt == max_redraws) {
                throw DegenerateLatentPair("sample_latent_pairs: latent gap stayed below min_z_gap after " +
                                           std::to_string(max_redraws) + " redraws");
            }
        }
    }
    return {std::move(z1), std::move(z2)};
}

GeneratorLossTerms build_generator_loss(Tape& tape, const NetworkSpec& g_spec, const BoundParams& g,
                                        const NetworkSpec& d_spec, const BoundParams& d, const GeneratorBatch& batch,
                                        const ObjectiveConfig& cfg)
{
    cfg.validate();
    if (cfg.beta > 0.0 && !batch.target) throw std::invalid_argument("generator loss: beta > 0 requires targets");

    const Var y1 = mlp_forward(g_spec, g, join_condition(tape, batch.condition, tape.constant(batch.z1))).output;
    const Var y2 = mlp_forward(g_spec, g, join_condition(tape, batch.condition, tape.constant(batch.z2))).output;
    const MlpOutput d1 = mlp_forward(d_spec, d, join_condition(tape, batch.condition, y1));

    GeneratorLossTerms terms;
    const Var adv = g_adv_loss(d1.output, cfg.g_loss_form);
    terms.parts.adv = adv.value().item();
    Var total = adv;

    if (batch.target) {
        const Var rec = reconstruction_loss(y1, tape.constant(*batch.target));
        terms.parts.rec = rec.value().item();
        if (cfg.beta > 0.0) total = total + scale(rec, cfg.beta);
    }

    const DiversityConfig& div = cfg.diversity;
    RatioTerms ratios;
    switch (div.space) {
    case DiversitySpace::output:
        ratios = diversity_ratios(y1, y2, batch.z1, batch.z2, div);
        break;
    case DiversitySpace::feature: {
        const MlpOutput d2 = mlp_forward(d_spec, d, join_condition(tape, batch.condition, y2));
        ratios = feature_diversity_ratios(d1.features, d2.features, batch.z1, batch.z2, div);
        break;
    }
    case DiversitySpace::sequence:
        ratios = sequence_diversity_ratios(y1, y2, div.sequence_length, batch.z1, batch.z2, div);
        break;
    }
    const Var l_z = mean(ratios.clamped);
    terms.parts.l_z = l_z.value().item();
    double raw = 0.0;
    for (double v : ratios.raw.values()) raw += v;
    terms.parts.ratio_mean = raw / static_cast<double>(ratios.raw.size());
    if (div.lambda > 0.0) total = total - scale(l_z, div.lambda);

    terms.total = total;
    return terms;
}

GeneratorObjective generator_total_loss(const GeneratorBatch& batch, const NetworkSpec& g_spec,
                                        const NetworkParams& g_params, const NetworkSpec& d_spec,
                                        const NetworkParams& d_params, const ObjectiveConfig& cfg)
{
    Tape tape;
    const BoundParams g = bind(tape, g_params, false);
    const BoundParams d = bind(tape, d_params, false);
    const GeneratorLossTerms terms = build_generator_loss(tape, g_spec, g, d_spec, d, batch, cfg);
    return GeneratorObjective{terms.total.value().item(), terms.parts};
}

} // namespace divgan
