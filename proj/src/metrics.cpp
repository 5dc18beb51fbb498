#include "divgan/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace divgan {

void to_json(nlohmann::json& j, const EvalReport& r)
{
    j = nlohmann::json{{"modes_captured", r.modes_captured},       {"hq_fraction", r.hq_fraction},
                       {"pairwise_diversity", r.pairwise_diversity}, {"dist_min", r.dist_min},
                       {"frechet2", r.frechet2},                   {"n_samples", r.n_samples}};
}

void from_json(const nlohmann::json& j, EvalReport& r)
{
    j.at("modes_captured").get_to(r.modes_captured);
    j.at("hq_fraction").get_to(r.hq_fraction);
    j.at("pairwise_diversity").get_to(r.pairwise_diversity);
    j.at("dist_min").get_to(r.dist_min);
    j.at("frechet2").get_to(r.frechet2);
    j.at("n_samples").get_to(r.n_samples);
}

ModeCoverage mode_coverage(const Tensor& samples, const RingMixtureSpec& spec)
{
    spec.validate();
    if (samples.rank() != 2 || samples.cols() != 2 || samples.rows() == 0) {
        throw ShapeError("mode_coverage: expected a non-empty (n x 2) sample matrix, got " +
                         shape_to_string(samples.shape()));
    }
    ModeCoverage cov;
    cov.hq_per_mode.assign(spec.n_modes, 0);
    std::size_t hq = 0;
    const double threshold = 3.0 * spec.std;
    for (std::size_t i = 0; i < samples.rows(); ++i) {
        const NearestMode m = nearest_mode(std::span<const double>(samples.data() + 2 * i, 2), spec);
        if (m.distance <= threshold) {
            ++hq;
            ++cov.hq_per_mode[m.index];
        }
    }
    cov.modes_captured =
        static_cast<std::size_t>(std::count_if(cov.hq_per_mode.begin(), cov.hq_per_mode.end(), [](std::size_t c) { return c > 0; }));
    cov.hq_fraction = static_cast<double>(hq) / static_cast<double>(samples.rows());
    return cov;
}

double pairwise_diversity(const Tensor& samples)
{
    if (samples.rank() != 2 || samples.rows() < 2) {
        throw std::invalid_argument("pairwise_diversity: need at least 2 samples");
    }
    // sum_{i<j} ||x_i - x_j||^2 = n * sum_i ||x_i - mean||^2
    const std::size_t n = samples.rows();
    const std::size_t d = samples.cols();
    std::vector<double> centre(d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < d; ++c) centre[c] += samples.at(i, c);
    }
    for (double& c : centre) c /= static_cast<double>(n);
    double scatter = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < d; ++c) {
            const double v = samples.at(i, c) - centre[c];
            scatter += v * v;
        }
    }
    const double pairs = 0.5 * static_cast<double>(n) * static_cast<double>(n - 1);
    return static_cast<double>(n) * scatter / (pairs * static_cast<double>(d));
}

double pairwise_diversity(std::span<const Tensor> sample_sets)
{
    if (sample_sets.size() < 2) throw std::invalid_argument("pairwise_diversity: need at least 2 samples");
    std::vector<Tensor> rows;
    rows.reserve(sample_sets.size());
    for (const Tensor& s : sample_sets) {
        require_same_shape(s, sample_sets.front(), "pairwise_diversity");
        rows.push_back(s.reshaped(Shape{s.size()}));
    }
    return pairwise_diversity(stack_rows(rows));
}

double dist_min(const Tensor& samples, const Tensor& ground_truth)
{
    const Tensor s = samples.rank() == 2 ? samples : samples.reshaped(Shape{1, samples.size()});
    if (s.rows() == 0) throw std::invalid_argument("dist_min: no samples");
    if (ground_truth.size() != s.cols()) {
        throw ShapeError("dist_min: ground truth " + shape_to_string(ground_truth.shape()) + " does not match samples " +
                         shape_to_string(s.shape()));
    }
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < s.rows(); ++i) {
        double se = 0.0;
        for (std::size_t c = 0; c < s.cols(); ++c) {
            const double v = s.at(i, c) - ground_truth[c];
            se += v * v;
        }
        best = std::min(best, se / static_cast<double>(s.cols()));
    }
    return best;
}

Tensor sample_covariance(const Tensor& points)
{
    const std::size_t n = points.rows();
    const std::size_t d = points.cols();
    if (n < 2) throw std::invalid_argument("sample_covariance: need at least 2 points");
    std::vector<double> mu(d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < d; ++c) mu[c] += points.at(i, c);
    }
    for (double& m : mu) m /= static_cast<double>(n);
    Tensor cov(Shape{d, d}, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t a = 0; a < d; ++a) {
            for (std::size_t b = 0; b < d; ++b) cov.at(a, b) += (points.at(i, a) - mu[a]) * (points.at(i, b) - mu[b]);
        }
    }
    for (double& v : cov.values()) v /= static_cast<double>(n - 1);
    return cov;
}

double frechet_2d(const Tensor& set_a, const Tensor& set_b)
{
    for (const Tensor* s : {&set_a, &set_b}) {
        if (s->rank() != 2 || s->cols() != 2) throw ShapeError("frechet_2d: expected (n x 2) point sets");
        if (s->rows() < 3) throw std::invalid_argument("frechet_2d: each set needs at least 3 points");
    }
    auto mean_of = [](const Tensor& s) {
        std::array<double, 2> m{0.0, 0.0};
        for (std::size_t i = 0; i < s.rows(); ++i) {
            m[0] += s.at(i, 0);
            m[1] += s.at(i, 1);
        }
        m[0] /= static_cast<double>(s.rows());
        m[1] /= static_cast<double>(s.rows());
        return m;
    };
    const auto ma = mean_of(set_a);
    const auto mb = mean_of(set_b);
    const Tensor ca = sample_covariance(set_a);
    const Tensor cb = sample_covariance(set_b);

    // M = Ca Cb is similar to a PSD matrix, so its eigenvalues are real and
    // non-negative and tr(sqrt(M)) = sqrt(tr M + 2 sqrt(det M)).
    const double m00 = ca.at(0, 0) * cb.at(0, 0) + ca.at(0, 1) * cb.at(1, 0);
    const double m01 = ca.at(0, 0) * cb.at(0, 1) + ca.at(0, 1) * cb.at(1, 1);
    const double m10 = ca.at(1, 0) * cb.at(0, 0) + ca.at(1, 1) * cb.at(1, 0);
    const double m11 = ca.at(1, 0) * cb.at(0, 1) + ca.at(1, 1) * cb.at(1, 1);
    const double det = std::max(0.0, m00 * m11 - m01 * m10);
    const double tr_sqrt = std::sqrt(std::max(0.0, m00 + m11 + 2.0 * std::sqrt(det)));

    const double dx = ma[0] - mb[0];
    const double dy = ma[1] - mb[1];
    double value = dx * dx + dy * dy + ca.at(0, 0) + ca.at(1, 1) + cb.at(0, 0) + cb.at(1, 1) - 2.0 * tr_sqrt;
    if (value < 0.0 && value >= -1e-9) value = 0.0;
    return value;
}

Interpolation latent_interpolation(const NetworkSpec& g_spec, const NetworkParams& g_params,
                                   const std::optional<Tensor>& condition, const Tensor& z_a, const Tensor& z_b,
                                   std::size_t steps, InterpolationMode mode)
{
    if (steps < 2) throw std::invalid_argument("latent_interpolation: steps must be >= 2");
    require_same_shape(z_a, z_b, "latent_interpolation");
    const std::size_t d = z_a.size();

    Interpolation out;
    double omega = 0.0;
    if (mode == InterpolationMode::slerp) {
        const double na = l2_norm(z_a.values());
        const double nb = l2_norm(z_b.values());
        if (na == 0.0 || nb == 0.0) throw std::invalid_argument("latent_interpolation: slerp needs nonzero latents");
        double cos_omega = 0.0;
        for (std::size_t i = 0; i < d; ++i) cos_omega += z_a[i] * z_b[i];
        cos_omega = std::clamp(cos_omega / (na * nb), -1.0, 1.0);
        omega = std::acos(cos_omega);
        if (std::sin(omega) < 1e-6) out.fell_back_to_linear = true;
    }
    const bool use_slerp = mode == InterpolationMode::slerp && !out.fell_back_to_linear;

    out.latents = Tensor(Shape{steps, d});
    out.outputs = Tensor(Shape{steps, g_spec.output_dim});
    for (std::size_t s = 0; s < steps; ++s) {
        const double t = static_cast<double>(s) / static_cast<double>(steps - 1);
        Tensor z(Shape{d});
        if (s == 0) {
            z = z_a.reshaped(Shape{d});
        } else if (s + 1 == steps) {
            z = z_b.reshaped(Shape{d});
        } else if (use_slerp) {
            const double wa = std::sin((1.0 - t) * omega) / std::sin(omega);
            const double wb = std::sin(t * omega) / std::sin(omega);
            for (std::size_t i = 0; i < d; ++i) z[i] = wa * z_a[i] + wb * z_b[i];
        } else {
            for (std::size_t i = 0; i < d; ++i) z[i] = (1.0 - t) * z_a[i] + t * z_b[i];
        }
        // One row at a time so each output matches a standalone G(x, z) call.
        const Tensor y = generator_forward(g_spec, g_params, GeneratorInput{condition, z});
        for (std::size_t i = 0; i < d; ++i) out.latents.at(s, i) = z[i];
        for (std::size_t i = 0; i < g_spec.output_dim; ++i) out.outputs.at(s, i) = y[i];
    }
    return out;
}

namespace {

Tensor standard_normal(std::size_t n, std::size_t d, Rng& rng)
{
    Tensor z(Shape{n, d});
    for (double& v : z.values()) v = rng.normal();
    return z;
}

// Mean over `probes` real points of the closest generated sample's MSE.
double mean_dist_min(const Tensor& samples, const Tensor& truths)
{
    double total = 0.0;
    for (std::size_t i = 0; i < truths.rows(); ++i) total += dist_min(samples, truths.row_at(i));
    return total / static_cast<double>(truths.rows());
}

constexpr std::size_t kDistMinTruths = 100;

} // namespace

EvalReport evaluate_ring(const NetworkSpec& g_spec, const NetworkParams& g_params, std::size_t z_dim,
                         const RingMixtureSpec& spec, std::size_t n, Rng& rng)
{
    const Tensor samples = generator_forward(g_spec, g_params, GeneratorInput{std::nullopt, standard_normal(n, z_dim, rng)});
    const Tensor real = sample_ring(spec, n, rng);
    const ModeCoverage cov = mode_coverage(samples, spec);

    EvalReport r;
    r.n_samples = n;
    r.modes_captured = cov.modes_captured;
    r.hq_fraction = cov.hq_fraction;
    r.pairwise_diversity = pairwise_diversity(samples);
    r.dist_min = mean_dist_min(samples, sample_ring(spec, kDistMinTruths, rng));
    r.frechet2 = frechet_2d(samples, real);
    return r;
}

bool ConditionalCoverage::all_labels_cover_both() const
{
    return std::all_of(covered.begin(), covered.end(), [](const std::array<bool, 2>& c) { return c[0] && c[1]; });
}

ConditionalCoverage evaluate_conditional_ring(const NetworkSpec& g_spec, const NetworkParams& g_params,
                                              std::size_t z_dim, const ConditionalRingSpec& spec, std::size_t n,
                                              Rng& rng)
{
    spec.validate();
    std::vector<std::size_t> labels(n);
    for (std::size_t i = 0; i < n; ++i) labels[i] = i % spec.n_labels;
    const Tensor samples =
        generator_forward(g_spec, g_params, GeneratorInput{one_hot(labels, spec.n_labels), standard_normal(n, z_dim, rng)});
    const LabeledBatch real = sample_conditional_ring(spec, n, rng);

    ConditionalCoverage out;
    out.covered.assign(spec.n_labels, {false, false});
    std::size_t hq = 0;
    std::size_t owned = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const NearestMode m = nearest_mode(std::span<const double>(samples.data() + 2 * i, 2), spec.base);
        if (m.distance > 3.0 * spec.base.std) continue;
        ++hq;
        if (spec.label_of_mode(m.index) == labels[i]) {
            ++owned;
            out.covered[labels[i]][m.index % ConditionalRingSpec::modes_per_label] = true;
        }
    }
    out.owned_fraction = hq == 0 ? 1.0 : static_cast<double>(owned) / static_cast<double>(hq);

    const ModeCoverage cov = mode_coverage(samples, spec.base);
    EvalReport& r = out.report;
    r.n_samples = n;
    r.modes_captured = cov.modes_captured;
    r.hq_fraction = cov.hq_fraction;
    r.frechet2 = frechet_2d(samples, real.targets);

    // Diversity and Dist_min are per-condition quantities; average over labels.
    double diversity = 0.0;
    double dmin = 0.0;
    for (std::size_t label = 0; label < spec.n_labels; ++label) {
        std::vector<Tensor> rows;
        for (std::size_t i = label; i < n; i += spec.n_labels) rows.push_back(samples.row_at(i));
        const Tensor group = stack_rows(rows);
        diversity += pairwise_diversity(group);
        std::vector<Tensor> truths;
        for (std::size_t i = 0; i < real.size() && truths.size() < kDistMinTruths / spec.n_labels; ++i) {
            if (real.labels[i] == label) truths.push_back(real.targets.row_at(i));
        }
        if (!truths.empty()) dmin += mean_dist_min(group, stack_rows(truths));
    }
    r.pairwise_diversity = diversity / static_cast<double>(spec.n_labels);
    r.dist_min = dmin / static_cast<double>(spec.n_labels);
    return out;
}

EvalReport evaluate_trajectories(const NetworkSpec& g_spec, const NetworkParams& g_params, std::size_t z_dim,
                                 const TrajectorySpec& spec, std::size_t n, Rng& rng)
{
    spec.validate();
    constexpr std::size_t per_context = 25;
    const std::size_t contexts = std::max<std::size_t>(1, n / per_context);
    const LabeledBatch real = sample_trajectories(spec, contexts, rng);
    const std::size_t k = spec.context_len;
    const std::size_t t = spec.horizon;
    const double threshold = 3.0 * std::numbers::sqrt2 * std::max(spec.noise_std, 1e-3);

    EvalReport r;
    r.n_samples = contexts * per_context;
    std::array<bool, 2> directions{false, false};
    std::size_t hq = 0;
    double diversity = 0.0;
    double dmin = 0.0;
    std::vector<Tensor> all_points;
    for (std::size_t c = 0; c < contexts; ++c) {
        const Tensor context = real.conditions->row_at(c);
        std::vector<Tensor> cond_rows(per_context, context);
        const Tensor futures = generator_forward(
            g_spec, g_params, GeneratorInput{stack_rows(cond_rows), standard_normal(per_context, z_dim, rng)});
        diversity += pairwise_diversity(futures);
        dmin += dist_min(futures, real.targets.row_at(c));

        const double last = std::atan2(context[2 * k - 1], context[2 * k - 2]);
        for (std::size_t s = 0; s < per_context; ++s) {
            for (std::size_t dir = 0; dir < 2; ++dir) {
                const double step = dir == 0 ? spec.angular_step : -spec.angular_step;
                double se = 0.0;
                for (std::size_t j = 0; j < t; ++j) {
                    const double angle = last + step * static_cast<double>(j + 1);
                    const double dx = futures.at(s, 2 * j) - spec.radius * std::cos(angle);
                    const double dy = futures.at(s, 2 * j + 1) - spec.radius * std::sin(angle);
                    se += dx * dx + dy * dy;
                }
                if (std::sqrt(se / static_cast<double>(t)) <= threshold) {
                    directions[dir] = true;
                    ++hq;
                    break;
                }
            }
        }
        for (std::size_t s = 0; s < per_context; ++s) {
            for (std::size_t j = 0; j < t; ++j) all_points.push_back(Tensor::vector({futures.at(s, 2 * j), futures.at(s, 2 * j + 1)}));
        }
    }
    std::vector<Tensor> real_points;
    for (std::size_t c = 0; c < contexts; ++c) {
        for (std::size_t j = 0; j < t; ++j) {
            real_points.push_back(Tensor::vector({real.targets.at(c, 2 * j), real.targets.at(c, 2 * j + 1)}));
        }
    }
    r.modes_captured = static_cast<std::size_t>(directions[0]) + static_cast<std::size_t>(directions[1]);
    r.hq_fraction = static_cast<double>(hq) / static_cast<double>(r.n_samples);
    r.pairwise_diversity = diversity / static_cast<double>(contexts);
    r.dist_min = dmin / static_cast<double>(contexts);
    r.frechet2 = real_points.size() >= 3 ? frechet_2d(stack_rows(all_points), stack_rows(real_points)) : 0.0;
    return r;
}

} // namespace divgan
