#include "divgan/theory.hpp"

#include "divgan/adam.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>

namespace divgan {

double matrix_norm(const Tensor& m, JacobianNorm norm)
{
    Eigen::MatrixXd a(static_cast<Eigen::Index>(m.rows()), static_cast<Eigen::Index>(m.cols()));
    for (std::size_t r = 0; r < m.rows(); ++r) {
        for (std::size_t c = 0; c < m.cols(); ++c) a(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = m.at(r, c);
    }
    if (norm == JacobianNorm::frobenius) return a.norm();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
    return svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
}

Tensor generator_jacobian(const NetworkSpec& g_spec, const NetworkParams& g_params,
                          const std::optional<Tensor>& condition, const Tensor& z)
{
    return jacobian(
        [&](Tape& tape, Var zv) {
            const BoundParams g = bind(tape, g_params, false);
            const Var out = mlp_forward(g_spec, g, join_condition(tape, condition, zv)).output;
            return reshape(out, Shape{out.value().size()});
        },
        z.reshaped(Shape{z.size()}));
}

namespace {

Tensor g_at(const NetworkSpec& g_spec, const NetworkParams& g_params, const std::optional<Tensor>& condition,
            const Tensor& z)
{
    return generator_forward(g_spec, g_params, GeneratorInput{condition, z.reshaped(Shape{1, z.size()})});
}

double distance(const Tensor& a, const Tensor& b)
{
    require_same_shape(a, b, "distance");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

} // namespace

BoundCheckReport path_gradient_bound(const NetworkSpec& g_spec, const NetworkParams& g_params,
                                     const std::optional<Tensor>& condition, const Tensor& z1, const Tensor& z2,
                                     std::size_t n_quad, JacobianNorm norm)
{
    require_same_shape(z1, z2, "path_gradient_bound");
    if (n_quad < 8) throw std::invalid_argument("path_gradient_bound: n_quad must be >= 8");
    const double gap = distance(z1, z2);
    if (!(gap > 0.0)) throw std::invalid_argument("path_gradient_bound: z1 and z2 coincide");

    BoundCheckReport r;
    r.n_quad = n_quad;
    r.lhs = distance(g_at(g_spec, g_params, condition, z1), g_at(g_spec, g_params, condition, z2)) / gap;

    double integral = 0.0;
    Tensor point(z1.shape());
    for (std::size_t k = 0; k < n_quad; ++k) {
        const double t = (static_cast<double>(k) + 0.5) / static_cast<double>(n_quad);
        for (std::size_t i = 0; i < z1.size(); ++i) point[i] = t * z2[i] + (1.0 - t) * z1[i];
        const Tensor jac = generator_jacobian(g_spec, g_params, condition, point);
        if (!jac.all_finite()) throw DomainError("path_gradient_bound: non-finite Jacobian at t=" + std::to_string(t));
        integral += matrix_norm(jac, norm);
    }
    r.rhs = integral / static_cast<double>(n_quad);
    r.slack = r.rhs - r.lhs;
    return r;
}

BoundCheckReport checked_gradient_bound(const NetworkSpec& g_spec, const NetworkParams& g_params,
                                        const std::optional<Tensor>& condition, const Tensor& z1, const Tensor& z2,
                                        std::size_t n_quad, std::size_t refined_quad, JacobianNorm norm)
{
    BoundCheckReport r = path_gradient_bound(g_spec, g_params, condition, z1, z2, n_quad, norm);
    if (!r.holds() && refined_quad > n_quad) r = path_gradient_bound(g_spec, g_params, condition, z1, z2, refined_quad, norm);
    return r;
}

std::size_t AttractionReport::condition_count() const
{
    return static_cast<std::size_t>(
        std::count_if(probes.begin(), probes.end(), [](const AttractionProbe& p) { return p.condition_holds; }));
}

std::size_t AttractionReport::counterexamples() const
{
    return static_cast<std::size_t>(std::count_if(
        probes.begin(), probes.end(), [](const AttractionProbe& p) { return p.condition_holds && !p.attracted; }));
}

AttractionReport attraction_check(const NetworkSpec& g_spec, const NetworkParams& params_t,
                                  const NetworkParams& params_t1, const std::optional<Tensor>& condition,
                                  const Tensor& z1, const Tensor& y_star, std::size_t probes, Rng& rng,
                                  ProbeSampling sampling)
{
    if (probes < 1) throw std::invalid_argument("attraction_check: need at least one probe");
    const Tensor y = y_star.reshaped(Shape{1, y_star.size()});
    const Tensor g_t_z1 = g_at(g_spec, params_t, condition, z1);
    const Tensor g_t1_z1 = g_at(g_spec, params_t1, condition, z1);

    AttractionReport report;
    report.epsilon = distance(y, g_t_z1) - distance(y, g_t1_z1);
    if (!(report.epsilon > 0.0)) {
        throw DomainError("attraction_check: update does not attract z1 (epsilon = " +
                          std::to_string(report.epsilon) + " <= 0)");
    }
    const double half_eps = 0.5 * report.epsilon;
    double min_ratio = std::numeric_limits<double>::infinity();

    // Batched forward passes over all probes at once.
    const std::size_t d = z1.size();
    Tensor z2s(Shape{probes, d});
    for (std::size_t p = 0; p < probes; ++p) {
        for (std::size_t i = 0; i < d; ++i) {
            const double u = rng.normal();
            z2s.at(p, i) = sampling.local_scale ? z1[i] + *sampling.local_scale * u : u;
        }
    }
    std::optional<Tensor> cond_rows;
    if (condition) {
        std::vector<Tensor> rows(probes, condition->reshaped(Shape{condition->size()}));
        cond_rows = stack_rows(rows);
    }
    const Tensor out_t = generator_forward(g_spec, params_t, GeneratorInput{cond_rows, z2s});
    const Tensor out_t1 = generator_forward(g_spec, params_t1, GeneratorInput{cond_rows, z2s});

    report.probes.reserve(probes);
    for (std::size_t p = 0; p < probes; ++p) {
        AttractionProbe probe;
        probe.z2 = z2s.row_at(p);
        probe.gap = distance(z1.reshaped(Shape{d}), probe.z2);
        const Tensor a = out_t.row_at(p);
        const Tensor b = out_t1.row_at(p);
        const Tensor yv = y.row_at(0);
        const double move_t = distance(g_t_z1.row_at(0), a);
        const double move_t1 = distance(g_t1_z1.row_at(0), b);
        if (probe.gap > 0.0) {
            probe.ratio_t = move_t / probe.gap;
            probe.ratio_t1 = move_t1 / probe.gap;
            min_ratio = std::min(min_ratio, std::max(probe.ratio_t, probe.ratio_t1));
        }
        probe.condition_holds = move_t + move_t1 <= half_eps;
        probe.attracted = distance(yv, b) + half_eps < distance(yv, a);
        report.probes.push_back(std::move(probe));
    }

    if (d == 2) {
        constexpr int kGrid = 41;
        for (int i = 0; i < kGrid; ++i) {
            for (int j = 0; j < kGrid; ++j) {
                const Tensor z = Tensor::vector({-3.0 + 6.0 * i / (kGrid - 1), -3.0 + 6.0 * j / (kGrid - 1)});
                const double gap = distance(z1.reshaped(Shape{2}), z);
                if (gap < 1e-9) continue;
                const double rt = distance(g_t_z1, g_at(g_spec, params_t, condition, z)) / gap;
                const double rt1 = distance(g_t1_z1, g_at(g_spec, params_t1, condition, z)) / gap;
                min_ratio = std::min(min_ratio, std::max(rt, rt1));
            }
        }
    }
    report.radius_estimate = min_ratio > 0.0 && std::isfinite(min_ratio) ? report.epsilon / (4.0 * min_ratio)
                                                                         : std::numeric_limits<double>::infinity();
    return report;
}

NetworkParams adam_step_toward(const NetworkSpec& g_spec, const NetworkParams& params,
                               const std::optional<Tensor>& condition, const Tensor& z1, const Tensor& y_star,
                               double lr)
{
    Tape tape;
    const BoundParams g = bind(tape, params, true);
    const Var out = mlp_forward(g_spec, g, join_condition(tape, condition, tape.constant(z1.reshaped(Shape{1, z1.size()})))).output;
    const Var target = tape.constant(y_star.reshaped(Shape{1, y_star.size()}));
    const Var loss = sqrt(sum(square(out - target)));
    tape.backward(loss);
    NetworkParams next = params;
    std::vector<Tensor> grads;
    for (const Var& v : g.vars) grads.push_back(tape.grad(v));
    AdamState state = AdamState::zeros_like(next.tensors);
    AdamHyper hyper;
    hyper.lr = lr;
    adam_step(next.tensors, grads, state, hyper);
    return next;
}

VerifySummary run_verification(const NetworkSpec& g_spec, const NetworkParams& g_params,
                               const std::optional<Tensor>& condition, std::size_t pairs, std::size_t probes,
                               std::uint64_t seed)
{
    Rng rng(seed, 0x7468656f);
    const std::size_t z_dim = g_spec.input_dim - (condition ? condition->size() : 0);
    auto draw = [&] {
        Tensor z(Shape{z_dim});
        for (double& v : z.values()) v = rng.normal();
        return z;
    };

    VerifySummary s;
    for (std::size_t i = 0; i < pairs; ++i) {
        const Tensor z1 = draw();
        const Tensor z2 = draw();
        const BoundCheckReport r = checked_gradient_bound(g_spec, g_params, condition, z1, z2);
        ++s.bound_pairs;
        if (!r.holds()) ++s.bound_violations;
        if (r.rhs > 0.0) s.max_lhs_over_rhs = std::max(s.max_lhs_over_rhs, r.lhs / r.rhs);
    }

    for (int attempt = 0; attempt < 16; ++attempt) {
        const Tensor z1 = draw();
        Tensor y_star = g_at(g_spec, g_params, condition, z1).reshaped(Shape{g_spec.output_dim});
        for (double& v : y_star.values()) v += rng.normal();
        const NetworkParams next = adam_step_toward(g_spec, g_params, condition, z1, y_star, 1e-3);
        AttractionReport global;
        try {
            global = attraction_check(g_spec, g_params, next, condition, z1, y_star, probes - probes / 2, rng);
        } catch (const DomainError&) {
            continue;
        }
        const double lipschitz = std::max(1e-12, matrix_norm(generator_jacobian(g_spec, g_params, condition, z1), JacobianNorm::spectral));
        const double scale = global.epsilon / (2.0 * lipschitz * std::sqrt(static_cast<double>(z_dim)));
        const AttractionReport local =
            attraction_check(g_spec, g_params, next, condition, z1, y_star, probes / 2, rng, ProbeSampling{scale});
        s.epsilon = global.epsilon;
        // Pooling both probe sets takes the smaller minimum ratio, i.e. the larger radius.
        s.radius_estimate = std::max(global.radius_estimate, local.radius_estimate);
        s.attraction_probes = global.probes.size() + local.probes.size();
        s.attraction_conditions = global.condition_count() + local.condition_count();
        s.attraction_counterexamples = global.counterexamples() + local.counterexamples();
        break;
    }
    return s;
}

void to_json(nlohmann::json& j, const BoundCheckReport& r)
{
    j = nlohmann::json{{"lhs", r.lhs}, {"rhs", r.rhs}, {"slack", r.slack}, {"n_quad", r.n_quad}, {"holds", r.holds()}};
}

void to_json(nlohmann::json& j, const AttractionReport& r)
{
    nlohmann::json probes = nlohmann::json::array();
    for (const AttractionProbe& p : r.probes) {
        probes.push_back({{"z2", p.z2.to_vector()},
                          {"gap", p.gap},
                          {"ratio_t", p.ratio_t},
                          {"ratio_t1", p.ratio_t1},
                          {"condition_holds", p.condition_holds},
                          {"attracted_by_half_eps", p.attracted}});
    }
    j = nlohmann::json{{"epsilon", r.epsilon},
                       {"radius_estimate", r.radius_estimate},
                       {"radius_estimate_kind", "sampled; never exceeds the true radius"},
                       {"probes", std::move(probes)}};
}

void to_json(nlohmann::json& j, const VerifySummary& s)
{
    j = nlohmann::json{{"bound", {{"pairs", s.bound_pairs},
                                  {"violations", s.bound_violations},
                                  {"max_lhs_over_rhs", s.max_lhs_over_rhs}}},
                       {"attraction", {{"probes", s.attraction_probes},
                                       {"condition_holds", s.attraction_conditions},
                                       {"counterexamples", s.attraction_counterexamples},
                                       {"epsilon", s.epsilon},
                                       {"radius_estimate", s.radius_estimate}}},
                       {"passed", s.passed()}};
}

} // namespace divgan
