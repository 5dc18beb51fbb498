#include "divgan/synth_data.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>
#include <stdexcept>

namespace divgan {

void RingMixtureSpec::validate() const
{
    if (n_modes < 1) throw std::invalid_argument("ring: n_modes must be >= 1");
    if (!(radius > 0.0)) throw std::invalid_argument("ring: radius must be > 0");
    if (!(std > 0.0)) throw std::invalid_argument("ring: std must be > 0");
}

std::vector<Tensor> RingMixtureSpec::centers() const
{
    std::vector<Tensor> c;
    c.reserve(n_modes);
    for (std::size_t k = 0; k < n_modes; ++k) {
        const double angle = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n_modes);
        c.push_back(Tensor::vector({radius * std::cos(angle), radius * std::sin(angle)}));
    }
    return c;
}

void ConditionalRingSpec::validate() const
{
    base.validate();
    if (n_labels * modes_per_label != base.n_modes) {
        throw std::invalid_argument("conditional ring: n_labels * 2 must equal the ring's n_modes");
    }
}

void TrajectorySpec::validate() const
{
    if (context_len < 1 || horizon < 1) throw std::invalid_argument("trajectory: context_len and horizon must be >= 1");
    if (!(radius > 0.0)) throw std::invalid_argument("trajectory: radius must be > 0");
    if (!(noise_std >= 0.0)) throw std::invalid_argument("trajectory: noise_std must be >= 0");
}

namespace {

void draw_from_mode(const RingMixtureSpec& spec, std::size_t mode, Rng& rng, double* out)
{
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(mode) / static_cast<double>(spec.n_modes);
    out[0] = spec.radius * std::cos(angle) + spec.std * rng.normal();
    out[1] = spec.radius * std::sin(angle) + spec.std * rng.normal();
}

} // namespace

Tensor sample_ring(const RingMixtureSpec& spec, std::size_t n, Rng& rng)
{
    spec.validate();
    Tensor points(Shape{n, 2});
    for (std::size_t i = 0; i < n; ++i) draw_from_mode(spec, rng.uniform_int(spec.n_modes), rng, &points.at(i, 0));
    return points;
}

Tensor one_hot(const std::vector<std::size_t>& labels, std::size_t n_labels)
{
    Tensor t(Shape{labels.size(), n_labels}, 0.0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] >= n_labels) throw std::out_of_range("one_hot: label out of range");
        t.at(i, labels[i]) = 1.0;
    }
    return t;
}

LabeledBatch sample_conditional_ring(const ConditionalRingSpec& spec, std::size_t n, Rng& rng)
{
    spec.validate();
    LabeledBatch batch;
    batch.targets = Tensor(Shape{n, 2});
    batch.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t label = rng.uniform_int(spec.n_labels);
        const std::size_t mode = label * ConditionalRingSpec::modes_per_label + rng.uniform_int(2);
        batch.labels[i] = label;
        draw_from_mode(spec.base, mode, rng, &batch.targets.at(i, 0));
    }
    batch.conditions = one_hot(batch.labels, spec.n_labels);
    return batch;
}

LabeledBatch sample_trajectories(const TrajectorySpec& spec, std::size_t n, Rng& rng)
{
    spec.validate();
    const std::size_t k = spec.context_len;
    const std::size_t t = spec.horizon;
    LabeledBatch batch;
    Tensor contexts(Shape{n, 2 * k});
    batch.targets = Tensor(Shape{n, 2 * t});
    batch.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double start = 2.0 * std::numbers::pi * rng.uniform();
        const std::size_t dir = rng.uniform_int(2);
        const double step = dir == 0 ? spec.angular_step : -spec.angular_step;
        batch.labels[i] = dir;
        for (std::size_t s = 0; s < k + t; ++s) {
            const double angle = start + step * static_cast<double>(s);
            const double px = spec.radius * std::cos(angle) + spec.noise_std * rng.normal();
            const double py = spec.radius * std::sin(angle) + spec.noise_std * rng.normal();
            double* dst = s < k ? &contexts.at(i, 2 * s) : &batch.targets.at(i, 2 * (s - k));
            dst[0] = px;
            dst[1] = py;
        }
    }
    batch.conditions = std::move(contexts);
    return batch;
}

NearestMode nearest_mode(std::span<const double> point, const RingMixtureSpec& spec)
{
    if (point.size() != 2) throw ShapeError("nearest_mode: expected a 2D point");
    NearestMode best{0, std::numeric_limits<double>::infinity()};
    for (std::size_t k = 0; k < spec.n_modes; ++k) {
        const double angle = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(spec.n_modes);
        const double dx = point[0] - spec.radius * std::cos(angle);
        const double dy = point[1] - spec.radius * std::sin(angle);
        const double d = std::sqrt(dx * dx + dy * dy);
        // Near-equal distances count as ties so the smaller index wins.
        if (k == 0 || d < best.distance - 1e-12 * std::max(1.0, best.distance)) best = {k, d};
    }
    return best;
}

void write_csv(std::ostream& os, const Tensor& points, const std::vector<std::size_t>* labels)
{
    const std::size_t cols = points.cols();
    if (labels) os << "label,";
    for (std::size_t c = 0; c < cols; ++c) os << (c ? "," : "") << 'y' << c;
    os << '\n';
    for (std::size_t r = 0; r < points.rows(); ++r) {
        if (labels) os << (*labels)[r] << ',';
        for (std::size_t c = 0; c < cols; ++c) os << (c ? "," : "") << points.at(r, c);
        os << '\n';
    }
}

} // namespace divgan
