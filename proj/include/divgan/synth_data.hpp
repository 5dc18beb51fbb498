#pragma once

#include "divgan/rng.hpp"
#include "divgan/tensor.hpp"

#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

namespace divgan {

/// Equal-weight mixture of isotropic Gaussians centred on a circle.
struct RingMixtureSpec {
    std::size_t n_modes = 8;
    double radius = 2.0;
    double std = 0.02;

    void validate() const;
    /// Mode k sits at angle 2*pi*k / n_modes.
    std::vector<Tensor> centers() const;
    bool operator==(const RingMixtureSpec&) const = default;
};

/// Ring whose labels each own two adjacent modes: label k -> {2k, 2k+1}.
struct ConditionalRingSpec {
    RingMixtureSpec base;
    std::size_t n_labels = 4;
    static constexpr std::size_t modes_per_label = 2;

    void validate() const;
    std::size_t label_of_mode(std::size_t mode) const { return mode / modes_per_label; }
};

/// Points moving around a circle, clockwise or counter-clockwise with equal
/// probability. Contexts hold K points, futures the next T points.
struct TrajectorySpec {
    std::size_t context_len = 2;
    std::size_t horizon = 10;
    double radius = 1.0;
    double angular_step = 0.3;
    double noise_std = 0.02;

    void validate() const;
};

/// Conditions (one-hot labels, flattened contexts, or absent) aligned row
/// by row with targets.
struct LabeledBatch {
    std::optional<Tensor> conditions;
    Tensor targets;
    /// Integer label per row: the class for the conditional ring, the
    /// direction (0 = counter-clockwise, 1 = clockwise) for trajectories.
    std::vector<std::size_t> labels;

    std::size_t size() const { return targets.rows(); }
};

Tensor sample_ring(const RingMixtureSpec& spec, std::size_t n, Rng& rng);
LabeledBatch sample_conditional_ring(const ConditionalRingSpec& spec, std::size_t n, Rng& rng);
LabeledBatch sample_trajectories(const TrajectorySpec& spec, std::size_t n, Rng& rng);

/// One-hot rows for the given labels.
Tensor one_hot(const std::vector<std::size_t>& labels, std::size_t n_labels);

struct NearestMode {
    std::size_t index = 0;
    double distance = 0.0;
};

/// Closest mode centre under l2; ties go to the smallest index.
NearestMode nearest_mode(std::span<const double> point, const RingMixtureSpec& spec);

/// Writes a header line then one row per sample: `label,y0,y1,...` when
/// labels are given, `y0,y1,...` otherwise.
void write_csv(std::ostream& os, const Tensor& points, const std::vector<std::size_t>* labels = nullptr);

} // namespace divgan
