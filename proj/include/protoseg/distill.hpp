#ifndef PROTOSEG_DISTILL_HPP
#define PROTOSEG_DISTILL_HPP

#include <array>
#include <cstdint>
#include <vector>

#include "protoseg/grid.hpp"
#include "protoseg/metric.hpp"

namespace protoseg {

// Per-pixel cosine distances of a set of images against one prototype.
struct DistanceSet {
    std::vector<ScalarGrid> per_image;

    std::size_t total() const;
};

// Same grids after min-max normalization over the pooled collection.
struct NormalizedDistanceSet {
    std::vector<ScalarGrid> per_image;
    double source_min = 0.0;
    double source_max = 0.0;

    std::size_t total() const;
};

struct DistanceStats {
    double min = 0.0;
    double max = 0.0;
    double variance = 0.0;
    double skewness = 0.0;
    double kurtosis = 0.0;  // non-excess

    std::array<double, 5> as_array() const { return {min, max, variance, skewness, kurtosis}; }
};

DistanceSet distance_maps(const std::vector<const FeatureMap*>& images, const Prototype& p);

// Min-max normalization over the pooled set, applied uniformly to every grid.
// Throws DegenerateSetError when all distances are identical.
NormalizedDistanceSet normalize_distances(const DistanceSet& d);

// Population moments over the pooled normalized set. A zero-variance set
// reports skew = kurt = 0 by convention.
DistanceStats distance_stats(const NormalizedDistanceSet& nd);

// One-hidden-layer threshold predictor: 5 stats -> 20 tanh units -> logistic.
// Parameters are plain public arrays so training code can address them flat.
class ThresholdNet {
public:
    static constexpr int kInputDim = 5;
    static constexpr int kHiddenDim = 20;

    // All parameters zero: the threshold starts at logistic(0) = 0.5.
    ThresholdNet();

    // Fan-based uniform hidden weights; biases and output weights stay zero so
    // the initial threshold is exactly 0.5 for any input.
    static ThresholdNet initialized(std::uint64_t seed);

    std::vector<double> hidden_weights;  // kHiddenDim x kInputDim, row-major
    std::vector<double> hidden_bias;     // kHiddenDim
    std::vector<double> output_weights;  // kHiddenDim
    double output_bias = 0.0;

    static int parameter_count() { return kHiddenDim * kInputDim + kHiddenDim + kHiddenDim + 1; }
    std::vector<double> flatten() const;
    static ThresholdNet unflatten(const std::vector<double>& params);

    bool operator==(const ThresholdNet& other) const = default;
};

// gamma = logistic(W2 . tanh(W1 s + b1) + b2), in (0,1).
double threshold_forward(const DistanceStats& stats, const ThresholdNet& net);

struct ThresholdGradients {
    std::vector<double> hidden_weights;
    std::vector<double> hidden_bias;
    std::vector<double> output_weights;
    double output_bias = 0.0;
    std::array<double, 5> stats{};

    std::vector<double> flatten() const;  // parameter gradients, net layout
};

// Analytic gradients of upstream * gamma w.r.t. every parameter and stat.
ThresholdGradients threshold_backward(const DistanceStats& stats, const ThresholdNet& net,
                                      double upstream_gradient);

// Hard keep mask: 1 iff normalized distance < gamma (strict).
BinaryMask distraction_indicator(const ScalarGrid& nd_image, double gamma);

// Smooth surrogate sigma((gamma - d) / temperature); tends to the hard
// indicator as temperature -> 0.
SoftMask soft_indicator(const ScalarGrid& nd_image, double gamma, double temperature);

double logistic(double x);

}  // namespace protoseg

#endif  // PROTOSEG_DISTILL_HPP
