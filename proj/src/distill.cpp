#include "protoseg/distill.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "protoseg/rng.hpp"

namespace protoseg {

std::size_t DistanceSet::total() const {
    std::size_t n = 0;
    for (const ScalarGrid& g : per_image) n += g.values.size();
    return n;
}

std::size_t NormalizedDistanceSet::total() const {
    std::size_t n = 0;
    for (const ScalarGrid& g : per_image) n += g.values.size();
    return n;
}

DistanceSet distance_maps(const std::vector<const FeatureMap*>& images, const Prototype& p) {
    if (images.empty()) throw Error("distance_maps: empty image list");
    DistanceSet out;
    out.per_image.reserve(images.size());
    for (const FeatureMap* f : images) {
        ScalarGrid grid(f->height(), f->width());
        for (int j = 0; j < f->pixels(); ++j) {
            grid.values[j] = cosine_distance(f->pixel(j), p.vec);
        }
        out.per_image.push_back(std::move(grid));
    }
    return out;
}

NormalizedDistanceSet normalize_distances(const DistanceSet& d) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (const ScalarGrid& g : d.per_image) {
        for (double v : g.values) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    if (d.total() == 0) throw Error("normalize_distances: empty distance set");
    if (hi == lo) {
        throw DegenerateSetError("normalize_distances: all distances identical");
    }
    const double inv = 1.0 / (hi - lo);
    NormalizedDistanceSet out;
    out.source_min = lo;
    out.source_max = hi;
    out.per_image.reserve(d.per_image.size());
    for (const ScalarGrid& g : d.per_image) {
        ScalarGrid ng(g.height, g.width);
        for (std::size_t j = 0; j < g.values.size(); ++j) {
            ng.values[j] = (g.values[j] - lo) * inv;
        }
        out.per_image.push_back(std::move(ng));
    }
    return out;
}

DistanceStats distance_stats(const NormalizedDistanceSet& nd) {
    const std::size_t n = nd.total();
    if (n < 2) throw Error("distance_stats: pooled set needs at least 2 values");

    DistanceStats s;
    s.min = std::numeric_limits<double>::infinity();
    s.max = -std::numeric_limits<double>::infinity();
    double mean = 0.0;
    for (const ScalarGrid& g : nd.per_image) {
        for (double v : g.values) {
            s.min = std::min(s.min, v);
            s.max = std::max(s.max, v);
            mean += v;
        }
    }
    mean /= static_cast<double>(n);

    double m2 = 0.0, m3 = 0.0, m4 = 0.0;
    for (const ScalarGrid& g : nd.per_image) {
        for (double v : g.values) {
            const double d = v - mean;
            const double d2 = d * d;
            m2 += d2;
            m3 += d2 * d;
            m4 += d2 * d2;
        }
    }
    m2 /= static_cast<double>(n);
    m3 /= static_cast<double>(n);
    m4 /= static_cast<double>(n);

    s.variance = m2;
    if (m2 > 0.0) {
        s.skewness = m3 / std::pow(m2, 1.5);
        s.kurtosis = m4 / (m2 * m2);
    } else {
        s.skewness = 0.0;
        s.kurtosis = 0.0;
    }
    return s;
}

ThresholdNet::ThresholdNet()
    : hidden_weights(kHiddenDim * kInputDim, 0.0),
      hidden_bias(kHiddenDim, 0.0),
      output_weights(kHiddenDim, 0.0) {}

ThresholdNet ThresholdNet::initialized(std::uint64_t seed) {
    ThresholdNet net;
    rng::Engine engine(seed);
    const double bound = std::sqrt(6.0 / (kInputDim + kHiddenDim));
    for (double& w : net.hidden_weights) w = rng::uniform(engine, -bound, bound);
    return net;
}

std::vector<double> ThresholdNet::flatten() const {
    std::vector<double> out;
    out.reserve(parameter_count());
    out.insert(out.end(), hidden_weights.begin(), hidden_weights.end());
    out.insert(out.end(), hidden_bias.begin(), hidden_bias.end());
    out.insert(out.end(), output_weights.begin(), output_weights.end());
    out.push_back(output_bias);
    return out;
}

ThresholdNet ThresholdNet::unflatten(const std::vector<double>& params) {
    if (static_cast<int>(params.size()) != parameter_count()) {
        throw ShapeMismatchError("ThresholdNet::unflatten: wrong parameter count");
    }
    ThresholdNet net;
    auto it = params.begin();
    std::copy(it, it + kHiddenDim * kInputDim, net.hidden_weights.begin());
    it += kHiddenDim * kInputDim;
    std::copy(it, it + kHiddenDim, net.hidden_bias.begin());
    it += kHiddenDim;
    std::copy(it, it + kHiddenDim, net.output_weights.begin());
    it += kHiddenDim;
    net.output_bias = *it;
    return net;
}

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double threshold_forward(const DistanceStats& stats, const ThresholdNet& net) {
    const auto s = stats.as_array();
    double z = net.output_bias;
    for (int k = 0; k < ThresholdNet::kHiddenDim; ++k) {
        double u = net.hidden_bias[k];
        for (int i = 0; i < ThresholdNet::kInputDim; ++i) {
            u += net.hidden_weights[k * ThresholdNet::kInputDim + i] * s[i];
        }
        z += net.output_weights[k] * std::tanh(u);
    }
    return logistic(z);
}

ThresholdGradients threshold_backward(const DistanceStats& stats, const ThresholdNet& net,
                                      double upstream_gradient) {
    constexpr int H = ThresholdNet::kHiddenDim;
    constexpr int I = ThresholdNet::kInputDim;
    const auto s = stats.as_array();

    std::array<double, H> hidden;
    double z = net.output_bias;
    for (int k = 0; k < H; ++k) {
        double u = net.hidden_bias[k];
        for (int i = 0; i < I; ++i) u += net.hidden_weights[k * I + i] * s[i];
        hidden[k] = std::tanh(u);
        z += net.output_weights[k] * hidden[k];
    }
    const double gamma = logistic(z);
    const double gz = upstream_gradient * gamma * (1.0 - gamma);

    ThresholdGradients g;
    g.hidden_weights.assign(H * I, 0.0);
    g.hidden_bias.assign(H, 0.0);
    g.output_weights.assign(H, 0.0);
    g.output_bias = gz;
    for (int k = 0; k < H; ++k) {
        g.output_weights[k] = gz * hidden[k];
        const double gu = gz * net.output_weights[k] * (1.0 - hidden[k] * hidden[k]);
        g.hidden_bias[k] = gu;
        for (int i = 0; i < I; ++i) {
            g.hidden_weights[k * I + i] = gu * s[i];
            g.stats[i] += gu * net.hidden_weights[k * I + i];
        }
    }
    return g;
}

std::vector<double> ThresholdGradients::flatten() const {
    std::vector<double> out;
    out.reserve(ThresholdNet::parameter_count());
    out.insert(out.end(), hidden_weights.begin(), hidden_weights.end());
    out.insert(out.end(), hidden_bias.begin(), hidden_bias.end());
    out.insert(out.end(), output_weights.begin(), output_weights.end());
    out.push_back(output_bias);
    return out;
}

BinaryMask distraction_indicator(const ScalarGrid& nd_image, double gamma) {
    BinaryMask out(nd_image.height, nd_image.width);
    for (int j = 0; j < nd_image.pixels(); ++j) {
        out.set(j, nd_image.values[j] < gamma);
    }
    return out;
}

SoftMask soft_indicator(const ScalarGrid& nd_image, double gamma, double temperature) {
    if (!(temperature > 0.0)) throw Error("soft_indicator: temperature must be positive");
    std::vector<double> out(nd_image.values.size());
    for (std::size_t j = 0; j < out.size(); ++j) {
        out[j] = logistic((gamma - nd_image.values[j]) / temperature);
    }
    return SoftMask(nd_image.height, nd_image.width, std::move(out));
}

}  // namespace protoseg
