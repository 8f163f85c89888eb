#include "protoseg/pooling.hpp"

namespace protoseg {

std::vector<double> masked_average_pool(const FeatureMap& features, const BinaryMask& mask) {
    require_same_shape(features, mask, "masked_average_pool");
    const int d = features.dim();
    std::vector<double> sum(d, 0.0);
    int count = 0;
    for (int j = 0; j < features.pixels(); ++j) {
        if (!mask.at(j)) continue;
        const auto px = features.pixel(j);
        for (int c = 0; c < d; ++c) sum[c] += px[c];
        ++count;
    }
    if (count == 0) throw EmptyMaskError("masked_average_pool: mask selects no pixels");
    for (double& v : sum) v /= count;
    return sum;
}

std::vector<double> soft_masked_pool(const FeatureMap& features, const SoftMask& confidences,
                                     const BinaryMask& pseudo_mask) {
    require_same_shape(features, confidences, "soft_masked_pool");
    require_same_shape(features, pseudo_mask, "soft_masked_pool");
    const int d = features.dim();
    std::vector<double> sum(d, 0.0);
    double weight = 0.0;
    for (int j = 0; j < features.pixels(); ++j) {
        if (!pseudo_mask.at(j)) continue;
        const double w = confidences.at(j);
        if (w == 0.0) continue;
        const auto px = features.pixel(j);
        for (int c = 0; c < d; ++c) sum[c] += px[c] * w;
        weight += w;
    }
    if (weight == 0.0) {
        throw ZeroEffectiveWeightError("soft_masked_pool: confidence-weighted mask is empty");
    }
    for (double& v : sum) v /= weight;
    return sum;
}

BinaryMask background_mask(const std::vector<BinaryMask>& foreground_masks) {
    if (foreground_masks.empty()) throw Error("background_mask: empty mask list");
    const BinaryMask& first = foreground_masks.front();
    for (const BinaryMask& m : foreground_masks) {
        require_same_shape(first, m, "background_mask");
    }
    BinaryMask bg(first.height(), first.width());
    for (int j = 0; j < first.pixels(); ++j) {
        bool fg = false;
        for (const BinaryMask& m : foreground_masks) {
            if (m.at(j)) {
                fg = true;
                break;
            }
        }
        bg.set(j, !fg);
    }
    return bg;
}

BinaryMask apply_indicator(const BinaryMask& pseudo_mask, const BinaryMask& indicator) {
    require_same_shape(pseudo_mask, indicator, "apply_indicator");
    BinaryMask out(pseudo_mask.height(), pseudo_mask.width());
    for (int j = 0; j < pseudo_mask.pixels(); ++j) {
        out.set(j, pseudo_mask.at(j) && indicator.at(j));
    }
    return out;
}

}  // namespace protoseg
