#ifndef PROTOSEG_POOLING_HPP
#define PROTOSEG_POOLING_HPP

#include <vector>

#include "protoseg/grid.hpp"

namespace protoseg {

// Mean of pixel features over the set pixels of `mask`.
// Throws EmptyMaskError when the mask selects nothing.
std::vector<double> masked_average_pool(const FeatureMap& features, const BinaryMask& mask);

// Confidence-weighted mean over the pseudo-mask:
//   sum_j f(x_j) * y_j * z_j / sum_j y_j * z_j.
// Throws ZeroEffectiveWeightError when the weight sum is zero; callers drop
// such images from fusion.
std::vector<double> soft_masked_pool(const FeatureMap& features, const SoftMask& confidences,
                                     const BinaryMask& pseudo_mask);

// Pixels covered by none of the foreground masks.
BinaryMask background_mask(const std::vector<BinaryMask>& foreground_masks);

// Pixelwise AND of a pseudo-mask with an indicator.
BinaryMask apply_indicator(const BinaryMask& pseudo_mask, const BinaryMask& indicator);

}  // namespace protoseg

#endif  // PROTOSEG_POOLING_HPP
