#ifndef PROTOSEG_FUSION_HPP
#define PROTOSEG_FUSION_HPP

#include <optional>
#include <vector>

#include "protoseg/distill.hpp"
#include "protoseg/metric.hpp"

namespace protoseg {

// One auxiliary image: features plus an image-level class tag, no mask.
struct AuxImage {
    FeatureMap features;
    int tag = 0;
};

enum class PoolMode {
    smp,   // confidence-weighted pooling over the raw pseudo-mask
    dsmp,  // additionally filtered by the learned distance threshold
};

enum class BackgroundPolicy {
    support_only,  // background prototype is never fused
    symmetric,     // background fused like a foreground class
};

struct FusionConfig {
    PoolMode mode = PoolMode::dsmp;
    int steps = 3;
    bool include_query = false;
    // Training path: replace the hard indicator by its smooth surrogate.
    bool soft = false;
    double temperature = 0.1;
    // Early stop when prototypes move less than this between steps; 0 disables.
    double convergence_tol = 0.0;
    BackgroundPolicy background = BackgroundPolicy::support_only;
    // Equal-weight baseline: pool with unit confidence instead of the
    // predicted probabilities.
    bool unit_confidence = false;
    // Fixed filter threshold instead of the learned one (keep-all checks and
    // pre-defined-threshold baselines).
    std::optional<double> gamma_override;
};

// Diagnostics for one fused class.
struct ClassFusionInfo {
    int class_id = 0;
    int pool_size = 0;        // candidate image-level images for this class
    int effective_count = 0;  // images actually fused (nonzero weight)
    std::vector<double> image_weights;  // pooled confidence mass per candidate
    std::optional<double> gamma;        // threshold used; empty outside dsmp
    bool degenerate_distances = false;  // filter disabled, fell back to smp
};

struct FusedPrototypeSet {
    PrototypeSet prototypes;
    std::vector<ClassFusionInfo> info;

    const ClassFusionInfo& info_for(int class_id) const;
};

// Recording of the final fusion step for gradient computation. Gradients flow
// through the soft indicator weights only; decode outputs and distance
// statistics are treated as constants.
struct FusionImageTape {
    const FeatureMap* features = nullptr;
    std::vector<double> base;    // confidence * pseudo-mask per pixel
    std::vector<double> soft;    // smooth indicator value per pixel
    std::vector<double> pooled;  // resulting pool vector
    double weight_sum = 0.0;
};

struct FusionClassTape {
    int class_id = 0;
    DistanceStats stats;
    double gamma = 0.0;
    bool active = false;  // gradient path exists (soft dsmp with learned gamma)
    double denom = 0.0;   // K + U_eff
    std::vector<FusionImageTape> images;
};

struct FusionTape {
    std::vector<FusionClassTape> classes;
    double temperature = 0.0;
};

// One refinement step: decode the image-level pool with `current`, pool per
// class, and average with the support terms. Images whose effective mask is
// empty are dropped from both the sum and the denominator.
FusedPrototypeSet fuse_once(const PrototypeSet& original,
                            const std::vector<SupportImage>& support,
                            const std::vector<AuxImage>& aux,
                            const std::vector<const FeatureMap*>& extra_pool,
                            const ThresholdNet& net, const FusionConfig& cfg,
                            const PrototypeSet& current, double scale,
                            FusionTape* tape = nullptr);

// Runs cfg.steps refinement steps starting from the original prototypes.
// Query features join the image-level pool only when cfg.include_query is set;
// their ground-truth masks are never consulted.
FusedPrototypeSet iterative_fusion(const PrototypeSet& original,
                                   const std::vector<SupportImage>& support,
                                   const std::vector<AuxImage>& aux,
                                   const std::vector<FeatureMap>& query_features,
                                   const ThresholdNet& net, const FusionConfig& cfg, double scale,
                                   FusionTape* tape = nullptr);

}  // namespace protoseg

#endif  // PROTOSEG_FUSION_HPP
