#ifndef PROTOSEG_EPISODE_HPP
#define PROTOSEG_EPISODE_HPP

#include <cstdint>
#include <map>
#include <vector>

#include "protoseg/fusion.hpp"
#include "protoseg/grid.hpp"
#include "protoseg/metric.hpp"

namespace protoseg {

// Inference-side view of an episode: support pairs, image-level auxiliary
// images, and query features. Query ground truth is not reachable from here.
struct InferenceView {
    const std::vector<int>& classes;
    const std::vector<SupportImage>& support;
    const std::vector<AuxImage>& aux;
    const std::vector<FeatureMap>& query_features;
};

// Scoring-side view: the held-out query masks.
struct ScoringView {
    const std::vector<std::map<int, BinaryMask>>& query_masks;
};

// One self-contained task. Query masks are private; inference code receives
// an InferenceView and cannot touch them.
class Episode {
public:
    Episode(std::uint64_t seed, std::vector<int> classes, std::vector<SupportImage> support,
            std::vector<AuxImage> aux, std::vector<FeatureMap> query_features,
            std::vector<std::map<int, BinaryMask>> query_masks);

    std::uint64_t seed() const { return seed_; }
    const std::vector<int>& classes() const { return classes_; }
    int n() const { return static_cast<int>(classes_.size()); }
    int k() const { return static_cast<int>(support_.size()) / n(); }
    int u() const { return static_cast<int>(aux_.size()) / n(); }
    int q() const { return static_cast<int>(query_features_.size()); }

    const std::vector<SupportImage>& support() const { return support_; }
    const std::vector<AuxImage>& aux() const { return aux_; }
    const std::vector<FeatureMap>& query_features() const { return query_features_; }

    InferenceView inference_view() const {
        return InferenceView{classes_, support_, aux_, query_features_};
    }
    ScoringView scoring_view() const { return ScoringView{query_masks_}; }

private:
    std::uint64_t seed_ = 0;
    std::vector<int> classes_;
    std::vector<SupportImage> support_;
    std::vector<AuxImage> aux_;
    std::vector<FeatureMap> query_features_;
    std::vector<std::map<int, BinaryMask>> query_masks_;
};

struct BlobGeometry {
    double min_extent = 0.12;  // half-extent as a fraction of the image side
    double max_extent = 0.30;
    double ellipse_prob = 0.5;

    bool operator==(const BlobGeometry&) const = default;
};

// Fully deterministic synthetic episode source. Images are feature grids:
// pixels draw from the owning class's isotropic Gaussian around a unit-norm
// class mean. Index 0 of class_means is the background.
struct SyntheticSpec {
    int n = 2;
    int k = 1;
    int u = 2;
    int q = 1;
    int height = 32;
    int width = 32;
    int dim = 8;
    std::vector<std::vector<double>> class_means;  // [0] background, [1..P] class pool
    double sigma = 0.05;
    double separation = 0.3;  // min pairwise angle between means, radians
    int distractors_per_aux = 0;
    BlobGeometry blob;
    std::uint64_t seed = 0;

    int pool_size() const { return static_cast<int>(class_means.size()) - 1; }
    void validate() const;

    bool operator==(const SyntheticSpec&) const = default;
};

// Rejection-samples `count` unit vectors with pairwise angular distance of at
// least `separation`. Throws InfeasibleSpecError when that cannot be met.
std::vector<std::vector<double>> sample_class_means(int count, int dim, double separation,
                                                    std::uint64_t seed);

struct GeneratedEpisode {
    Episode episode;
    std::map<int, std::vector<double>> true_means;  // class id -> generator mean
    std::vector<int> distractor_ids;                // pool ids injected into aux images
};

// Draws episode classes from the whole pool.
GeneratedEpisode generate_episode(const SyntheticSpec& spec);
// Draws episode classes (and distractors) from `allowed_classes` only.
GeneratedEpisode generate_episode(const SyntheticSpec& spec,
                                  const std::vector<int>& allowed_classes);

// Disjoint train/test partition of pool class ids.
struct ClassSplit {
    std::vector<int> train;
    std::vector<int> test;
};
ClassSplit split_classes(int pool_size, int train_count, std::uint64_t seed);

enum class AnnotationKind { dense, scribble, bbox };

// Seeded random 4-connected walk inside the mask; at most `target_pixels`
// distinct pixels (default min(40, |mask|/4), at least 1).
BinaryMask scribble_from_mask(const BinaryMask& mask, std::uint64_t seed);
BinaryMask scribble_from_mask(const BinaryMask& mask, std::uint64_t seed, int target_pixels);

// Filled tight axis-aligned bounding rectangle.
BinaryMask bbox_from_mask(const BinaryMask& mask);

// Replaces every support mask by its weak counterpart; dense is a no-op.
Episode with_annotation(const Episode& episode, AnnotationKind kind, std::uint64_t seed);
// Same, with the seed derived from the episode's own seed.
Episode with_annotation(const Episode& episode, AnnotationKind kind);

// Stand-in feature encoder. Identity passes feature-space episodes through;
// projection maps each pixel's k x k neighborhood (zero-padded) through a
// fixed seeded random linear map.
struct EncoderSpec {
    enum class Kind { identity, projection };
    Kind kind = Kind::identity;
    int neighborhood = 3;
    int out_dim = 8;
    std::uint64_t seed = 0;
};

FeatureMap encode(const FeatureMap& image, const EncoderSpec& spec);

}  // namespace protoseg

#endif  // PROTOSEG_EPISODE_HPP
