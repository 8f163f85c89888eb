#ifndef PROTOSEG_METRIC_HPP
#define PROTOSEG_METRIC_HPP

#include <map>
#include <span>
#include <vector>

#include "protoseg/grid.hpp"
#include "protoseg/pooling.hpp"

namespace protoseg {

// Class id 0 is reserved for the background.
constexpr int kBackgroundClass = 0;

struct Prototype {
    int class_id = 0;
    std::vector<double> vec;
};

// Ordered prototype collection: background first, then foreground classes in
// ascending class id. Dimensions are uniform across the set.
class PrototypeSet {
public:
    explicit PrototypeSet(std::vector<Prototype> prototypes);

    int size() const { return static_cast<int>(prototypes_.size()); }
    int dim() const { return static_cast<int>(prototypes_.front().vec.size()); }

    const Prototype& at(int index) const { return prototypes_[index]; }
    const Prototype& background() const { return prototypes_.front(); }
    const std::vector<Prototype>& all() const { return prototypes_; }

    // Index of a class id within the set; throws if absent.
    int index_of(int class_id) const;
    bool contains(int class_id) const;

    std::vector<int> class_ids() const;
    std::vector<int> foreground_ids() const;

private:
    std::vector<Prototype> prototypes_;
};

// One support image: features plus a per-class foreground mask set.
struct SupportImage {
    FeatureMap features;
    std::map<int, BinaryMask> masks;  // class id -> mask; classes may be absent
};

// Builds the original prototype set from a support set. Foreground class c is
// the mean of per-image masked-average pools over the images that contain c;
// the background prototype pools the background pixel population of all
// support images jointly.
PrototypeSet compute_prototypes(const std::vector<SupportImage>& support,
                                const std::vector<int>& classes);

// Cosine distance 1 - x.p / (|x||p|), in [0, 2].
double cosine_distance(std::span<const double> x, std::span<const double> p);
double cosine_similarity(std::span<const double> x, std::span<const double> p);

inline double distance(std::span<const double> x, const Prototype& p) {
    return cosine_distance(x, p.vec);
}

// Per-pixel class distribution over the prototype set's classes.
class ProbabilityMap {
public:
    ProbabilityMap(int height, int width, std::vector<int> class_ids, std::vector<double> probs);

    int height() const { return height_; }
    int width() const { return width_; }
    int pixels() const { return height_ * width_; }
    int num_classes() const { return static_cast<int>(class_ids_.size()); }
    const std::vector<int>& class_ids() const { return class_ids_; }

    double prob(int pixel, int class_index) const {
        return probs_[static_cast<std::size_t>(pixel) * class_ids_.size() + class_index];
    }

    // Confidence slice for one class (SoftMask of that class's probability).
    SoftMask class_slice(int class_id) const;
    int index_of(int class_id) const;

private:
    int height_ = 0;
    int width_ = 0;
    std::vector<int> class_ids_;
    std::vector<double> probs_;  // pixel-major, class-interleaved
};

// Soft nearest-prototype assignment: softmax over scale * cosine similarity.
// The argmax equals the nearest prototype under cosine distance.
ProbabilityMap decode(const FeatureMap& features, const PrototypeSet& prototypes, double scale);

// Hard argmax labeling plus the winning confidence. Ties break toward the
// lowest class id, so background wins ties against foreground.
struct PseudoLabeling {
    int height = 0;
    int width = 0;
    std::vector<int> class_ids;     // same order as the source ProbabilityMap
    std::vector<int> winner;        // per pixel, index into class_ids
    std::vector<double> confidence; // per pixel, winning probability

    int pixels() const { return height * width; }
    int winning_class(int pixel) const { return class_ids[winner[pixel]]; }
    BinaryMask mask_for(int class_id) const;
};

PseudoLabeling pseudo_label(const ProbabilityMap& prob);

}  // namespace protoseg

#endif  // PROTOSEG_METRIC_HPP
