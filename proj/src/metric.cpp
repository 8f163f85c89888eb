#include "protoseg/metric.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace protoseg {

PrototypeSet::PrototypeSet(std::vector<Prototype> prototypes) : prototypes_(std::move(prototypes)) {
    if (prototypes_.empty()) throw Error("PrototypeSet: empty");
    if (prototypes_.front().class_id != kBackgroundClass) {
        throw Error("PrototypeSet: first prototype must be the background (class 0)");
    }
    const std::size_t d = prototypes_.front().vec.size();
    for (std::size_t i = 0; i < prototypes_.size(); ++i) {
        const Prototype& p = prototypes_[i];
        if (p.vec.size() != d) throw ShapeMismatchError("PrototypeSet: inconsistent dimensions");
        for (double v : p.vec) {
            if (!std::isfinite(v)) throw Error("PrototypeSet: non-finite prototype value");
        }
        if (i > 1 && prototypes_[i - 1].class_id >= p.class_id) {
            throw Error("PrototypeSet: foreground class ids must be unique and ascending");
        }
        if (i >= 1 && p.class_id <= kBackgroundClass) {
            throw Error("PrototypeSet: foreground class ids must be positive");
        }
    }
}

int PrototypeSet::index_of(int class_id) const {
    for (int i = 0; i < size(); ++i) {
        if (prototypes_[i].class_id == class_id) return i;
    }
    throw Error("PrototypeSet: unknown class id " + std::to_string(class_id));
}

bool PrototypeSet::contains(int class_id) const {
    return std::any_of(prototypes_.begin(), prototypes_.end(),
                       [class_id](const Prototype& p) { return p.class_id == class_id; });
}

std::vector<int> PrototypeSet::class_ids() const {
    std::vector<int> ids;
    ids.reserve(prototypes_.size());
    for (const Prototype& p : prototypes_) ids.push_back(p.class_id);
    return ids;
}

std::vector<int> PrototypeSet::foreground_ids() const {
    std::vector<int> ids;
    for (const Prototype& p : prototypes_) {
        if (p.class_id != kBackgroundClass) ids.push_back(p.class_id);
    }
    return ids;
}

PrototypeSet compute_prototypes(const std::vector<SupportImage>& support,
                                const std::vector<int>& classes) {
    if (support.empty()) throw Error("compute_prototypes: empty support set");

    std::vector<Prototype> result;

    // Background: pool the pixel population of all support images jointly.
    {
        const int d = support.front().features.dim();
        std::vector<double> sum(d, 0.0);
        long count = 0;
        for (const SupportImage& img : support) {
            std::vector<BinaryMask> fg;
            fg.reserve(img.masks.size());
            for (const auto& [id, mask] : img.masks) fg.push_back(mask);
            BinaryMask bg = fg.empty() ? BinaryMask(img.features.height(), img.features.width())
                                       : background_mask(fg);
            if (fg.empty()) {
                // no foreground anywhere: the whole image is background
                for (int j = 0; j < bg.pixels(); ++j) bg.set(j, true);
            }
            for (int j = 0; j < img.features.pixels(); ++j) {
                if (!bg.at(j)) continue;
                const auto px = img.features.pixel(j);
                for (int c = 0; c < d; ++c) sum[c] += px[c];
                ++count;
            }
        }
        if (count == 0) {
            throw EmptyBackgroundError("compute_prototypes: no background pixels in support set");
        }
        for (double& v : sum) v /= static_cast<double>(count);
        result.push_back({kBackgroundClass, std::move(sum)});
    }

    std::vector<int> sorted = classes;
    std::sort(sorted.begin(), sorted.end());
    for (int c : sorted) {
        if (c <= kBackgroundClass) throw Error("compute_prototypes: invalid foreground class id");
        std::vector<double> mean;
        int images_with_class = 0;
        for (const SupportImage& img : support) {
            auto it = img.masks.find(c);
            if (it == img.masks.end() || it->second.empty()) continue;
            std::vector<double> pooled = masked_average_pool(img.features, it->second);
            if (mean.empty()) mean.assign(pooled.size(), 0.0);
            for (std::size_t i = 0; i < pooled.size(); ++i) mean[i] += pooled[i];
            ++images_with_class;
        }
        if (images_with_class == 0) {
            throw EmptyMaskError("compute_prototypes: class " + std::to_string(c) +
                                 " has no labeled pixels in any support image");
        }
        for (double& v : mean) v /= images_with_class;
        result.push_back({c, std::move(mean)});
    }
    return PrototypeSet(std::move(result));
}

double cosine_similarity(std::span<const double> x, std::span<const double> p) {
    if (x.size() != p.size()) throw ShapeMismatchError("cosine_similarity: dimension mismatch");
    double dot = 0.0, nx = 0.0, np = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        dot += x[i] * p[i];
        nx += x[i] * x[i];
        np += p[i] * p[i];
    }
    if (nx == 0.0 || np == 0.0) throw ZeroVectorError("cosine_similarity: zero-norm vector");
    return dot / (std::sqrt(nx) * std::sqrt(np));
}

double cosine_distance(std::span<const double> x, std::span<const double> p) {
    return 1.0 - cosine_similarity(x, p);
}

ProbabilityMap::ProbabilityMap(int height, int width, std::vector<int> class_ids,
                               std::vector<double> probs)
    : height_(height), width_(width), class_ids_(std::move(class_ids)), probs_(std::move(probs)) {
    if (height_ < 1 || width_ < 1) throw Error("ProbabilityMap: dimensions must be >= 1");
    if (class_ids_.empty()) throw Error("ProbabilityMap: no classes");
    const std::size_t expect =
        static_cast<std::size_t>(height_) * width_ * class_ids_.size();
    if (probs_.size() != expect) {
        throw ShapeMismatchError("ProbabilityMap: probability count does not match shape");
    }
    const int k = num_classes();
    for (int j = 0; j < pixels(); ++j) {
        double sum = 0.0;
        for (int c = 0; c < k; ++c) {
            const double p = prob(j, c);
            if (!(p >= 0.0 && p <= 1.0)) throw Error("ProbabilityMap: entry outside [0,1]");
            sum += p;
        }
        if (std::abs(sum - 1.0) > 1e-9) {
            throw Error("ProbabilityMap: pixel distribution does not sum to 1");
        }
    }
}

int ProbabilityMap::index_of(int class_id) const {
    for (int i = 0; i < num_classes(); ++i) {
        if (class_ids_[i] == class_id) return i;
    }
    throw Error("ProbabilityMap: unknown class id " + std::to_string(class_id));
}

SoftMask ProbabilityMap::class_slice(int class_id) const {
    const int k = index_of(class_id);
    std::vector<double> out(pixels());
    for (int j = 0; j < pixels(); ++j) out[j] = prob(j, k);
    return SoftMask(height_, width_, std::move(out));
}

ProbabilityMap decode(const FeatureMap& features, const PrototypeSet& prototypes, double scale) {
    if (!(scale > 0.0)) throw Error("decode: scale must be positive");
    if (features.dim() != prototypes.dim()) {
        throw ShapeMismatchError("decode: feature dim does not match prototype dim");
    }
    const int k = prototypes.size();
    std::vector<double> probs(static_cast<std::size_t>(features.pixels()) * k);
    std::vector<double> logits(k);
    for (int j = 0; j < features.pixels(); ++j) {
        const auto px = features.pixel(j);
        double max_logit = -std::numeric_limits<double>::infinity();
        for (int c = 0; c < k; ++c) {
            logits[c] = scale * cosine_similarity(px, prototypes.at(c).vec);
            max_logit = std::max(max_logit, logits[c]);
        }
        double sum = 0.0;
        for (int c = 0; c < k; ++c) {
            logits[c] = std::exp(logits[c] - max_logit);
            sum += logits[c];
        }
        for (int c = 0; c < k; ++c) {
            probs[static_cast<std::size_t>(j) * k + c] = logits[c] / sum;
        }
    }
    return ProbabilityMap(features.height(), features.width(), prototypes.class_ids(),
                          std::move(probs));
}

BinaryMask PseudoLabeling::mask_for(int class_id) const {
    int idx = -1;
    for (int i = 0; i < static_cast<int>(class_ids.size()); ++i) {
        if (class_ids[i] == class_id) {
            idx = i;
            break;
        }
    }
    if (idx < 0) throw Error("PseudoLabeling: unknown class id " + std::to_string(class_id));
    BinaryMask m(height, width);
    for (int j = 0; j < pixels(); ++j) m.set(j, winner[j] == idx);
    return m;
}

PseudoLabeling pseudo_label(const ProbabilityMap& prob) {
    PseudoLabeling out;
    out.height = prob.height();
    out.width = prob.width();
    out.class_ids = prob.class_ids();
    out.winner.resize(prob.pixels());
    out.confidence.resize(prob.pixels());
    const int k = prob.num_classes();
    for (int j = 0; j < prob.pixels(); ++j) {
        int best = 0;
        double best_p = prob.prob(j, 0);
        for (int c = 1; c < k; ++c) {
            const double p = prob.prob(j, c);
            if (p > best_p) {  // strict: ties keep the earlier (lower) class id
                best = c;
                best_p = p;
            }
        }
        out.winner[j] = best;
        out.confidence[j] = best_p;
    }
    return out;
}

}  // namespace protoseg
