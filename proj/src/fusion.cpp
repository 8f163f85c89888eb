#include "protoseg/fusion.hpp"

#include <algorithm>
#include <cmath>

namespace protoseg {

namespace {

constexpr int kNoTag = -1;

struct PoolImage {
    const FeatureMap* features = nullptr;
    const ProbabilityMap* prob = nullptr;
    const PseudoLabeling* labels = nullptr;
    int tag = kNoTag;
};

// Prototype movement between steps; zero-norm vectors compare as maximally
// far unless both are zero.
double prototype_move(const std::vector<double>& a, const std::vector<double>& b) {
    double na = 0.0, nb = 0.0;
    for (double v : a) na += v * v;
    for (double v : b) nb += v * v;
    if (na == 0.0 && nb == 0.0) return 0.0;
    if (na == 0.0 || nb == 0.0) return 2.0;
    return cosine_distance(a, b);
}

double masked_weight_sum(const SoftMask& conf, const BinaryMask& mask) {
    double sum = 0.0;
    for (int j = 0; j < mask.pixels(); ++j) {
        if (mask.at(j)) sum += conf.at(j);
    }
    return sum;
}

SoftMask unit_mask(int height, int width) {
    return SoftMask(height, width, std::vector<double>(static_cast<std::size_t>(height) * width, 1.0));
}

}  // namespace

const ClassFusionInfo& FusedPrototypeSet::info_for(int class_id) const {
    for (const ClassFusionInfo& ci : info) {
        if (ci.class_id == class_id) return ci;
    }
    throw Error("FusedPrototypeSet: no fusion info for class " + std::to_string(class_id));
}

FusedPrototypeSet fuse_once(const PrototypeSet& original, const std::vector<SupportImage>& support,
                            const std::vector<AuxImage>& aux,
                            const std::vector<const FeatureMap*>& extra_pool,
                            const ThresholdNet& net, const FusionConfig& cfg,
                            const PrototypeSet& current, double scale, FusionTape* tape) {
    if (tape) {
        tape->classes.clear();
        tape->temperature = cfg.temperature;
    }

    // Decode the whole image-level pool once against the current prototypes.
    std::vector<ProbabilityMap> probs;
    std::vector<PseudoLabeling> labelings;
    std::vector<PoolImage> pool;
    probs.reserve(aux.size() + extra_pool.size());
    labelings.reserve(aux.size() + extra_pool.size());
    pool.reserve(aux.size() + extra_pool.size());
    for (const AuxImage& a : aux) {
        probs.push_back(decode(a.features, current, scale));
        labelings.push_back(pseudo_label(probs.back()));
        pool.push_back({&a.features, &probs.back(), &labelings.back(), a.tag});
    }
    for (const FeatureMap* f : extra_pool) {
        probs.push_back(decode(*f, current, scale));
        labelings.push_back(pseudo_label(probs.back()));
        pool.push_back({f, &probs.back(), &labelings.back(), kNoTag});
    }

    // Fuses one class; the support term is `support_sum` over `support_count`
    // image-level-equivalent entries, `fallback` is the unfused prototype.
    auto fuse_class = [&](int class_id, const std::vector<double>& support_sum, int support_count,
                          const std::vector<double>& fallback) {
        std::vector<int> candidates;
        for (int i = 0; i < static_cast<int>(pool.size()); ++i) {
            if (class_id == kBackgroundClass || pool[i].tag == class_id || pool[i].tag == kNoTag) {
                candidates.push_back(i);
            }
        }

        ClassFusionInfo ci;
        ci.class_id = class_id;
        ci.pool_size = static_cast<int>(candidates.size());
        ci.image_weights.assign(candidates.size(), 0.0);

        // Distance filtering state (dsmp only). The normalization pool spans
        // every image-level image, not just this class's candidates.
        bool filter = cfg.mode == PoolMode::dsmp && !pool.empty() && !candidates.empty();
        std::vector<ScalarGrid> norm_grids;
        DistanceStats stats;
        double gamma = 0.0;
        bool learned_gamma = false;
        if (filter) {
            std::vector<const FeatureMap*> images;
            images.reserve(pool.size());
            for (const PoolImage& p : pool) images.push_back(p.features);
            const Prototype& proto = current.at(current.index_of(class_id));
            try {
                NormalizedDistanceSet nd = normalize_distances(distance_maps(images, proto));
                stats = distance_stats(nd);
                norm_grids = std::move(nd.per_image);
                if (cfg.gamma_override) {
                    gamma = *cfg.gamma_override;
                } else {
                    gamma = threshold_forward(stats, net);
                    learned_gamma = true;
                }
                ci.gamma = gamma;
            } catch (const DegenerateSetError&) {
                // indistinguishable distances: filtering is meaningless here
                filter = false;
                ci.degenerate_distances = true;
            }
        }

        FusionClassTape class_tape;
        class_tape.class_id = class_id;
        const bool record = tape && cfg.soft && filter && learned_gamma;
        if (record) {
            class_tape.stats = stats;
            class_tape.gamma = gamma;
        }

        std::vector<double> total = support_sum;
        int effective = 0;
        for (std::size_t k = 0; k < candidates.size(); ++k) {
            const PoolImage& img = pool[candidates[k]];
            const SoftMask conf = cfg.unit_confidence
                                      ? unit_mask(img.features->height(), img.features->width())
                                      : img.prob->class_slice(class_id);
            const BinaryMask pseudo = img.labels->mask_for(class_id);

            std::vector<double> pooled;
            double weight = 0.0;
            FusionImageTape img_tape;
            try {
                if (!filter) {
                    pooled = soft_masked_pool(*img.features, conf, pseudo);
                    weight = masked_weight_sum(conf, pseudo);
                } else if (cfg.soft) {
                    const SoftMask smooth =
                        soft_indicator(norm_grids[candidates[k]], gamma, cfg.temperature);
                    std::vector<double> combined(conf.values());
                    for (int j = 0; j < img.features->pixels(); ++j) combined[j] *= smooth.at(j);
                    const SoftMask weighted(img.features->height(), img.features->width(),
                                            std::move(combined));
                    pooled = soft_masked_pool(*img.features, weighted, pseudo);
                    weight = masked_weight_sum(weighted, pseudo);
                    if (record) {
                        img_tape.base.resize(img.features->pixels());
                        img_tape.soft.resize(img.features->pixels());
                        for (int j = 0; j < img.features->pixels(); ++j) {
                            img_tape.base[j] = pseudo.at(j) ? conf.at(j) : 0.0;
                            img_tape.soft[j] = smooth.at(j);
                        }
                    }
                } else {
                    const BinaryMask keep = distraction_indicator(norm_grids[candidates[k]], gamma);
                    const BinaryMask filtered = apply_indicator(pseudo, keep);
                    pooled = soft_masked_pool(*img.features, conf, filtered);
                    weight = masked_weight_sum(conf, filtered);
                }
            } catch (const ZeroEffectiveWeightError&) {
                continue;  // dropped from both the sum and the denominator
            }

            ci.image_weights[k] = weight;
            for (std::size_t c = 0; c < total.size(); ++c) total[c] += pooled[c];
            ++effective;
            if (record) {
                img_tape.features = img.features;
                img_tape.pooled = pooled;
                img_tape.weight_sum = weight;
                class_tape.images.push_back(std::move(img_tape));
            }
        }
        ci.effective_count = effective;

        std::vector<double> fused;
        if (effective == 0) {
            fused = fallback;
        } else {
            const double denom = support_count + effective;
            fused.resize(total.size());
            for (std::size_t c = 0; c < total.size(); ++c) fused[c] = total[c] / denom;
            if (record) {
                class_tape.active = true;
                class_tape.denom = denom;
                tape->classes.push_back(std::move(class_tape));
            }
        }
        return std::pair<std::vector<double>, ClassFusionInfo>{std::move(fused), std::move(ci)};
    };

    std::vector<Prototype> result;
    std::vector<ClassFusionInfo> infos;

    // Background
    if (cfg.background == BackgroundPolicy::symmetric) {
        auto [vec, ci] =
            fuse_class(kBackgroundClass, original.background().vec, 1, original.background().vec);
        result.push_back({kBackgroundClass, std::move(vec)});
        infos.push_back(std::move(ci));
    } else {
        result.push_back(original.background());
    }

    // Foreground classes: the support term is the sum of per-image masked
    // pools, recomputed from the ground-truth masks.
    for (int c : original.foreground_ids()) {
        std::vector<double> support_sum(original.dim(), 0.0);
        int support_count = 0;
        for (const SupportImage& img : support) {
            auto it = img.masks.find(c);
            if (it == img.masks.end() || it->second.empty()) continue;
            std::vector<double> pooled = masked_average_pool(img.features, it->second);
            for (std::size_t i = 0; i < pooled.size(); ++i) support_sum[i] += pooled[i];
            ++support_count;
        }
        const std::vector<double>& fallback = original.at(original.index_of(c)).vec;
        auto [vec, ci] = fuse_class(c, support_sum, support_count, fallback);
        result.push_back({c, std::move(vec)});
        infos.push_back(std::move(ci));
    }

    return FusedPrototypeSet{PrototypeSet(std::move(result)), std::move(infos)};
}

FusedPrototypeSet iterative_fusion(const PrototypeSet& original,
                                   const std::vector<SupportImage>& support,
                                   const std::vector<AuxImage>& aux,
                                   const std::vector<FeatureMap>& query_features,
                                   const ThresholdNet& net, const FusionConfig& cfg, double scale,
                                   FusionTape* tape) {
    std::vector<const FeatureMap*> extra;
    if (cfg.include_query) {
        extra.reserve(query_features.size());
        for (const FeatureMap& f : query_features) extra.push_back(&f);
    }

    if (cfg.steps <= 0) {
        if (tape) tape->classes.clear();
        return FusedPrototypeSet{original, {}};
    }

    PrototypeSet current = original;
    for (int t = 0; t < cfg.steps; ++t) {
        FusedPrototypeSet fused =
            fuse_once(original, support, aux, extra, net, cfg, current, scale, tape);
        if (cfg.convergence_tol > 0.0) {
            double move = 0.0;
            for (int i = 0; i < current.size(); ++i) {
                move = std::max(move,
                                prototype_move(current.at(i).vec, fused.prototypes.at(i).vec));
            }
            if (move < cfg.convergence_tol) return fused;
        }
        if (t == cfg.steps - 1) return fused;
        current = fused.prototypes;
    }
    return FusedPrototypeSet{current, {}};  // unreachable
}

}  // namespace protoseg
