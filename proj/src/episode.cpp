#include "protoseg/episode.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "protoseg/rng.hpp"

namespace protoseg {

Episode::Episode(std::uint64_t seed, std::vector<int> classes, std::vector<SupportImage> support,
                 std::vector<AuxImage> aux, std::vector<FeatureMap> query_features,
                 std::vector<std::map<int, BinaryMask>> query_masks)
    : seed_(seed),
      classes_(std::move(classes)),
      support_(std::move(support)),
      aux_(std::move(aux)),
      query_features_(std::move(query_features)),
      query_masks_(std::move(query_masks)) {
    if (classes_.empty()) throw Error("Episode: empty class set");
    if (!std::is_sorted(classes_.begin(), classes_.end()) ||
        std::adjacent_find(classes_.begin(), classes_.end()) != classes_.end()) {
        throw Error("Episode: classes must be sorted and unique");
    }
    for (int c : classes_) {
        if (c <= kBackgroundClass) throw Error("Episode: foreground class ids must be positive");
    }
    for (const AuxImage& a : aux_) {
        if (std::find(classes_.begin(), classes_.end(), a.tag) == classes_.end()) {
            throw Error("Episode: auxiliary tag " + std::to_string(a.tag) +
                        " not in the episode class set");
        }
    }
    if (query_masks_.size() != query_features_.size()) {
        throw ShapeMismatchError("Episode: query mask count does not match query feature count");
    }
}

void SyntheticSpec::validate() const {
    if (n < 1 || k < 1 || u < 0 || q < 1) throw InfeasibleSpecError("SyntheticSpec: bad sizes");
    if (height < 1 || width < 1 || dim < 1) throw InfeasibleSpecError("SyntheticSpec: bad shape");
    if (sigma < 0.0) throw InfeasibleSpecError("SyntheticSpec: sigma must be >= 0");
    if (static_cast<int>(class_means.size()) < n + 1) {
        throw InfeasibleSpecError("SyntheticSpec: class pool smaller than N");
    }
    for (const auto& m : class_means) {
        if (static_cast<int>(m.size()) != dim) {
            throw InfeasibleSpecError("SyntheticSpec: class mean dimension mismatch");
        }
    }
    if (distractors_per_aux > 0 && pool_size() < n + 1) {
        throw InfeasibleSpecError("SyntheticSpec: no pool classes left for distractors");
    }
    if (!(blob.min_extent > 0.0) || blob.max_extent < blob.min_extent || blob.max_extent > 0.5) {
        throw InfeasibleSpecError("SyntheticSpec: bad blob geometry");
    }
}

std::vector<std::vector<double>> sample_class_means(int count, int dim, double separation,
                                                    std::uint64_t seed) {
    if (count < 1 || dim < 1) throw InfeasibleSpecError("sample_class_means: bad arguments");
    const double min_cos_gap = std::cos(separation);  // dot product must stay below this
    rng::Engine engine(seed);
    constexpr int kMaxRestarts = 200;
    for (int attempt = 0; attempt < kMaxRestarts; ++attempt) {
        std::vector<std::vector<double>> means;
        means.reserve(count);
        bool ok = true;
        for (int i = 0; i < count && ok; ++i) {
            bool placed = false;
            for (int tries = 0; tries < 200 && !placed; ++tries) {
                std::vector<double> v = rng::unit_vector(engine, dim);
                placed = true;
                for (const auto& m : means) {
                    double dot = 0.0;
                    for (int c = 0; c < dim; ++c) dot += v[c] * m[c];
                    if (dot > min_cos_gap) {
                        placed = false;
                        break;
                    }
                }
                if (placed) means.push_back(std::move(v));
            }
            ok = placed;
        }
        if (ok) return means;
    }
    throw InfeasibleSpecError("sample_class_means: separation " + std::to_string(separation) +
                              " not achievable for " + std::to_string(count) + " vectors in dim " +
                              std::to_string(dim));
}

namespace {

constexpr int kUnowned = -1;

// Claims unowned pixels for `token`; earlier blobs always keep their pixels.
// Prefers placements that do not touch owned pixels.
void place_blob(std::vector<int>& owner, int height, int width, int token,
                const BlobGeometry& geo, rng::Engine& engine) {
    constexpr int kPlacementTries = 20;
    int best_cy = 0, best_cx = 0;
    double best_hy = 1.0, best_hx = 1.0;
    bool best_ellipse = false;
    bool found_free = false;
    for (int attempt = 0; attempt < kPlacementTries && !found_free; ++attempt) {
        const int cy = static_cast<int>(rng::uniform_int(engine, height));
        const int cx = static_cast<int>(rng::uniform_int(engine, width));
        const double hy = rng::uniform(engine, geo.min_extent, geo.max_extent) * height;
        const double hx = rng::uniform(engine, geo.min_extent, geo.max_extent) * width;
        const bool ellipse = rng::uniform(engine) < geo.ellipse_prob;

        bool overlaps = false;
        for (int y = std::max(0, static_cast<int>(cy - hy)); y <= std::min(height - 1, static_cast<int>(cy + hy));
             ++y) {
            for (int x = std::max(0, static_cast<int>(cx - hx));
                 x <= std::min(width - 1, static_cast<int>(cx + hx)); ++x) {
                const double dy = (y - cy) / hy;
                const double dx = (x - cx) / hx;
                const bool inside = ellipse ? (dy * dy + dx * dx <= 1.0)
                                            : (std::abs(y - cy) <= hy && std::abs(x - cx) <= hx);
                if (inside && owner[y * width + x] != kUnowned) overlaps = true;
            }
        }
        best_cy = cy;
        best_cx = cx;
        best_hy = hy;
        best_hx = hx;
        best_ellipse = ellipse;
        if (!overlaps) found_free = true;
    }
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const double dy = (y - best_cy) / best_hy;
            const double dx = (x - best_cx) / best_hx;
            const bool inside = best_ellipse
                                    ? (dy * dy + dx * dx <= 1.0)
                                    : (std::abs(y - best_cy) <= best_hy &&
                                       std::abs(x - best_cx) <= best_hx);
            if (inside && owner[y * width + x] == kUnowned) owner[y * width + x] = token;
        }
    }
}

// Renders features from an ownership grid: each pixel draws from its owning
// class's Gaussian.
FeatureMap render(const std::vector<int>& owner, const SyntheticSpec& spec,
                  rng::Engine& engine) {
    const int d = spec.dim;
    std::vector<double> values(owner.size() * d);
    for (std::size_t j = 0; j < owner.size(); ++j) {
        const int cls = owner[j] == kUnowned ? 0 : owner[j];
        const std::vector<double>& mean = spec.class_means[cls];
        for (int c = 0; c < d; ++c) {
            values[j * d + c] =
                spec.sigma > 0.0 ? rng::normal(engine, mean[c], spec.sigma) : mean[c];
        }
    }
    return FeatureMap(spec.height, spec.width, d, std::move(values));
}

BinaryMask mask_of(const std::vector<int>& owner, int height, int width, int token) {
    BinaryMask m(height, width);
    for (int j = 0; j < height * width; ++j) m.set(j, owner[j] == token);
    return m;
}

std::vector<int> sample_distinct(rng::Engine& engine, const std::vector<int>& from, int count) {
    std::vector<int> pool = from;
    std::vector<int> out;
    out.reserve(count);
    for (int i = 0; i < count; ++i) {
        const std::size_t pick = rng::uniform_int(engine, pool.size());
        out.push_back(pool[pick]);
        pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(pick));
    }
    return out;
}

}  // namespace

GeneratedEpisode generate_episode(const SyntheticSpec& spec) {
    std::vector<int> all;
    for (int c = 1; c <= spec.pool_size(); ++c) all.push_back(c);
    return generate_episode(spec, all);
}

GeneratedEpisode generate_episode(const SyntheticSpec& spec,
                                  const std::vector<int>& allowed_classes) {
    spec.validate();
    if (static_cast<int>(allowed_classes.size()) < spec.n) {
        throw InfeasibleSpecError("generate_episode: fewer allowed classes than N");
    }
    for (int c : allowed_classes) {
        if (c < 1 || c > spec.pool_size()) {
            throw InfeasibleSpecError("generate_episode: allowed class outside the pool");
        }
    }
    if (spec.distractors_per_aux > 0 &&
        static_cast<int>(allowed_classes.size()) < spec.n + 1) {
        throw InfeasibleSpecError("generate_episode: no allowed classes left for distractors");
    }

    rng::Engine engine(spec.seed);
    const int h = spec.height, w = spec.width;

    std::vector<int> classes = sample_distinct(engine, allowed_classes, spec.n);
    std::sort(classes.begin(), classes.end());

    std::vector<int> unseen;  // distractor candidates
    for (int c : allowed_classes) {
        if (std::find(classes.begin(), classes.end(), c) == classes.end()) unseen.push_back(c);
    }

    std::vector<SupportImage> support;
    for (int c : classes) {
        for (int i = 0; i < spec.k; ++i) {
            std::vector<int> owner(static_cast<std::size_t>(h) * w, kUnowned);
            place_blob(owner, h, w, c, spec.blob, engine);
            FeatureMap features = render(owner, spec, engine);
            std::map<int, BinaryMask> masks;
            masks.emplace(c, mask_of(owner, h, w, c));
            support.push_back(SupportImage{std::move(features), std::move(masks)});
        }
    }

    std::vector<AuxImage> aux;
    std::vector<int> distractors_used;
    for (int c : classes) {
        for (int i = 0; i < spec.u; ++i) {
            std::vector<int> owner(static_cast<std::size_t>(h) * w, kUnowned);
            place_blob(owner, h, w, c, spec.blob, engine);
            for (int dblob = 0; dblob < spec.distractors_per_aux; ++dblob) {
                const int id = unseen[rng::uniform_int(engine, unseen.size())];
                distractors_used.push_back(id);
                place_blob(owner, h, w, id, spec.blob, engine);
            }
            aux.push_back(AuxImage{render(owner, spec, engine), c});
        }
    }

    std::vector<FeatureMap> query_features;
    std::vector<std::map<int, BinaryMask>> query_masks;
    for (int i = 0; i < spec.q; ++i) {
        std::vector<int> owner(static_cast<std::size_t>(h) * w, kUnowned);
        for (int c : classes) place_blob(owner, h, w, c, spec.blob, engine);
        query_features.push_back(render(owner, spec, engine));
        std::map<int, BinaryMask> masks;
        for (int c : classes) {
            BinaryMask m = mask_of(owner, h, w, c);
            if (!m.empty()) masks.emplace(c, std::move(m));
        }
        query_masks.push_back(std::move(masks));
    }

    GeneratedEpisode out{Episode(spec.seed, classes, std::move(support), std::move(aux),
                                 std::move(query_features), std::move(query_masks)),
                         {},
                         std::move(distractors_used)};
    out.true_means[kBackgroundClass] = spec.class_means[0];
    for (int c : classes) out.true_means[c] = spec.class_means[c];
    return out;
}

ClassSplit split_classes(int pool_size, int train_count, std::uint64_t seed) {
    if (train_count < 0 || train_count > pool_size) {
        throw Error("split_classes: train count out of range");
    }
    std::vector<int> ids;
    for (int c = 1; c <= pool_size; ++c) ids.push_back(c);
    rng::Engine engine(seed);
    // Fisher-Yates
    for (std::size_t i = ids.size(); i > 1; --i) {
        const std::size_t j = rng::uniform_int(engine, i);
        std::swap(ids[i - 1], ids[j]);
    }
    ClassSplit split;
    split.train.assign(ids.begin(), ids.begin() + train_count);
    split.test.assign(ids.begin() + train_count, ids.end());
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.test.begin(), split.test.end());
    return split;
}

BinaryMask scribble_from_mask(const BinaryMask& mask, std::uint64_t seed) {
    const int count = mask.count();
    if (count == 0) throw EmptyMaskError("scribble_from_mask: empty mask");
    const int target = std::max(1, std::min(40, count / 4));
    return scribble_from_mask(mask, seed, target);
}

BinaryMask scribble_from_mask(const BinaryMask& mask, std::uint64_t seed, int target_pixels) {
    if (mask.empty()) throw EmptyMaskError("scribble_from_mask: empty mask");
    if (target_pixels < 1) throw Error("scribble_from_mask: target must be >= 1");
    const int h = mask.height(), w = mask.width();

    std::vector<int> candidates;
    for (int j = 0; j < mask.pixels(); ++j) {
        if (mask.at(j)) candidates.push_back(j);
    }

    rng::Engine engine(seed);
    int pos = candidates[rng::uniform_int(engine, candidates.size())];

    BinaryMask scribble(h, w);
    scribble.set(pos, true);
    int marked = 1;

    const int max_steps = 50 * target_pixels;
    for (int step = 0; step < max_steps && marked < target_pixels; ++step) {
        const int y = pos / w, x = pos % w;
        int next[4];
        int options = 0;
        if (y > 0 && mask.at(pos - w)) next[options++] = pos - w;
        if (y < h - 1 && mask.at(pos + w)) next[options++] = pos + w;
        if (x > 0 && mask.at(pos - 1)) next[options++] = pos - 1;
        if (x < w - 1 && mask.at(pos + 1)) next[options++] = pos + 1;
        if (options == 0) break;  // isolated pixel
        pos = next[rng::uniform_int(engine, options)];
        if (!scribble.at(pos)) {
            scribble.set(pos, true);
            ++marked;
        }
    }
    return scribble;
}

BinaryMask bbox_from_mask(const BinaryMask& mask) {
    if (mask.empty()) throw EmptyMaskError("bbox_from_mask: empty mask");
    const int h = mask.height(), w = mask.width();
    int min_y = h, max_y = -1, min_x = w, max_x = -1;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (!mask.at(y * w + x)) continue;
            min_y = std::min(min_y, y);
            max_y = std::max(max_y, y);
            min_x = std::min(min_x, x);
            max_x = std::max(max_x, x);
        }
    }
    BinaryMask box(h, w);
    for (int y = min_y; y <= max_y; ++y) {
        for (int x = min_x; x <= max_x; ++x) box.set(y * w + x, true);
    }
    return box;
}

Episode with_annotation(const Episode& episode, AnnotationKind kind) {
    constexpr std::uint64_t kAnnotationStream = 0x616e6e6f;
    return with_annotation(episode, kind, rng::mix(episode.seed(), kAnnotationStream));
}

Episode with_annotation(const Episode& episode, AnnotationKind kind, std::uint64_t seed) {
    if (kind == AnnotationKind::dense) return episode;
    std::vector<SupportImage> support;
    support.reserve(episode.support().size());
    for (std::size_t i = 0; i < episode.support().size(); ++i) {
        const SupportImage& src = episode.support()[i];
        SupportImage img{src.features, {}};
        for (const auto& [cls, mask] : src.masks) {
            if (mask.empty()) {
                img.masks.emplace(cls, mask);
            } else if (kind == AnnotationKind::scribble) {
                img.masks.emplace(cls, scribble_from_mask(
                                           mask, rng::mix(seed, i, static_cast<std::uint64_t>(cls))));
            } else {
                img.masks.emplace(cls, bbox_from_mask(mask));
            }
        }
        support.push_back(std::move(img));
    }
    // query masks stay with the scoring side; rebuild through the private ctor
    std::vector<std::map<int, BinaryMask>> query_masks = episode.scoring_view().query_masks;
    return Episode(episode.seed(), episode.classes(), std::move(support),
                   episode.aux(), episode.query_features(), std::move(query_masks));
}

FeatureMap encode(const FeatureMap& image, const EncoderSpec& spec) {
    if (spec.kind == EncoderSpec::Kind::identity) return image;

    if (spec.neighborhood < 1 || spec.neighborhood % 2 == 0) {
        throw Error("encode: neighborhood must be odd and positive");
    }
    if (spec.out_dim < 1) throw Error("encode: out_dim must be >= 1");
    const int k = spec.neighborhood;
    const int in_dim = image.dim();
    const int patch = k * k * in_dim;

    // fixed random projection, one row per output channel
    rng::Engine engine(spec.seed);
    std::vector<double> proj(static_cast<std::size_t>(spec.out_dim) * patch);
    const double scale = 1.0 / std::sqrt(static_cast<double>(patch));
    for (double& v : proj) v = rng::normal(engine) * scale;

    const int h = image.height(), w = image.width();
    std::vector<double> out(static_cast<std::size_t>(h) * w * spec.out_dim, 0.0);
    const int half = k / 2;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int o = 0; o < spec.out_dim; ++o) {
                double acc = 0.0;
                const double* row = proj.data() + static_cast<std::size_t>(o) * patch;
                for (int dy = 0; dy < k; ++dy) {
                    const int yy = y + dy - half;
                    if (yy < 0 || yy >= h) continue;  // zero padding
                    for (int dx = 0; dx < k; ++dx) {
                        const int xx = x + dx - half;
                        if (xx < 0 || xx >= w) continue;
                        const auto px = image.pixel(yy * w + xx);
                        for (int c = 0; c < in_dim; ++c) {
                            acc += row[(dy * k + dx) * in_dim + c] * px[c];
                        }
                    }
                }
                out[(static_cast<std::size_t>(y) * w + x) * spec.out_dim + o] = acc;
            }
        }
    }
    return FeatureMap(h, w, spec.out_dim, std::move(out));
}

}  // namespace protoseg
