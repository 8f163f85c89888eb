#include "protoseg/train.hpp"

#include <cmath>

#include "protoseg/rng.hpp"

namespace protoseg {

namespace {

constexpr std::uint64_t kAnnotationStream = 0x616e6e6f;  // matches eval.cpp

// Accumulates dL/dp for the tape classes from one cross-entropy term.
// coeff(j, m) = (prob - onehot) * pixel_weight * scale, and
// dsim/dp = f_j / (|f_j||p|) - sim * p / |p|^2.
void accumulate_prototype_grad(const FeatureMap& features, const std::vector<int>& labels,
                               const ProbabilityMap& prob, const PrototypeSet& protos,
                               const std::vector<int>& tape_class_ids, double pixel_weight,
                               double scale, std::vector<std::vector<double>>& grad) {
    const int d = features.dim();
    std::vector<int> proto_index(tape_class_ids.size());
    std::vector<int> prob_index(tape_class_ids.size());
    std::vector<double> proto_norm(tape_class_ids.size());
    for (std::size_t m = 0; m < tape_class_ids.size(); ++m) {
        proto_index[m] = protos.index_of(tape_class_ids[m]);
        prob_index[m] = prob.index_of(tape_class_ids[m]);
        double n2 = 0.0;
        for (double v : protos.at(proto_index[m]).vec) n2 += v * v;
        proto_norm[m] = std::sqrt(n2);
    }

    for (int j = 0; j < features.pixels(); ++j) {
        const auto px = features.pixel(j);
        double f2 = 0.0;
        for (double v : px) f2 += v * v;
        const double fnorm = std::sqrt(f2);
        for (std::size_t m = 0; m < tape_class_ids.size(); ++m) {
            const Prototype& p = protos.at(proto_index[m]);
            const double sim = cosine_similarity(px, p.vec);
            const double onehot = labels[j] == tape_class_ids[m] ? 1.0 : 0.0;
            const double coeff =
                (prob.prob(j, prob_index[m]) - onehot) * pixel_weight * scale;
            const double inv_fp = 1.0 / (fnorm * proto_norm[m]);
            const double inv_p2 = 1.0 / (proto_norm[m] * proto_norm[m]);
            for (int c = 0; c < d; ++c) {
                grad[m][c] += coeff * (px[c] * inv_fp - sim * p.vec[c] * inv_p2);
            }
        }
    }
}

std::vector<int> labels_from_masks(int height, int width,
                                   const std::map<int, BinaryMask>& fg_masks) {
    std::vector<int> labels(static_cast<std::size_t>(height) * width, kBackgroundClass);
    for (const auto& [cls, mask] : fg_masks) {
        if (mask.height() != height || mask.width() != width) {
            throw ShapeMismatchError("train: ground-truth mask shape mismatch");
        }
        for (int j = 0; j < mask.pixels(); ++j) {
            if (mask.at(j)) labels[j] = cls;
        }
    }
    return labels;
}

}  // namespace

TrainState initial_train_state(const ThresholdNet& net) {
    return TrainState{net, std::vector<double>(ThresholdNet::parameter_count(), 0.0), 0};
}

EpisodeGradient episode_loss_gradient(const Episode& episode, const ThresholdNet& net,
                                      const EvalConfig& cfg, double temperature) {
    EvalConfig train_cfg = cfg;
    train_cfg.fusion.soft = true;
    train_cfg.fusion.temperature = temperature;

    const Episode working = with_annotation(episode, train_cfg.annotation,
                                            rng::mix(episode.seed(), kAnnotationStream));
    const InferenceView view = working.inference_view();

    PrototypeSet original = compute_prototypes(view.support, view.classes);
    FusionTape tape;
    FusedPrototypeSet fused =
        iterative_fusion(original, view.support, view.aux, view.query_features, net,
                         train_cfg.fusion, train_cfg.scale, &tape);

    std::vector<int> tape_ids;
    for (const FusionClassTape& ct : tape.classes) tape_ids.push_back(ct.class_id);
    std::vector<std::vector<double>> proto_grad(
        tape_ids.size(), std::vector<double>(original.dim(), 0.0));

    // Query loss (and its gradient w.r.t. the fused prototypes).
    const ScoringView scoring = episode.scoring_view();
    double query_loss = 0.0;
    const double query_count = static_cast<double>(view.query_features.size());
    for (std::size_t i = 0; i < view.query_features.size(); ++i) {
        const FeatureMap& f = view.query_features[i];
        ProbabilityMap prob = decode(f, fused.prototypes, train_cfg.scale);
        const std::vector<int> labels = labels_from_masks(f.height(), f.width(),
                                                          scoring.query_masks[i]);
        double ce = 0.0;
        for (int j = 0; j < prob.pixels(); ++j) {
            const double p =
                std::clamp(prob.prob(j, prob.index_of(labels[j])), kProbClamp, 1.0);
            ce -= std::log(p);
        }
        query_loss += ce / f.pixels();
        const double pixel_weight = 1.0 / (f.pixels() * query_count);
        accumulate_prototype_grad(f, labels, prob, fused.prototypes, tape_ids, pixel_weight,
                                  train_cfg.scale, proto_grad);
    }
    if (!view.query_features.empty()) query_loss /= query_count;

    // Support loss; contributes gradient only when decoded with the fused set.
    double support_loss = 0.0;
    const PrototypeSet& sup_protos =
        train_cfg.support_loss_uses_fused ? fused.prototypes : original;
    const double support_count = static_cast<double>(view.support.size());
    for (const SupportImage& img : view.support) {
        const FeatureMap& f = img.features;
        ProbabilityMap prob = decode(f, sup_protos, train_cfg.scale);
        const std::vector<int> labels = labels_from_masks(f.height(), f.width(), img.masks);
        double ce = 0.0;
        for (int j = 0; j < prob.pixels(); ++j) {
            const double p =
                std::clamp(prob.prob(j, prob.index_of(labels[j])), kProbClamp, 1.0);
            ce -= std::log(p);
        }
        support_loss += ce / f.pixels();
        if (train_cfg.support_loss_uses_fused) {
            const double pixel_weight =
                train_cfg.lambda / (f.pixels() * support_count);
            accumulate_prototype_grad(f, labels, prob, fused.prototypes, tape_ids, pixel_weight,
                                      train_cfg.scale, proto_grad);
        }
    }
    if (!view.support.empty()) support_loss /= support_count;

    // Chain through each class: dL/dgamma = dL/dp . dp/dgamma, then through
    // the threshold network into the parameters.
    std::vector<double> grad(ThresholdNet::parameter_count(), 0.0);
    for (std::size_t m = 0; m < tape.classes.size(); ++m) {
        const FusionClassTape& ct = tape.classes[m];
        const int d = original.dim();
        std::vector<double> dp_dgamma(d, 0.0);
        for (const FusionImageTape& img : ct.images) {
            std::vector<double> img_term(d, 0.0);
            for (int j = 0; j < img.features->pixels(); ++j) {
                const double base = img.base[j];
                if (base == 0.0) continue;
                const double s = img.soft[j];
                const double dw = base * s * (1.0 - s) / tape.temperature;
                if (dw == 0.0) continue;
                const auto px = img.features->pixel(j);
                for (int c = 0; c < d; ++c) {
                    img_term[c] += (px[c] - img.pooled[c]) * dw;
                }
            }
            for (int c = 0; c < d; ++c) dp_dgamma[c] += img_term[c] / img.weight_sum;
        }
        double dl_dgamma = 0.0;
        for (int c = 0; c < d; ++c) dl_dgamma += proto_grad[m][c] * dp_dgamma[c] / ct.denom;

        const ThresholdGradients tg = threshold_backward(ct.stats, net, dl_dgamma);
        const std::vector<double> flat = tg.flatten();
        for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += flat[i];
    }

    return EpisodeGradient{
        LossReport{query_loss, support_loss, train_cfg.lambda,
                   query_loss + train_cfg.lambda * support_loss},
        std::move(grad)};
}

void train_steps(const EpisodeSource& source, const TrainHyper& hyper, const EvalConfig& cfg,
                 int steps, TrainState& state, std::vector<TrainRecord>& curve) {
    if (state.velocity.size() != static_cast<std::size_t>(ThresholdNet::parameter_count())) {
        throw Error("train_steps: velocity size does not match parameter count");
    }
    for (int s = 0; s < steps; ++s) {
        const Episode episode = source(state.iteration);
        EpisodeGradient eg = episode_loss_gradient(episode, state.net, cfg, hyper.temperature);
        if (!std::isfinite(eg.loss.total)) {
            throw DivergenceError("train_steps: loss became non-finite at iteration " +
                                  std::to_string(state.iteration));
        }
        curve.push_back(TrainRecord{state.iteration, eg.loss.total, eg.loss.query_loss,
                                    eg.loss.support_loss});

        std::vector<double> params = state.net.flatten();
        for (std::size_t i = 0; i < params.size(); ++i) {
            const double g = eg.grad[i] + hyper.weight_decay * params[i];
            state.velocity[i] = hyper.momentum * state.velocity[i] + g;
            params[i] -= hyper.lr * state.velocity[i];
        }
        state.net = ThresholdNet::unflatten(params);
        ++state.iteration;
    }
}

TrainResult train_threshold(const EpisodeSource& source, const ThresholdNet& init,
                            const TrainHyper& hyper, const EvalConfig& cfg) {
    TrainState state = initial_train_state(init);
    std::vector<TrainRecord> curve;
    train_steps(source, hyper, cfg, hyper.iterations, state, curve);
    return TrainResult{state.net, std::move(curve)};
}

}  // namespace protoseg
