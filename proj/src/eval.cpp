#include "protoseg/eval.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "protoseg/rng.hpp"
#include "protoseg/serialize.hpp"

namespace protoseg {

std::vector<int> labels_from_masks(int height, int width,
                                   const std::map<int, BinaryMask>& fg_masks) {
    std::vector<int> labels(static_cast<std::size_t>(height) * width, kBackgroundClass);
    for (const auto& [cls, mask] : fg_masks) {
        if (mask.height() != height || mask.width() != width) {
            throw ShapeMismatchError("labels_from_masks: mask shape mismatch");
        }
        for (int j = 0; j < mask.pixels(); ++j) {
            if (!mask.at(j)) continue;
            if (labels[j] != kBackgroundClass) {
                throw Error("labels_from_masks: overlapping ground-truth masks");
            }
            labels[j] = cls;
        }
    }
    return labels;
}

double cross_entropy(const ProbabilityMap& prob, const std::map<int, BinaryMask>& fg_masks) {
    const std::vector<int> labels =
        labels_from_masks(prob.height(), prob.width(), fg_masks);
    double sum = 0.0;
    for (int j = 0; j < prob.pixels(); ++j) {
        const int idx = prob.index_of(labels[j]);
        const double p = std::clamp(prob.prob(j, idx), kProbClamp, 1.0);
        sum -= std::log(p);
    }
    return sum / prob.pixels();
}

MetricsReport mean_iou(const std::vector<PseudoLabeling>& predictions,
                       const std::vector<std::map<int, BinaryMask>>& ground_truth,
                       const std::vector<int>& classes) {
    if (predictions.size() != ground_truth.size()) {
        throw ShapeMismatchError("mean_iou: prediction/ground-truth count mismatch");
    }
    MetricsReport report;
    for (int c : classes) report.confusion[c] = Confusion{};

    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const PseudoLabeling& pred = predictions[i];
        const std::vector<int> truth =
            labels_from_masks(pred.height, pred.width, ground_truth[i], "mean_iou");
        for (int j = 0; j < pred.pixels(); ++j) {
            const int p = pred.winning_class(j);
            const int t = truth[j];
            for (int c : classes) {
                Confusion& conf = report.confusion[c];
                if (p == c && t == c) ++conf.tp;
                else if (p == c && t != c) ++conf.fp;
                else if (p != c && t == c) ++conf.fn;
            }
        }
    }

    double sum = 0.0;
    int present = 0;
    for (int c : classes) {
        const Confusion& conf = report.confusion[c];
        if (!conf.present()) continue;
        const double iou = conf.iou();
        report.class_iou[c] = iou;
        sum += iou;
        ++present;
    }
    report.mean_iou = present > 0 ? sum / present : 1.0;
    report.episode_count = 1;
    return report;
}

EpisodeResult run_episode(const Episode& episode, const ThresholdNet& net, const EvalConfig& cfg) {
    const Episode working =
        with_annotation(episode, cfg.annotation, rng::mix(episode.seed(), kAnnotationStream));
    const InferenceView view = working.inference_view();

    PrototypeSet original = compute_prototypes(view.support, view.classes);
    FusedPrototypeSet fused = iterative_fusion(original, view.support, view.aux,
                                               view.query_features, net, cfg.fusion, cfg.scale);

    // Queries: decode, label, score against the held-out masks.
    std::vector<PseudoLabeling> predictions;
    double query_loss = 0.0;
    const ScoringView scoring = episode.scoring_view();
    for (std::size_t i = 0; i < view.query_features.size(); ++i) {
        ProbabilityMap prob = decode(view.query_features[i], fused.prototypes, cfg.scale);
        query_loss += cross_entropy(prob, scoring.query_masks[i]);
        predictions.push_back(pseudo_label(prob));
    }
    if (!view.query_features.empty()) query_loss /= static_cast<double>(view.query_features.size());

    // Support loss against the masks the model actually saw.
    const PrototypeSet& sup_protos = cfg.support_loss_uses_fused ? fused.prototypes : original;
    double support_loss = 0.0;
    for (const SupportImage& img : view.support) {
        support_loss += cross_entropy(decode(img.features, sup_protos, cfg.scale), img.masks);
    }
    if (!view.support.empty()) support_loss /= static_cast<double>(view.support.size());

    EpisodeResult result{mean_iou(predictions, scoring.query_masks, view.classes),
                         LossReport{query_loss, support_loss, cfg.lambda,
                                    query_loss + cfg.lambda * support_loss},
                         std::move(fused),
                         std::move(predictions)};
    result.metrics.seeds = {episode.seed()};
    result.metrics.episodes = {EpisodeEntry{0, 0, episode.seed(), result.metrics.mean_iou,
                                            query_loss, support_loss}};
    return result;
}

MetricsReport combine_episode_reports(const std::vector<MetricsReport>& episode_reports,
                                      IouAccumulation accumulation) {
    if (episode_reports.empty()) throw Error("combine_episode_reports: empty list");
    MetricsReport run;
    for (const MetricsReport& ep : episode_reports) {
        for (const auto& [cls, conf] : ep.confusion) {
            Confusion& acc = run.confusion[cls];
            acc.tp += conf.tp;
            acc.fp += conf.fp;
            acc.fn += conf.fn;
        }
        run.episode_count += ep.episode_count;
        run.seeds.insert(run.seeds.end(), ep.seeds.begin(), ep.seeds.end());
        run.episodes.insert(run.episodes.end(), ep.episodes.begin(), ep.episodes.end());
    }
    double sum = 0.0;
    int present = 0;
    for (const auto& [cls, conf] : run.confusion) {
        if (!conf.present()) continue;
        run.class_iou[cls] = conf.iou();
        sum += conf.iou();
        ++present;
    }
    if (accumulation == IouAccumulation::run) {
        run.mean_iou = present > 0 ? sum / present : 1.0;
    } else {
        double mean = 0.0;
        for (const MetricsReport& ep : episode_reports) mean += ep.mean_iou;
        run.mean_iou = mean / static_cast<double>(episode_reports.size());
    }
    return run;
}

MetricsReport aggregate(const std::vector<MetricsReport>& runs) {
    if (runs.empty()) throw Error("aggregate: empty report list");
    MetricsReport agg;
    agg.run_count = static_cast<int>(runs.size());

    double mean = 0.0;
    for (const MetricsReport& r : runs) mean += r.mean_iou;
    mean /= static_cast<double>(runs.size());
    double var = 0.0;
    for (const MetricsReport& r : runs) {
        var += (r.mean_iou - mean) * (r.mean_iou - mean);
    }
    var /= static_cast<double>(runs.size());  // population
    agg.mean_iou = mean;
    agg.std_iou = std::sqrt(var);

    std::map<int, std::pair<double, int>> class_acc;  // sum, count over runs
    for (const MetricsReport& r : runs) {
        for (const auto& [cls, iou] : r.class_iou) {
            class_acc[cls].first += iou;
            class_acc[cls].second += 1;
        }
        for (const auto& [cls, conf] : r.confusion) {
            Confusion& acc = agg.confusion[cls];
            acc.tp += conf.tp;
            acc.fp += conf.fp;
            acc.fn += conf.fn;
        }
        agg.episode_count += r.episode_count;
        agg.seeds.insert(agg.seeds.end(), r.seeds.begin(), r.seeds.end());
        agg.episodes.insert(agg.episodes.end(), r.episodes.begin(), r.episodes.end());
    }
    for (const auto& [cls, acc] : class_acc) {
        agg.class_iou[cls] = acc.first / acc.second;
    }
    return agg;
}

nlohmann::json metrics_to_json(const MetricsReport& report) {
    nlohmann::json class_iou = nlohmann::json::object();
    for (const auto& [cls, iou] : report.class_iou) class_iou[std::to_string(cls)] = iou;
    nlohmann::json episodes = nlohmann::json::array();
    for (const EpisodeEntry& e : report.episodes) {
        episodes.push_back(nlohmann::json{{"run", e.run},
                                          {"episode", e.index},
                                          {"seed", e.seed},
                                          {"mean_iou", e.mean_iou},
                                          {"query_loss", e.query_loss},
                                          {"support_loss", e.support_loss}});
    }
    return nlohmann::json{{"mean_iou", report.mean_iou},
                          {"std_iou", report.std_iou},
                          {"class_iou", std::move(class_iou)},
                          {"episode_count", report.episode_count},
                          {"run_count", report.run_count},
                          {"seeds", report.seeds},
                          {"episodes", std::move(episodes)}};
}

std::string metrics_to_csv(const MetricsReport& report) {
    std::string out = "run,episode,seed,mean_iou,query_loss,support_loss\n";
    for (const EpisodeEntry& e : report.episodes) {
        out += std::to_string(e.run);
        out += ',';
        out += std::to_string(e.index);
        out += ',';
        out += std::to_string(e.seed);
        out += ',';
        out += format_double(e.mean_iou);
        out += ',';
        out += format_double(e.query_loss);
        out += ',';
        out += format_double(e.support_loss);
        out += '\n';
    }
    return out;
}

}  // namespace protoseg
