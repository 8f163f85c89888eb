#ifndef PROTOSEG_EVAL_HPP
#define PROTOSEG_EVAL_HPP

#include <cstdint>
#include <map>
#include <vector>

#include <json.hpp>

#include "protoseg/episode.hpp"
#include "protoseg/fusion.hpp"

namespace protoseg {

struct LossReport {
    double query_loss = 0.0;
    double support_loss = 0.0;
    double lambda = 1.0;
    double total = 0.0;  // query_loss + lambda * support_loss
};

struct Confusion {
    long long tp = 0;
    long long fp = 0;
    long long fn = 0;

    bool present() const { return tp + fp + fn > 0; }
    double iou() const { return static_cast<double>(tp) / static_cast<double>(tp + fp + fn); }
};

struct EpisodeEntry {
    int run = 0;
    int index = 0;
    std::uint64_t seed = 0;
    double mean_iou = 0.0;
    double query_loss = 0.0;
    double support_loss = 0.0;
};

struct MetricsReport {
    double mean_iou = 0.0;
    double std_iou = 0.0;  // population std across runs; 0 for single runs
    std::map<int, double> class_iou;
    std::map<int, Confusion> confusion;
    int episode_count = 0;
    int run_count = 1;
    std::vector<std::uint64_t> seeds;
    std::vector<EpisodeEntry> episodes;
};

// Probability clamp for -log p; oracle tests clamp identically.
constexpr double kProbClamp = 1e-12;

// True class per pixel from foreground masks; uncovered pixels are
// background. Overlapping masks violate the one-hot precondition.
std::vector<int> labels_from_masks(int height, int width,
                                   const std::map<int, BinaryMask>& fg_masks);

// Mean over pixels of -log p(true class).
double cross_entropy(const ProbabilityMap& prob, const std::map<int, BinaryMask>& fg_masks);

// Dataset-style mIoU: confusion counts accumulate over all pixels of all
// pairs before dividing. Classes absent from both prediction and ground truth
// are excluded from the mean; an entirely absent class list scores 1.
MetricsReport mean_iou(const std::vector<PseudoLabeling>& predictions,
                       const std::vector<std::map<int, BinaryMask>>& ground_truth,
                       const std::vector<int>& classes);

enum class IouAccumulation {
    run,      // one confusion matrix per run (default)
    episode,  // mean of per-episode mIoU values
};

struct EvalConfig {
    double scale = 20.0;
    double lambda = 1.0;
    FusionConfig fusion;
    AnnotationKind annotation = AnnotationKind::dense;
    // decode support images against fused (true) or original prototypes
    bool support_loss_uses_fused = true;
    IouAccumulation iou_accumulation = IouAccumulation::run;
};

struct EpisodeResult {
    MetricsReport metrics;  // single episode
    LossReport loss;
    FusedPrototypeSet fused;
    std::vector<PseudoLabeling> predictions;
};

// Prototypes -> iterative fusion -> query decode -> scoring. The support
// loss decodes support images against their (possibly weak) masks.
EpisodeResult run_episode(const Episode& episode, const ThresholdNet& net, const EvalConfig& cfg);

// Reduces per-episode reports into one run-level report.
MetricsReport combine_episode_reports(const std::vector<MetricsReport>& episode_reports,
                                      IouAccumulation accumulation);

// Mean and population std of run mIoU across runs; per-class IoUs averaged
// over the runs where the class is present.
MetricsReport aggregate(const std::vector<MetricsReport>& runs);

nlohmann::json metrics_to_json(const MetricsReport& report);

// One row per episode. Header: run,episode,seed,mean_iou,query_loss,support_loss
std::string metrics_to_csv(const MetricsReport& report);

}  // namespace protoseg

#endif  // PROTOSEG_EVAL_HPP
