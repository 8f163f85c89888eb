#ifndef PROTOSEG_TRAIN_HPP
#define PROTOSEG_TRAIN_HPP

#include <functional>
#include <vector>

#include "protoseg/eval.hpp"

namespace protoseg {

struct TrainHyper {
    double lr = 1e-3;
    double momentum = 0.9;
    double weight_decay = 5e-4;
    int iterations = 2000;
    double temperature = 0.1;  // soft indicator temperature during training
};

struct TrainRecord {
    int iteration = 0;
    double total = 0.0;
    double query_loss = 0.0;
    double support_loss = 0.0;
};

// Deterministic episode stream, one episode per iteration index.
using EpisodeSource = std::function<Episode(int iteration)>;

// Complete optimizer state; checkpointing it makes resumed training
// bitwise-identical to an uninterrupted run.
struct TrainState {
    ThresholdNet net;
    std::vector<double> velocity;
    int iteration = 0;
};

TrainState initial_train_state(const ThresholdNet& net);

struct TrainResult {
    ThresholdNet net;
    std::vector<TrainRecord> curve;
};

// Loss and the analytic parameter gradient for one episode on the smooth
// fusion path. Gradients flow through the soft indicator weights of the final
// fusion step; decode outputs and distance statistics are constants.
struct EpisodeGradient {
    LossReport loss;
    std::vector<double> grad;  // ThresholdNet flat layout
};

EpisodeGradient episode_loss_gradient(const Episode& episode, const ThresholdNet& net,
                                      const EvalConfig& cfg, double temperature);

// Runs `steps` SGD iterations (momentum + weight decay) in place, appending
// one record per iteration. Throws DivergenceError on non-finite loss.
void train_steps(const EpisodeSource& source, const TrainHyper& hyper, const EvalConfig& cfg,
                 int steps, TrainState& state, std::vector<TrainRecord>& curve);

TrainResult train_threshold(const EpisodeSource& source, const ThresholdNet& init,
                            const TrainHyper& hyper, const EvalConfig& cfg);

}  // namespace protoseg

#endif  // PROTOSEG_TRAIN_HPP
