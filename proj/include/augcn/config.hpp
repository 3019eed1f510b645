#pragma once

#include <cstdint>
#include <string>

#include "augcn/relation_graph.hpp"

namespace augcn {

/// Every knob of a training run. The full-scale presets carry the standard
/// benchmark protocol; the desk preset is sized so a full run finishes in
/// seconds and uses a longer learning-rate decay period to match its longer
/// overfitting schedules.
struct TrainConfig {
    std::string dataset = "toy";  // bp4d | disfa | toy | tiny

    // geometry / model widths
    std::size_t n = 25;         // ROI patch side
    std::size_t channels = 3;   // image channels
    std::size_t hidden = 256;   // AE hidden width
    std::size_t d0 = 150;       // latent width
    std::size_t d1 = 30;
    std::size_t d2 = 12;

    // objectives
    double lambda1 = 3.0;
    double lambda2 = 4.0;
    double dice_epsilon = 1.0;
    double relation_threshold = 0.6;  // h for binarize()

    // optimization
    double dropout_rate = 0.5;
    double learning_rate = 0.01;
    double lr_decay = 0.1;
    std::size_t lr_decay_period = 10;  // epochs
    double momentum = 0.9;
    double weight_decay = 0.0005;
    std::size_t batch_size = 256;
    std::size_t stage1_epochs = 12;
    std::size_t stage2_epochs = 40;

    std::uint64_t seed = 1;
    AdjacencyMatrix::Mode adjacency_mode = AdjacencyMatrix::Mode::raw;
    bool use_global_node = true;  // whole-face ROI node (off for ablations)

    void validate() const;

    /// Learning rate for a 1-based epoch under the step-decay schedule.
    double lr_at_epoch(std::size_t epoch) const;
};

TrainConfig full_bp4d_config();
TrainConfig full_disfa_config();

/// Small setup (toy layout, R=6, d0=16, d1=8, d2=4, batch 8) for tests and
/// synthetic-data experiments.
TrainConfig desk_config();

}  // namespace augcn
