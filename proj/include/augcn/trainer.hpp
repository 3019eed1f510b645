#pragma once

#include <optional>
#include <string>
#include <vector>

#include "augcn/checkpoint.hpp"
#include "augcn/config.hpp"
#include "augcn/dataset.hpp"
#include "augcn/gcn.hpp"
#include "augcn/metrics.hpp"
#include "augcn/relation_graph.hpp"
#include "augcn/representation.hpp"

namespace augcn {

/// One SGD update with momentum and decoupled-from-nothing L2 decay:
///   v <- momentum * v - lr * (g + weight_decay * theta);  theta <- theta + v.
void sgd_step(Tensor& value, const Tensor& grad, Tensor& velocity, double lr, double momentum,
              double weight_decay);

/// Momentum-SGD over a named parameter subset; velocity slots persist here.
class SgdOptimizer {
public:
    SgdOptimizer(double momentum, double weight_decay)
        : momentum_(momentum), weight_decay_(weight_decay) {}

    void step(const ParameterStore& store, const std::vector<std::string>& trainable,
              double lr);

private:
    double momentum_;
    double weight_decay_;
    std::map<std::string, Tensor> velocity_;
};

/// Layout and widths derived from a TrainConfig.
struct ModelSetup {
    DatasetConfig dataset;
    RoiLayout layout;
    AeDims ae_dims;
};

ModelSetup make_setup(const TrainConfig& config);

// TrainConfig <-> checkpoint blobs ("config/...").
void put_config(Checkpoint& ckpt, const TrainConfig& config);
TrainConfig config_from_checkpoint(const Checkpoint& ckpt);

/// Relation graph from a manifest's label statistics (conditional
/// probabilities, symmetrized, thresholded at config.relation_threshold,
/// assembled over the config's layout). Returned raw. The default policy
/// rejects AUs that never occur; the permissive policy zeroes their rows
/// and reports them through `warnings`.
AdjacencyMatrix graph_from_labels(const DatasetManifest& manifest, const RoiLayout& layout,
                                  const TrainConfig& config,
                                  DegenerateAu policy = DegenerateAu::error,
                                  std::vector<std::string>* warnings = nullptr);

AdjacencyMatrix graph_from_mbool(const BoolRelationMatrix& m_bool, const RoiLayout& layout);

/// Stage 1: the per-ROI autoencoder bank trained on the combined
/// reconstruction + ROI-level detection loss. A checkpoint is written to
/// `checkpoint_path` after every epoch when given; the final state is also
/// returned. Aborts with a diagnostic if the loss turns non-finite.
Checkpoint train_stage1(const DatasetManifest& manifest, const TrainConfig& config,
                        const std::optional<std::string>& checkpoint_path = std::nullopt,
                        std::vector<double>* epoch_loss_out = nullptr);

/// Stage 2: encoders resume from the stage-1 checkpoint and train jointly
/// with the graph convolutions and the FCN head on the weighted softmax +
/// Dice objective; decoders and ROI heads stay frozen. The adjacency must
/// be raw; the config's adjacency mode is applied (and recorded) here.
Checkpoint train_stage2(const Checkpoint& stage1, const DatasetManifest& manifest,
                        const AdjacencyMatrix& graph, const TrainConfig& config,
                        const std::optional<std::string>& checkpoint_path = std::nullopt,
                        std::vector<double>* epoch_loss_out = nullptr);

/// Metrics of a stage-2 checkpoint on a manifest split (dropout disabled).
EvalReport evaluate(const Checkpoint& checkpoint, const DatasetManifest& manifest);

/// The batched stage-2 forward pass: per-ROI encoders, two graph
/// convolutions, FCN head. Returns batch x C probabilities.
Var stage2_forward(const RepresentationModel& model, const PatchSet& patches,
                   const std::vector<std::size_t>& batch_indices, const Tensor& g,
                   const GcnParams& gcn, const FcnParams& fcn, bool train, SeededRng& rng);

/// Finite-difference audit of both full training objectives on one random
/// sample at the config's dimensions (dropout off). Returns the maximum
/// relative gradient errors {stage-1 loss, stage-2 loss} over every
/// parameter entry.
std::pair<double, double> full_loss_grad_check(const TrainConfig& config, double eps,
                                               std::uint64_t seed = 12345);

}  // namespace augcn
