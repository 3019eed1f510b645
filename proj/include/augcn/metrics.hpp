#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "augcn/tensor.hpp"

namespace augcn {

struct ConfusionCounts {
    std::int64_t tp = 0, fp = 0, fn = 0, tn = 0;
};

struct F1Result {
    std::vector<double> per_au;
    std::vector<ConfusionCounts> counts;
    double average = 0.0;
    double threshold = 0.5;
};

struct AucResult {
    // Columns with only one class have no defined AUC; they are reported
    // absent and excluded from the average.
    std::vector<std::optional<double>> per_au;
    std::optional<double> average;
    std::vector<std::size_t> undefined_columns;
};

/// Per-AU F1 over an N x C batch at the given decision threshold
/// (predicted positive iff score >= threshold). Conventions: precision or
/// recall with an empty denominator is 0; F1 with p + r = 0 is 0.
F1Result f1_scores(const Tensor& scores, const Tensor& labels, double threshold = 0.5);

/// Per-AU ranking AUC: P(score+ > score-) + 0.5 P(score+ = score-) over all
/// positive/negative pairs in each column.
AucResult auc_scores(const Tensor& scores, const Tensor& labels);

/// Evaluation summary plus the run settings that shaped it.
struct EvalReport {
    std::vector<int> au_ids;
    F1Result f1;
    AucResult auc;
    std::size_t num_samples = 0;

    // run settings
    double lambda1 = 0.0, lambda2 = 0.0, dice_epsilon = 0.0;
    double learning_rate = 0.0;
    std::string adjacency_mode = "raw";
    std::uint64_t seed = 0;
    std::string config_name;

    std::string to_json() const;
    std::string to_text() const;
};

}  // namespace augcn
