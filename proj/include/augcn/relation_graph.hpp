#pragma once

#include <string>
#include <vector>

#include "augcn/roi.hpp"
#include "augcn/tensor.hpp"

namespace augcn {

/// C x C matrix with M[i][j] = P(AU j = 1 | AU i = 1), estimated from a
/// label table. Rows/columns follow au_order.
struct CondProbMatrix {
    Tensor m;  // C x C
    std::vector<int> au_order;
};

/// M + M^T; off-diagonals hold both conditionals, the diagonal doubles.
struct SymMatrix {
    Tensor m;
    std::vector<int> au_order;
};

/// Thresholded 0/1 relation matrix between AUs.
struct BoolRelationMatrix {
    Tensor m;  // C x C in {0, 1}
    std::vector<int> au_order;
};

/// R x R ROI-node adjacency. `raw` entries are 0/1; normalized variants
/// rescale them.
struct AdjacencyMatrix {
    enum class Mode { raw, row, symmetric };
    Tensor g;  // R x R
    Mode mode = Mode::raw;
};

const char* adjacency_mode_name(AdjacencyMatrix::Mode mode);
AdjacencyMatrix::Mode adjacency_mode_from_name(const std::string& name);

enum class DegenerateAu {
    error,       // an AU that never occurs raises
    zero_row,    // ...or gets a zero row (diagonal kept 1) plus a warning
};

/// Co-occurrence conditionals from an N x C 0/1 label table (entries in
/// labels[k] are the sample k's AU activations, ordered like au_order).
CondProbMatrix estimate_cond_prob(const std::vector<std::vector<int>>& labels,
                                  const std::vector<int>& au_order,
                                  DegenerateAu policy = DegenerateAu::error,
                                  std::vector<std::string>* warnings = nullptr);

SymMatrix symmetrize(const CondProbMatrix& m);

/// Entry 1 iff m_sym >= h (inclusive). h must be positive.
BoolRelationMatrix binarize(const SymMatrix& m, double h);

/// ROI-node graph: self loops, symmetric-pair edges, an edge wherever two
/// nodes carry AUs related in m_bool, and a global node connected to all.
AdjacencyMatrix assemble_graph(const BoolRelationMatrix& m_bool, const RoiLayout& layout);

/// raw: unchanged. row: rows divided by their sums. symmetric:
/// D^(-1/2) G D^(-1/2) with D the degree diagonal.
AdjacencyMatrix normalize_adjacency(const AdjacencyMatrix& g, AdjacencyMatrix::Mode mode);

/// Identity relation graph over the layout (self loops and, optionally, the
/// global hub) for ablation baselines.
AdjacencyMatrix identity_graph(std::size_t num_rois, bool connect_global);

// Relation-matrix files: a header line of AU ids, then C rows of C
// space-separated 0/1 values.
BoolRelationMatrix load_mbool(const std::string& path);
void save_mbool(const std::string& path, const BoolRelationMatrix& m);

// Adjacency files use the same textual layout with R node names.
void save_adjacency(const std::string& path, const AdjacencyMatrix& g,
                    const std::vector<std::string>& node_names);
AdjacencyMatrix load_adjacency(const std::string& path);

/// Short node labels ("AU1R", "AU23U+", "FACE") for exports.
std::vector<std::string> node_names(const RoiLayout& layout);

}  // namespace augcn
