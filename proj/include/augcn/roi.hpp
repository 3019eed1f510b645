#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "augcn/tensor.hpp"

namespace augcn {

enum class Laterality { none, left, right, up, down };

const char* laterality_name(Laterality l);
Laterality laterality_from_name(const std::string& name);

struct Point {
    double x = 0.0;
    double y = 0.0;
};

/// Ordered landmark points on an aligned face image, under a named scheme
/// (the shipped rule tables use the 68-point scheme).
struct LandmarkSet {
    std::string scheme;
    std::vector<Point> points;
};

/// Places the center for one AU (and side): an affine combination of one or
/// two landmark points plus a fixed pixel offset.
struct AuCenterRule {
    int au_id = 0;
    Laterality laterality = Laterality::none;
    int lm_a = 0;
    double w_a = 1.0;
    int lm_b = -1;  // -1 means a single-point rule
    double w_b = 0.0;
    double off_x = 0.0;
    double off_y = 0.0;
};

struct AuCenter {
    int au_id;
    Laterality laterality;
    Point center;
};

struct RoiSpec {
    enum class Kind { local, global };

    std::size_t roi_id = 0;
    Kind kind = Kind::local;
    /// Template center computed from the canonical landmarks; per-image
    /// extraction recomputes centers from that image's landmarks.
    Point center;
    std::size_t size = 0;  // patch side n
    std::vector<int> au_ids;
    Laterality laterality = Laterality::none;
    int anchor_au = -1;  // the rule (anchor_au, laterality) positions this ROI
};

/// R region specifications (global last, when present) plus the AU x ROI
/// incidence map. Layouts without the whole-face node exist for ablation
/// runs.
struct RoiLayout {
    std::vector<RoiSpec> rois;
    std::vector<int> au_ids;                        // class order
    std::vector<std::vector<bool>> incidence;       // [class][roi]
    std::vector<std::pair<std::size_t, std::size_t>> symmetric_pairs;
    bool has_global = true;

    std::size_t num_rois() const { return rois.size(); }
    std::size_t num_classes() const { return au_ids.size(); }
    std::size_t global_index() const;
    /// Position of an AU id in the class order, or -1.
    int au_index(int au_id) const;
};

/// A dataset-style configuration: the label set, the default center-rule
/// table, and the ROI composition (which AUs share a region, which regions
/// mirror each other).
struct DatasetConfig {
    struct RoiDef {
        std::vector<int> au_ids;
        Laterality laterality = Laterality::none;
        int anchor_au = 0;
    };

    std::string name;
    std::vector<int> au_ids;
    std::size_t landmark_count = 68;
    std::vector<AuCenterRule> rules;
    std::vector<RoiDef> local_rois;
    std::vector<std::pair<std::size_t, std::size_t>> symmetric_pairs;

    std::size_t num_classes() const { return au_ids.size(); }
};

// Built-in configurations. bp4d has 12 AUs over 19 ROIs, disfa 8 AUs over
// 14 ROIs; toy (4 AUs / 6 ROIs) and tiny (3 AUs / 4 ROIs) are small
// synthetic-data setups used by tests and fast experiments.
DatasetConfig dataset_bp4d();
DatasetConfig dataset_disfa();
DatasetConfig dataset_toy();
DatasetConfig dataset_tiny();
DatasetConfig dataset_by_name(const std::string& name);

/// Symmetric 68-point face template for a square image of the given size.
LandmarkSet canonical_landmarks(std::size_t image_size = 200);

/// Applies every rule to the landmark set; centers are clamped into
/// [0, w-1] x [0, h-1]. Throws on an empty rule list or a bad landmark index.
std::vector<AuCenter> compute_au_centers(const LandmarkSet& landmarks,
                                         const std::vector<AuCenterRule>& rules,
                                         std::size_t image_w, std::size_t image_h);

/// Crops the n x n window whose floor-center is the rounded center point.
/// Windows that would cross the border are shifted inward, so the result is
/// always a full n x n x ch crop of real pixels.
Tensor extract_roi(const Tensor& image, Point center, std::size_t n);

/// Whole image resampled to n x n (the global ROI).
Tensor extract_global(const Tensor& image, std::size_t n);

/// Assembles the ROI layout for a config: local ROIs per the config's
/// composition, the global ROI last, incidence from ROI membership.
/// `include_global` = false leaves the whole-face node out entirely.
RoiLayout build_layout(const DatasetConfig& config, const std::vector<AuCenterRule>& rules,
                       std::size_t n, bool include_global = true);

/// Per-image centers of the local ROIs (anchor-rule centers).
std::vector<Point> roi_centers(const RoiLayout& layout, const std::vector<AuCenterRule>& rules,
                               const LandmarkSet& landmarks, std::size_t image_w,
                               std::size_t image_h);

/// All R patches of a sample as an R x (n*n*ch) matrix, local crops first,
/// global resample last.
Tensor extract_sample_patches(const Tensor& image, const LandmarkSet& landmarks,
                              const RoiLayout& layout,
                              const std::vector<AuCenterRule>& rules);

// Rule-table files: one rule per line,
//   au=<id> lat=<side> lm=<i[,j]> [w=<wa[,wb]>] off=<dx,dy>
// '#' starts a comment. Two-point rules default to equal weights.
std::vector<AuCenterRule> load_rules(const std::string& path);
void save_rules(const std::string& path, const std::vector<AuCenterRule>& rules);

// Landmark files: one "x,y" line per point.
LandmarkSet load_landmarks(const std::string& path, std::size_t expected_count,
                           const std::string& scheme = "ibug68");
void save_landmarks(const std::string& path, const LandmarkSet& landmarks);

}  // namespace augcn
