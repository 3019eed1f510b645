#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "augcn/relation_graph.hpp"
#include "augcn/roi.hpp"
#include "augcn/tensor.hpp"

namespace augcn {

/// One training example. Image and landmarks are usually file references;
/// synthetic sets may carry them inline instead.
struct SampleRecord {
    std::string subject_id;
    std::string video_id;
    std::string frame_id;
    std::string image_path;
    std::string landmarks_path;
    std::vector<int> labels;  // length C, 0/1

    std::optional<Tensor> inline_image;
    std::optional<LandmarkSet> inline_landmarks;

    bool any_positive() const;
};

struct DatasetManifest {
    std::string config_name;
    std::vector<int> au_ids;
    std::vector<SampleRecord> records;
    std::map<std::string, int> fold_of_subject;  // subject-exclusive folds

    std::size_t num_classes() const { return au_ids.size(); }
    std::vector<std::string> subjects() const;  // distinct, in first-seen order

    /// Records whose subject is (or is not) in the given fold; fold ids
    /// come from fold_of_subject.
    DatasetManifest fold_subset(int fold, bool keep) const;

    /// N x C label matrix over all records.
    std::vector<std::vector<int>> label_table() const;

    /// Per-class occurrence rates over all records.
    std::vector<double> occurrence_rates() const;
};

// Manifest CSV: optional "# config: <name>" line, then a header
// "subject_id,video_id,frame_id,image_path,landmarks_path,AU1,..." and one
// row per frame. Label headers may be "AU<k>" or plain "<k>".
DatasetManifest load_manifest(const std::string& path);
void save_manifest(const std::string& path, const DatasetManifest& manifest);

/// Per video: up to `per_video_pos` frames with at least one active AU and
/// `per_video_neg` all-negative frames, drawn without replacement in a
/// deterministic order. Short videos contribute what they have; shortfalls
/// are reported through `warnings` when given.
std::vector<SampleRecord> balanced_sample(const DatasetManifest& manifest,
                                          std::size_t per_video_pos,
                                          std::size_t per_video_neg, SeededRng& rng,
                                          std::vector<std::string>* warnings = nullptr);

/// Subject-exclusive 3-fold assignment with fold sizes differing by at most
/// one. Requires at least 3 distinct subjects.
std::map<std::string, int> split_3fold(const DatasetManifest& manifest, SeededRng& rng);

/// Synthetic data: labels drawn from a planted relation structure (one
/// shared factor per connected component of m_bool, per-AU flip noise) and
/// face images with an intensity blob at each active AU's center location
/// plus pixel noise, landmarks fixed to the canonical template.
struct SynthSpec {
    DatasetConfig config;
    Tensor m_bool;  // planted C x C relation structure
    std::size_t num_samples = 0;

    double factor_rate = 0.35;   // P(component factor active)
    double label_flip = 0.05;    // per-AU flip probability
    double pixel_noise = 0.1;    // stddev of additive pixel noise

    std::size_t image_size = 200;
    std::size_t num_subjects = 9;
    std::size_t videos_per_subject = 2;

    double blob_amplitude = 0.7;
    double blob_radius = 7.0;    // pixels at image_size = 200, scaled with it
    double background = 0.1;
};

/// SynthSpec with the single noise knob mapped onto its components
/// (pixel_noise = noise, label_flip = noise / 10).
SynthSpec make_synth_spec(const DatasetConfig& config, Tensor m_bool, std::size_t num_samples,
                          double noise);

/// Draws n label vectors from the planted structure.
std::vector<std::vector<int>> generate_labels(const SynthSpec& spec, std::size_t n,
                                              SeededRng& rng);

/// Renders the face image for one label vector.
Tensor render_face(const SynthSpec& spec, const std::vector<int>& labels, SeededRng& rng);

/// Full synthetic manifest. With `out_dir` set, images (PGM) and the shared
/// landmark file are written there and records reference them; otherwise
/// images stay inline (memory grows with N).
DatasetManifest generate_synthetic(const SynthSpec& spec, SeededRng& rng,
                                   const std::optional<std::string>& out_dir = std::nullopt);

/// Materialized training inputs: per record, the R x (n*n*ch) patch matrix.
struct PatchSet {
    std::size_t num_rois = 0;
    std::size_t patch_dim = 0;
    std::vector<Tensor> patches;            // one R x patch_dim matrix per record
    std::vector<std::vector<int>> labels;   // per record, length C
};

/// Loads (or takes inline) each record's image and landmarks and extracts
/// all ROI patches. Records whose image path ends in ".rois" are read as
/// pre-cropped patch files.
PatchSet extract_patches(const DatasetManifest& manifest, const RoiLayout& layout,
                         const std::vector<AuCenterRule>& rules,
                         std::size_t landmark_count = 68);

// Pre-cropped patch files ("AUROI": magic, u32 version, u32 R, u32 n,
// u32 ch, then R*(n*n*ch) doubles, little-endian).
void save_patches(const std::string& path, const Tensor& patches, std::size_t n,
                  std::size_t channels);
Tensor load_patches(const std::string& path, std::size_t expect_rois, std::size_t expect_n,
                    std::size_t expect_channels);

}  // namespace augcn
