#pragma once

#include <cstddef>
#include <vector>

#include "augcn/autodiff.hpp"
#include "augcn/roi.hpp"
#include "augcn/tensor.hpp"

namespace augcn {

/// Widths of one ROI autoencoder: flattened n*n*ch input, a single hidden
/// layer on each side, a d0 latent, and a C-way detection head.
struct AeDims {
    std::size_t n = 0;
    std::size_t channels = 1;
    std::size_t hidden = 256;
    std::size_t latent = 0;     // d0
    std::size_t classes = 0;    // C

    std::size_t input() const { return n * n * channels; }
};

/// Trainable tensors of one ROI's autoencoder (independent per ROI).
struct RoiAeParams {
    Var enc_w1, enc_b1, enc_w2, enc_b2;
    Var dec_w1, dec_b1, dec_w2, dec_b2;
    Var head_w, head_b;
};

/// The per-ROI autoencoder bank. Encoders map a patch to a d0 latent
/// (flatten, affine, ReLU, affine); decoders mirror that back through a
/// sigmoid so outputs live in (0,1) like normalized pixels; a linear head
/// plus sigmoid on the latent yields ROI-level AU probabilities.
class RepresentationModel {
public:
    /// Creates fresh parameters in `store` (names "roi/<id>/...").
    static RepresentationModel init(std::size_t num_rois, AeDims dims, ParameterStore& store,
                                    SeededRng& rng);

    /// Binds to parameters already present in `store` (e.g. after loading).
    static RepresentationModel bind(std::size_t num_rois, AeDims dims,
                                    const ParameterStore& store);

    std::size_t num_rois() const { return rois_.size(); }
    const AeDims& dims() const { return dims_; }
    const RoiAeParams& roi_params(std::size_t roi_id) const;

    /// Latent vector (shape {d0}) for one patch of shape n x n x ch.
    Var encode(const Tensor& patch, std::size_t roi_id) const;

    /// Batched encoder: flat patches (B x input) to latents (B x d0).
    Var encode_batch(const Var& flat_patches, std::size_t roi_id) const;

    /// Reconstruction (shape n x n x ch) from a latent of shape {d0}.
    Var decode(const Var& latent, std::size_t roi_id) const;

    /// Batched decoder: latents (B x d0) to flat reconstructions (B x input).
    Var decode_batch(const Var& latents, std::size_t roi_id) const;

    /// Batched ROI head: latents (B x d0) to probabilities (B x C).
    Var head_batch(const Var& latents, std::size_t roi_id) const;

    /// Parameter names of the encoders only (the stage-2 trainable subset).
    std::vector<std::string> encoder_param_names() const;

private:
    AeDims dims_;
    std::vector<RoiAeParams> rois_;

    void check_roi(std::size_t roi_id) const;
};

/// Mean absolute pixel difference (per-channel losses average to the same
/// value). Shapes must match.
Var recon_loss(const Var& recon, const Tensor& target);
double recon_loss(const Tensor& recon, const Tensor& target);

/// R x C ROI-level targets: Y masked by the layout incidence, with the
/// global-ROI row carrying the full label vector.
Tensor roi_label_matrix(const std::vector<int>& y, const RoiLayout& layout);

/// Mean over ROIs of the per-ROI multi-label cross entropy (probabilities
/// clamped to [1e-7, 1-1e-7]).
Var roi_softmax_loss(const Tensor& y_roi, const Var& yhat_roi);
double roi_softmax_loss(const Tensor& y_roi, const Tensor& yhat_roi);

/// L_ROI: classification term plus lambda1 times the reconstruction term.
Var roi_total_loss(const Var& recon, const Var& roi_cls, double lambda1);
double roi_total_loss(double recon, double roi_cls, double lambda1);

}  // namespace augcn
