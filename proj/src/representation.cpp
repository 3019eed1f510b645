#include "augcn/representation.hpp"

#include <stdexcept>

namespace augcn {

namespace {

std::string roi_prefix(std::size_t roi_id) {
    std::string id = std::to_string(roi_id);
    if (id.size() < 2) id.insert(id.begin(), '0');
    return "roi/" + id + "/";
}

}  // namespace

RepresentationModel RepresentationModel::init(std::size_t num_rois, AeDims dims,
                                              ParameterStore& store, SeededRng& rng) {
    RepresentationModel m;
    m.dims_ = dims;
    const std::size_t in = dims.input();
    for (std::size_t r = 0; r < num_rois; ++r) {
        const std::string p = roi_prefix(r);
        RoiAeParams roi;
        roi.enc_w1 = store.create(p + "enc_w1", {in, dims.hidden}, rng);
        roi.enc_b1 = store.create_zeros(p + "enc_b1", {dims.hidden});
        roi.enc_w2 = store.create(p + "enc_w2", {dims.hidden, dims.latent}, rng);
        roi.enc_b2 = store.create_zeros(p + "enc_b2", {dims.latent});
        roi.dec_w1 = store.create(p + "dec_w1", {dims.latent, dims.hidden}, rng);
        roi.dec_b1 = store.create_zeros(p + "dec_b1", {dims.hidden});
        roi.dec_w2 = store.create(p + "dec_w2", {dims.hidden, in}, rng);
        roi.dec_b2 = store.create_zeros(p + "dec_b2", {in});
        roi.head_w = store.create(p + "head_w", {dims.latent, dims.classes}, rng);
        roi.head_b = store.create_zeros(p + "head_b", {dims.classes});
        m.rois_.push_back(std::move(roi));
    }
    return m;
}

RepresentationModel RepresentationModel::bind(std::size_t num_rois, AeDims dims,
                                              const ParameterStore& store) {
    RepresentationModel m;
    m.dims_ = dims;
    for (std::size_t r = 0; r < num_rois; ++r) {
        const std::string p = roi_prefix(r);
        RoiAeParams roi;
        roi.enc_w1 = store.get(p + "enc_w1");
        roi.enc_b1 = store.get(p + "enc_b1");
        roi.enc_w2 = store.get(p + "enc_w2");
        roi.enc_b2 = store.get(p + "enc_b2");
        roi.dec_w1 = store.get(p + "dec_w1");
        roi.dec_b1 = store.get(p + "dec_b1");
        roi.dec_w2 = store.get(p + "dec_w2");
        roi.dec_b2 = store.get(p + "dec_b2");
        roi.head_w = store.get(p + "head_w");
        roi.head_b = store.get(p + "head_b");
        m.rois_.push_back(std::move(roi));
    }
    return m;
}

void RepresentationModel::check_roi(std::size_t roi_id) const {
    if (roi_id >= rois_.size()) {
        throw std::out_of_range("roi_id " + std::to_string(roi_id) + " out of range (R=" +
                                std::to_string(rois_.size()) + ")");
    }
}

const RoiAeParams& RepresentationModel::roi_params(std::size_t roi_id) const {
    check_roi(roi_id);
    return rois_[roi_id];
}

Var RepresentationModel::encode(const Tensor& patch, std::size_t roi_id) const {
    check_roi(roi_id);
    if (patch.size() != dims_.input()) {
        throw std::invalid_argument("patch " + patch.shape_str() + " does not match input size " +
                                    std::to_string(dims_.input()));
    }
    Var flat = constant(Tensor({1, dims_.input()}, patch.raw()));
    return reshape(encode_batch(flat, roi_id), {dims_.latent});
}

Var RepresentationModel::encode_batch(const Var& flat_patches, std::size_t roi_id) const {
    check_roi(roi_id);
    const RoiAeParams& p = rois_[roi_id];
    Var h = relu(add_rowvec(matmul(flat_patches, p.enc_w1), p.enc_b1));
    return add_rowvec(matmul(h, p.enc_w2), p.enc_b2);
}

Var RepresentationModel::decode(const Var& latent, std::size_t roi_id) const {
    check_roi(roi_id);
    if (latent->value.size() != dims_.latent) {
        throw std::invalid_argument("latent of size " + std::to_string(latent->value.size()) +
                                    " does not match d0 = " + std::to_string(dims_.latent));
    }
    Var row = reshape(latent, {1, dims_.latent});
    return reshape(decode_batch(row, roi_id), {dims_.n, dims_.n, dims_.channels});
}

Var RepresentationModel::decode_batch(const Var& latents, std::size_t roi_id) const {
    check_roi(roi_id);
    const RoiAeParams& p = rois_[roi_id];
    Var h = relu(add_rowvec(matmul(latents, p.dec_w1), p.dec_b1));
    return sigmoid(add_rowvec(matmul(h, p.dec_w2), p.dec_b2));
}

Var RepresentationModel::head_batch(const Var& latents, std::size_t roi_id) const {
    check_roi(roi_id);
    const RoiAeParams& p = rois_[roi_id];
    return sigmoid(add_rowvec(matmul(latents, p.head_w), p.head_b));
}

std::vector<std::string> RepresentationModel::encoder_param_names() const {
    std::vector<std::string> names;
    for (std::size_t r = 0; r < rois_.size(); ++r) {
        const std::string p = roi_prefix(r);
        names.push_back(p + "enc_w1");
        names.push_back(p + "enc_b1");
        names.push_back(p + "enc_w2");
        names.push_back(p + "enc_b2");
    }
    return names;
}

Var recon_loss(const Var& recon, const Tensor& target) {
    if (!recon->value.same_shape(target)) {
        throw std::invalid_argument("recon_loss: shapes differ, " + recon->value.shape_str() +
                                    " vs " + Tensor::shape_str(target.shape()));
    }
    return mean(abs(sub(recon, constant(target))));
}

double recon_loss(const Tensor& recon, const Tensor& target) {
    return recon_loss(constant(recon), target)->value.item();
}

Tensor roi_label_matrix(const std::vector<int>& y, const RoiLayout& layout) {
    const std::size_t r = layout.num_rois();
    const std::size_t c = layout.num_classes();
    if (y.size() != c) {
        throw std::invalid_argument("label vector length " + std::to_string(y.size()) +
                                    " != C = " + std::to_string(c));
    }
    Tensor out({r, c});
    const std::size_t num_local = r - (layout.has_global ? 1 : 0);
    for (std::size_t ri = 0; ri < num_local; ++ri) {
        for (std::size_t ci = 0; ci < c; ++ci) {
            if (layout.incidence[ci][ri] && y[ci]) out.at(ri, ci) = 1.0;
        }
    }
    if (layout.has_global) {
        // The whole-face ROI is supervised with the full label vector.
        for (std::size_t ci = 0; ci < c; ++ci) out.at(r - 1, ci) = y[ci] ? 1.0 : 0.0;
    }
    return out;
}

Var roi_softmax_loss(const Tensor& y_roi, const Var& yhat_roi) {
    return bce_mean(yhat_roi, y_roi, Tensor());
}

double roi_softmax_loss(const Tensor& y_roi, const Tensor& yhat_roi) {
    return roi_softmax_loss(y_roi, constant(yhat_roi))->value.item();
}

Var roi_total_loss(const Var& recon, const Var& roi_cls, double lambda1) {
    if (lambda1 < 0.0) throw std::invalid_argument("lambda1 must be nonnegative");
    return add(roi_cls, scale(recon, lambda1));
}

double roi_total_loss(double recon, double roi_cls, double lambda1) {
    if (lambda1 < 0.0) throw std::invalid_argument("lambda1 must be nonnegative");
    return roi_cls + lambda1 * recon;
}

}  // namespace augcn
