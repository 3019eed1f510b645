#include "augcn/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "augcn/objectives.hpp"

namespace augcn {

void sgd_step(Tensor& value, const Tensor& grad, Tensor& velocity, double lr, double momentum,
              double weight_decay) {
    if (!value.same_shape(grad) || !value.same_shape(velocity)) {
        throw std::invalid_argument("sgd_step: value " + value.shape_str() + ", grad " +
                                    grad.shape_str() + ", velocity " + velocity.shape_str() +
                                    " must all match");
    }
    for (std::size_t i = 0; i < value.size(); ++i) {
        velocity[i] = momentum * velocity[i] - lr * (grad[i] + weight_decay * value[i]);
        value[i] += velocity[i];
    }
}

void SgdOptimizer::step(const ParameterStore& store, const std::vector<std::string>& trainable,
                        double lr) {
    for (const std::string& name : trainable) {
        Var p = store.get(name);
        auto [it, fresh] = velocity_.try_emplace(name, Tensor(p->value.shape()));
        if (fresh && !it->second.same_shape(p->value)) {
            throw std::logic_error("velocity shape mismatch for '" + name + "'");
        }
        sgd_step(p->value, p->grad, it->second, lr, momentum_, weight_decay_);
    }
}

ModelSetup make_setup(const TrainConfig& config) {
    config.validate();
    ModelSetup s;
    s.dataset = dataset_by_name(config.dataset);
    s.layout = build_layout(s.dataset, s.dataset.rules, config.n, config.use_global_node);
    s.ae_dims = AeDims{config.n, config.channels, config.hidden, config.d0,
                       s.dataset.num_classes()};
    return s;
}

void put_config(Checkpoint& ckpt, const TrainConfig& c) {
    ckpt.put_string("config/dataset", c.dataset);
    ckpt.put_scalar("config/n", static_cast<double>(c.n));
    ckpt.put_scalar("config/channels", static_cast<double>(c.channels));
    ckpt.put_scalar("config/hidden", static_cast<double>(c.hidden));
    ckpt.put_scalar("config/d0", static_cast<double>(c.d0));
    ckpt.put_scalar("config/d1", static_cast<double>(c.d1));
    ckpt.put_scalar("config/d2", static_cast<double>(c.d2));
    ckpt.put_scalar("config/lambda1", c.lambda1);
    ckpt.put_scalar("config/lambda2", c.lambda2);
    ckpt.put_scalar("config/dice_epsilon", c.dice_epsilon);
    ckpt.put_scalar("config/relation_threshold", c.relation_threshold);
    ckpt.put_scalar("config/dropout_rate", c.dropout_rate);
    ckpt.put_scalar("config/learning_rate", c.learning_rate);
    ckpt.put_scalar("config/lr_decay", c.lr_decay);
    ckpt.put_scalar("config/lr_decay_period", static_cast<double>(c.lr_decay_period));
    ckpt.put_scalar("config/momentum", c.momentum);
    ckpt.put_scalar("config/weight_decay", c.weight_decay);
    ckpt.put_scalar("config/batch_size", static_cast<double>(c.batch_size));
    ckpt.put_scalar("config/stage1_epochs", static_cast<double>(c.stage1_epochs));
    ckpt.put_scalar("config/stage2_epochs", static_cast<double>(c.stage2_epochs));
    ckpt.put_rng_state("config/seed", c.seed);
    ckpt.put_string("config/adjacency_mode", adjacency_mode_name(c.adjacency_mode));
    ckpt.put_scalar("config/use_global_node", c.use_global_node ? 1.0 : 0.0);
}

TrainConfig config_from_checkpoint(const Checkpoint& ckpt) {
    TrainConfig c;
    c.dataset = ckpt.get_string("config/dataset");
    c.n = static_cast<std::size_t>(ckpt.get_scalar("config/n"));
    c.channels = static_cast<std::size_t>(ckpt.get_scalar("config/channels"));
    c.hidden = static_cast<std::size_t>(ckpt.get_scalar("config/hidden"));
    c.d0 = static_cast<std::size_t>(ckpt.get_scalar("config/d0"));
    c.d1 = static_cast<std::size_t>(ckpt.get_scalar("config/d1"));
    c.d2 = static_cast<std::size_t>(ckpt.get_scalar("config/d2"));
    c.lambda1 = ckpt.get_scalar("config/lambda1");
    c.lambda2 = ckpt.get_scalar("config/lambda2");
    c.dice_epsilon = ckpt.get_scalar("config/dice_epsilon");
    c.relation_threshold = ckpt.get_scalar("config/relation_threshold");
    c.dropout_rate = ckpt.get_scalar("config/dropout_rate");
    c.learning_rate = ckpt.get_scalar("config/learning_rate");
    c.lr_decay = ckpt.get_scalar("config/lr_decay");
    c.lr_decay_period = static_cast<std::size_t>(ckpt.get_scalar("config/lr_decay_period"));
    c.momentum = ckpt.get_scalar("config/momentum");
    c.weight_decay = ckpt.get_scalar("config/weight_decay");
    c.batch_size = static_cast<std::size_t>(ckpt.get_scalar("config/batch_size"));
    c.stage1_epochs = static_cast<std::size_t>(ckpt.get_scalar("config/stage1_epochs"));
    c.stage2_epochs = static_cast<std::size_t>(ckpt.get_scalar("config/stage2_epochs"));
    c.seed = ckpt.get_rng_state("config/seed");
    c.adjacency_mode = adjacency_mode_from_name(ckpt.get_string("config/adjacency_mode"));
    c.use_global_node = ckpt.get_scalar("config/use_global_node") != 0.0;
    return c;
}

AdjacencyMatrix graph_from_labels(const DatasetManifest& manifest, const RoiLayout& layout,
                                  const TrainConfig& config, DegenerateAu policy,
                                  std::vector<std::string>* warnings) {
    CondProbMatrix m = estimate_cond_prob(manifest.label_table(), manifest.au_ids, policy,
                                          warnings);
    BoolRelationMatrix m_bool = binarize(symmetrize(m), config.relation_threshold);
    return assemble_graph(m_bool, layout);
}

AdjacencyMatrix graph_from_mbool(const BoolRelationMatrix& m_bool, const RoiLayout& layout) {
    return assemble_graph(m_bool, layout);
}

namespace {

void check_manifest(const DatasetManifest& manifest, const ModelSetup& setup) {
    if (manifest.records.empty()) throw std::runtime_error("manifest has no records");
    if (manifest.au_ids != setup.layout.au_ids) {
        throw std::runtime_error("manifest AU set does not match config '" +
                                 setup.dataset.name + "'");
    }
}

void check_finite_loss(double loss, const char* stage, std::size_t epoch) {
    if (!std::isfinite(loss)) {
        throw std::runtime_error(std::string(stage) + " diverged: non-finite loss at epoch " +
                                 std::to_string(epoch) +
                                 "; reduce the learning rate or check the inputs");
    }
}

// Rows `indices` of each record's ROI-r patch block, as a B x dim constant.
Tensor gather_roi_rows(const PatchSet& patches, const std::vector<std::size_t>& indices,
                       std::size_t roi) {
    Tensor out({indices.size(), patches.patch_dim});
    for (std::size_t b = 0; b < indices.size(); ++b) {
        const Tensor& p = patches.patches[indices[b]];
        std::copy_n(p.data() + roi * patches.patch_dim, patches.patch_dim,
                    out.data() + b * patches.patch_dim);
    }
    return out;
}

Tensor gather_labels(const PatchSet& patches, const std::vector<std::size_t>& indices) {
    const std::size_t c = patches.labels.front().size();
    Tensor out({indices.size(), c});
    for (std::size_t b = 0; b < indices.size(); ++b) {
        for (std::size_t j = 0; j < c; ++j) {
            out.at(b, j) = patches.labels[indices[b]][j] ? 1.0 : 0.0;
        }
    }
    return out;
}

std::vector<std::vector<std::size_t>> make_batches(std::size_t count, std::size_t batch_size,
                                                   SeededRng& rng) {
    std::vector<std::size_t> order(count);
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order);
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t start = 0; start < count; start += batch_size) {
        const std::size_t end = std::min(count, start + batch_size);
        batches.emplace_back(order.begin() + static_cast<long>(start),
                             order.begin() + static_cast<long>(end));
    }
    return batches;
}

void put_model(Checkpoint& ckpt, const ParameterStore& store) {
    for (const auto& [name, p] : store.entries()) ckpt.put("model/" + name, p->value);
}

ParameterStore model_from_checkpoint(const Checkpoint& ckpt) {
    ParameterStore store;
    for (const auto& [name, t] : ckpt.blobs()) {
        if (name.rfind("model/", 0) == 0) store.adopt(name.substr(6), t);
    }
    return store;
}

}  // namespace

Checkpoint train_stage1(const DatasetManifest& manifest, const TrainConfig& config,
                        const std::optional<std::string>& checkpoint_path,
                        std::vector<double>* epoch_loss_out) {
    ModelSetup setup = make_setup(config);
    check_manifest(manifest, setup);
    PatchSet patches = extract_patches(manifest, setup.layout, setup.dataset.rules,
                                       setup.dataset.landmark_count);
    if (patches.patch_dim != setup.ae_dims.input()) {
        throw std::runtime_error("patches are " + std::to_string(patches.patch_dim) +
                                 "-wide but the config expects n*n*ch = " +
                                 std::to_string(setup.ae_dims.input()));
    }
    const std::size_t num_rois = setup.layout.num_rois();
    const std::size_t c = setup.layout.num_classes();

    SeededRng rng(config.seed);
    ParameterStore store;
    RepresentationModel model = RepresentationModel::init(num_rois, setup.ae_dims, store, rng);
    std::vector<std::string> trainable;
    for (const auto& [name, p] : store.entries()) trainable.push_back(name);
    SgdOptimizer opt(config.momentum, config.weight_decay);

    // Per-record ROI-level supervision targets.
    std::vector<Tensor> roi_targets;
    roi_targets.reserve(manifest.records.size());
    for (const SampleRecord& r : manifest.records) {
        roi_targets.push_back(roi_label_matrix(r.labels, setup.layout));
    }

    Checkpoint ckpt;
    for (std::size_t epoch = 1; epoch <= config.stage1_epochs; ++epoch) {
        const double lr = config.lr_at_epoch(epoch);
        double epoch_loss = 0.0;
        std::size_t epoch_batches = 0;
        for (const auto& batch : make_batches(patches.patches.size(), config.batch_size, rng)) {
            store.zero_grad();
            Var cls_total, rec_total;
            for (std::size_t roi = 0; roi < num_rois; ++roi) {
                Tensor x = gather_roi_rows(patches, batch, roi);
                Var input = constant(x);
                Var latent = model.encode_batch(input, roi);
                Var recon = model.decode_batch(latent, roi);
                Var probs = model.head_batch(latent, roi);
                Tensor target({batch.size(), c});
                for (std::size_t b = 0; b < batch.size(); ++b) {
                    for (std::size_t j = 0; j < c; ++j) {
                        target.at(b, j) = roi_targets[batch[b]].at(roi, j);
                    }
                }
                Var cls = bce_mean(probs, target, Tensor());
                Var rec = recon_loss(recon, x);
                cls_total = cls_total ? add(cls_total, cls) : cls;
                rec_total = rec_total ? add(rec_total, rec) : rec;
            }
            const double inv_r = 1.0 / static_cast<double>(num_rois);
            Var loss = roi_total_loss(scale(rec_total, inv_r), scale(cls_total, inv_r),
                                      config.lambda1);
            check_finite_loss(loss->value.item(), "stage-1 training", epoch);
            backward(loss);
            opt.step(store, trainable, lr);
            epoch_loss += loss->value.item();
            ++epoch_batches;
        }
        if (epoch_loss_out) {
            epoch_loss_out->push_back(epoch_loss / static_cast<double>(epoch_batches));
        }
        if (checkpoint_path) {
            Checkpoint epoch_ckpt;
            put_config(epoch_ckpt, config);
            epoch_ckpt.put_scalar("meta/stage", 1.0);
            epoch_ckpt.put_scalar("meta/epoch", static_cast<double>(epoch));
            epoch_ckpt.put_rng_state("rng/state", rng.state());
            put_model(epoch_ckpt, store);
            epoch_ckpt.save(*checkpoint_path);
            ckpt = std::move(epoch_ckpt);
        }
    }
    if (!checkpoint_path) {
        put_config(ckpt, config);
        ckpt.put_scalar("meta/stage", 1.0);
        ckpt.put_scalar("meta/epoch", static_cast<double>(config.stage1_epochs));
        ckpt.put_rng_state("rng/state", rng.state());
        put_model(ckpt, store);
    }
    return ckpt;
}

Var stage2_forward(const RepresentationModel& model, const PatchSet& patches,
                   const std::vector<std::size_t>& batch_indices, const Tensor& g,
                   const GcnParams& gcn, const FcnParams& fcn, bool train, SeededRng& rng) {
    const std::size_t num_rois = patches.num_rois;
    std::vector<Var> latents;
    latents.reserve(num_rois);
    for (std::size_t roi = 0; roi < num_rois; ++roi) {
        Var input = constant(gather_roi_rows(patches, batch_indices, roi));
        latents.push_back(model.encode_batch(input, roi));
    }
    Var z0 = stack_roi_rows(latents, batch_indices.size());
    return gcn_forward(g, z0, gcn, fcn, train, rng, batch_indices.size());
}

Checkpoint train_stage2(const Checkpoint& stage1, const DatasetManifest& manifest,
                        const AdjacencyMatrix& graph, const TrainConfig& config,
                        const std::optional<std::string>& checkpoint_path,
                        std::vector<double>* epoch_loss_out) {
    ModelSetup setup = make_setup(config);
    check_manifest(manifest, setup);
    if (stage1.get_scalar("meta/stage") != 1.0) {
        throw std::runtime_error("train_stage2 expects a stage-1 checkpoint");
    }
    {
        TrainConfig prev = config_from_checkpoint(stage1);
        if (prev.dataset != config.dataset || prev.n != config.n ||
            prev.channels != config.channels || prev.hidden != config.hidden ||
            prev.d0 != config.d0 || prev.use_global_node != config.use_global_node) {
            throw std::runtime_error(
                "stage-1 checkpoint is incompatible with this config (dataset or encoder "
                "widths differ)");
        }
    }
    const std::size_t num_rois = setup.layout.num_rois();
    if (graph.g.rank() != 2 || graph.g.dim(0) != num_rois) {
        throw std::runtime_error("graph has " + std::to_string(graph.g.dim(0)) +
                                 " nodes but layout '" + setup.dataset.name + "' has R = " +
                                 std::to_string(num_rois));
    }
    AdjacencyMatrix g_used = normalize_adjacency(graph, config.adjacency_mode);

    PatchSet patches = extract_patches(manifest, setup.layout, setup.dataset.rules,
                                       setup.dataset.landmark_count);
    if (patches.patch_dim != setup.ae_dims.input()) {
        throw std::runtime_error("patches are " + std::to_string(patches.patch_dim) +
                                 "-wide but the config expects n*n*ch = " +
                                 std::to_string(setup.ae_dims.input()));
    }

    SeededRng rng(config.seed);
    ParameterStore store = model_from_checkpoint(stage1);
    RepresentationModel model = RepresentationModel::bind(num_rois, setup.ae_dims, store);
    GcnParams gcn = GcnParams::init(config.d0, config.d1, config.d2, config.dropout_rate,
                                    store, rng);
    FcnParams fcn = FcnParams::init(num_rois * config.d2, setup.layout.num_classes(), store,
                                    rng);

    // Encoders stay trainable end to end; decoders and ROI heads freeze.
    std::vector<std::string> trainable = model.encoder_param_names();
    trainable.insert(trainable.end(), {"gcn/w0", "gcn/w1", "fcn/w", "fcn/b"});
    std::sort(trainable.begin(), trainable.end());
    SgdOptimizer opt(config.momentum, config.weight_decay);

    ClassWeights weights = class_weights(manifest.occurrence_rates(), &manifest.au_ids);

    Checkpoint ckpt;
    auto fill_checkpoint = [&](Checkpoint& out, std::size_t epoch) {
        put_config(out, config);
        out.put_scalar("meta/stage", 2.0);
        out.put_scalar("meta/epoch", static_cast<double>(epoch));
        out.put_rng_state("rng/state", rng.state());
        out.put("graph/g", g_used.g);
        out.put_string("graph/mode", adjacency_mode_name(g_used.mode));
        put_model(out, store);
    };

    for (std::size_t epoch = 1; epoch <= config.stage2_epochs; ++epoch) {
        const double lr = config.lr_at_epoch(epoch);
        double epoch_loss = 0.0;
        std::size_t epoch_batches = 0;
        for (const auto& batch : make_batches(patches.patches.size(), config.batch_size, rng)) {
            store.zero_grad();
            Var probs = stage2_forward(model, patches, batch, g_used.g, gcn, fcn,
                                       /*train=*/true, rng);
            Tensor y = gather_labels(patches, batch);
            Var softmax_term = weighted_softmax_loss(y, probs, weights);
            Var dice_term = dice_loss(y, probs, weights, config.dice_epsilon);
            Var loss = au_loss(softmax_term, dice_term, config.lambda2);
            check_finite_loss(loss->value.item(), "stage-2 training", epoch);
            backward(loss);
            opt.step(store, trainable, lr);
            epoch_loss += loss->value.item();
            ++epoch_batches;
        }
        if (epoch_loss_out) {
            epoch_loss_out->push_back(epoch_loss / static_cast<double>(epoch_batches));
        }
        if (checkpoint_path) {
            Checkpoint epoch_ckpt;
            fill_checkpoint(epoch_ckpt, epoch);
            epoch_ckpt.save(*checkpoint_path);
            ckpt = std::move(epoch_ckpt);
        }
    }
    if (!checkpoint_path) fill_checkpoint(ckpt, config.stage2_epochs);
    return ckpt;
}

std::pair<double, double> full_loss_grad_check(const TrainConfig& config, double eps,
                                               std::uint64_t seed) {
    ModelSetup setup = make_setup(config);
    const std::size_t num_rois = setup.layout.num_rois();
    const std::size_t c = setup.layout.num_classes();
    SeededRng rng(seed);

    // One fixed sample: random patches in [0,1] and a random label vector.
    PatchSet sample;
    sample.num_rois = num_rois;
    sample.patch_dim = setup.ae_dims.input();
    Tensor patches({num_rois, sample.patch_dim});
    for (double& v : patches.raw()) v = rng.uniform();
    sample.patches.push_back(patches);
    std::vector<int> labels(c);
    bool any = false;
    for (int& v : labels) {
        v = rng.uniform() < 0.5 ? 1 : 0;
        any = any || v;
    }
    if (!any) labels[0] = 1;  // class weights need every label state reachable
    sample.labels.push_back(labels);
    Tensor y_roi = roi_label_matrix(labels, setup.layout);

    ParameterStore store;
    RepresentationModel model = RepresentationModel::init(num_rois, setup.ae_dims, store, rng);
    GcnParams gcn = GcnParams::init(config.d0, config.d1, config.d2, 0.0, store, rng);
    FcnParams fcn = FcnParams::init(num_rois * config.d2, c, store, rng);

    // Any valid relation graph exercises the path; two cliques over the
    // label set plus the usual layout rules.
    BoolRelationMatrix m_bool;
    m_bool.au_order = setup.layout.au_ids;
    m_bool.m = Tensor({c, c});
    for (std::size_t i = 0; i < c; ++i) {
        for (std::size_t j = 0; j < c; ++j) {
            bool same_half = (i < (c + 1) / 2) == (j < (c + 1) / 2);
            m_bool.m.at(i, j) = same_half ? 1.0 : 0.0;
        }
    }
    AdjacencyMatrix g = assemble_graph(m_bool, setup.layout);

    auto stage1_loss = [&] {
        Var cls_total, rec_total;
        for (std::size_t roi = 0; roi < num_rois; ++roi) {
            Tensor x({1, sample.patch_dim});
            std::copy_n(patches.data() + roi * sample.patch_dim, sample.patch_dim, x.data());
            Var input = constant(x);
            Var latent = model.encode_batch(input, roi);
            Var recon = model.decode_batch(latent, roi);
            Var probs = model.head_batch(latent, roi);
            Tensor target({1, c});
            for (std::size_t j = 0; j < c; ++j) target.at(0, j) = y_roi.at(roi, j);
            Var cls = bce_mean(probs, target, Tensor());
            Var rec = recon_loss(recon, x);
            cls_total = cls_total ? add(cls_total, cls) : cls;
            rec_total = rec_total ? add(rec_total, rec) : rec;
        }
        const double inv_r = 1.0 / static_cast<double>(num_rois);
        return roi_total_loss(scale(rec_total, inv_r), scale(cls_total, inv_r),
                              config.lambda1);
    };

    std::vector<double> rates(c, 0.5);
    ClassWeights weights = class_weights(rates);
    Tensor y({1, c});
    for (std::size_t j = 0; j < c; ++j) y.at(0, j) = labels[j];
    std::vector<std::size_t> index{0};
    auto stage2_loss = [&] {
        SeededRng eval(0);
        Var probs = stage2_forward(model, sample, index, g.g, gcn, fcn, /*train=*/false, eval);
        return au_loss(weighted_softmax_loss(y, probs, weights),
                       dice_loss(y, probs, weights, config.dice_epsilon), config.lambda2);
    };

    std::vector<Var> stage1_params;
    std::vector<Var> stage2_params;
    for (const auto& [name, p] : store.entries()) {
        if (name.rfind("gcn/", 0) == 0 || name.rfind("fcn/", 0) == 0) {
            stage2_params.push_back(p);
        } else {
            stage1_params.push_back(p);
            if (name.find("enc_") != std::string::npos) stage2_params.push_back(p);
        }
    }
    const double err1 = grad_check(stage1_loss, stage1_params, eps);
    const double err2 = grad_check(stage2_loss, stage2_params, eps);
    return {err1, err2};
}

EvalReport evaluate(const Checkpoint& checkpoint, const DatasetManifest& manifest) {
    if (!checkpoint.contains("graph/g")) {
        throw std::runtime_error("checkpoint carries no relation graph; evaluation needs a "
                                 "stage-2 checkpoint");
    }
    TrainConfig config = config_from_checkpoint(checkpoint);
    ModelSetup setup = make_setup(config);
    check_manifest(manifest, setup);
    PatchSet patches = extract_patches(manifest, setup.layout, setup.dataset.rules,
                                       setup.dataset.landmark_count);
    ParameterStore store = model_from_checkpoint(checkpoint);
    RepresentationModel model =
        RepresentationModel::bind(setup.layout.num_rois(), setup.ae_dims, store);
    GcnParams gcn = GcnParams::bind(config.dropout_rate, store);
    FcnParams fcn = FcnParams::bind(store);
    const Tensor& g = checkpoint.get("graph/g");

    std::vector<std::size_t> all(patches.patches.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    SeededRng rng(config.seed);  // unused: dropout is disabled at eval
    Var probs = stage2_forward(model, patches, all, g, gcn, fcn, /*train=*/false, rng);
    Tensor y = gather_labels(patches, all);

    EvalReport report;
    report.au_ids = manifest.au_ids;
    report.f1 = f1_scores(probs->value, y, 0.5);
    report.auc = auc_scores(probs->value, y);
    report.num_samples = patches.patches.size();
    report.lambda1 = config.lambda1;
    report.lambda2 = config.lambda2;
    report.dice_epsilon = config.dice_epsilon;
    report.learning_rate = config.learning_rate;
    report.adjacency_mode = checkpoint.get_string("graph/mode");
    report.seed = config.seed;
    report.config_name = config.dataset;
    return report;
}

}  // namespace augcn
