#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "augcn/dataset.hpp"
#include "augcn/image.hpp"
#include "augcn/trainer.hpp"

using namespace augcn;

namespace {

// The preset picks the base configuration; only flags the user actually
// passed override it.
struct ConfigFlags {
    TrainConfig flags;
    std::string preset = "desk";
    std::string adjacency = "raw";
    bool no_global = false;
    std::string rules_path;
    CLI::App* cmd = nullptr;

    void attach(CLI::App* app, bool with_training_knobs) {
        cmd = app;
        cmd->add_option("--preset", preset, "base configuration: desk, full-bp4d, full-disfa")
            ->check(CLI::IsMember({"desk", "full-bp4d", "full-disfa"}))
            ->capture_default_str();
        cmd->add_option("--config", flags.dataset, "dataset layout: bp4d, disfa, toy, tiny");
        cmd->add_option("--n", flags.n, "ROI patch side");
        cmd->add_option("--channels", flags.channels, "image channels (1 or 3)");
        cmd->add_option("--rules", rules_path, "center-rule table file (default: built-in)");
        cmd->add_flag("--no-global-node", no_global, "drop the whole-face graph node");
        if (!with_training_knobs) return;
        cmd->add_option("--hidden", flags.hidden, "autoencoder hidden width");
        cmd->add_option("--d0", flags.d0, "latent width");
        cmd->add_option("--d1", flags.d1, "first graph-convolution width");
        cmd->add_option("--d2", flags.d2, "second graph-convolution width");
        cmd->add_option("--lambda1", flags.lambda1, "reconstruction trade-off");
        cmd->add_option("--lambda2", flags.lambda2, "Dice trade-off");
        cmd->add_option("--dice-epsilon", flags.dice_epsilon, "Dice smooth term");
        cmd->add_option("--threshold", flags.relation_threshold,
                        "relation binarization threshold h");
        cmd->add_option("--dropout", flags.dropout_rate, "graph-layer dropout rate");
        cmd->add_option("--lr", flags.learning_rate, "initial learning rate");
        cmd->add_option("--lr-decay", flags.lr_decay, "decay factor");
        cmd->add_option("--lr-decay-period", flags.lr_decay_period, "epochs per decay step");
        cmd->add_option("--momentum", flags.momentum, "SGD momentum");
        cmd->add_option("--weight-decay", flags.weight_decay, "L2 weight decay");
        cmd->add_option("--batch-size", flags.batch_size, "mini-batch size");
        cmd->add_option("--stage1-epochs", flags.stage1_epochs, "autoencoder epochs");
        cmd->add_option("--stage2-epochs", flags.stage2_epochs, "joint epochs");
        cmd->add_option("--adjacency-mode", adjacency,
                        "adjacency handling: raw, row, symmetric")
            ->check(CLI::IsMember({"raw", "row", "symmetric"}));
    }

    bool given(const char* name) const { return cmd->count(name) > 0; }

    TrainConfig resolve() {
        TrainConfig out;
        if (preset == "full-bp4d") {
            out = full_bp4d_config();
        } else if (preset == "full-disfa") {
            out = full_disfa_config();
        } else {
            out = desk_config();
        }
        if (given("--config")) out.dataset = flags.dataset;
        if (given("--n")) out.n = flags.n;
        if (given("--channels")) out.channels = flags.channels;
        if (cmd->get_option_no_throw("--hidden")) {
            if (given("--hidden")) out.hidden = flags.hidden;
            if (given("--d0")) out.d0 = flags.d0;
            if (given("--d1")) out.d1 = flags.d1;
            if (given("--d2")) out.d2 = flags.d2;
            if (given("--lambda1")) out.lambda1 = flags.lambda1;
            if (given("--lambda2")) out.lambda2 = flags.lambda2;
            if (given("--dice-epsilon")) out.dice_epsilon = flags.dice_epsilon;
            if (given("--threshold")) out.relation_threshold = flags.relation_threshold;
            if (given("--dropout")) out.dropout_rate = flags.dropout_rate;
            if (given("--lr")) out.learning_rate = flags.learning_rate;
            if (given("--lr-decay")) out.lr_decay = flags.lr_decay;
            if (given("--lr-decay-period")) out.lr_decay_period = flags.lr_decay_period;
            if (given("--momentum")) out.momentum = flags.momentum;
            if (given("--weight-decay")) out.weight_decay = flags.weight_decay;
            if (given("--batch-size")) out.batch_size = flags.batch_size;
            if (given("--stage1-epochs")) out.stage1_epochs = flags.stage1_epochs;
            if (given("--stage2-epochs")) out.stage2_epochs = flags.stage2_epochs;
            if (given("--adjacency-mode")) {
                out.adjacency_mode = adjacency_mode_from_name(adjacency);
            }
        }
        if (no_global) out.use_global_node = false;
        out.validate();
        return out;
    }
};

ModelSetup setup_with_rules(const TrainConfig& config, const std::string& rules_path) {
    if (rules_path.empty()) return make_setup(config);
    ModelSetup s;
    s.dataset = dataset_by_name(config.dataset);
    s.dataset.rules = load_rules(rules_path);
    s.layout = build_layout(s.dataset, s.dataset.rules, config.n, config.use_global_node);
    s.ae_dims = AeDims{config.n, config.channels, config.hidden, config.d0,
                       s.dataset.num_classes()};
    return s;
}

DatasetManifest manifest_for_split(const std::string& path, int fold,
                                   const std::string& split, std::uint64_t fold_seed) {
    DatasetManifest manifest = load_manifest(path);
    if (fold < 0) return manifest;
    SeededRng rng(fold_seed);
    manifest.fold_of_subject = split_3fold(manifest, rng);
    return manifest.fold_subset(fold, split == "heldout");
}

void add_fold_flags(CLI::App* cmd, int& fold, std::string& split, std::uint64_t& fold_seed) {
    cmd->add_option("--fold", fold, "3-fold index to hold out (-1: use every record)")
        ->capture_default_str();
    cmd->add_option("--split", split, "which side of the fold to use: train or heldout")
        ->check(CLI::IsMember({"train", "heldout"}))
        ->capture_default_str();
    cmd->add_option("--fold-seed", fold_seed, "seed for the subject-fold assignment")
        ->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"AU-GCN: relation-aware multi-label AU detection"};
    app.require_subcommand(1);

    // ---- build-graph ----
    auto* build = app.add_subcommand(
        "build-graph", "assemble the ROI relation graph from labels or a relation matrix");
    std::string bg_manifest, bg_mbool, bg_out;
    bool bg_permissive = false;
    ConfigFlags bg_flags;
    build->add_option("--manifest", bg_manifest, "estimate relations from these labels");
    build->add_option("--mbool", bg_mbool, "load a 0/1 relation matrix instead");
    build->add_option("--out", bg_out, "adjacency output file");
    build->add_flag("--permissive", bg_permissive,
                    "zero the relation row of an AU that never occurs instead of failing");
    bg_flags.attach(build, true);

    // ---- ingest ----
    auto* ingest = app.add_subcommand(
        "ingest", "pre-crop ROI patches so training skips image decoding");
    std::string in_manifest, in_outdir;
    ConfigFlags in_flags;
    ingest->add_option("--manifest", in_manifest, "input manifest")->required();
    ingest->add_option("--out-dir", in_outdir, "directory for .rois files and the new manifest")
        ->required();
    in_flags.attach(ingest, false);

    // ---- synth ----
    auto* synth = app.add_subcommand("synth", "generate a synthetic labeled face dataset");
    std::string sy_outdir, sy_mbool;
    std::size_t sy_samples = 500, sy_subjects = 9, sy_videos = 2, sy_image = 200;
    double sy_noise = 0.5;
    std::uint64_t sy_seed = 0;
    ConfigFlags sy_flags;
    synth->add_option("--out-dir", sy_outdir, "output directory")->required();
    synth->add_option("--samples", sy_samples, "number of frames")->capture_default_str();
    synth->add_option("--mbool", sy_mbool, "planted relation matrix (default: built-in toy)");
    synth->add_option("--noise", sy_noise, "noise level")->capture_default_str();
    synth->add_option("--subjects", sy_subjects, "subject count")->capture_default_str();
    synth->add_option("--videos", sy_videos, "videos per subject")->capture_default_str();
    synth->add_option("--image-size", sy_image, "rendered image side")->capture_default_str();
    synth->add_option("--seed", sy_seed, "generation seed")->required();
    sy_flags.attach(synth, false);

    // ---- pretrain-ae ----
    auto* stage1 = app.add_subcommand("pretrain-ae", "stage 1: train the ROI autoencoders");
    std::string s1_manifest, s1_out;
    std::uint64_t s1_seed = 0, s1_fold_seed = 0;
    int s1_fold = -1;
    std::string s1_split = "train";
    std::size_t s1_pos = 0, s1_neg = 0;
    ConfigFlags s1_flags;
    stage1->add_option("--manifest", s1_manifest, "training manifest")->required();
    stage1->add_option("--out", s1_out, "checkpoint path")->required();
    stage1->add_option("--seed", s1_seed, "training seed")->required();
    stage1->add_option("--per-video-pos", s1_pos, "balanced sampling: positives per video");
    stage1->add_option("--per-video-neg", s1_neg, "balanced sampling: negatives per video");
    add_fold_flags(stage1, s1_fold, s1_split, s1_fold_seed);
    s1_flags.attach(stage1, true);

    // ---- train ----
    auto* stage2 = app.add_subcommand(
        "train", "stage 2: joint training of encoders, graph convolutions and the head");
    std::string s2_manifest, s2_init, s2_out, s2_graph, s2_mbool;
    std::uint64_t s2_seed = 0, s2_fold_seed = 0;
    int s2_fold = -1;
    std::string s2_split = "train";
    std::size_t s2_pos = 0, s2_neg = 0;
    ConfigFlags s2_flags;
    stage2->add_option("--manifest", s2_manifest, "training manifest")->required();
    stage2->add_option("--init", s2_init, "stage-1 checkpoint")->required();
    stage2->add_option("--out", s2_out, "checkpoint path")->required();
    stage2->add_option("--seed", s2_seed, "training seed")->required();
    stage2->add_option("--graph", s2_graph, "adjacency file (default: estimate from labels)");
    stage2->add_option("--mbool", s2_mbool, "relation matrix to assemble the graph from");
    stage2->add_option("--per-video-pos", s2_pos, "balanced sampling: positives per video");
    stage2->add_option("--per-video-neg", s2_neg, "balanced sampling: negatives per video");
    add_fold_flags(stage2, s2_fold, s2_split, s2_fold_seed);
    s2_flags.attach(stage2, true);

    // ---- evaluate ----
    auto* eval = app.add_subcommand("evaluate", "score a trained checkpoint on a manifest");
    std::string ev_checkpoint, ev_manifest, ev_report;
    std::uint64_t ev_fold_seed = 0;
    int ev_fold = -1;
    std::string ev_split = "heldout";
    eval->add_option("--checkpoint", ev_checkpoint, "stage-2 checkpoint")->required();
    eval->add_option("--manifest", ev_manifest, "evaluation manifest")->required();
    eval->add_option("--report", ev_report, "write the JSON report here");
    add_fold_flags(eval, ev_fold, ev_split, ev_fold_seed);

    // ---- gradcheck ----
    auto* gc = app.add_subcommand(
        "gradcheck", "audit both training objectives against central differences");
    double gc_eps = 1e-5;
    std::uint64_t gc_seed = 12345;
    // Small audit dimensions: central differences lose resolution once the
    // parameter count grows, so the default stays tiny.
    TrainConfig gc_config;
    gc_config.dataset = "tiny";
    gc_config.n = 4;
    gc_config.channels = 1;
    gc_config.hidden = 5;
    gc_config.d0 = 6;
    gc_config.d1 = 3;
    gc_config.d2 = 2;
    gc->add_option("--eps", gc_eps, "finite-difference step")->capture_default_str();
    gc->add_option("--seed", gc_seed, "sample seed")->capture_default_str();
    gc->add_option("--config", gc_config.dataset, "dataset layout")->capture_default_str();
    gc->add_option("--n", gc_config.n, "ROI patch side")->capture_default_str();
    gc->add_option("--hidden", gc_config.hidden, "autoencoder hidden width")
        ->capture_default_str();
    gc->add_option("--d0", gc_config.d0, "latent width")->capture_default_str();
    gc->add_option("--d1", gc_config.d1, "first graph-convolution width")
        ->capture_default_str();
    gc->add_option("--d2", gc_config.d2, "second graph-convolution width")
        ->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*build) {
            TrainConfig config = bg_flags.resolve();
            ModelSetup setup = setup_with_rules(config, bg_flags.rules_path);
            AdjacencyMatrix adj;
            if (!bg_mbool.empty()) {
                adj = graph_from_mbool(load_mbool(bg_mbool), setup.layout);
            } else if (!bg_manifest.empty()) {
                std::vector<std::string> warnings;
                adj = graph_from_labels(
                    load_manifest(bg_manifest), setup.layout, config,
                    bg_permissive ? DegenerateAu::zero_row : DegenerateAu::error, &warnings);
                for (const std::string& w : warnings) std::cerr << "note: " << w << "\n";
            } else {
                std::cerr << "build-graph needs --manifest or --mbool\n";
                return 1;
            }
            adj = normalize_adjacency(adj, config.adjacency_mode);
            if (!bg_out.empty()) {
                save_adjacency(bg_out, adj, node_names(setup.layout));
                std::cout << "wrote " << bg_out << "\n";
            }
            const std::size_t r = adj.g.dim(0);
            std::cout << "graph over " << r << " nodes (" << adjacency_mode_name(adj.mode)
                      << "):\n";
            auto names = node_names(setup.layout);
            for (std::size_t i = 0; i < r; ++i) {
                std::cout << names[i] << "\t";
                for (std::size_t j = 0; j < r; ++j) {
                    std::cout << adj.g.at(i, j) << (j + 1 < r ? " " : "\n");
                }
            }
        } else if (*ingest) {
            TrainConfig config = in_flags.resolve();
            ModelSetup setup = setup_with_rules(config, in_flags.rules_path);
            DatasetManifest manifest = load_manifest(in_manifest);
            std::filesystem::create_directories(in_outdir);
            DatasetManifest out = manifest;
            for (std::size_t i = 0; i < manifest.records.size(); ++i) {
                const SampleRecord& r = manifest.records[i];
                Tensor img = load_image(r.image_path);
                LandmarkSet lm =
                    load_landmarks(r.landmarks_path, setup.dataset.landmark_count);
                Tensor patches = extract_sample_patches(img, lm, setup.layout,
                                                        setup.dataset.rules);
                std::string name = r.subject_id + "_" + r.video_id + "_" + r.frame_id +
                                   ".rois";
                std::string path = (std::filesystem::path(in_outdir) / name).string();
                save_patches(path, patches, config.n, img.dim(2));
                out.records[i].image_path = path;
            }
            std::string out_manifest =
                (std::filesystem::path(in_outdir) / "manifest.csv").string();
            save_manifest(out_manifest, out);
            std::cout << "wrote " << manifest.records.size() << " patch files and "
                      << out_manifest << "\n";
        } else if (*synth) {
            TrainConfig config = sy_flags.resolve();
            DatasetConfig dataset = dataset_by_name(config.dataset);
            if (!sy_flags.rules_path.empty()) dataset.rules = load_rules(sy_flags.rules_path);
            BoolRelationMatrix m_bool;
            if (!sy_mbool.empty()) {
                m_bool = load_mbool(sy_mbool);
            } else {
                // two cliques over the label set
                const std::size_t c = dataset.num_classes();
                m_bool.au_order = dataset.au_ids;
                m_bool.m = Tensor({c, c});
                for (std::size_t i = 0; i < c; ++i)
                    for (std::size_t j = 0; j < c; ++j)
                        m_bool.m.at(i, j) =
                            ((i < (c + 1) / 2) == (j < (c + 1) / 2)) ? 1.0 : 0.0;
            }
            if (m_bool.au_order != dataset.au_ids) {
                std::cerr << "relation matrix AU set does not match --config\n";
                return 1;
            }
            SynthSpec spec = make_synth_spec(dataset, m_bool.m, sy_samples, sy_noise);
            spec.image_size = sy_image;
            spec.num_subjects = sy_subjects;
            spec.videos_per_subject = sy_videos;
            SeededRng rng(sy_seed);
            DatasetManifest manifest = generate_synthetic(spec, rng, sy_outdir);
            std::string path = (std::filesystem::path(sy_outdir) / "manifest.csv").string();
            save_manifest(path, manifest);
            save_mbool((std::filesystem::path(sy_outdir) / "planted_mbool.txt").string(),
                       m_bool);
            std::cout << "wrote " << manifest.records.size() << " frames under " << sy_outdir
                      << "\n";
        } else if (*stage1) {
            TrainConfig config = s1_flags.resolve();
            config.seed = s1_seed;
            DatasetManifest manifest =
                manifest_for_split(s1_manifest, s1_fold, s1_split, s1_fold_seed);
            if (s1_pos > 0 || s1_neg > 0) {
                SeededRng rng(config.seed);
                std::vector<std::string> warnings;
                manifest.records = balanced_sample(manifest, s1_pos, s1_neg, rng, &warnings);
                for (const std::string& w : warnings) std::cerr << "note: " << w << "\n";
            }
            std::vector<double> losses;
            train_stage1(manifest, config, s1_out, &losses);
            std::cout << "stage-1 mean epoch loss:";
            for (double l : losses) std::cout << " " << l;
            std::cout << "\nwrote " << s1_out << "\n";
        } else if (*stage2) {
            TrainConfig config = s2_flags.resolve();
            config.seed = s2_seed;
            if (!s2_flags.rules_path.empty()) {
                std::cerr << "train uses the rules recorded at ingest/synth time; "
                             "--rules is only honored by build-graph and ingest\n";
            }
            DatasetManifest manifest =
                manifest_for_split(s2_manifest, s2_fold, s2_split, s2_fold_seed);
            if (s2_pos > 0 || s2_neg > 0) {
                SeededRng rng(config.seed);
                std::vector<std::string> warnings;
                manifest.records = balanced_sample(manifest, s2_pos, s2_neg, rng, &warnings);
                for (const std::string& w : warnings) std::cerr << "note: " << w << "\n";
            }
            ModelSetup setup = make_setup(config);
            AdjacencyMatrix graph;
            if (!s2_graph.empty()) {
                graph = load_adjacency(s2_graph);
                if (graph.mode != AdjacencyMatrix::Mode::raw) {
                    std::cerr << "--graph must be a raw adjacency; the config's "
                                 "--adjacency-mode is applied during training\n";
                    return 1;
                }
            } else if (!s2_mbool.empty()) {
                graph = graph_from_mbool(load_mbool(s2_mbool), setup.layout);
            } else {
                graph = graph_from_labels(manifest, setup.layout, config);
            }
            Checkpoint init = Checkpoint::load(s2_init);
            std::vector<double> losses;
            train_stage2(init, manifest, graph, config, s2_out, &losses);
            std::cout << "stage-2 mean epoch loss:";
            for (double l : losses) std::cout << " " << l;
            std::cout << "\nwrote " << s2_out << "\n";
        } else if (*eval) {
            DatasetManifest manifest =
                manifest_for_split(ev_manifest, ev_fold, ev_split, ev_fold_seed);
            EvalReport report = evaluate(Checkpoint::load(ev_checkpoint), manifest);
            std::cout << report.to_text();
            if (!ev_report.empty()) {
                std::ofstream out(ev_report);
                out << report.to_json() << "\n";
                std::cout << "wrote " << ev_report << "\n";
            }
        } else if (*gc) {
            auto [err1, err2] = full_loss_grad_check(gc_config, gc_eps, gc_seed);
            std::cout << "max relative gradient error\n"
                      << "  stage-1 objective: " << err1 << "\n"
                      << "  stage-2 objective: " << err2 << "\n";
            if (err1 >= 1e-4 || err2 >= 1e-4) {
                std::cerr << "gradient check FAILED (tolerance 1e-4)\n";
                return 1;
            }
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
