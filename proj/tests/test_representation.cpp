#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "augcn/representation.hpp"
#include "augcn/roi.hpp"

using namespace augcn;

namespace {

RepresentationModel tiny_model(ParameterStore& store, SeededRng& rng, std::size_t rois = 2,
                               AeDims dims = {4, 1, 5, 6, 3}) {
    return RepresentationModel::init(rois, dims, store, rng);
}

Tensor random_patch(const AeDims& dims, SeededRng& rng) {
    Tensor patch({dims.n, dims.n, dims.channels});
    for (double& v : patch.raw()) v = rng.uniform();
    return patch;
}

}  // namespace

TEST_CASE("encode: zero weights give a zero latent; shapes are honored") {
    SeededRng rng(1);
    ParameterStore store;
    RepresentationModel model = tiny_model(store, rng);
    for (const auto& [name, p] : store.entries()) p->value.fill(0.0);

    Tensor patch = random_patch(model.dims(), rng);
    Var z = model.encode(patch, 0);
    REQUIRE(z->value.shape() == std::vector<std::size_t>{6});
    for (std::size_t i = 0; i < z->value.size(); ++i) CHECK(z->value[i] == 0.0);

    CHECK_THROWS_AS(model.encode(patch, 5), std::out_of_range);
    CHECK_THROWS_AS(model.encode(Tensor({3, 3, 1}), 0), std::invalid_argument);
}

TEST_CASE("encode: all-ones 1x1 toy config reproduces its input") {
    SeededRng rng(2);
    ParameterStore store;
    AeDims dims{1, 1, 1, 1, 1};
    RepresentationModel model = RepresentationModel::init(1, dims, store, rng);
    for (const auto& [name, p] : store.entries()) {
        p->value.fill(name.find("_w") != std::string::npos ? 1.0 : 0.0);
    }
    Var z = model.encode(Tensor({1, 1, 1}, {2.0}), 0);
    CHECK(z->value[0] == doctest::Approx(2.0));  // relu(2*1) * 1
}

TEST_CASE("encode at published widths: n=25, d0=150") {
    SeededRng rng(3);
    ParameterStore store;
    AeDims dims{25, 1, 256, 150, 12};
    RepresentationModel model = RepresentationModel::init(1, dims, store, rng);
    Var z = model.encode(random_patch(dims, rng), 0);
    CHECK(z->value.shape() == std::vector<std::size_t>{150});
}

TEST_CASE("decode: zero weights give the 0.5 image; round trip keeps shape") {
    SeededRng rng(4);
    ParameterStore store;
    RepresentationModel model = tiny_model(store, rng);
    const AeDims& dims = model.dims();

    ParameterStore zeroed;
    SeededRng rng2(4);
    RepresentationModel zero_model = tiny_model(zeroed, rng2);
    for (const auto& [name, p] : zeroed.entries()) p->value.fill(0.0);
    Var rec0 = zero_model.decode(constant(Tensor({dims.latent})), 0);
    REQUIRE(rec0->value.shape() == std::vector<std::size_t>{dims.n, dims.n, dims.channels});
    for (std::size_t i = 0; i < rec0->value.size(); ++i) {
        CHECK(rec0->value[i] == doctest::Approx(0.5));  // sigmoid(0)
    }

    Tensor patch = random_patch(dims, rng);
    Var round = model.decode(model.encode(patch, 1), 1);
    CHECK(round->value.shape() == patch.shape());
    for (std::size_t i = 0; i < round->value.size(); ++i) {
        CHECK(round->value[i] > 0.0);
        CHECK(round->value[i] < 1.0);
    }
}

TEST_CASE("recon_loss examples and properties") {
    Tensor a = Tensor::full({2, 2}, 1.0);
    Tensor b = Tensor::full({2, 2}, 0.0);
    CHECK(recon_loss(a, a) == doctest::Approx(0.0));
    CHECK(recon_loss(a, b) == doctest::Approx(1.0));

    Tensor gt({2, 2}, {0.5, 0.0, 0.0, 0.5});
    Tensor rec({2, 2}, {0.0, 0.0, 0.0, 0.0});
    CHECK(recon_loss(gt, rec) == doctest::Approx(0.25));

    SeededRng rng(5);
    for (int round = 0; round < 50; ++round) {
        Tensor x({3, 3});
        Tensor y({3, 3});
        for (double& v : x.raw()) v = rng.uniform();
        for (double& v : y.raw()) v = rng.uniform();
        double fwd = recon_loss(x, y);
        CHECK(fwd >= 0.0);
        CHECK(fwd == doctest::Approx(recon_loss(y, x)));  // symmetric
    }
    CHECK_THROWS_AS(recon_loss(Tensor({2, 2}), Tensor({2, 3})), std::invalid_argument);
}

TEST_CASE("roi_label_matrix masks by incidence") {
    DatasetConfig bp4d = dataset_bp4d();
    RoiLayout layout = build_layout(bp4d, bp4d.rules, 25);
    const std::size_t c = layout.num_classes();

    std::vector<int> zeros(c, 0);
    Tensor z = roi_label_matrix(zeros, layout);
    for (std::size_t i = 0; i < z.size(); ++i) CHECK(z[i] == 0.0);

    // AU12 active, AU14/AU15 inactive: the shared lip-corner row carries a
    // one only in the AU12 column.
    std::vector<int> y(c, 0);
    const auto au12 = static_cast<std::size_t>(layout.au_index(12));
    const auto au14 = static_cast<std::size_t>(layout.au_index(14));
    const auto au15 = static_cast<std::size_t>(layout.au_index(15));
    y[au12] = 1;
    Tensor m = roi_label_matrix(y, layout);
    for (std::size_t r = 0; r + 1 < layout.num_rois(); ++r) {
        const auto& ids = layout.rois[r].au_ids;
        if (std::find(ids.begin(), ids.end(), 12) != ids.end()) {
            CHECK(m.at(r, au12) == 1.0);
            CHECK(m.at(r, au14) == 0.0);
            CHECK(m.at(r, au15) == 0.0);
        } else {
            CHECK(m.at(r, au12) == 0.0);  // active AU outside its ROI stays 0
        }
    }
    // global row equals the full label vector
    for (std::size_t j = 0; j < c; ++j) {
        CHECK(m.at(layout.global_index(), j) == (y[j] ? 1.0 : 0.0));
    }

    // fuzz: the masking constraint holds for random labels
    SeededRng rng(6);
    for (int round = 0; round < 100; ++round) {
        std::vector<int> labels(c);
        for (int& v : labels) v = rng.uniform() < 0.5 ? 1 : 0;
        Tensor t = roi_label_matrix(labels, layout);
        for (std::size_t r = 0; r + 1 < layout.num_rois(); ++r) {
            for (std::size_t j = 0; j < c; ++j) {
                if (!layout.incidence[j][r]) CHECK(t.at(r, j) == 0.0);
                if (!labels[j]) CHECK(t.at(r, j) == 0.0);
            }
        }
    }
}

TEST_CASE("roi_softmax_loss examples") {
    Tensor y({1, 1}, {1.0});
    CHECK(roi_softmax_loss(y, Tensor({1, 1}, {0.5})) == doctest::Approx(std::log(2.0)));

    Tensor targets({2, 3}, {1, 0, 1, 0, 1, 0});
    CHECK(roi_softmax_loss(targets, targets) < 1e-5);  // perfect after clamping

    Tensor flipped({2, 3}, {0, 1, 0, 1, 0, 1});
    double loss = roi_softmax_loss(targets, flipped);
    CHECK(loss == doctest::Approx(-std::log(1e-7)).epsilon(1e-3));
    CHECK(std::isfinite(loss));
    CHECK(loss >= 0.0);
}

TEST_CASE("roi_total_loss arithmetic") {
    CHECK(roi_total_loss(0.7, 0.3, 0.0) == doctest::Approx(0.3));
    CHECK(roi_total_loss(0.2, 0.5, 3.0) == doctest::Approx(1.1));
    CHECK(roi_total_loss(0.0, 0.0, 3.0) == doctest::Approx(0.0));
    CHECK_THROWS_AS(roi_total_loss(0.1, 0.1, -1.0), std::invalid_argument);
}

TEST_CASE("autoencoder forward passes are gradient-exact") {
    SeededRng rng(7);
    ParameterStore store;
    AeDims dims{3, 1, 4, 5, 2};
    RepresentationModel model = RepresentationModel::init(2, dims, store, rng);
    Tensor patch = random_patch(dims, rng);
    Tensor target({1, dims.classes}, {1.0, 0.0});

    std::vector<Var> params = store.values();
    auto full_loss = [&] {
        Var latent = model.encode(patch, 0);
        Var recon = model.decode(latent, 0);
        Var probs = model.head_batch(reshape(latent, {1, dims.latent}), 0);
        Var rec = recon_loss(recon, patch);
        Var cls = bce_mean(probs, target, Tensor());
        return roi_total_loss(rec, cls, 3.0);
    };
    CHECK(grad_check(full_loss, params, 1e-5) < 1e-6);
}
