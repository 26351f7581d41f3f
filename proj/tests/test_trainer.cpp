#include <doctest.h>

#include <array>
#include <cmath>

#include "actnet/dataset.hpp"
#include "actnet/trainer.hpp"
#include "actnet/triplet_loss.hpp"
#include "test_support.hpp"

using namespace actnet;
using P = ActivationParams<double>;

namespace {

// In-memory dataset of single-layer maps; all entries in the train split.
Dataset make_dataset(const std::vector<std::pair<std::int64_t, FeatureMap>>& items) {
    Dataset d;
    for (std::size_t i = 0; i < items.size(); ++i) {
        const std::string id = "img" + std::to_string(i);
        d.manifest.entries.push_back({id, items[i].first, id + ".actf", Split::Train});
        d.features.push_back({id, {items[i].second}});
    }
    return d;
}

Dataset random_dataset(std::size_t classes, std::size_t per_class, std::size_t depth, SeededRng& rng) {
    std::vector<std::pair<std::int64_t, FeatureMap>> items;
    for (std::size_t c = 0; c < classes; ++c)
        for (std::size_t i = 0; i < per_class; ++i)
            items.emplace_back(static_cast<std::int64_t>(c), testing::random_map(2, 2, depth, rng, 2.0, 0.05));
    return make_dataset(items);
}

ModelState small_model(SeededRng& rng, std::size_t depth) {
    ModelState m = ModelState::make(ActivationFamily::Weibull, {depth});
    m.streams[0] = {P::weibull(1.1, 2.2, 1.5, 1.2), 0.7, 1.3};
    for (Eigen::Index r = 0; r < m.whitening.projection.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.whitening.projection.cols(); ++c) m.whitening.projection(r, c) = rng.normal();
        m.whitening.bias[r] = 0.1 * rng.normal();
    }
    return m;
}

double triplet_loss_of(const ModelState& m, const Dataset& d, const Triplet& t, double margin) {
    return triplet_loss(forward_head(d.maps(t.query), m), forward_head(d.maps(t.match), m),
                        forward_head(d.maps(t.nonmatch), m), margin);
}

} // namespace

TEST_CASE("triplet loss examples") {
    const Eigen::Vector2d q(1, 0);
    const Eigen::Vector2d n(1 - std::sqrt(0.5), 0);
    CHECK(triplet_loss(q, q, n, 0.1) == 0.0);

    const Eigen::Vector3d a(0, 0, 0);
    const Eigen::Vector3d m(std::sqrt(0.2), 0, 0);
    const Eigen::Vector3d nn(0, std::sqrt(0.25), 0);
    CHECK(triplet_loss(a, m, nn, 0.1) == doctest::Approx(0.025).epsilon(1e-12));
    CHECK(triplet_loss(q, q, q, 0.1) == doctest::Approx(0.05));
    const Eigen::VectorXd q2 = q;
    CHECK_THROWS_AS(triplet_loss(q2, Eigen::VectorXd(Eigen::Vector3d(1, 0, 0)), q2, 0.1), ShapeError);
    CHECK_THROWS_AS(triplet_loss(q, q, q, 0.0), ParameterError);
}

TEST_CASE("triplet loss gradients") {
    const Eigen::Vector2d q(1, 0);
    const auto inactive = triplet_loss_gradients(q, q, Eigen::Vector2d(-1, 0), 0.1);
    CHECK(inactive.d_query.isZero(0));
    CHECK(inactive.d_match.isZero(0));
    CHECK(inactive.d_nonmatch.isZero(0));

    const auto same = triplet_loss_gradients(q, q, q, 0.1);
    CHECK(same.d_match.isZero(0));

    SeededRng rng(4);
    for (int trial = 0; trial < 20; ++trial) {
        std::array<Eigen::VectorXd, 3> v;
        for (auto& x : v) {
            x.resize(5);
            for (int i = 0; i < 5; ++i) x[i] = rng.normal();
        }
        const double margin = 30.0;  // active
        const auto g = triplet_loss_gradients(v[0], v[1], v[2], margin);
        const Eigen::VectorXd* analytic[3] = {&g.d_query, &g.d_match, &g.d_nonmatch};
        for (int which = 0; which < 3; ++which) {
            for (int i = 0; i < 5; ++i) {
                auto up = v, down = v;
                up[which][i] += 1e-6;
                down[which][i] -= 1e-6;
                const double numeric = (triplet_loss(up[0], up[1], up[2], margin) -
                                        triplet_loss(down[0], down[1], down[2], margin)) / 2e-6;
                CHECK((*analytic[which])[i] == doctest::Approx(numeric).epsilon(1e-6));
            }
        }
    }
}

TEST_CASE("mining keeps loss-causing triplets with the hardest non-match") {
    SeededRng data_rng(17);
    const Eigen::Index rows = 50;
    Eigen::MatrixXd desc(rows, 6);
    std::vector<std::int64_t> labels;
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < 6; ++j) desc(i, j) = data_rng.normal();
        desc.row(i).normalize();
        labels.push_back(i % 5);
    }
    SeededRng rng(3);
    const auto triplets = mine_triplets(desc, labels, 400, 0.1, rng);
    CHECK(!triplets.empty());
    CHECK(triplets.size() <= 400);
    for (const auto& t : triplets) {
        CHECK(labels[t.query] == labels[t.match]);
        CHECK(labels[t.query] != labels[t.nonmatch]);
        CHECK(t.query != t.match);
        std::size_t best = 0;
        double best_d = INFINITY;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (labels[i] == labels[t.query]) continue;
            const double d = (desc.row(Eigen::Index(i)) - desc.row(Eigen::Index(t.query))).squaredNorm();
            if (d < best_d) {
                best_d = d;
                best = i;
            }
        }
        CHECK(t.nonmatch == best);
        CHECK(triplet_loss(desc.row(Eigen::Index(t.query)).transpose(), desc.row(Eigen::Index(t.match)).transpose(),
                           desc.row(Eigen::Index(t.nonmatch)).transpose(), 0.1) > 0);
    }

    // With a margin no triplet can satisfy, every sample is retained.
    SeededRng rng2(3);
    CHECK(mine_triplets(desc, labels, 400, 10.0, rng2).size() == 400);
}

TEST_CASE("mining edge cases") {
    SUBCASE("separated classes yield nothing") {
        Eigen::MatrixXd d(4, 2);
        d << 1, 0, 1, 0, 0, 1, 0, 1;
        const std::vector<std::int64_t> labels{0, 0, 1, 1};
        SeededRng rng(1);
        CHECK(mine_triplets(d, labels, 100, 0.1, rng).empty());
    }
    SUBCASE("equal descriptors keep every triplet") {
        const Eigen::MatrixXd d = Eigen::MatrixXd::Constant(4, 3, 1 / std::sqrt(3.0));
        const std::vector<std::int64_t> labels{0, 0, 1, 1};
        SeededRng rng(1);
        const auto t = mine_triplets(d, labels, 25, 0.1, rng);
        CHECK(t.size() == 25);
        // All candidates tie; the lowest index of the other class wins.
        for (const auto& x : t) CHECK(x.nonmatch == (labels[x.query] == 0 ? 2u : 0u));
    }
    SUBCASE("too small splits") {
        SeededRng rng(1);
        const std::vector<std::int64_t> one_class{0, 0, 0};
        CHECK_THROWS_AS(mine_triplets(Eigen::MatrixXd::Ones(3, 2), one_class, 5, 0.1, rng), DataError);
        const std::vector<std::int64_t> singleton{0, 0, 1};
        CHECK_THROWS_AS(mine_triplets(Eigen::MatrixXd::Ones(3, 2), singleton, 5, 0.1, rng), DataError);
    }
}

TEST_CASE("train config json") {
    const TrainConfig d = train_config_from_json(nlohmann::json::object());
    CHECK(d.learning_rate == 1e-3);
    CHECK(d.weight_decay == 5e-4);
    CHECK(d.momentum == 0.9);
    CHECK(d.margin == 0.1);
    CHECK(d.triplets_per_epoch == 5000);
    CHECK(d.accumulation_size == 64);
    CHECK(d.max_epochs == 20);

    const TrainConfig c = train_config_from_json({{"learning_rate", 0.5}, {"seed", 9}});
    CHECK(c.learning_rate == 0.5);
    CHECK(c.seed == 9);
    CHECK(train_config_from_json(train_config_to_json(c)).learning_rate == 0.5);

    CHECK_THROWS_AS(train_config_from_json({{"learning_rte", 0.5}}), FormatError);
    CHECK_THROWS_AS(train_config_from_json({{"momentum", 1.0}}), ParameterError);
    CHECK_THROWS_AS(train_config_from_json({{"margin", "wide"}}), FormatError);
}

TEST_CASE("sgd update rule") {
    ModelState m = ModelState::make(ActivationFamily::SinH, {1});
    const Eigen::VectorXd theta = pack_parameters(m);
    TrainConfig cfg;
    cfg.learning_rate = 0.1;
    cfg.momentum = 0.5;
    cfg.weight_decay = 0.01;
    OptimizerState opt;
    const Eigen::VectorXd g = Eigen::VectorXd::Constant(theta.size(), 0.2);
    sgd_update(m, opt, g, cfg);
    const Eigen::VectorXd v1 = g + 0.01 * theta;
    CHECK(opt.velocity.isApprox(v1));
    const Eigen::VectorXd t1 = theta - 0.1 * v1;
    CHECK(pack_parameters(m).isApprox(t1));
    sgd_update(m, opt, g, cfg);
    const Eigen::VectorXd v2 = 0.5 * v1 + g + 0.01 * t1;
    CHECK(pack_parameters(m).isApprox(t1 - 0.1 * v2));

    SUBCASE("constraints are restored") {
        Eigen::VectorXd big = Eigen::VectorXd::Constant(theta.size(), 1e3);
        OptimizerState fresh;
        sgd_update(m, fresh, big, cfg);
        CHECK(m.streams[0].activation.alpha == kParamFloor);
        CHECK(m.streams[0].power_p == kPowerPMin);
        CHECK_NOTHROW(m.validate());
    }
    SUBCASE("non-finite gradient names the parameter") {
        Eigen::VectorXd bad = g;
        bad[1] = NAN;
        CHECK_THROWS_WITH_AS(sgd_update(m, opt, bad, cfg), doctest::Contains("stream[0].beta"), NumericError);
    }
}

TEST_CASE("single triplet step equals a hand-computed update") {
    SeededRng rng(23);
    const Dataset data = random_dataset(2, 2, 2, rng);
    ModelState m = small_model(rng, 2);
    const ModelState before = m;
    const Triplet t{0, 1, 2};
    const double margin = 4.5;

    // Reference gradient by central differences of the triplet loss.
    const Eigen::VectorXd theta = pack_parameters(before);
    Eigen::VectorXd fd(theta.size());
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
        ModelState up = before, down = before;
        Eigen::VectorXd a = theta, b = theta;
        a[i] += 1e-6;
        b[i] -= 1e-6;
        unpack_parameters(up, a);
        unpack_parameters(down, b);
        fd[i] = (triplet_loss_of(up, data, t, margin) - triplet_loss_of(down, data, t, margin)) / 2e-6;
    }

    TrainConfig cfg;
    cfg.learning_rate = 1e-3;
    cfg.momentum = 0;
    cfg.weight_decay = 0;
    cfg.margin = margin;
    cfg.accumulation_size = 1;
    OptimizerState opt;
    const std::vector<std::size_t> split{0, 1, 2, 3};
    const std::vector<Triplet> one{t};
    CHECK(process_triplets(m, opt, data, split, one, cfg) == 1);
    const Eigen::VectorXd expected = theta - cfg.learning_rate * fd;
    CHECK((pack_parameters(m) - expected).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("gradient accumulation is exact") {
    SeededRng rng(29);
    const Dataset data = random_dataset(4, 4, 3, rng);
    const ModelState start = small_model(rng, 3);
    std::vector<std::size_t> split(16);
    for (std::size_t i = 0; i < 16; ++i) split[i] = i;
    std::vector<Triplet> triplets;
    for (int i = 0; i < 64; ++i) {
        const auto q = rng.uniform_index(16);
        const auto cls = q / 4;
        auto m = cls * 4 + rng.uniform_index(4);
        if (m == q) m = cls * 4 + (q + 1) % 4;
        const auto n = ((cls + 1 + rng.uniform_index(3)) % 4) * 4 + rng.uniform_index(4);
        triplets.push_back({q, m, n});
    }
    TrainConfig cfg;
    cfg.margin = 4.5;
    cfg.learning_rate = 1e-4;
    cfg.weight_decay = 0;
    cfg.momentum = 0;
    cfg.accumulation_size = 64;

    Eigen::VectorXd summed = Eigen::VectorXd::Zero(pack_parameters(start).size());
    for (const auto& t : triplets) {
        const auto step = triplet_step(start, data.maps(t.query), data.maps(t.match), data.maps(t.nonmatch), cfg.margin);
        summed += pack_gradients(start, step.gradients);
    }
    ModelState m = start;
    OptimizerState opt;
    CHECK(process_triplets(m, opt, data, split, triplets, cfg) == 1);
    CHECK(opt.velocity.size() == summed.size());
    CHECK((opt.velocity - summed).cwiseAbs().maxCoeff() <= 1e-10);

    SUBCASE("remainder triggers one more update") {
        ModelState m2 = start;
        OptimizerState o2;
        cfg.accumulation_size = 30;
        CHECK(process_triplets(m2, o2, data, split, triplets, cfg) == 3);
    }
}

TEST_CASE("train_epoch examples") {
    SeededRng rng(37);
    const Dataset data = random_dataset(3, 4, 3, rng);
    const auto split = data.indices(Split::Train);
    REQUIRE(split.size() == 12);

    SUBCASE("null learning rate and decay leave the model bitwise unchanged") {
        ModelState m = small_model(rng, 3);
        const Eigen::VectorXd before = pack_parameters(m);
        TrainConfig cfg;
        cfg.learning_rate = 0;
        cfg.weight_decay = 0;
        cfg.margin = 4.5;
        cfg.triplets_per_epoch = 40;
        cfg.accumulation_size = 8;
        OptimizerState opt;
        SeededRng r(1);
        const EpochSummary s = train_epoch(m, data, split, cfg, opt, r, 1);
        CHECK(s.mined == 40);
        CHECK(s.updates == 5);
        CHECK(pack_parameters(m) == before);
    }
    SUBCASE("a trained epoch changes the model and reports its loss") {
        ModelState m = small_model(rng, 3);
        const Eigen::VectorXd before = pack_parameters(m);
        TrainConfig cfg;
        cfg.margin = 4.5;
        cfg.triplets_per_epoch = 10;
        OptimizerState opt;
        SeededRng r(1);
        const EpochSummary s = train_epoch(m, data, split, cfg, opt, r, 3);
        CHECK(s.epoch == 3);
        CHECK(s.updates == 1);
        CHECK(s.mean_loss > 0);
        CHECK(pack_parameters(m) != before);
        const auto j = epoch_summary_to_json(s);
        CHECK(j.at("mined") == 10);
    }
}

TEST_CASE("separated data stops training after one epoch") {
    std::vector<std::pair<std::int64_t, FeatureMap>> items;
    for (int i = 0; i < 3; ++i) items.emplace_back(0, FeatureMap(1, 1, 2, Eigen::VectorXd{{1.0, 0.0}}));
    for (int i = 0; i < 3; ++i) items.emplace_back(1, FeatureMap(1, 1, 2, Eigen::VectorXd{{0.0, 1.0}}));
    const Dataset data = make_dataset(items);
    const auto split = data.indices(Split::Train);
    const ModelState m = ModelState::make(ActivationFamily::SinH, {2});
    TrainConfig cfg;
    cfg.triplets_per_epoch = 50;
    const TrainResult r = train(m, data, split, cfg);
    REQUIRE(r.trace.size() == 1);
    CHECK(r.trace[0].mined == 0);
    CHECK(r.trace[0].updates == 0);
    CHECK(pack_parameters(r.model) == pack_parameters(m));

    cfg.max_epochs = 0;
    const TrainResult none = train(m, data, split, cfg);
    CHECK(none.trace.empty());
    CHECK(pack_parameters(none.model) == pack_parameters(m));
}

TEST_CASE("training is deterministic") {
    SeededRng rng(41);
    const Dataset data = random_dataset(3, 4, 3, rng);
    const auto split = data.indices(Split::Train);
    const ModelState m = small_model(rng, 3);
    TrainConfig cfg;
    cfg.margin = 1.0;
    cfg.triplets_per_epoch = 30;
    cfg.accumulation_size = 7;
    cfg.max_epochs = 3;
    const TrainResult a = train(m, data, split, cfg);
    const TrainResult b = train(m, data, split, cfg);
    REQUIRE(a.trace.size() == b.trace.size());
    for (std::size_t i = 0; i < a.trace.size(); ++i) {
        CHECK(a.trace[i].mean_loss == b.trace[i].mean_loss);
        CHECK(a.trace[i].mined == b.trace[i].mined);
    }
    CHECK(pack_parameters(a.model) == pack_parameters(b.model));
}
