#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>

#include "relpcanet/ranknet.hpp"
#include "test_support.hpp"

using namespace relpcanet;
using namespace relpcanet::ranknet;
using test_support::make_ids;

namespace {

relarm::FeatureSet features_from(const Matrix& m) {
    relarm::FeatureSet f;
    f.entity_ids = make_ids(m.rows());
    f.vectors = m;
    return f;
}

// Forward-path-only mean loss; the finite-difference oracle perturbs model
// parameters and calls this, never touching the backprop code.
double batch_loss(const RankModel& m, const PairBatch& batch, const Matrix& features) {
    double loss = 0;
    for (const auto& p : batch) {
        const double ri = score(m, features.row(p.i));
        const double rj = score(m, features.row(p.j));
        loss += pair_loss(p.t, pair_probability(ri, rj));
    }
    return loss / static_cast<double>(batch.size());
}

void zero_params(RankModel& m) {
    for (auto& w : m.weights) std::fill(w.data().begin(), w.data().end(), 0.0);
    for (auto& b : m.biases) std::fill(b.begin(), b.end(), 0.0);
}

// Strictly ordered one-feature set with pure 1/0 order targets.
struct SeparableCase {
    relarm::FeatureSet features;
    target::TargetMatrix targets;
};

SeparableCase separable_case(std::size_t m) {
    SeparableCase c;
    Matrix f(m, 1);
    for (std::size_t i = 0; i < m; ++i) f(i, 0) = static_cast<double>(i + 1) / static_cast<double>(m);
    c.features = features_from(f);
    c.targets.entity_ids = c.features.entity_ids;
    c.targets.mode = target::Mode::Static;
    c.targets.t = Matrix(m, m);
    for (std::size_t i = 0; i < m; ++i) {
        c.targets.t(i, i) = 0.5;
        for (std::size_t j = i + 1; j < m; ++j) {
            c.targets.t(i, j) = 0.0;  // higher index = higher feature = better
            c.targets.t(j, i) = 1.0;
        }
    }
    return c;
}

}  // namespace

TEST_CASE("init_model: deterministic per seed, shapes chain to the ranking layer") {
    NetworkConfig cfg;
    cfg.input_dim = 3;
    cfg.seed = 9;
    const RankModel a = init_model(cfg);
    const RankModel b = init_model(cfg);
    REQUIRE(a.weights.size() == 4);
    CHECK(a.weights[0].rows() == 10);
    CHECK(a.weights[0].cols() == 3);
    CHECK(a.weights[1].rows() == 10);
    CHECK(a.weights[1].cols() == 10);
    CHECK(a.weights[2].rows() == 10);
    CHECK(a.weights[2].cols() == 10);
    CHECK(a.weights[3].rows() == 1);
    CHECK(a.weights[3].cols() == 10);
    for (std::size_t l = 0; l < 4; ++l) {
        CHECK(a.weights[l] == b.weights[l]);
        for (double bias : a.biases[l]) CHECK(bias == 0.0);
        const double bound = 1.0 / std::sqrt(static_cast<double>(a.weights[l].cols()));
        for (double w : a.weights[l].data()) CHECK(std::abs(w) <= bound);
    }
    cfg.seed = 10;
    const RankModel c = init_model(cfg);
    CHECK(c.weights[0] != a.weights[0]);
}

TEST_CASE("score: zero parameters give a zero rank for any input") {
    NetworkConfig cfg;
    cfg.input_dim = 4;
    RankModel m = init_model(cfg);
    zero_params(m);
    const std::vector<double> x{0.3, -2.0, 5.0, 0.0};
    CHECK(score(m, x) == 0.0);
}

TEST_CASE("score: 1-1-1 network matches the sigmoid chain by hand") {
    NetworkConfig cfg;
    cfg.input_dim = 1;
    cfg.hidden_layers = {1};
    RankModel m = init_model(cfg);
    m.weights[0](0, 0) = 1.5;
    m.biases[0][0] = -0.2;
    m.weights[1](0, 0) = 2.0;
    m.biases[1][0] = 0.1;
    const std::vector<double> x{0.4};
    const double hidden = 1.0 / (1.0 + std::exp(-(1.5 * 0.4 - 0.2)));
    CHECK(score(m, x) == Catch::Approx(2.0 * hidden + 0.1).epsilon(1e-15));
}

TEST_CASE("score: dimension mismatch is rejected") {
    NetworkConfig cfg;
    cfg.input_dim = 2;
    const RankModel m = init_model(cfg);
    const std::vector<double> x{1.0, 2.0, 3.0};
    CHECK_THROWS_AS(score(m, x), Error);
}

TEST_CASE("pair_probability: midpoint, ln 3 offset, complement identity") {
    CHECK(pair_probability(1.7, 1.7) == 0.5);
    CHECK(pair_probability(std::log(3.0), 0.0) == Catch::Approx(0.75).epsilon(1e-15));
    RandomSource rng(3);
    for (int t = 0; t < 50; ++t) {
        const double a = rng.next_double(-20, 20), b = rng.next_double(-20, 20);
        CHECK(pair_probability(a, b) + pair_probability(b, a) == Catch::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("pair_loss: fair coin, perfect prediction, confident miss") {
    CHECK(pair_loss(0.5, 0.5) == Catch::Approx(std::log(2.0)).epsilon(1e-15));
    CHECK(pair_loss(1.0, 1.0) <= 1e-11);  // clamped at 1 - 1e-12
    CHECK(pair_loss(1.0, 0.5) == Catch::Approx(std::log(2.0)).epsilon(1e-15));
    CHECK(pair_loss(0.3, 0.9) >= 0.0);
}

TEST_CASE("pair_loss: minimized over P at P = t") {
    for (double t : {0.1, 0.25, 0.4, 0.5, 0.6, 0.75, 0.9}) {
        double lo = 1e-6, hi = 1.0 - 1e-6;
        for (int it = 0; it < 200; ++it) {  // ternary search on a convex function
            const double m1 = lo + (hi - lo) / 3.0, m2 = hi - (hi - lo) / 3.0;
            if (pair_loss(t, m1) < pair_loss(t, m2)) hi = m2;
            else lo = m1;
        }
        CHECK((lo + hi) / 2.0 == Catch::Approx(t).margin(1e-6));
        CHECK(pair_loss(t, t) <= pair_loss(t, t + 0.05));
        CHECK(pair_loss(t, t) <= pair_loss(t, t - 0.05));
    }
}

TEST_CASE("gradients: zero at a stationary point where P equals t") {
    NetworkConfig cfg;
    cfg.input_dim = 2;
    RankModel m = init_model(cfg);
    zero_params(m);  // all ranks 0, every P = 0.5
    const auto f = features_from(Matrix::from_rows({{0.1, 0.2}, {0.7, 0.3}, {0.4, 0.9}}));
    PairBatch batch{{0, 1, 0.5}, {0, 2, 0.5}, {1, 2, 0.5}};
    const ParamGrads g = gradients(m, batch, f);
    for (const auto& w : g.weights)
        for (double v : w.data()) CHECK(std::abs(v) < 1e-10);
    for (const auto& b : g.biases)
        for (double v : b) CHECK(std::abs(v) < 1e-10);
}

TEST_CASE("gradients: linear network matches (P - t)(a_i - a_j) by hand") {
    NetworkConfig cfg;
    cfg.input_dim = 3;
    cfg.hidden_layers = {};  // ranking layer only
    cfg.seed = 21;
    const RankModel m = init_model(cfg);
    REQUIRE(m.weights.size() == 1);
    const auto f = features_from(Matrix::from_rows({{0.9, 0.1, 0.4}, {0.2, 0.8, 0.3}}));
    const double t = 0.65;
    PairBatch batch{{0, 1, t}};
    const ParamGrads g = gradients(m, batch, f);

    const double ri = score(m, f.vectors.row(0));
    const double rj = score(m, f.vectors.row(1));
    const double p = pair_probability(ri, rj);
    for (std::size_t c = 0; c < 3; ++c)
        CHECK(g.weights[0](0, c) ==
              Catch::Approx((p - t) * (f.vectors(0, c) - f.vectors(1, c))).epsilon(1e-12));
    CHECK(std::abs(g.biases[0][0]) < 1e-15);  // bias cancels in the rank difference
}

TEST_CASE("gradients: analytic equals central finite differences across shapes and seeds") {
    struct Shape {
        std::size_t input;
        std::vector<std::size_t> hidden;
    };
    const std::vector<Shape> shapes{{3, {}}, {2, {4}}, {3, {5, 3}}};
    const double h = 1e-5;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        for (const auto& shape : shapes) {
            NetworkConfig cfg;
            cfg.input_dim = shape.input;
            cfg.hidden_layers = shape.hidden;
            cfg.seed = seed;
            RankModel m = init_model(cfg);

            RandomSource rng(seed * 100 + shape.input);
            Matrix fm(6, shape.input);
            for (auto& v : fm.data()) v = rng.next_double();
            const auto f = features_from(fm);
            PairBatch batch;
            const double tvals[] = {0.0, 0.35, 0.45, 0.55, 0.65, 1.0};
            int ti = 0;
            for (std::size_t i = 0; i < 6; ++i)
                for (std::size_t j = i + 1; j < 6; ++j) batch.push_back({i, j, tvals[ti++ % 6]});

            const ParamGrads g = gradients(m, batch, f);
            auto check_param = [&](double& param, double analytic) {
                const double orig = param;
                param = orig + h;
                const long double up = test_support::ld_batch_loss(m, batch, fm);
                param = orig - h;
                const long double down = test_support::ld_batch_loss(m, batch, fm);
                param = orig;
                const double fd = static_cast<double>((up - down) / (2.0L * h));
                if (std::abs(analytic) > 1e-8)
                    CHECK(std::abs(fd - analytic) <= 1e-4 * std::abs(analytic));
            };
            for (std::size_t l = 0; l < m.layer_count(); ++l) {
                for (std::size_t idx = 0; idx < m.weights[l].data().size(); ++idx)
                    check_param(m.weights[l].data()[idx], g.weights[l].data()[idx]);
                for (std::size_t idx = 0; idx < m.biases[l].size(); ++idx)
                    check_param(m.biases[l][idx], g.biases[l][idx]);
            }
        }
    }
}

TEST_CASE("gradients: swapping the pair and complementing t leaves the loss unchanged") {
    NetworkConfig cfg;
    cfg.input_dim = 2;
    cfg.hidden_layers = {4};
    cfg.seed = 31;
    const RankModel m = init_model(cfg);
    RandomSource rng(33);
    Matrix fm(4, 2);
    for (auto& v : fm.data()) v = rng.next_double();
    for (double t : {0.0, 0.35, 0.5, 0.6, 1.0}) {
        PairBatch fwd{{0, 1, t}, {2, 3, t}};
        PairBatch rev{{1, 0, 1.0 - t}, {3, 2, 1.0 - t}};
        CHECK(batch_loss(m, fwd, fm) == Catch::Approx(batch_loss(m, rev, fm)).epsilon(1e-12));
    }
}

TEST_CASE("train: all-0.5 targets at a zero start stay at ln 2 with zero gradients") {
    const std::size_t m = 5;
    SeparableCase c = separable_case(m);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j) c.targets.t(i, j) = 0.5;
    c.targets.mode = target::Mode::Dynamic;  // 0.5 is only admissible there
    NetworkConfig cfg;
    cfg.input_dim = 1;
    cfg.epochs = 50;
    RankModel m0 = init_model(cfg);
    zero_params(m0);
    const TrainResult res = train(m0, c.features, c.targets, cfg);
    for (double loss : res.loss_history)
        CHECK(loss == Catch::Approx(std::log(2.0)).epsilon(1e-12));
    const ParamGrads g = gradients(res.model, make_pair_batch(c.targets), c.features);
    for (const auto& w : g.weights)
        for (double v : w.data()) CHECK(std::abs(v) < 1e-10);
}

TEST_CASE("train: separable order reaches full pairwise accuracy and tiny loss") {
    const SeparableCase c = separable_case(20);
    NetworkConfig cfg;
    cfg.input_dim = 1;
    cfg.seed = 5;
    cfg.epochs = 500;
    const TrainResult res = train(init_model(cfg), c.features, c.targets, cfg);
    CHECK(res.loss_history.back() < 0.05);
    CHECK(res.loss_history.back() < res.loss_history.front());

    const std::vector<double> scores = score_all(res.model, c.features);
    int correct = 0, total = 0;
    for (std::size_t i = 0; i < 20; ++i)
        for (std::size_t j = i + 1; j < 20; ++j) {
            ++total;
            if (scores[j] > scores[i]) ++correct;  // higher index must win
        }
    CHECK(correct == total);
    std::vector<double> truth(20);
    for (std::size_t i = 0; i < 20; ++i) truth[i] = static_cast<double>(i);
    CHECK(test_support::kendall_tau(scores, truth) == 1.0);
}

TEST_CASE("train: deterministic loss history for identical seed and data") {
    const SeparableCase c = separable_case(10);
    NetworkConfig cfg;
    cfg.input_dim = 1;
    cfg.seed = 8;
    cfg.epochs = 60;
    const TrainResult a = train(init_model(cfg), c.features, c.targets, cfg);
    const TrainResult b = train(init_model(cfg), c.features, c.targets, cfg);
    CHECK(a.loss_history == b.loss_history);
    for (std::size_t l = 0; l < a.model.layer_count(); ++l)
        CHECK(a.model.weights[l] == b.model.weights[l]);
}

TEST_CASE("train: invalid targets are rejected") {
    const SeparableCase c = separable_case(4);
    target::TargetMatrix bad = c.targets;
    bad.t(0, 1) = 0.7;
    NetworkConfig cfg;
    cfg.input_dim = 1;
    try {
        train(init_model(cfg), c.features, bad, cfg);
        FAIL("expected InvalidInput");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::InvalidInput);
    }
}

TEST_CASE("train: misaligned entity ids are rejected") {
    const SeparableCase c = separable_case(4);
    relarm::FeatureSet f = c.features;
    f.entity_ids[0] = "other";
    NetworkConfig cfg;
    cfg.input_dim = 1;
    CHECK_THROWS_AS(train(init_model(cfg), f, c.targets, cfg), Error);
}

TEST_CASE("score_all: duplicated feature rows score identically") {
    NetworkConfig cfg;
    cfg.input_dim = 2;
    cfg.seed = 77;
    const RankModel m = init_model(cfg);
    const auto f = features_from(Matrix::from_rows({{0.25, 0.5}, {0.25, 0.5}, {0.9, 0.1}}));
    const std::vector<double> s = score_all(m, f);
    CHECK(s[0] == s[1]);
    CHECK(s.size() == 3);

    const auto single = features_from(Matrix::from_rows({{0.25, 0.5}}));
    const std::vector<double> one = score_all(m, single);
    REQUIRE(one.size() == 1);
    CHECK(one[0] == s[0]);
}

TEST_CASE("checkpoint: save/load reproduces scores bit-exactly") {
    NetworkConfig cfg;
    cfg.input_dim = 3;
    cfg.seed = 13;
    const SeparableCase c = separable_case(6);
    RandomSource rng(14);
    Matrix fm(6, 3);
    for (auto& v : fm.data()) v = rng.next_double();
    const auto f = features_from(fm);

    RankModel m = init_model(cfg);
    const auto path = std::filesystem::temp_directory_path() / "rankmodel_roundtrip.json";
    save_model(m, cfg, path.string());
    const auto [loaded, loaded_cfg] = load_model(path.string());
    std::filesystem::remove(path);

    CHECK(loaded_cfg.hidden_layers == cfg.hidden_layers);
    CHECK(loaded_cfg.seed == cfg.seed);
    for (std::size_t i = 0; i < 6; ++i)
        CHECK(score(loaded, f.vectors.row(i)) == score(m, f.vectors.row(i)));
}
