#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <numeric>

#include "mannerist/errors.hpp"
#include "mannerist/ocsvm.hpp"
#include "support.hpp"

using namespace mannerist;

namespace {

double max_abs_diff(const std::vector<double>& a, const Eigen::VectorXd& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b(static_cast<Eigen::Index>(i))));
    return m;
}

CorrelationVector as_vector(const Matrix& m, Eigen::Index row) {
    CorrelationVector v;
    v.values.assign(m.row(row).data(), m.row(row).data() + m.cols());
    v.feature_order_hash = feature_order_hash();
    return v;
}

} // namespace

TEST_CASE("rbf_kernel") {
    const std::vector<double> x{1.0, 2.0, 3.0}, y{2.0, 2.0, 4.0}, far{1e6, 0.0, 0.0};
    CHECK(rbf_kernel(x, x, 7.0) == 1.0);
    CHECK(rbf_kernel(x, y, 0.5) == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
    CHECK(rbf_kernel(x, far, 100.0) > 0.0);
    CHECK_THROWS_AS(rbf_kernel(x, std::vector<double>{1.0}, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(rbf_kernel(x, y, 0.0), std::invalid_argument);
}

TEST_CASE("kernel cache returns identical rows under any budget") {
    Rng rng(1);
    const Matrix x = testing::gaussian_matrix(rng, 40, 5);
    KernelCache unlimited(x, 0.3, 1u << 30);
    KernelCache tiny(x, 0.3, 3 * 40 * sizeof(double));
    KernelCache none(x, 0.3, 0);
    CHECK(tiny.capacity_rows() == 3);
    for (int pass = 0; pass < 3; ++pass) {
        for (std::size_t i = 0; i < 40; i += 1 + pass) {
            const auto a = unlimited.row(i);
            CHECK(*a == *tiny.row(i));
            CHECK(*a == *none.row(i));
            CHECK((*a)[i] == 1.0);
        }
    }
    CHECK(unlimited.misses() == 40);
    CHECK(unlimited.hits() > 0);
    const auto held = tiny.row(0);
    for (std::size_t i = 1; i < 40; ++i) tiny.row(i);
    CHECK((*held)[0] == 1.0);
}

TEST_CASE("train: a single point") {
    Matrix x(1, 3);
    x << 0.1, 0.2, 0.3;
    const auto model = train(x, 0.5, 0.5);
    REQUIRE(model.alphas.size() == 1);
    CHECK(model.alphas[0] == doctest::Approx(1.0));
    CHECK(model.rho == doctest::Approx(1.0));
    CHECK(model.decision(std::vector<double>{0.1, 0.2, 0.3}) == doctest::Approx(0.0));
    CHECK(model.threshold == 0.0);
}

TEST_CASE("train: square corners get equal weight") {
    Matrix x(4, 2);
    x << 0, 0, 1, 0, 0, 1, 1, 1;
    KernelCache cache(x, 0.7, 1u << 20);
    SolverOptions opts;
    opts.tolerance = 1e-12;
    const auto sol = solve_dual(cache, 0.5, opts);
    for (const double a : sol.alphas) CHECK(a == doctest::Approx(0.25).epsilon(1e-8));
}

TEST_CASE("solve_dual matches the projected-gradient oracle") {
    Rng rng(21);
    for (int trial = 0; trial < 6; ++trial) {
        const auto n = 10 + static_cast<std::size_t>(rng.below(41));
        const Matrix x = testing::gaussian_matrix(rng, n, 6);
        const double gamma = 0.05 + 0.1 * rng.uniform();
        const double nu = 0.1 + 0.4 * rng.uniform();
        KernelCache cache(x, gamma, 1u << 24);
        SolverOptions opts;
        opts.tolerance = 1e-10;
        const auto sol = solve_dual(cache, nu, opts);
        const auto oracle = testing::oracle_one_class(testing::oracle_gram(x, gamma), nu);
        REQUIRE(oracle.violation <= 1e-10);
        CHECK(max_abs_diff(sol.alphas, oracle.alphas) <= 1e-7);
        CHECK(sol.rho == doctest::Approx(oracle.rho).epsilon(1e-7));
        const double total = std::accumulate(sol.alphas.begin(), sol.alphas.end(), 0.0);
        CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
        const double c = 1.0 / (nu * static_cast<double>(n));
        for (const double a : sol.alphas) {
            CHECK(a >= 0.0);
            CHECK(a <= c);
        }
    }
}

TEST_CASE("nu bounds outliers and support vectors") {
    Rng rng(8);
    const Matrix x = testing::gaussian_matrix(rng, 300, 8);
    for (const double nu : {0.05, 0.1, 0.3}) {
        const auto model = train(x, 0.05, nu);
        const auto g = decision_values(model, x);
        const auto outliers = std::count_if(g.begin(), g.end(), [](double v) { return v < -1e-6; });
        CHECK(static_cast<double>(outliers) / 300.0 <= nu + 1e-9);
        CHECK(static_cast<double>(model.alphas.size()) / 300.0 >= nu - 1e-9);
    }
}

TEST_CASE("training is deterministic and independent of cache size and row order") {
    Rng rng(6);
    const Matrix x = testing::gaussian_matrix(rng, 60, 4);
    SolverOptions small;
    small.cache_bytes = 5 * 60 * sizeof(double);
    const auto a = train(x, 0.2, 0.2);
    const auto b = train(x, 0.2, 0.2);
    const auto c = train(x, 0.2, 0.2, small);
    CHECK(a.alphas == b.alphas);
    CHECK(a.rho == b.rho);
    CHECK(a.alphas == c.alphas);

    const auto perm = rng.permutation(60);
    Matrix shuffled(60, 4);
    for (std::size_t i = 0; i < 60; ++i) shuffled.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(perm[i]));
    const auto d = train(shuffled, 0.2, 0.2);
    for (Eigen::Index i = 0; i < 60; ++i) {
        const std::vector<double> p(x.row(i).data(), x.row(i).data() + 4);
        CHECK(d.decision(p) == doctest::Approx(a.decision(p)).epsilon(1e-6));
    }
}

TEST_CASE("decision at support vectors and far away") {
    Rng rng(12);
    const Matrix x = testing::gaussian_matrix(rng, 30, 3);
    const auto model = train(x, 0.5, 0.3);
    const double c = 1.0 / (0.3 * 30.0);
    for (std::size_t i = 0; i < model.alphas.size(); ++i) {
        if (model.alphas[i] > 1e-9 && model.alphas[i] < c - 1e-9) {
            const auto row = model.support_vectors.row(static_cast<Eigen::Index>(i));
            CHECK(std::abs(model.decision(std::vector<double>(row.data(), row.data() + 3))) <= 1e-6);
        }
    }
    CHECK(model.decision(std::vector<double>{1e3, 1e3, 1e3}) == doctest::Approx(-model.rho));
}

TEST_CASE("solve_dual reports non-convergence") {
    Rng rng(3);
    const Matrix x = testing::gaussian_matrix(rng, 40, 3);
    KernelCache cache(x, 0.5, 1u << 20);
    SolverOptions opts;
    opts.max_iterations = 2;
    opts.tolerance = 1e-14;
    try {
        solve_dual(cache, 0.1, opts);
        FAIL("expected ConvergenceError");
    } catch (const ConvergenceError& e) {
        CHECK(e.violation() > 0.0);
    }
}

TEST_CASE("calibrate_threshold") {
    std::vector<double> s(100);
    std::iota(s.begin(), s.end(), 1.0);
    CHECK(calibrate_threshold(s, 0.95) == 6.0);
    CHECK(acceptance_rate(s, 6.0) == doctest::Approx(0.95));
    CHECK(calibrate_threshold(s, 0.99) == 2.0);
    const std::vector<double> same(17, 0.25);
    CHECK(calibrate_threshold(same, 0.9) == 0.25);
    CHECK(acceptance_rate(same, 0.25) == 1.0);
    CHECK_THROWS_AS(calibrate_threshold(std::vector<double>{}, 0.9), std::invalid_argument);
    CHECK_THROWS_AS(calibrate_threshold(s, 1.0), std::invalid_argument);

    Rng rng(17);
    for (int trial = 0; trial < 50; ++trial) {
        const auto n = 20 + static_cast<std::size_t>(rng.below(500));
        std::vector<double> scores(n);
        for (auto& v : scores) v = rng.normal();
        for (const double target : {0.95, 0.99}) {
            const double acc = acceptance_rate(scores, calibrate_threshold(scores, target));
            CHECK(acc >= target - 1e-12);
            CHECK(acc <= target + 1.0 / static_cast<double>(n) + 1e-12);
        }
    }
}

TEST_CASE("score checks the feature order") {
    Rng rng(4);
    const Matrix x = testing::gaussian_matrix(rng, 20, kPairCount, 0.1);
    auto model = train(x, 0.01, 0.2);
    auto v = as_vector(x, 0);
    CHECK(score(model, v) == doctest::Approx(model.decision(v.values)));
    v.feature_order_hash = "fnv1a64:0000000000000000";
    CHECK_THROWS_AS(score(model, v), IncompatibleError);
}

TEST_CASE("score projects onto the model's subset") {
    Rng rng(5);
    const Matrix full = testing::gaussian_matrix(rng, 25, kPairCount, 0.1);
    const std::vector<std::size_t> subset{3, 40, 41, 200, 495};
    Matrix sub(25, 5);
    for (Eigen::Index i = 0; i < 25; ++i) {
        for (std::size_t c = 0; c < subset.size(); ++c) sub(i, static_cast<Eigen::Index>(c)) = full(i, static_cast<Eigen::Index>(subset[c]));
    }
    auto model = train(sub, 0.5, 0.2);
    model.feature_subset = subset;
    const auto v = as_vector(full, 3);
    const std::vector<double> p(sub.row(3).data(), sub.row(3).data() + 5);
    CHECK(score(model, v) == model.decision(p));
}

TEST_CASE("grid search") {
    Rng rng(31);
    const Matrix real = testing::gaussian_matrix(rng, 60, 5);

    SUBCASE("one cell") {
        const HyperGrid grid{{0.25}, {0.1}};
        const auto r = grid_search(real, nullptr, grid, 0.95);
        CHECK(r.gamma == 0.25);
        CHECK(r.nu == 0.1);
        CHECK_FALSE(r.used_decoys);
        REQUIRE(r.cells.size() == 1);
        CHECK(acceptance_rate(decision_values(r.model, real), r.model.threshold) >= 0.95);
    }
    SUBCASE("decoys identical to the real set") {
        const HyperGrid grid{{0.01, 0.1, 1.0}, {0.05, 0.2}};
        GridSearchOptions opts;
        opts.validation_fraction = 0.0;
        const auto r = grid_search(real, &real, grid, 0.95, opts);
        CHECK(r.used_decoys);
        for (const auto& cell : r.cells) {
            CHECK(cell.true_negative_rate == doctest::Approx(1.0 - cell.true_positive_rate));
            CHECK(cell.objective == doctest::Approx(0.5));
        }
        CHECK(r.gamma == 0.01);
        CHECK(r.nu == 0.05);
    }
    SUBCASE("separable decoys are found") {
        Matrix decoys = testing::gaussian_matrix(rng, 60, 5);
        decoys.array() += 4.0;
        const auto r = grid_search(real, &decoys, HyperGrid::defaults(), 0.95);
        CHECK(r.objective > 0.9);
        const auto g = decision_values(r.model, decoys);
        CHECK(acceptance_rate(g, r.model.threshold) < 0.1);
    }
    SUBCASE("same seed, same answer") {
        Matrix decoys = testing::gaussian_matrix(rng, 40, 5);
        GridSearchOptions a, b;
        a.seed = b.seed = 77;
        b.jobs = 3;
        const auto r1 = grid_search(real, &decoys, HyperGrid::defaults(), 0.95, a);
        const auto r2 = grid_search(real, &decoys, HyperGrid::defaults(), 0.95, b);
        CHECK(r1.gamma == r2.gamma);
        CHECK(r1.nu == r2.nu);
        CHECK(r1.model.alphas == r2.model.alphas);
    }
    SUBCASE("bad grid") {
        CHECK_THROWS_AS(grid_search(real, nullptr, HyperGrid{{}, {0.1}}, 0.95), std::invalid_argument);
        CHECK_THROWS_AS(grid_search(real, nullptr, HyperGrid{{1.0}, {1.5}}, 0.95), std::invalid_argument);
    }
}

TEST_CASE("model files") {
    Rng rng(40);
    const Matrix x = testing::gaussian_matrix(rng, 30, kPairCount, 0.05);
    auto model = train(x, 0.02, 0.1);
    model.threshold = calibrate_threshold(decision_values(model, x), 0.99);
    model.feature_order_hash = feature_order_hash();
    model.metadata.persona_label = "persona \"a\"";
    model.metadata.family = "combined";
    model.metadata.calibration_target = 0.99;
    const auto text = save_model(model);
    const auto back = load_model(text);
    CHECK(back.threshold == model.threshold);
    CHECK(back.rho == model.rho);
    CHECK(back.metadata.persona_label == model.metadata.persona_label);
    CHECK(save_model(back) == text);
    for (int k = 0; k < 100; ++k) {
        std::vector<double> p(kPairCount);
        for (auto& v : p) v = 0.05 * rng.normal();
        CHECK(std::abs(back.decision(p) - model.decision(p)) <= 1e-12);
    }

    CHECK_THROWS_AS(load_model(text.substr(0, text.size() / 2)), SchemaError);
    CHECK_THROWS_AS(load_model("{}"), SchemaError);
    auto versioned = text;
    versioned.replace(versioned.find("mannerist-model/1"), 17, "mannerist-model/9");
    CHECK_THROWS_AS(load_model(versioned), IncompatibleError);

    auto altered = text;
    altered.replace(altered.find("fnv1a64:") + 8, 4, "0000");
    const auto foreign = load_model(altered);
    CHECK_THROWS_AS(score(foreign, as_vector(x, 0)), IncompatibleError);
}
