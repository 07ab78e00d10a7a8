#include <doctest.h>

#include "csisim/rng.hpp"
#include "csisim/skeleton.hpp"

using namespace csisim;
using namespace csisim::skeleton;

namespace {

std::array<perception::FeatureMatrix, 3> constant_features(double v) {
    std::array<perception::FeatureMatrix, 3> out;
    for (auto& fm : out) {
        fm.phase = Eigen::MatrixXd::Constant(3, 256, v);
        fm.magnitude = Eigen::MatrixXd::Constant(3, 256, v);
    }
    return out;
}

PoseAdjacency random_pose(Rng& rng) {
    PoseAdjacency v;
    for (int i = 0; i < kPoints; ++i)
        for (int j = 0; j < kPoints; ++j) {
            v.x(i, j) = rng.uniform();
            v.y(i, j) = rng.uniform();
        }
    return v;
}

} // namespace

TEST_SUITE("skeleton") {

TEST_CASE("bilinear interpolation: corners, midpoints, bounds") {
    Eigen::MatrixXd src(3, 3);
    src << 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0;
    // Exact at grid nodes.
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
            CHECK(bilinear_interpolate(src, r, c) == doctest::Approx(src(r, c)).epsilon(1e-15));
    // Cell midpoint is the mean of the four corners.
    CHECK(bilinear_interpolate(src, 0.5, 0.5) ==
          doctest::Approx(0.25 * (1.0 + 2.0 + 4.0 + 5.0)));
    CHECK(bilinear_interpolate(src, 1.5, 1.5) ==
          doctest::Approx(0.25 * (5.0 + 6.0 + 8.0 + 9.0)));

    Rng rng(8);
    for (int trial = 0; trial < 200; ++trial) {
        const double r = rng.uniform(0.0, 2.0);
        const double c = rng.uniform(0.0, 2.0);
        const int r1 = std::min(1, static_cast<int>(r));
        const int c1 = std::min(1, static_cast<int>(c));
        const double lo = std::min({src(r1, c1), src(r1 + 1, c1), src(r1, c1 + 1), src(r1 + 1, c1 + 1)});
        const double hi = std::max({src(r1, c1), src(r1 + 1, c1), src(r1, c1 + 1), src(r1 + 1, c1 + 1)});
        const double v = bilinear_interpolate(src, r, c);
        CHECK(v >= lo - 1e-12);
        CHECK(v <= hi + 1e-12);
    }
}

TEST_CASE("encoder is shape-exact and constant-preserving") {
    const auto tensor = encode_features(constant_features(0.731));
    CHECK(tensor.slices.size() == kSlices);
    for (const auto& slice : tensor.slices) {
        CHECK(slice.rows() == kGridSize);
        CHECK(slice.cols() == kGridSize);
        CHECK((slice.array() - 0.731).abs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("encoder keeps band edges out and spans the usable band") {
    const auto idx = encoder_row_index_map(256);
    REQUIRE(idx.size() == kRowsPerBlock);
    CHECK(idx.front() == kEdgeDrop);
    CHECK(idx.back() == 256 - kEdgeDrop - 1);
    for (std::size_t i = 1; i < idx.size(); ++i) CHECK(idx[i] > idx[i - 1]);
}

TEST_CASE("encoder rejects wrong shapes") {
    std::array<perception::FeatureMatrix, 3> bad = constant_features(1.0);
    bad[1].phase = Eigen::MatrixXd::Zero(3, 128);
    CHECK_THROWS_AS((void)encode_features(bad), std::invalid_argument);
}

TEST_CASE("encoder output stays within the corner bounds of its slice source") {
    Rng rng(77);
    std::array<perception::FeatureMatrix, 3> in;
    for (auto& fm : in) {
        fm.phase = Eigen::MatrixXd::NullaryExpr(3, 256, [&rng] { return rng.uniform(-1.0, 1.0); });
        fm.magnitude =
            Eigen::MatrixXd::NullaryExpr(3, 256, [&rng] { return rng.uniform(0.0, 2.0); });
    }
    const auto tensor = encode_features(in);
    const auto rows = encoder_row_index_map(256);
    for (int s = 0; s < kSlices; ++s) {
        const bool amp = s >= kRowsPerBlock;
        const int sub = rows[static_cast<std::size_t>(amp ? s - kRowsPerBlock : s)];
        double lo = 1e300, hi = -1e300;
        for (int t = 0; t < 3; ++t) {
            const auto& block = amp ? in[static_cast<std::size_t>(t)].magnitude
                                    : in[static_cast<std::size_t>(t)].phase;
            for (int a = 0; a < 3; ++a) {
                lo = std::min(lo, block(a, sub));
                hi = std::max(hi, block(a, sub));
            }
        }
        CHECK(tensor.slices[static_cast<std::size_t>(s)].minCoeff() >= lo - 1e-12);
        CHECK(tensor.slices[static_cast<std::size_t>(s)].maxCoeff() <= hi + 1e-12);
    }
}

TEST_CASE("ridge fit recovers a noiseless linear map") {
    Rng rng(4);
    Eigen::MatrixXd w = Eigen::MatrixXd::NullaryExpr(
        2 * kPoints * kPoints, kSlices, [&rng] { return 0.01 * rng.normal(); });
    std::vector<TrainingSample> data;
    for (int i = 0; i < 40; ++i) {
        TrainingSample s;
        s.features = Eigen::VectorXd::NullaryExpr(kSlices, [&rng] { return rng.uniform(); });
        Eigen::VectorXd y = w * s.features;
        y.array() += 0.4; // keep targets inside [0,1] so the clamp is inert
        int k = 0;
        for (int r = 0; r < kPoints; ++r)
            for (int c = 0; c < kPoints; ++c) s.target.x(r, c) = y(k++);
        for (int r = 0; r < kPoints; ++r)
            for (int c = 0; c < kPoints; ++c) s.target.y(r, c) = y(k++);
        data.push_back(std::move(s));
    }
    const auto model = fit_baseline(data, 1e-10);
    CHECK(model.training_mse <= 1e-8);
    for (const auto& s : data)
        CHECK(mse_loss(predict_pooled(model, s.features), s.target) <= 1e-7);
}

TEST_CASE("repeated single sample is reproduced exactly") {
    Rng rng(5);
    TrainingSample s;
    s.features = Eigen::VectorXd::NullaryExpr(kSlices, [&rng] { return rng.uniform(); });
    s.target = random_pose(rng);
    const std::vector<TrainingSample> data = {s, s, s};
    const auto model = fit_baseline(data, 1e-12);
    CHECK(mse_loss(predict_pooled(model, s.features), s.target) < 1e-10);
}

TEST_CASE("fit rejects an empty or single-sample dataset") {
    CHECK_THROWS_AS((void)fit_baseline({}, 1e-6), std::invalid_argument);
    std::vector<TrainingSample> one(1);
    one[0].features = Eigen::VectorXd::Zero(kSlices);
    CHECK_THROWS_AS((void)fit_baseline(one, 1e-6), std::invalid_argument);
}

TEST_CASE("zero weights predict the bias only") {
    PredictorModel model;
    model.weights = Eigen::MatrixXd::Zero(2 * kPoints * kPoints, kSlices + 1);
    model.weights.col(kSlices).setConstant(0.25);
    const auto pose = predict_pooled(model, Eigen::VectorXd::Zero(kSlices));
    CHECK((pose.x.array() - 0.25).abs().maxCoeff() < 1e-15);
    CHECK((pose.y.array() - 0.25).abs().maxCoeff() < 1e-15);
}

TEST_CASE("prediction is Lipschitz in the input (clamp contracts)") {
    Rng rng(6);
    PredictorModel model;
    model.weights = Eigen::MatrixXd::NullaryExpr(2 * kPoints * kPoints, kSlices + 1,
                                                 [&rng] { return 0.05 * rng.normal(); });
    const Eigen::VectorXd x = Eigen::VectorXd::NullaryExpr(kSlices, [&rng] { return rng.uniform(); });
    const Eigen::VectorXd delta =
        Eigen::VectorXd::NullaryExpr(kSlices, [&rng] { return 0.01 * rng.normal(); });
    const auto a = predict_pooled(model, x);
    const auto b = predict_pooled(model, x + delta);
    const double diff = std::sqrt(mse_loss(a, b));
    CHECK(diff <= model.weights.leftCols(kSlices).norm() * delta.norm() + 1e-12);
}

TEST_CASE("mse loss arithmetic") {
    PoseAdjacency a, b;
    CHECK(mse_loss(a, a) == 0.0);
    b.x.setConstant(0.1);
    b.y.setConstant(0.1);
    CHECK(mse_loss(a, b) == doctest::Approx(648 * 0.01));
    Rng rng(9);
    const auto p = random_pose(rng);
    const auto q = random_pose(rng);
    CHECK(mse_loss(p, q) == doctest::Approx(mse_loss(q, p)));
}

TEST_CASE("diagonal pairing reads only the diagonal") {
    PoseAdjacency v;
    for (int p = 0; p < kPoints; ++p) {
        v.x(p, p) = (p + 1) / 18.0;
        v.y(p, p) = (p + 1) / 18.0;
    }
    const auto pts = pair_skeleton(v);
    for (int p = 0; p < kPoints; ++p) {
        CHECK(pts[static_cast<std::size_t>(p)].x == doctest::Approx((p + 1) / 18.0));
        CHECK(pts[static_cast<std::size_t>(p)].y == doctest::Approx((p + 1) / 18.0));
    }

    // Scrambling off-diagonal entries changes nothing.
    PoseAdjacency w = v;
    Rng rng(10);
    for (int i = 0; i < kPoints; ++i)
        for (int j = 0; j < kPoints; ++j)
            if (i != j) {
                w.x(i, j) = rng.uniform();
                w.y(i, j) = rng.uniform();
            }
    const auto pts2 = pair_skeleton(w);
    for (int p = 0; p < kPoints; ++p) {
        CHECK(pts2[static_cast<std::size_t>(p)].x == pts[static_cast<std::size_t>(p)].x);
        CHECK(pts2[static_cast<std::size_t>(p)].y == pts[static_cast<std::size_t>(p)].y);
    }
}

TEST_CASE("embed then pair is the identity on point sets") {
    Rng rng(11);
    SkeletonPoints pts;
    for (auto& p : pts) p = {rng.uniform(), rng.uniform()};
    const auto rt = pair_skeleton(embed_points(pts));
    for (std::size_t p = 0; p < pts.size(); ++p) {
        CHECK(rt[p].x == pts[p].x);
        CHECK(rt[p].y == pts[p].y);
    }
    // And the embedding stays in the unit box.
    const auto v = embed_points(pts);
    CHECK(v.x.minCoeff() >= 0.0);
    CHECK(v.x.maxCoeff() <= 1.0);
    CHECK(v.y.minCoeff() >= 0.0);
    CHECK(v.y.maxCoeff() <= 1.0);
}

TEST_CASE("template skeleton is deterministic, bounded, and tracks the user") {
    const auto a = template_skeleton(0.2, 0.7);
    const auto b = template_skeleton(0.2, 0.7);
    const auto c = template_skeleton(0.8, 0.7);
    for (std::size_t p = 0; p < a.size(); ++p) {
        CHECK(a[p].x == b[p].x);
        CHECK(a[p].y == b[p].y);
        CHECK(a[p].x >= 0.0);
        CHECK(a[p].x <= 1.0);
        CHECK(c[p].x > a[p].x); // moves right with the user
    }
}

} // TEST_SUITE
