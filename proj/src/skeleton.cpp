#include "csisim/skeleton.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Cholesky>

namespace csisim {
namespace skeleton {

double bilinear_interpolate(const Eigen::MatrixXd& src, double r, double c) {
    const auto rows = src.rows();
    const auto cols = src.cols();
    auto cell = [](double v, Eigen::Index n) {
        auto lo = static_cast<Eigen::Index>(std::floor(v));
        lo = std::clamp<Eigen::Index>(lo, 0, n - 2);
        return lo;
    };
    const Eigen::Index r1 = cell(r, rows), c1 = cell(c, cols);
    const double wr = r - static_cast<double>(r1);
    const double wc = c - static_cast<double>(c1);
    return src(r1, c1) * (1.0 - wr) * (1.0 - wc) + src(r1 + 1, c1) * wr * (1.0 - wc) +
           src(r1, c1 + 1) * (1.0 - wr) * wc + src(r1 + 1, c1 + 1) * wr * wc;
}

std::vector<int> encoder_row_index_map(int n_subcarriers) {
    const int usable = n_subcarriers - 2 * kEdgeDrop;
    if (usable < kRowsPerBlock)
        throw std::invalid_argument("encoder: too few subcarriers after edge drop");
    std::vector<int> idx(kRowsPerBlock);
    for (int j = 0; j < kRowsPerBlock; ++j) {
        // Evenly spaced over the usable band, endpoints included.
        const double pos = static_cast<double>(j) * (usable - 1) / (kRowsPerBlock - 1);
        idx[static_cast<std::size_t>(j)] = kEdgeDrop + static_cast<int>(std::llround(pos));
    }
    return idx;
}

EncodedTensor encode_features(const std::array<perception::FeatureMatrix, kTimeSamples>& samples) {
    constexpr int kAntennas = 3;
    constexpr int kSubcarriers = 256;
    for (const auto& fm : samples) {
        if (fm.phase.rows() != kAntennas || fm.phase.cols() != kSubcarriers ||
            fm.magnitude.rows() != kAntennas || fm.magnitude.cols() != kSubcarriers)
            throw std::invalid_argument("encode_features: expected 3-antenna, 256-subcarrier features");
    }

    const std::vector<int> rows = encoder_row_index_map(kSubcarriers);

    // 150 x 3 x 3 stack: per slice a (antennas x time) source grid.
    EncodedTensor out;
    out.slices.reserve(kSlices);
    for (int s = 0; s < kSlices; ++s) {
        const bool amplitude_block = s >= kRowsPerBlock;
        const int subcarrier = rows[static_cast<std::size_t>(amplitude_block ? s - kRowsPerBlock : s)];
        Eigen::MatrixXd src(kAntennas, kTimeSamples);
        for (int t = 0; t < kTimeSamples; ++t) {
            const auto& fm = samples[static_cast<std::size_t>(t)];
            const Eigen::MatrixXd& block = amplitude_block ? fm.magnitude : fm.phase;
            for (int a = 0; a < kAntennas; ++a) src(a, t) = block(a, subcarrier);
        }

        Eigen::MatrixXd slice(kGridSize, kGridSize);
        const double scale = static_cast<double>(src.rows() - 1) / (kGridSize - 1);
        for (int i = 0; i < kGridSize; ++i) {
            const double r = i * scale;
            for (int j = 0; j < kGridSize; ++j) slice(i, j) = bilinear_interpolate(src, r, j * scale);
        }
        out.slices.push_back(std::move(slice));
    }
    return out;
}

Eigen::VectorXd pooled_summary(const EncodedTensor& tensor) {
    if (static_cast<int>(tensor.slices.size()) != kSlices)
        throw std::invalid_argument("pooled_summary: tensor must have 150 slices");
    Eigen::VectorXd v(kSlices);
    for (int s = 0; s < kSlices; ++s) v(s) = tensor.slices[static_cast<std::size_t>(s)].mean();
    return v;
}

namespace {

Eigen::VectorXd flatten(const PoseAdjacency& v) {
    Eigen::VectorXd out(2 * kPoints * kPoints);
    int k = 0;
    for (int i = 0; i < kPoints; ++i)
        for (int j = 0; j < kPoints; ++j) out(k++) = v.x(i, j);
    for (int i = 0; i < kPoints; ++i)
        for (int j = 0; j < kPoints; ++j) out(k++) = v.y(i, j);
    return out;
}

PoseAdjacency unflatten(const Eigen::VectorXd& f) {
    PoseAdjacency v;
    int k = 0;
    for (int i = 0; i < kPoints; ++i)
        for (int j = 0; j < kPoints; ++j) v.x(i, j) = f(k++);
    for (int i = 0; i < kPoints; ++i)
        for (int j = 0; j < kPoints; ++j) v.y(i, j) = f(k++);
    return v;
}

} // namespace

PredictorModel fit_baseline(const std::vector<TrainingSample>& dataset, double ridge_lambda) {
    if (dataset.size() < 2)
        throw std::invalid_argument("fit_baseline: need at least 2 training pairs");
    const int n = static_cast<int>(dataset.size());
    const int d = kSlices + 1;
    const int out_dim = 2 * kPoints * kPoints;

    Eigen::MatrixXd a(n, d);
    Eigen::MatrixXd y(n, out_dim);
    for (int i = 0; i < n; ++i) {
        const auto& s = dataset[static_cast<std::size_t>(i)];
        if (s.features.size() != kSlices)
            throw std::invalid_argument("fit_baseline: feature size mismatch");
        a.row(i).head(kSlices) = s.features.transpose();
        a(i, kSlices) = 1.0;
        y.row(i) = flatten(s.target).transpose();
    }

    Eigen::MatrixXd gram = a.transpose() * a;
    gram.diagonal().array() += ridge_lambda;
    const Eigen::MatrixXd coef = gram.ldlt().solve(a.transpose() * y); // d x out_dim

    PredictorModel model;
    model.weights = coef.transpose();
    model.ridge_lambda = ridge_lambda;
    model.samples = n;

    const Eigen::MatrixXd resid = a * coef - y;
    model.training_mse = resid.rowwise().squaredNorm().mean();
    const Eigen::RowVectorXd mean = y.colwise().mean();
    model.target_variance = (y.rowwise() - mean).rowwise().squaredNorm().mean();
    return model;
}

PoseAdjacency predict_pooled(const PredictorModel& model, const Eigen::VectorXd& features) {
    if (!model.trained()) throw std::invalid_argument("predict: model not trained");
    if (features.size() != kSlices) throw std::invalid_argument("predict: feature size mismatch");
    Eigen::VectorXd x(kSlices + 1);
    x.head(kSlices) = features;
    x(kSlices) = 1.0;
    Eigen::VectorXd out = model.weights * x;
    out = out.cwiseMax(0.0).cwiseMin(1.0);
    return unflatten(out);
}

PoseAdjacency predict(const PredictorModel& model, const EncodedTensor& tensor) {
    return predict_pooled(model, pooled_summary(tensor));
}

double mse_loss(const PoseAdjacency& a, const PoseAdjacency& b) {
    if (a.x.rows() != b.x.rows() || a.y.rows() != b.y.rows())
        throw std::invalid_argument("mse_loss: shape mismatch");
    return (a.x - b.x).squaredNorm() + (a.y - b.y).squaredNorm();
}

SkeletonPoints pair_skeleton(const PoseAdjacency& v) {
    SkeletonPoints pts;
    for (int p = 0; p < kPoints; ++p) pts[static_cast<std::size_t>(p)] = {v.x(p, p), v.y(p, p)};
    return pts;
}

PoseAdjacency embed_points(const SkeletonPoints& pts) {
    PoseAdjacency v;
    for (int i = 0; i < kPoints; ++i) {
        for (int j = 0; j < kPoints; ++j) {
            v.x(i, j) = 0.5 * (pts[static_cast<std::size_t>(i)].x + pts[static_cast<std::size_t>(j)].x);
            v.y(i, j) = 0.5 * (pts[static_cast<std::size_t>(i)].y + pts[static_cast<std::size_t>(j)].y);
        }
    }
    return v;
}

SkeletonPoints template_skeleton(double user_x_norm, double user_y_norm) {
    // COCO-18 layout, local units roughly within [-0.12, 0.12] x [-0.3, 0.3].
    static constexpr std::array<Vec2, kPoints> base = {{
        {0.00, 0.30},   // nose
        {0.00, 0.22},   // neck
        {0.08, 0.22},   // right shoulder
        {0.11, 0.10},   // right elbow
        {0.12, -0.02},  // right wrist
        {-0.08, 0.22},  // left shoulder
        {-0.11, 0.10},  // left elbow
        {-0.12, -0.02}, // left wrist
        {0.05, -0.02},  // right hip
        {0.06, -0.16},  // right knee
        {0.06, -0.30},  // right ankle
        {-0.05, -0.02}, // left hip
        {-0.06, -0.16}, // left knee
        {-0.06, -0.30}, // left ankle
        {0.02, 0.32},   // right eye
        {-0.02, 0.32},  // left eye
        {0.04, 0.30},   // right ear
        {-0.04, 0.30},  // left ear
    }};
    const double cx = 0.2 + 0.6 * std::clamp(user_x_norm, 0.0, 1.0);
    const double cy = 0.35 + 0.3 * std::clamp(user_y_norm, 0.0, 1.0);
    SkeletonPoints pts;
    for (std::size_t p = 0; p < base.size(); ++p)
        pts[p] = {std::clamp(cx + base[p].x, 0.0, 1.0), std::clamp(cy + base[p].y, 0.0, 1.0)};
    return pts;
}

} // namespace skeleton
} // namespace csisim
