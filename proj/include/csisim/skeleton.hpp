#pragma once

#include <array>
#include <vector>

#include "csisim/perception.hpp"

namespace csisim {
namespace skeleton {

inline constexpr int kPoints = 18;
inline constexpr int kSlices = 150;
inline constexpr int kGridSize = 144;
inline constexpr int kEdgeDrop = 12;          // guard subcarriers dropped per band edge
inline constexpr int kRowsPerBlock = 75;      // rows kept per phase/amplitude block
inline constexpr int kTimeSamples = 3;

// Dense 150 x 144 x 144 tensor, slice-major.
struct EncodedTensor {
    std::vector<Eigen::MatrixXd> slices; // kSlices matrices of kGridSize x kGridSize
};

// Two 18 x 18 channels of normalized image coordinates; channel x first.
struct PoseAdjacency {
    Eigen::MatrixXd x{Eigen::MatrixXd::Zero(kPoints, kPoints)};
    Eigen::MatrixXd y{Eigen::MatrixXd::Zero(kPoints, kPoints)};
};

using SkeletonPoints = std::array<Vec2, kPoints>;

// Bilinear interpolation on a unit-spaced source grid; (r, c) in source
// coordinates. Exact at grid nodes, the mean of the four corners at cell
// midpoints, and bounded by the corner values.
double bilinear_interpolate(const Eigen::MatrixXd& src, double r, double c);

// Index map of the 256 -> 75 per-block row reduction (drop kEdgeDrop rows at
// each band edge, then evenly spaced selection).
std::vector<int> encoder_row_index_map(int n_subcarriers);

// [H'_ph; H'_am] (512 x 3) -> edge drop + downsample (150 x 3) -> stack 3
// time samples (150 x 3 x 3) -> bilinear upsample each slice to 144 x 144.
// Inputs must be 3-antenna, 256-subcarrier feature matrices.
EncodedTensor encode_features(const std::array<perception::FeatureMatrix, kTimeSamples>& samples);

// Mean over each 144 x 144 slice; the regression features of the baseline.
Eigen::VectorXd pooled_summary(const EncodedTensor& tensor);

struct TrainingSample {
    Eigen::VectorXd features; // pooled summary, kSlices
    PoseAdjacency target;
};

struct PredictorModel {
    std::string kind = "linear_baseline";
    Eigen::MatrixXd weights;  // (2*18*18) x (kSlices + 1), last column is the bias
    double training_mse = 0.0;       // squared-norm loss averaged over samples
    double target_variance = 0.0;    // mean-predictor loss on the same data
    double ridge_lambda = 0.0;
    int samples = 0;

    bool trained() const { return weights.size() > 0; }
};

// Ridge least squares from pooled features to the flattened adjacency.
PredictorModel fit_baseline(const std::vector<TrainingSample>& dataset, double ridge_lambda = 1e-6);

PoseAdjacency predict(const PredictorModel& model, const EncodedTensor& tensor);
PoseAdjacency predict_pooled(const PredictorModel& model, const Eigen::VectorXd& features);

// Squared L2 norm of the difference (sum over all 648 entries, not averaged).
double mse_loss(const PoseAdjacency& a, const PoseAdjacency& b);

// X_p = x(p, p), Y_p = y(p, p).
SkeletonPoints pair_skeleton(const PoseAdjacency& v);

// Inverse of pair_skeleton on the diagonal; off-diagonals hold coordinate
// midpoints so the matrix stays inside [0, 1].
PoseAdjacency embed_points(const SkeletonPoints& pts);

// Deterministic 18-point stick figure anchored at a normalized user
// position; the synthetic training target.
SkeletonPoints template_skeleton(double user_x_norm, double user_y_norm);

} // namespace skeleton
} // namespace csisim
