#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "engage/ingest.hpp"

namespace engage {

struct FeatureMatrix {
    std::vector<std::string> columns;
    std::vector<std::string> row_ids;  // session ids, parallel to rows
    Eigen::MatrixXd values;            // rows x columns

    int rows() const { return static_cast<int>(values.rows()); }
    int cols() const { return static_cast<int>(values.cols()); }
    int column_index(const std::string& name) const;
};

struct ColumnMismatch : EngageError {
    using EngageError::EngageError;
};
struct NegativeValueInLogColumn : EngageError {
    using EngageError::EngageError;
};
struct DegenerateMatrix : EngageError {
    using EngageError::EngageError;
};
struct KTooLarge : EngageError {
    using EngageError::EngageError;
};
struct RangeTooShort : EngageError {
    using EngageError::EngageError;
};
struct LengthMismatch : EngageError {
    using EngageError::EngageError;
};

// log1p on the named skewed columns, then per-column z-scores using the
// population standard deviation. Constant columns become all zeros and are
// reported in warnings rather than dividing by zero.
struct PreprocessResult {
    FeatureMatrix matrix;
    std::vector<std::string> warnings;
    Eigen::VectorXd means;  // post-log means, one per column
    Eigen::VectorXd sds;    // population sds (1.0 recorded for constants)
};

PreprocessResult preprocess(const FeatureMatrix& input,
                            const std::vector<std::string>& log_columns);

struct PCAModel {
    std::vector<std::string> columns;     // input column order
    Eigen::VectorXd means;                // centering applied before projection
    Eigen::VectorXd scales;               // per-column divisor (1.0 when input
                                          // is already standardized)
    Eigen::MatrixXd components;           // cols x n_components, unit columns
    Eigen::VectorXd explained_variance;   // eigenvalues, descending
    Eigen::VectorXd explained_ratio;      // eigenvalue / total variance
};

// Exactly one of n_components / variance_target must be set. With a
// variance target the smallest m with cumulative ratio >= target is kept.
PCAModel fit_pca(const FeatureMatrix& input, std::optional<int> n_components,
                 std::optional<double> variance_target);

FeatureMatrix transform_pca(const PCAModel& model, const FeatureMatrix& input);

std::string pca_model_to_json(const PCAModel& model);
PCAModel pca_model_from_json(const std::string& text);

struct KMeansResult {
    Eigen::MatrixXd centroids;  // k x dims
    std::vector<int> labels;    // one per row
    double inertia = 0.0;
    int iterations = 0;
    std::vector<double> inertia_history;  // inertia after each Lloyd update
};

KMeansResult kmeans_fit(const Eigen::MatrixXd& data, int k, std::uint64_t seed,
                        int max_iterations = 300);

// Discrete-second-difference elbow over an inertia curve evaluated at
// k = k_min .. k_max. Ties pick the smaller k.
struct ElbowResult {
    int chosen_k = 0;
    std::vector<int> ks;
    std::vector<double> inertias;
};

int elbow_choose(const std::vector<double>& inertias);  // returns index offset
ElbowResult elbow_select(const Eigen::MatrixXd& data, int k_min, int k_max,
                         std::uint64_t seed);

double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b);

// Re-run k-means under seeds 0..runs-1, compare every run to the
// lowest-inertia run (ties break to the smallest seed), summarize ARI.
struct StabilityResult {
    int reference_seed = 0;
    std::vector<double> ari;  // one per run in seed order, reference included
    double mean_ari = 0.0;
    double sd_ari = 0.0;  // population sd
};

StabilityResult stability(const Eigen::MatrixXd& data, int k, int runs);

// Per-cluster mean of each standardized feature column plus member counts.
// Feeds the cluster-profile heatmap and human labeling of clusters.
struct CentroidSummary {
    std::vector<std::string> columns;
    Eigen::MatrixXd means;       // k x columns
    std::vector<int> sizes;      // k
};

CentroidSummary centroid_summary(const FeatureMatrix& standardized,
                                 const std::vector<int>& labels, int k);

}  // namespace engage
