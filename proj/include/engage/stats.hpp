#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "engage/ingest.hpp"

namespace engage {

struct RankDeficient : EngageError {
    using EngageError::EngageError;
};
struct SingleCluster : EngageError {
    using EngageError::EngageError;
};

struct OlsFit {
    Eigen::VectorXd beta;
    Eigen::VectorXd residuals;
    Eigen::MatrixXd xtx_inverse;  // bread of the sandwich
    Eigen::MatrixXd design;       // the X actually fit
    int n = 0;
    int k = 0;  // columns of X
};

OlsFit ols(const Eigen::VectorXd& y, const Eigen::MatrixXd& X);

struct ClusterRobustResult {
    Eigen::MatrixXd vcov;
    std::vector<double> se;  // sqrt of diagonal
    int df = 0;
    int n_clusters_1 = 0;
    int n_clusters_2 = 0;          // 0 when one-way
    bool truncated_negative = false;  // two-way PSD repair applied
    std::vector<std::string> warnings;
};

// One-way sandwich with correction G/(G-1)*(n-1)/(n-k); two-way via
// inclusion-exclusion V1 + V2 - V12 over the intersection clustering,
// each piece with its own correction. df = min(G1, G2) - 1.
ClusterRobustResult cluster_robust_vcov(
    const OlsFit& fit, const std::vector<std::string>& cluster_ids_1,
    const std::vector<std::string>* cluster_ids_2 = nullptr);

struct GroupCompareResult {
    double mean0 = 0.0;
    double mean1 = 0.0;
    double diff = 0.0;  // mean1 - mean0
    double se = 0.0;
    double t = 0.0;
    int df = 0;
    double p = 1.0;
    double cohens_d = 0.0;
    double pooled_sd = 0.0;
    int n0 = 0;
    int n1 = 0;
    int n_clusters = 0;
};

GroupCompareResult group_compare(const std::vector<double>& values,
                                 const std::vector<int>& group_flag,
                                 const std::vector<std::string>& cluster_ids);

struct ProportionCI {
    double proportion = 0.0;
    double lo = 0.0;
    double hi = 0.0;
    double se = 0.0;
    int df = 0;
};

ProportionCI proportion_ci(const std::vector<double>& indicator_values,
                           const std::vector<std::string>& cluster_ids,
                           double level = 0.95);

// Student-t helpers (two-sided p, upper quantile), exposed for reuse.
double student_t_p_two_sided(double t, int df);
double student_t_quantile(double prob, int df);

}  // namespace engage
