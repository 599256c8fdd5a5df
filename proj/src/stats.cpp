#include "engage/stats.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include <boost/math/distributions/students_t.hpp>

#include <Eigen/Eigenvalues>

namespace engage {

OlsFit ols(const Eigen::VectorXd& y, const Eigen::MatrixXd& X) {
    if (y.size() != X.rows()) throw RankDeficient("y and X row counts differ");
    if (X.rows() < X.cols()) throw RankDeficient("more columns than rows");
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    if (qr.rank() < X.cols())
        throw RankDeficient("design matrix is rank deficient (rank " +
                            std::to_string(qr.rank()) + " of " +
                            std::to_string(X.cols()) + ")");
    OlsFit fit;
    fit.beta = qr.solve(y);
    fit.residuals = y - X * fit.beta;
    fit.design = X;
    fit.n = static_cast<int>(X.rows());
    fit.k = static_cast<int>(X.cols());
    fit.xtx_inverse = (X.transpose() * X).inverse();
    return fit;
}

namespace {

// Meat of the sandwich for one clustering: sum over clusters of the outer
// product of cluster-summed scores X_g' u_g.
Eigen::MatrixXd cluster_meat(const OlsFit& fit, const std::vector<int>& cluster_of,
                             int n_clusters) {
    const int k = fit.k;
    Eigen::MatrixXd scores = Eigen::MatrixXd::Zero(n_clusters, k);
    for (int i = 0; i < fit.n; ++i)
        scores.row(cluster_of[i]) += fit.residuals[i] * fit.design.row(i);
    return scores.transpose() * scores;
}

std::vector<int> compress_ids(const std::vector<std::string>& ids, int* n_out) {
    std::map<std::string, int> index;
    std::vector<int> out(ids.size());
    for (size_t i = 0; i < ids.size(); ++i) {
        auto [it, inserted] = index.emplace(ids[i], static_cast<int>(index.size()));
        out[i] = it->second;
    }
    *n_out = static_cast<int>(index.size());
    return out;
}

Eigen::MatrixXd one_way_vcov(const OlsFit& fit, const std::vector<int>& cluster_of,
                             int g) {
    double n = fit.n, k = fit.k;
    double c = (g / (g - 1.0)) * ((n - 1.0) / (n - k));
    Eigen::MatrixXd meat = cluster_meat(fit, cluster_of, g);
    return c * fit.xtx_inverse * meat * fit.xtx_inverse;
}

}  // namespace

ClusterRobustResult cluster_robust_vcov(const OlsFit& fit,
                                        const std::vector<std::string>& cluster_ids_1,
                                        const std::vector<std::string>* cluster_ids_2) {
    if (static_cast<int>(cluster_ids_1.size()) != fit.n)
        throw SingleCluster("cluster ids do not cover the rows");
    ClusterRobustResult out;

    int g1 = 0;
    std::vector<int> c1 = compress_ids(cluster_ids_1, &g1);
    if (g1 < 2) throw SingleCluster("need at least two clusters");
    out.n_clusters_1 = g1;

    if (!cluster_ids_2) {
        out.vcov = one_way_vcov(fit, c1, g1);
        out.df = g1 - 1;
    } else {
        if (static_cast<int>(cluster_ids_2->size()) != fit.n)
            throw SingleCluster("second cluster ids do not cover the rows");
        int g2 = 0;
        std::vector<int> c2 = compress_ids(*cluster_ids_2, &g2);
        if (g2 < 2) throw SingleCluster("need at least two clusters in dimension 2");
        out.n_clusters_2 = g2;

        std::vector<std::string> inter_ids(fit.n);
        for (int i = 0; i < fit.n; ++i)
            inter_ids[i] = std::to_string(c1[i]) + "\x1f" + std::to_string(c2[i]);
        int g12 = 0;
        std::vector<int> c12 = compress_ids(inter_ids, &g12);

        Eigen::MatrixXd v = one_way_vcov(fit, c1, g1) + one_way_vcov(fit, c2, g2) -
                            one_way_vcov(fit, c12, g12);

        // CGM matrices can lose positive semidefiniteness; clamp the
        // spectrum at zero when that happens.
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(v);
        if (es.eigenvalues().minCoeff() < 0.0) {
            Eigen::VectorXd clamped = es.eigenvalues().cwiseMax(0.0);
            v = es.eigenvectors() * clamped.asDiagonal() * es.eigenvectors().transpose();
            out.truncated_negative = true;
            out.warnings.push_back(
                "two-way variance matrix had negative eigenvalues; truncated at zero");
        }
        out.vcov = v;
        out.df = std::min(g1, g2) - 1;
    }

    out.se.resize(fit.k);
    for (int j = 0; j < fit.k; ++j) out.se[j] = std::sqrt(std::max(0.0, out.vcov(j, j)));
    return out;
}

double student_t_p_two_sided(double t, int df) {
    boost::math::students_t dist(static_cast<double>(df));
    return 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
}

double student_t_quantile(double prob, int df) {
    boost::math::students_t dist(static_cast<double>(df));
    return boost::math::quantile(dist, prob);
}

GroupCompareResult group_compare(const std::vector<double>& values,
                                 const std::vector<int>& group_flag,
                                 const std::vector<std::string>& cluster_ids) {
    const size_t n = values.size();
    if (group_flag.size() != n || cluster_ids.size() != n)
        throw SingleCluster("values, flags, and cluster ids must align");

    GroupCompareResult out;
    double sum0 = 0.0, sum1 = 0.0;
    for (size_t i = 0; i < n; ++i) {
        if (group_flag[i] == 0) {
            sum0 += values[i];
            ++out.n0;
        } else {
            sum1 += values[i];
            ++out.n1;
        }
    }
    if (out.n0 == 0 || out.n1 == 0)
        throw SingleCluster("both groups must be non-empty");
    out.mean0 = sum0 / out.n0;
    out.mean1 = sum1 / out.n1;

    Eigen::VectorXd y(n);
    Eigen::MatrixXd X(n, 2);
    for (size_t i = 0; i < n; ++i) {
        y[static_cast<int>(i)] = values[i];
        X(static_cast<int>(i), 0) = 1.0;
        X(static_cast<int>(i), 1) = group_flag[i] ? 1.0 : 0.0;
    }
    OlsFit fit = ols(y, X);
    ClusterRobustResult robust = cluster_robust_vcov(fit, cluster_ids);
    out.diff = fit.beta[1];
    out.se = robust.se[1];
    out.df = robust.df;
    out.n_clusters = robust.n_clusters_1;
    out.t = (out.se > 0.0) ? out.diff / out.se : 0.0;
    out.p = (out.se > 0.0) ? student_t_p_two_sided(out.t, out.df) : (out.diff == 0.0 ? 1.0 : 0.0);

    // Cohen's d with the classic pooled sample sd, clusters ignored.
    double ss0 = 0.0, ss1 = 0.0;
    for (size_t i = 0; i < n; ++i) {
        double dev = values[i] - (group_flag[i] ? out.mean1 : out.mean0);
        (group_flag[i] ? ss1 : ss0) += dev * dev;
    }
    if (out.n0 + out.n1 > 2) {
        out.pooled_sd = std::sqrt((ss0 + ss1) / (out.n0 + out.n1 - 2));
        out.cohens_d = (out.pooled_sd > 0.0) ? out.diff / out.pooled_sd : 0.0;
    }
    return out;
}

ProportionCI proportion_ci(const std::vector<double>& indicator_values,
                           const std::vector<std::string>& cluster_ids,
                           double level) {
    const size_t n = indicator_values.size();
    if (cluster_ids.size() != n)
        throw SingleCluster("values and cluster ids must align");
    if (n == 0) throw SingleCluster("no observations");
    if (level <= 0.0 || level >= 1.0)
        throw SingleCluster("confidence level must lie in (0, 1)");

    Eigen::VectorXd y(n);
    Eigen::MatrixXd X = Eigen::MatrixXd::Ones(n, 1);
    for (size_t i = 0; i < n; ++i) y[static_cast<int>(i)] = indicator_values[i];
    OlsFit fit = ols(y, X);
    ClusterRobustResult robust = cluster_robust_vcov(fit, cluster_ids);

    ProportionCI out;
    out.proportion = fit.beta[0];
    out.se = robust.se[0];
    out.df = robust.df;
    double q = student_t_quantile(0.5 + level / 2.0, out.df);
    out.lo = std::clamp(out.proportion - q * out.se, 0.0, 1.0);
    out.hi = std::clamp(out.proportion + q * out.se, 0.0, 1.0);
    return out;
}

}  // namespace engage
