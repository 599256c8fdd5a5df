#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <string>
#include <vector>

#include "engage/rng.hpp"
#include "engage/stats.hpp"

using namespace engage;

namespace {

// Normal-equations solve with partial-pivot Gaussian elimination, no Eigen.
std::vector<double> gauss_solve_normal_equations(
    const std::vector<std::vector<double>>& X, const std::vector<double>& y) {
    const size_t n = X.size(), k = X[0].size();
    std::vector<std::vector<double>> a(k, std::vector<double>(k + 1, 0.0));
    for (size_t p = 0; p < k; ++p) {
        for (size_t q = 0; q < k; ++q)
            for (size_t i = 0; i < n; ++i) a[p][q] += X[i][p] * X[i][q];
        for (size_t i = 0; i < n; ++i) a[p][k] += X[i][p] * y[i];
    }
    for (size_t col = 0; col < k; ++col) {
        size_t pivot = col;
        for (size_t r = col + 1; r < k; ++r)
            if (std::fabs(a[r][col]) > std::fabs(a[pivot][col])) pivot = r;
        std::swap(a[col], a[pivot]);
        for (size_t r = col + 1; r < k; ++r) {
            double f = a[r][col] / a[col][col];
            for (size_t q = col; q <= k; ++q) a[r][q] -= f * a[col][q];
        }
    }
    std::vector<double> beta(k);
    for (size_t col = k; col-- > 0;) {
        double v = a[col][k];
        for (size_t q = col + 1; q < k; ++q) v -= a[col][q] * beta[q];
        beta[col] = v / a[col][col];
    }
    return beta;
}

struct SixRowFixture {
    Eigen::VectorXd y;
    Eigen::MatrixXd X;
    std::vector<std::string> clusters;

    SixRowFixture() {
        y.resize(6);
        y << 1.0, 2.0, 1.5, 4.0, 4.5, 6.5;
        X.resize(6, 2);
        for (int i = 0; i < 6; ++i) {
            X(i, 0) = 1.0;
            X(i, 1) = static_cast<double>(i);
        }
        clusters = {"c0", "c0", "c0", "c1", "c1", "c1"};
    }
};

std::vector<std::string> padded_row_ids(int n) {
    std::vector<std::string> ids;
    for (int i = 0; i < n; ++i) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "r%04d", i);
        ids.emplace_back(buf);
    }
    return ids;
}

}  // namespace

TEST_CASE("ols exact lines and constants") {
    Eigen::MatrixXd X(4, 2);
    Eigen::VectorXd y(4);
    for (int i = 0; i < 4; ++i) {
        X(i, 0) = 1.0;
        X(i, 1) = i;
        y[i] = 2.0 * i;
    }
    OlsFit fit = ols(y, X);
    CHECK(fit.beta[0] == doctest::Approx(0.0).scale(1).epsilon(1e-12));
    CHECK(fit.beta[1] == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(fit.residuals.cwiseAbs().maxCoeff() < 1e-12);

    y.setConstant(3.5);
    OlsFit flat = ols(y, X);
    CHECK(flat.beta[0] == doctest::Approx(3.5).epsilon(1e-12));
    CHECK(flat.beta[1] == doctest::Approx(0.0).scale(1).epsilon(1e-12));
}

TEST_CASE("ols agrees with a normal-equations elimination oracle") {
    Rng rng(77);
    const int n = 100, k = 3;
    std::vector<std::vector<double>> Xv(n, std::vector<double>(k));
    std::vector<double> yv(n);
    Eigen::MatrixXd X(n, k);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
        Xv[i][0] = 1.0;
        Xv[i][1] = rng.normal();
        Xv[i][2] = rng.normal(2.0, 3.0);
        yv[i] = 1.5 + 0.5 * Xv[i][1] - 2.0 * Xv[i][2] + rng.normal();
        for (int j = 0; j < k; ++j) X(i, j) = Xv[i][j];
        y[i] = yv[i];
    }
    OlsFit fit = ols(y, X);
    std::vector<double> oracle = gauss_solve_normal_equations(Xv, yv);
    for (int j = 0; j < k; ++j)
        CHECK(fit.beta[j] == doctest::Approx(oracle[j]).epsilon(1e-8));
}

TEST_CASE("ols rejects rank-deficient designs") {
    Eigen::MatrixXd X(5, 2);
    Eigen::VectorXd y(5);
    for (int i = 0; i < 5; ++i) {
        X(i, 0) = 1.0;
        X(i, 1) = 2.0;  // collinear with the intercept
        y[i] = i;
    }
    CHECK_THROWS_AS(ols(y, X), RankDeficient);
    Eigen::MatrixXd wide(2, 3);
    wide.setRandom();
    CHECK_THROWS_AS(ols(y.head(2), wide), RankDeficient);
}

TEST_CASE("six-row sandwich matches the hand evaluation") {
    SixRowFixture f;
    OlsFit fit = ols(f.y, f.X);
    CHECK(fit.beta[0] == doctest::Approx(4.0 / 7.0).epsilon(1e-12));
    CHECK(fit.beta[1] == doctest::Approx(15.0 / 14.0).epsilon(1e-12));

    ClusterRobustResult r = cluster_robust_vcov(fit, f.clusters);
    // Sandwich evaluated by hand: scores per cluster are (-3/7, -29/14) and
    // its negation, correction 2.5, bread inv([[6,15],[15,55]]).
    CHECK(r.vcov(0, 0) == doctest::Approx(5.0 / 196.0).epsilon(1e-10));
    CHECK(r.vcov(0, 1) == doctest::Approx(-1.0 / 49.0).epsilon(1e-10));
    CHECK(r.vcov(1, 0) == doctest::Approx(-1.0 / 49.0).epsilon(1e-10));
    CHECK(r.vcov(1, 1) == doctest::Approx(4.0 / 245.0).epsilon(1e-10));
    CHECK(r.se[0] == doctest::Approx(std::sqrt(5.0) / 14.0).epsilon(1e-10));
    CHECK(r.se[1] == doctest::Approx(2.0 / (7.0 * std::sqrt(5.0))).epsilon(1e-10));
    CHECK(r.df == 1);
    CHECK(r.n_clusters_1 == 2);
    double t0 = fit.beta[0] / r.se[0];
    double t1 = fit.beta[1] / r.se[1];
    CHECK(t0 == doctest::Approx(8.0 / std::sqrt(5.0)).epsilon(1e-10));
    CHECK(t1 == doctest::Approx(15.0 * std::sqrt(5.0) / 4.0).epsilon(1e-10));
}

TEST_CASE("singleton clusters reduce to heteroskedasticity-robust HC1") {
    Rng rng(31);
    const int n = 60, k = 2;
    Eigen::MatrixXd X(n, k);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
        X(i, 0) = 1.0;
        X(i, 1) = rng.normal();
        y[i] = 2.0 + X(i, 1) + rng.normal() * (1.0 + 0.5 * std::fabs(X(i, 1)));
    }
    OlsFit fit = ols(y, X);
    ClusterRobustResult r = cluster_robust_vcov(fit, padded_row_ids(n));
    CHECK(r.n_clusters_1 == n);
    CHECK(r.df == n - 1);

    // Textbook HC1: (n/(n-k)) * B * sum(e_i^2 x_i x_i') * B.
    Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(k, k);
    for (int i = 0; i < n; ++i) {
        Eigen::RowVectorXd xi = X.row(i);
        meat += fit.residuals[i] * fit.residuals[i] * xi.transpose() * xi;
    }
    Eigen::MatrixXd hc1 =
        (static_cast<double>(n) / (n - k)) * fit.xtx_inverse * meat * fit.xtx_inverse;
    CHECK((r.vcov - hc1).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("two-way collapses to one-way when the clusterings coincide") {
    SixRowFixture f;
    OlsFit fit = ols(f.y, f.X);
    ClusterRobustResult one = cluster_robust_vcov(fit, f.clusters);
    ClusterRobustResult two = cluster_robust_vcov(fit, f.clusters, &f.clusters);
    CHECK((two.vcov - one.vcov).cwiseAbs().maxCoeff() < 1e-14);
    CHECK(two.df == one.df);
    CHECK(two.n_clusters_2 == one.n_clusters_1);
}

TEST_CASE("two-way variance is inclusion-exclusion over the intersection") {
    Rng rng(55);
    const int n = 48;
    Eigen::MatrixXd X(n, 2);
    Eigen::VectorXd y(n);
    std::vector<std::string> by_student, by_class, joint;
    for (int i = 0; i < n; ++i) {
        X(i, 0) = 1.0;
        X(i, 1) = rng.normal();
        y[i] = 1.0 - 0.3 * X(i, 1) + rng.normal();
        by_student.push_back("s" + std::to_string(i % 8));
        by_class.push_back("k" + std::to_string(i / 12));
        joint.push_back(by_student.back() + "|" + by_class.back());
    }
    OlsFit fit = ols(y, X);
    ClusterRobustResult two = cluster_robust_vcov(fit, by_student, &by_class);
    CHECK(two.n_clusters_1 == 8);
    CHECK(two.n_clusters_2 == 4);
    CHECK(two.df == 3);
    if (!two.truncated_negative) {
        ClusterRobustResult v1 = cluster_robust_vcov(fit, by_student);
        ClusterRobustResult v2 = cluster_robust_vcov(fit, by_class);
        ClusterRobustResult v12 = cluster_robust_vcov(fit, joint);
        Eigen::MatrixXd expect = v1.vcov + v2.vcov - v12.vcov;
        CHECK((two.vcov - expect).cwiseAbs().maxCoeff() < 1e-12);
    }
    // Symmetric PSD after any repair.
    CHECK((two.vcov - two.vcov.transpose()).cwiseAbs().maxCoeff() < 1e-12);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(two.vcov);
    CHECK(es.eigenvalues().minCoeff() >= -1e-10);
}

TEST_CASE("fewer than two clusters is an error") {
    SixRowFixture f;
    OlsFit fit = ols(f.y, f.X);
    std::vector<std::string> one_cluster(6, "only");
    CHECK_THROWS_AS(cluster_robust_vcov(fit, one_cluster), SingleCluster);
    CHECK_THROWS_AS(cluster_robust_vcov(fit, f.clusters, &one_cluster), SingleCluster);
    std::vector<std::string> short_ids(3, "c");
    CHECK_THROWS_AS(cluster_robust_vcov(fit, short_ids), SingleCluster);
}

TEST_CASE("cluster relabeling leaves results bit-identical") {
    SixRowFixture f;
    OlsFit fit = ols(f.y, f.X);
    ClusterRobustResult a = cluster_robust_vcov(fit, f.clusters);
    std::vector<std::string> renamed = {"zebra", "zebra", "zebra",
                                        "aardvark", "aardvark", "aardvark"};
    ClusterRobustResult b = cluster_robust_vcov(fit, renamed);
    CHECK(a.se == b.se);
    CHECK((a.vcov - b.vcov).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("group_compare basics") {
    SUBCASE("hand-sized groups") {
        std::vector<double> values = {1.0, 2.0, 3.0, 5.0};
        std::vector<int> flags = {0, 0, 1, 1};
        GroupCompareResult r =
            group_compare(values, flags, {"a", "b", "c", "d"});
        CHECK(r.mean0 == 1.5);
        CHECK(r.mean1 == 4.0);
        CHECK(r.diff == doctest::Approx(2.5).epsilon(1e-12));
        CHECK(r.n0 == 2);
        CHECK(r.n1 == 2);
        // Pooled sample sd: sqrt(((0.5) + (2.0)) / 2) = sqrt(1.25).
        CHECK(r.pooled_sd == doctest::Approx(std::sqrt(1.25)).epsilon(1e-12));
        CHECK(r.cohens_d == doctest::Approx(std::sqrt(5.0)).epsilon(1e-12));
        CHECK(r.t == doctest::Approx(r.diff / r.se).epsilon(1e-12));
        CHECK(r.df == 3);
    }
    SUBCASE("identical groups give zero everywhere") {
        std::vector<double> values = {2.0, 3.0, 2.0, 3.0};
        GroupCompareResult r =
            group_compare(values, {0, 0, 1, 1}, {"a", "b", "c", "d"});
        CHECK(r.diff == doctest::Approx(0.0).scale(1).epsilon(1e-12));
        CHECK(r.t == doctest::Approx(0.0).scale(1).epsilon(1e-12));
        CHECK(r.cohens_d == doctest::Approx(0.0).scale(1).epsilon(1e-12));
    }
    SUBCASE("empty group rejected") {
        CHECK_THROWS_AS(group_compare({1.0, 2.0}, {0, 0}, {"a", "b"}),
                        SingleCluster);
    }
}

TEST_CASE("group_compare df follows the cluster count") {
    // 200 clusters of 2 rows each, the first hundred clusters in group 0.
    std::vector<double> values;
    std::vector<int> flags;
    std::vector<std::string> clusters;
    Rng rng(11);
    for (int c = 0; c < 200; ++c) {
        for (int rep = 0; rep < 2; ++rep) {
            int flag = c < 100 ? 0 : 1;
            values.push_back(flag * 0.2 + rng.normal());
            flags.push_back(flag);
            clusters.push_back("class" + std::to_string(c));
        }
    }
    GroupCompareResult r = group_compare(values, flags, clusters);
    CHECK(r.n_clusters == 200);
    CHECK(r.df == 199);
    CHECK(r.p == doctest::Approx(student_t_p_two_sided(r.t, 199)).epsilon(1e-12));
}

TEST_CASE("group_compare t and d are affine invariant") {
    Rng rng(3);
    std::vector<double> values;
    std::vector<int> flags;
    std::vector<std::string> clusters;
    for (int i = 0; i < 80; ++i) {
        int flag = i % 2;
        values.push_back(flag * 0.7 + rng.normal());
        flags.push_back(flag);
        clusters.push_back("c" + std::to_string(i / 4));
    }
    GroupCompareResult base = group_compare(values, flags, clusters);
    std::vector<double> scaled;
    for (double v : values) scaled.push_back(3.0 * v - 11.0);
    GroupCompareResult moved = group_compare(scaled, flags, clusters);
    CHECK(moved.t == doctest::Approx(base.t).epsilon(1e-9));
    CHECK(moved.cohens_d == doctest::Approx(base.cohens_d).epsilon(1e-9));
    CHECK(moved.diff == doctest::Approx(3.0 * base.diff).epsilon(1e-9));
}

TEST_CASE("proportion_ci") {
    SUBCASE("all ones collapse to a point at 1") {
        std::vector<double> ones(10, 1.0);
        ProportionCI r = proportion_ci(ones, padded_row_ids(10));
        CHECK(r.proportion == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(r.se == doctest::Approx(0.0).scale(1).epsilon(1e-12));
        CHECK(r.lo == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(r.hi == 1.0);
    }
    SUBCASE("matches the textbook normal interval at scale") {
        const int n = 10000;
        std::vector<double> values(n);
        for (int i = 0; i < n; ++i) values[i] = i % 2 ? 1.0 : 0.0;
        ProportionCI r = proportion_ci(values, padded_row_ids(n));
        CHECK(r.proportion == doctest::Approx(0.5).epsilon(1e-12));
        double normal_half_width = 1.959963985 * std::sqrt(0.25 / n);
        CHECK(r.hi - r.proportion ==
              doctest::Approx(normal_half_width).epsilon(1e-3));
        CHECK(r.lo ==
              doctest::Approx(0.5 - normal_half_width).epsilon(1e-3));
    }
    SUBCASE("interval is clipped into the unit range") {
        std::vector<double> values = {1.0, 1.0, 1.0, 1.0, 0.0};
        ProportionCI r = proportion_ci(values, padded_row_ids(5));
        CHECK(r.proportion == doctest::Approx(0.8).epsilon(1e-12));
        CHECK(r.hi == 1.0);
        CHECK(r.lo > 0.0);
        CHECK(r.df == 4);
    }
    SUBCASE("single cluster rejected") {
        std::vector<double> values = {1.0, 0.0};
        CHECK_THROWS_AS(proportion_ci(values, {"c", "c"}), SingleCluster);
    }
}

TEST_CASE("student t helpers") {
    CHECK(student_t_p_two_sided(0.0, 10) == doctest::Approx(1.0).epsilon(1e-12));
    // Known quantile: t_{4, 0.975} = 2.776445105.
    CHECK(student_t_quantile(0.975, 4) == doctest::Approx(2.7764451052).epsilon(1e-9));
    CHECK(student_t_p_two_sided(2.7764451052, 4) == doctest::Approx(0.05).epsilon(1e-9));
    // Large df approaches the normal quantile.
    CHECK(student_t_quantile(0.975, 100000) == doctest::Approx(1.95996).epsilon(1e-4));
    // The anchor contrast: |t| = 4.04 with df 199 is significant well below 0.001.
    double p = student_t_p_two_sided(-4.04, 199);
    CHECK(p < 0.001);
    CHECK(p > 0.0);
}
