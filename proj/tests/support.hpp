#pragma once

// Brute-force numerics used as independent oracles. Deliberately written
// against plain vectors, not Eigen, so library bugs cannot cancel out.

#include <cmath>
#include <cstddef>
#include <vector>

namespace oracle {

using Matrix = std::vector<std::vector<double>>;

// Population covariance (divide by n) of columns of data, centered.
inline Matrix covariance(const Matrix& data) {
    size_t n = data.size(), d = data[0].size();
    std::vector<double> mean(d, 0.0);
    for (const auto& row : data)
        for (size_t j = 0; j < d; ++j) mean[j] += row[j];
    for (size_t j = 0; j < d; ++j) mean[j] /= static_cast<double>(n);
    Matrix cov(d, std::vector<double>(d, 0.0));
    for (const auto& row : data)
        for (size_t i = 0; i < d; ++i)
            for (size_t j = 0; j < d; ++j)
                cov[i][j] += (row[i] - mean[i]) * (row[j] - mean[j]);
    for (size_t i = 0; i < d; ++i)
        for (size_t j = 0; j < d; ++j) cov[i][j] /= static_cast<double>(n);
    return cov;
}

struct EigenResult {
    std::vector<double> values;  // descending
    Matrix vectors;              // vectors[k] is the k-th eigenvector
};

// Cyclic Jacobi rotations on a symmetric matrix.
inline EigenResult jacobi_eigen(Matrix a) {
    size_t d = a.size();
    Matrix v(d, std::vector<double>(d, 0.0));
    for (size_t i = 0; i < d; ++i) v[i][i] = 1.0;

    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (size_t p = 0; p < d; ++p)
            for (size_t q = p + 1; q < d; ++q) off += a[p][q] * a[p][q];
        if (off < 1e-24) break;
        for (size_t p = 0; p < d; ++p) {
            for (size_t q = p + 1; q < d; ++q) {
                if (std::fabs(a[p][q]) < 1e-300) continue;
                double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                double t = (theta >= 0 ? 1.0 : -1.0) /
                           (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                double c = 1.0 / std::sqrt(t * t + 1.0);
                double s = t * c;
                for (size_t k = 0; k < d; ++k) {
                    double akp = a[k][p], akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for (size_t k = 0; k < d; ++k) {
                    double apk = a[p][k], aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for (size_t k = 0; k < d; ++k) {
                    double vkp = v[k][p], vkq = v[k][q];
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }

    EigenResult r;
    std::vector<size_t> order(d);
    for (size_t i = 0; i < d; ++i) order[i] = i;
    for (size_t i = 0; i < d; ++i)
        for (size_t j = i + 1; j < d; ++j)
            if (a[order[j]][order[j]] > a[order[i]][order[i]])
                std::swap(order[i], order[j]);
    for (size_t rank = 0; rank < d; ++rank) {
        size_t idx = order[rank];
        r.values.push_back(a[idx][idx]);
        std::vector<double> vec(d);
        for (size_t k = 0; k < d; ++k) vec[k] = v[k][idx];
        r.vectors.push_back(std::move(vec));
    }
    return r;
}

}  // namespace oracle
