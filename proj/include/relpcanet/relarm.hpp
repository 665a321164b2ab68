#ifndef RELPCANET_RELARM_HPP
#define RELPCANET_RELARM_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "relpcanet/dataset.hpp"
#include "relpcanet/errors.hpp"
#include "relpcanet/matrix.hpp"
#include "relpcanet/numerics.hpp"
#include "relpcanet/random.hpp"

namespace relpcanet::relarm {

// Min-max scaled indicator values, one row per entity, every value in [0,1].
struct NormalizedMatrix {
    std::vector<std::string> entity_ids;
    Matrix values;  // M x N
};

// l1-normalized principal components of the normalized set and everything
// derived from them: retained dimension d, the |w| matrix and the variance
// (rating) vector used as the projection axis.
struct PcaBasis {
    Matrix components;                  // N x N, column k = w_k, unit l1 norm, signed
    std::vector<double> variances;      // descending
    std::size_t d = 0;                  // retained component count
    Matrix w_abs;                       // N x d, entry (k,p) = |w_kp|
    std::vector<double> rating_vector;  // first d variances
};

struct FeatureSet {
    std::vector<std::string> entity_ids;
    Matrix vectors;  // M x d, row i = b_i^T x W
};

struct ClusterState {
    std::vector<std::string> entity_ids;
    std::vector<int> labels;                 // per entity, in [0, k)
    Matrix centers;                          // k x d
    std::vector<double> projections;         // per cluster: |center . rating_vector|
    std::vector<int> cluster_order;          // position r holds the cluster with rank r+1
    std::vector<double> entity_projection;   // per entity: |a_i . rating_vector|
    std::vector<int> within_cluster_rank;    // per entity, 1 = highest projection in cluster

    std::size_t cluster_count() const noexcept { return projections.size(); }

    // 1-based rank of cluster q by projection (1 = highest)
    int cluster_rank(int q) const {
        for (std::size_t r = 0; r < cluster_order.size(); ++r)
            if (cluster_order[r] == q) return static_cast<int>(r) + 1;
        throw Error(ErrorKind::InvalidInput, "cluster index " + std::to_string(q) + " out of range");
    }

    bool complete() const noexcept {
        const std::size_t m = entity_ids.size();
        const std::size_t k = projections.size();
        return m > 0 && k > 0 && labels.size() == m && entity_projection.size() == m &&
               within_cluster_rank.size() == m && cluster_order.size() == k &&
               centers.rows() == k;
    }
};

// Eq-style min-max scaling: positive-direction indicators map their column
// minimum to 0 and maximum to 1; negative-direction indicators reverse the
// orientation. A constant column has no scale and is rejected.
inline NormalizedMatrix normalize(const dataset::Dataset& ds) {
    const std::size_t m = ds.records.size();
    const std::size_t n = ds.schema.size();
    NormalizedMatrix out;
    out.values = Matrix(m, n);
    out.entity_ids.reserve(m);
    for (const auto& rec : ds.records) out.entity_ids.push_back(rec.entity_id);

    for (std::size_t j = 0; j < n; ++j) {
        double lo = 0.0, hi = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            if (!ds.records[i].values[j])
                throw Error(ErrorKind::InvalidInput,
                            "dataset not imputed: entity '" + ds.records[i].entity_id +
                                "' missing indicator '" + ds.schema.indicators[j].name + "'");
            const double v = *ds.records[i].values[j];
            if (i == 0) {
                lo = hi = v;
            } else {
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
        }
        if (hi == lo)
            throw Error(ErrorKind::DegenerateColumn,
                        "indicator '" + ds.schema.indicators[j].name + "' is constant");
        const double range = hi - lo;
        const bool positive = ds.schema.indicators[j].direction == dataset::Direction::Positive;
        for (std::size_t i = 0; i < m; ++i) {
            const double v = *ds.records[i].values[j];
            out.values(i, j) = positive ? (v - lo) / range : (hi - v) / range;
        }
    }
    return out;
}

// PCA of the sample covariance (divisor M-1, mean-centered columns), each
// eigenvector rescaled to unit l1 norm. d = smallest count reaching the
// cumulative variance target.
inline PcaBasis fit_pca(const NormalizedMatrix& b, double variance_target) {
    const std::size_t m = b.values.rows();
    const std::size_t n = b.values.cols();
    if (m < 2) throw Error(ErrorKind::InvalidInput, "PCA needs at least 2 entities");
    if (!(variance_target > 0.0) || variance_target > 1.0)
        throw Error(ErrorKind::InvalidInput, "variance_target must be in (0, 1]");

    std::vector<double> mean(n, 0.0);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) mean[j] += b.values(i, j);
    for (double& v : mean) v /= static_cast<double>(m);

    numerics::SymmetricMatrix cov(n);
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t c = a; c < n; ++c) {
            double s = 0.0;
            for (std::size_t i = 0; i < m; ++i)
                s += (b.values(i, a) - mean[a]) * (b.values(i, c) - mean[c]);
            cov.set(a, c, s / static_cast<double>(m - 1));
        }

    const numerics::EigenResult eig = numerics::eig_symmetric(cov);

    PcaBasis basis;
    basis.variances = eig.eigenvalues;
    basis.components = eig.eigenvectors;
    for (std::size_t k = 0; k < n; ++k) {
        double l1 = 0.0;
        for (std::size_t r = 0; r < n; ++r) l1 += std::abs(basis.components(r, k));
        for (std::size_t r = 0; r < n; ++r) basis.components(r, k) /= l1;
    }

    double total = 0.0;
    for (double v : basis.variances) total += std::max(v, 0.0);
    basis.d = 1;
    if (total > 0.0) {
        double cum = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            cum += std::max(basis.variances[k], 0.0);
            if (cum >= variance_target * total - 1e-12 * total) {
                basis.d = k + 1;
                break;
            }
        }
    }

    basis.w_abs = Matrix(n, basis.d);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t p = 0; p < basis.d; ++p) basis.w_abs(r, p) = std::abs(basis.components(r, p));
    basis.rating_vector.assign(basis.variances.begin(),
                               basis.variances.begin() + static_cast<std::ptrdiff_t>(basis.d));
    return basis;
}

// Element-wise product of a normalized row with the signed component w_p:
// the p-th relative PCA attribute. p is a 0-based index in [0, d).
inline std::vector<double> relative_attribute(std::span<const double> b_row, const PcaBasis& basis,
                                              std::size_t p) {
    if (p >= basis.d)
        throw Error(ErrorKind::InvalidInput, "component index " + std::to_string(p) +
                                                 " out of range [0, " + std::to_string(basis.d) + ")");
    if (b_row.size() != basis.components.rows())
        throw Error(ErrorKind::InvalidInput, "row length does not match basis dimension");
    std::vector<double> a(b_row.size());
    for (std::size_t k = 0; k < b_row.size(); ++k) a[k] = b_row[k] * basis.components(k, p);
    return a;
}

// Ranking function r_p(b_i) = sum_k b_ik |w_kp|; equals the l1 norm of the
// p-th relative attribute since b >= 0.
inline double ranking_function(std::span<const double> b_row, const PcaBasis& basis, std::size_t p) {
    if (p >= basis.d)
        throw Error(ErrorKind::InvalidInput, "component index " + std::to_string(p) +
                                                 " out of range [0, " + std::to_string(basis.d) + ")");
    if (b_row.size() != basis.w_abs.rows())
        throw Error(ErrorKind::InvalidInput, "row length does not match basis dimension");
    double s = 0.0;
    for (std::size_t k = 0; k < b_row.size(); ++k) s += b_row[k] * basis.w_abs(k, p);
    return s;
}

// a_i^T = b_i^T x W, rows stacked for all entities.
inline FeatureSet feature_map(const NormalizedMatrix& b, const PcaBasis& basis) {
    const std::size_t m = b.values.rows();
    const std::size_t n = b.values.cols();
    if (n != basis.w_abs.rows())
        throw Error(ErrorKind::InvalidInput, "normalized matrix width " + std::to_string(n) +
                                                 " does not match basis dimension " +
                                                 std::to_string(basis.w_abs.rows()));
    FeatureSet f;
    f.entity_ids = b.entity_ids;
    f.vectors = Matrix(m, basis.d);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < basis.d; ++p) {
            double s = 0.0;
            for (std::size_t k = 0; k < n; ++k) s += b.values(i, k) * basis.w_abs(k, p);
            f.vectors(i, p) = s;
        }
    return f;
}

// Fill cluster_order and within_cluster_rank from labels and projections.
// Orderings are deterministic: clusters by (projection desc, index asc),
// entities inside a cluster by (projection desc, entity_id asc).
inline ClusterState assemble_cluster_state(std::vector<std::string> entity_ids,
                                           std::vector<int> labels, Matrix centers,
                                           std::vector<double> cluster_projections,
                                           std::vector<double> entity_projections) {
    ClusterState cs;
    cs.entity_ids = std::move(entity_ids);
    cs.labels = std::move(labels);
    cs.centers = std::move(centers);
    cs.projections = std::move(cluster_projections);
    cs.entity_projection = std::move(entity_projections);

    const std::size_t k = cs.projections.size();
    cs.cluster_order.resize(k);
    std::iota(cs.cluster_order.begin(), cs.cluster_order.end(), 0);
    std::sort(cs.cluster_order.begin(), cs.cluster_order.end(), [&](int a, int b) {
        if (cs.projections[static_cast<std::size_t>(a)] != cs.projections[static_cast<std::size_t>(b)])
            return cs.projections[static_cast<std::size_t>(a)] >
                   cs.projections[static_cast<std::size_t>(b)];
        return a < b;
    });

    const std::size_t m = cs.entity_ids.size();
    cs.within_cluster_rank.assign(m, 0);
    for (std::size_t q = 0; q < k; ++q) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < m; ++i)
            if (cs.labels[i] == static_cast<int>(q)) members.push_back(i);
        std::sort(members.begin(), members.end(), [&](std::size_t a, std::size_t b) {
            if (cs.entity_projection[a] != cs.entity_projection[b])
                return cs.entity_projection[a] > cs.entity_projection[b];
            return cs.entity_ids[a] < cs.entity_ids[b];
        });
        for (std::size_t r = 0; r < members.size(); ++r)
            cs.within_cluster_rank[members[r]] = static_cast<int>(r) + 1;
    }
    return cs;
}

// k-means over the feature vectors, then cluster and entity projections on
// the rating vector per Eq.-(14)-style |dot products|.
inline ClusterState cluster_entities(const FeatureSet& f, const PcaBasis& basis, int k,
                                     int restarts, const RandomSource& rng) {
    if (f.vectors.cols() != basis.rating_vector.size())
        throw Error(ErrorKind::InvalidInput, "feature width does not match rating vector length");
    numerics::KMeansResult km = numerics::kmeans(f.vectors, k, restarts, rng);

    std::vector<double> pr(km.centers.rows());
    for (std::size_t q = 0; q < km.centers.rows(); ++q)
        pr[q] = std::abs(dot(km.centers.row(q), basis.rating_vector));

    std::vector<double> ep(f.vectors.rows());
    for (std::size_t i = 0; i < f.vectors.rows(); ++i)
        ep[i] = std::abs(dot(f.vectors.row(i), basis.rating_vector));

    return assemble_cluster_state(f.entity_ids, std::move(km.labels), std::move(km.centers),
                                  std::move(pr), std::move(ep));
}

}  // namespace relpcanet::relarm

#endif  // RELPCANET_RELARM_HPP
