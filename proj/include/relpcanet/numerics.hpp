#ifndef RELPCANET_NUMERICS_HPP
#define RELPCANET_NUMERICS_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <vector>

#include "relpcanet/errors.hpp"
#include "relpcanet/matrix.hpp"
#include "relpcanet/random.hpp"

namespace relpcanet::numerics {

// Symmetric matrix with symmetry enforced at construction: set() writes both
// triangles, from_matrix() rejects input where entries[i][j] != entries[j][i].
class SymmetricMatrix {
public:
    explicit SymmetricMatrix(std::size_t n) : m_(n, n, 0.0) {
        if (n < 1) throw Error(ErrorKind::InvalidInput, "symmetric matrix needs n >= 1");
    }

    static SymmetricMatrix from_matrix(const Matrix& full) {
        if (full.rows() != full.cols() || full.rows() < 1)
            throw Error(ErrorKind::InvalidInput, "symmetric matrix must be square, n >= 1");
        SymmetricMatrix s(full.rows());
        for (std::size_t i = 0; i < full.rows(); ++i)
            for (std::size_t j = i; j < full.cols(); ++j) {
                if (full(i, j) != full(j, i))
                    throw Error(ErrorKind::InvalidInput, "matrix is not symmetric at (" +
                                                             std::to_string(i) + "," +
                                                             std::to_string(j) + ")");
                s.set(i, j, full(i, j));
            }
        return s;
    }

    void set(std::size_t i, std::size_t j, double v) {
        m_(i, j) = v;
        m_(j, i) = v;
    }

    double operator()(std::size_t i, std::size_t j) const { return m_(i, j); }
    std::size_t size() const noexcept { return m_.rows(); }
    const Matrix& full() const noexcept { return m_; }

private:
    Matrix m_;
};

struct EigenResult {
    std::vector<double> eigenvalues;  // descending
    Matrix eigenvectors;              // column k pairs with eigenvalues[k], unit l2 norm
};

namespace detail {

inline double offdiag_frobenius(const Matrix& a) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = i + 1; j < a.cols(); ++j) s += a(i, j) * a(i, j);
    return std::sqrt(2.0 * s);
}

inline double frobenius(const Matrix& a) {
    double s = 0.0;
    for (double v : a.data()) s += v * v;
    return std::sqrt(s);
}

}  // namespace detail

// Cyclic Jacobi eigendecomposition. Adequate for the small dense symmetric
// matrices this pipeline produces (N is the indicator count, ~12).
// Sweep cap 100, off-diagonal Frobenius tolerance 1e-12 relative to the input.
inline EigenResult eig_symmetric(const SymmetricMatrix& sym) {
    const std::size_t n = sym.size();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j)
            if (!std::isfinite(sym(i, j)))
                throw Error(ErrorKind::InvalidInput, "non-finite entry at (" + std::to_string(i) +
                                                         "," + std::to_string(j) + ")");

    Matrix a = sym.full();
    Matrix v(n, n, 0.0);
    for (std::size_t i = 0; i < n; ++i) v(i, i) = 1.0;

    const double tol = 1e-12 * std::max(1.0, detail::frobenius(a));
    constexpr int kMaxSweeps = 100;

    bool converged = detail::offdiag_frobenius(a) <= tol;
    for (int sweep = 0; sweep < kMaxSweeps && !converged; ++sweep) {
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double sgn = theta < 0.0 ? -1.0 : 1.0;
                const double t = sgn / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                const double tau = s / (1.0 + c);

                a(p, p) -= t * apq;
                a(q, q) += t * apq;
                a(p, q) = 0.0;
                a(q, p) = 0.0;
                for (std::size_t r = 0; r < n; ++r) {
                    const double vrp = v(r, p), vrq = v(r, q);
                    v(r, p) = vrp - s * (vrq + tau * vrp);
                    v(r, q) = vrq + s * (vrp - tau * vrq);
                    if (r == p || r == q) continue;
                    const double arp = a(r, p), arq = a(r, q);
                    a(r, p) = arp - s * (arq + tau * arp);
                    a(p, r) = a(r, p);
                    a(r, q) = arq + s * (arp - tau * arq);
                    a(q, r) = a(r, q);
                }
            }
        }
        converged = detail::offdiag_frobenius(a) <= tol;
    }
    if (!converged)
        throw Error(ErrorKind::NumericalFailure, "Jacobi eigensolver did not converge in 100 sweeps");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return a(x, x) > a(y, y); });

    EigenResult out;
    out.eigenvalues.resize(n);
    out.eigenvectors = Matrix(n, n, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t src = order[k];
        out.eigenvalues[k] = a(src, src);
        // sign convention: largest-magnitude entry positive
        std::size_t arg = 0;
        for (std::size_t r = 1; r < n; ++r)
            if (std::abs(v(r, src)) > std::abs(v(arg, src))) arg = r;
        const double flip = v(arg, src) < 0.0 ? -1.0 : 1.0;
        for (std::size_t r = 0; r < n; ++r) out.eigenvectors(r, k) = flip * v(r, src);
    }
    return out;
}

struct KMeansResult {
    std::vector<int> labels;  // per point, in [0, k)
    Matrix centers;           // k x d
    double inertia = 0.0;     // sum of squared distances to assigned centers
    int restarts_run = 0;
};

namespace detail {

inline int nearest_center(const Matrix& points, std::size_t i, const Matrix& centers) {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t q = 0; q < centers.rows(); ++q) {
        const double d = squared_distance(points.row(i), centers.row(q));
        if (d < best_d) {  // ties keep the lowest cluster index
            best_d = d;
            best = static_cast<int>(q);
        }
    }
    return best;
}

// k-means++ seeding (Arthur & Vassilvitskii): first center uniform, each next
// center drawn with probability proportional to squared distance to the
// nearest already-chosen center.
inline Matrix kmeanspp_init(const Matrix& points, int k, RandomSource& rng) {
    const std::size_t m = points.rows(), d = points.cols();
    Matrix centers(static_cast<std::size_t>(k), d);
    std::size_t first = static_cast<std::size_t>(rng.next_below(m));
    for (std::size_t j = 0; j < d; ++j) centers(0, j) = points(first, j);

    std::vector<double> dist2(m);
    for (std::size_t i = 0; i < m; ++i)
        dist2[i] = squared_distance(points.row(i), centers.row(0));

    for (int c = 1; c < k; ++c) {
        double total = 0.0;
        for (double v : dist2) total += v;
        std::size_t pick;
        if (total > 0.0) {
            const double x = rng.next_double() * total;
            double cum = 0.0;
            pick = m - 1;
            for (std::size_t i = 0; i < m; ++i) {
                cum += dist2[i];
                if (cum > x) {
                    pick = i;
                    break;
                }
            }
        } else {
            // all points coincide with chosen centers
            pick = static_cast<std::size_t>(rng.next_below(m));
        }
        for (std::size_t j = 0; j < d; ++j) centers(c, j) = points(pick, j);
        for (std::size_t i = 0; i < m; ++i)
            dist2[i] = std::min(dist2[i], squared_distance(points.row(i), centers.row(c)));
    }
    return centers;
}

// Move the point farthest from its assigned center (among clusters that can
// spare one) into cluster `empty`.
inline void repair_empty_cluster(const Matrix& points, Matrix& centers, std::vector<int>& labels,
                                 std::vector<int>& counts, int empty) {
    const std::size_t m = points.rows(), d = points.cols();
    std::size_t donor_point = m;
    double worst = -1.0;
    for (std::size_t i = 0; i < m; ++i) {
        if (counts[static_cast<std::size_t>(labels[i])] < 2) continue;
        const double dd = squared_distance(points.row(i), centers.row(labels[i]));
        if (dd > worst) {
            worst = dd;
            donor_point = i;
        }
    }
    if (donor_point == m) return;  // every cluster is a singleton; nothing to move
    const int from = labels[donor_point];
    labels[donor_point] = empty;
    counts[static_cast<std::size_t>(from)] -= 1;
    counts[static_cast<std::size_t>(empty)] += 1;
    for (std::size_t j = 0; j < d; ++j) centers(empty, j) = points(donor_point, j);
    // recompute the donor's mean
    for (std::size_t j = 0; j < d; ++j) centers(from, j) = 0.0;
    for (std::size_t i = 0; i < m; ++i)
        if (labels[i] == from)
            for (std::size_t j = 0; j < d; ++j) centers(from, j) += points(i, j);
    for (std::size_t j = 0; j < d; ++j)
        centers(from, j) /= static_cast<double>(counts[static_cast<std::size_t>(from)]);
}

struct LloydResult {
    std::vector<int> labels;
    Matrix centers;
    double inertia;
};

inline LloydResult lloyd(const Matrix& points, Matrix centers, int max_iter) {
    const std::size_t m = points.rows(), d = points.cols();
    const int k = static_cast<int>(centers.rows());

    std::vector<int> labels(m);
    for (std::size_t i = 0; i < m; ++i) labels[i] = nearest_center(points, i, centers);

    std::vector<int> counts(static_cast<std::size_t>(k));
    for (int it = 0; it < max_iter; ++it) {
        std::fill(counts.begin(), counts.end(), 0);
        for (std::size_t i = 0; i < m; ++i) counts[static_cast<std::size_t>(labels[i])] += 1;
        for (int q = 0; q < k; ++q) {
            if (counts[static_cast<std::size_t>(q)] == 0) continue;
            for (std::size_t j = 0; j < d; ++j) centers(q, j) = 0.0;
        }
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < d; ++j) centers(labels[i], j) += points(i, j);
        for (int q = 0; q < k; ++q) {
            const int c = counts[static_cast<std::size_t>(q)];
            if (c > 0)
                for (std::size_t j = 0; j < d; ++j) centers(q, j) /= static_cast<double>(c);
        }
        for (int q = 0; q < k; ++q)
            if (counts[static_cast<std::size_t>(q)] == 0)
                repair_empty_cluster(points, centers, labels, counts, q);

        bool changed = false;
        for (std::size_t i = 0; i < m; ++i) {
            const int nl = nearest_center(points, i, centers);
            if (nl != labels[i]) {
                labels[i] = nl;
                changed = true;
            }
        }
        if (!changed) break;
    }

    // tie-broken reassignment can re-empty a cluster; repair without reassigning
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < m; ++i) counts[static_cast<std::size_t>(labels[i])] += 1;
    for (int q = 0; q < k; ++q)
        if (counts[static_cast<std::size_t>(q)] == 0)
            repair_empty_cluster(points, centers, labels, counts, q);

    double inertia = 0.0;
    for (std::size_t i = 0; i < m; ++i)
        inertia += squared_distance(points.row(i), centers.row(labels[i]));
    return {std::move(labels), std::move(centers), inertia};
}

}  // namespace detail

// Best-of-`restarts` k-means with k-means++ seeding. Per-restart seeds come
// from rng.spawn(restart_index), so a run with fewer restarts explores a
// prefix of the same schedule; the best result wins with (inertia, restart)
// lexicographic tie-breaking.
inline KMeansResult kmeans(const Matrix& points, int k, int restarts, const RandomSource& rng,
                           int max_iter = 300) {
    const std::size_t m = points.rows();
    if (k < 1) throw Error(ErrorKind::InvalidInput, "k must be >= 1");
    if (m < static_cast<std::size_t>(k))
        throw Error(ErrorKind::InvalidInput, "fewer points (" + std::to_string(m) +
                                                 ") than clusters (" + std::to_string(k) + ")");
    if (restarts < 1) throw Error(ErrorKind::InvalidInput, "restarts must be >= 1");

    KMeansResult best;
    best.inertia = std::numeric_limits<double>::infinity();
    for (int r = 0; r < restarts; ++r) {
        RandomSource sub = rng.spawn(static_cast<std::uint64_t>(r));
        Matrix init = detail::kmeanspp_init(points, k, sub);
        detail::LloydResult res = detail::lloyd(points, std::move(init), max_iter);
        if (res.inertia < best.inertia) {
            best.labels = std::move(res.labels);
            best.centers = std::move(res.centers);
            best.inertia = res.inertia;
        }
    }
    best.restarts_run = restarts;
    return best;
}

}  // namespace relpcanet::numerics

#endif  // RELPCANET_NUMERICS_HPP
