#include "cliloop/kmeans.hpp"

#include <algorithm>
#include <cstring>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "cliloop/rng.hpp"

namespace cliloop {

double squared_distance(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return acc;
}

namespace {

ClusterSet singleton_clusters(const Matrix& rows, std::size_t q, std::uint64_t seed) {
    // One cluster per distinct row content, grouped bitwise.
    ClusterSet out;
    out.q_requested = q;
    out.seed = seed;
    std::vector<std::size_t> reps;  // first row index with each content
    for (std::size_t i = 0; i < rows.rows(); ++i) {
        bool placed = false;
        for (std::size_t c = 0; c < reps.size(); ++c) {
            if (std::memcmp(rows.row_ptr(reps[c]), rows.row_ptr(i),
                            rows.cols() * sizeof(double)) == 0) {
                out.clusters[c].member_rows.push_back(i);
                placed = true;
                break;
            }
        }
        if (!placed) {
            reps.push_back(i);
            Cluster cl;
            cl.member_rows.push_back(i);
            cl.center = rows.row(i);
            out.clusters.push_back(std::move(cl));
        }
    }
    return out;
}

void recompute_centers(const Matrix& rows, const std::vector<std::size_t>& assign,
                       std::vector<Vector>& centers) {
    const std::size_t dim = rows.cols();
    std::vector<std::size_t> counts(centers.size(), 0);
    for (Vector& c : centers) std::fill(c.begin(), c.end(), 0.0);
    for (std::size_t i = 0; i < assign.size(); ++i) {
        Vector& c = centers[assign[i]];
        const double* row = rows.row_ptr(i);
        for (std::size_t k = 0; k < dim; ++k) c[k] += row[k];
        ++counts[assign[i]];
    }
    for (std::size_t q = 0; q < centers.size(); ++q) {
        if (counts[q] == 0) continue;
        for (double& v : centers[q]) v /= static_cast<double>(counts[q]);
    }
}

}  // namespace

namespace {

ClusterSet lloyd_once(const Matrix& rows, std::size_t q, std::uint64_t seed,
                      std::size_t max_iters, const std::vector<Vector>* init_centers) {
    const std::size_t m = rows.rows();
    const std::size_t dim = rows.cols();
    Rng rng(seed);

    // k-means++ init over point indices unless explicit centers were given
    std::vector<Vector> centers;
    centers.reserve(q);
    std::vector<bool> is_center(m, false);
    if (init_centers != nullptr) {
        centers = *init_centers;
    } else {
        const std::size_t first = static_cast<std::size_t>(rng.uniform_int(m));
        centers.push_back(rows.row(first));
        is_center[first] = true;
        std::vector<double> d2(m);
        while (centers.size() < q) {
            double total = 0.0;
            for (std::size_t i = 0; i < m; ++i) {
                double best = std::numeric_limits<double>::infinity();
                for (const Vector& c : centers)
                    best = std::min(best, squared_distance(rows.row_ptr(i), c.data(), dim));
                d2[i] = best;
                total += best;
            }
            std::size_t pick = m;
            if (total > 0.0) {
                const double u = rng.uniform() * total;
                double acc = 0.0;
                for (std::size_t i = 0; i < m; ++i) {
                    acc += d2[i];
                    if (u < acc) {
                        pick = i;
                        break;
                    }
                }
                if (pick == m) pick = m - 1;  // guard against rounding at the top end
            } else {
                // all remaining points coincide with centers; take the first free index
                for (std::size_t i = 0; i < m; ++i)
                    if (!is_center[i]) {
                        pick = i;
                        break;
                    }
            }
            is_center[pick] = true;
            centers.push_back(rows.row(pick));
        }
    }

    std::vector<std::size_t> assign(m, 0);
    std::vector<std::size_t> prev_assign;
    for (std::size_t iter = 0; iter < max_iters; ++iter) {
        // assignment step: nearest center, ties to the lowest index
        for (std::size_t i = 0; i < m; ++i) {
            double best = std::numeric_limits<double>::infinity();
            std::size_t best_q = 0;
            for (std::size_t c = 0; c < q; ++c) {
                const double d = squared_distance(rows.row_ptr(i), centers[c].data(), dim);
                if (d < best) {
                    best = d;
                    best_q = c;
                }
            }
            assign[i] = best_q;
        }
        // repair empty clusters: move in the point farthest from its center
        std::vector<std::size_t> counts(q, 0);
        for (std::size_t a : assign) ++counts[a];
        for (std::size_t c = 0; c < q; ++c) {
            if (counts[c] != 0) continue;
            double worst = -1.0;
            std::size_t worst_i = m;
            for (std::size_t i = 0; i < m; ++i) {
                if (counts[assign[i]] < 2) continue;
                const double d =
                    squared_distance(rows.row_ptr(i), centers[assign[i]].data(), dim);
                if (d > worst) {
                    worst = d;
                    worst_i = i;
                }
            }
            if (worst_i == m) continue;  // nothing stealable
            --counts[assign[worst_i]];
            assign[worst_i] = c;
            ++counts[c];
        }
        if (assign == prev_assign) break;
        prev_assign = assign;
        recompute_centers(rows, assign, centers);
    }

    ClusterSet out;
    out.q_requested = q;
    out.seed = seed;
    std::vector<std::vector<std::size_t>> members(q);
    for (std::size_t i = 0; i < m; ++i) members[assign[i]].push_back(i);
    std::vector<std::size_t> order;
    for (std::size_t c = 0; c < q; ++c)
        if (!members[c].empty()) order.push_back(c);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return members[a].front() < members[b].front(); });
    for (std::size_t c : order) {
        Cluster cl;
        cl.member_rows = members[c];
        cl.center = Vector(dim, 0.0);
        for (std::size_t i : cl.member_rows) {
            const double* row = rows.row_ptr(i);
            for (std::size_t k = 0; k < dim; ++k) cl.center[k] += row[k];
        }
        for (double& v : cl.center) v /= static_cast<double>(cl.member_rows.size());
        out.clusters.push_back(std::move(cl));
    }
    return out;
}

}  // namespace

namespace {

// Strong deterministic 2-means start: order the rows along the leading
// principal direction and take the best prefix split as the initial
// centers. Lloyd then only improves on it.
bool principal_split_centers(const Matrix& rows, std::vector<Vector>& centers) {
    const std::size_t m = rows.rows();
    const std::size_t dim = rows.cols();
    Vector mean(dim, 0.0);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t k = 0; k < dim; ++k) mean[k] += rows(i, k);
    for (double& v : mean) v /= static_cast<double>(m);

    Vector direction(dim, 1.0 / std::sqrt(static_cast<double>(dim)));
    for (int iter = 0; iter < 50; ++iter) {
        Vector next(dim, 0.0);
        for (std::size_t i = 0; i < m; ++i) {
            double proj = 0.0;
            for (std::size_t k = 0; k < dim; ++k) proj += (rows(i, k) - mean[k]) * direction[k];
            for (std::size_t k = 0; k < dim; ++k) next[k] += proj * (rows(i, k) - mean[k]);
        }
        double norm = 0.0;
        for (double v : next) norm += v * v;
        norm = std::sqrt(norm);
        if (norm < 1e-12) return false;  // no variance to split along
        for (std::size_t k = 0; k < dim; ++k) direction[k] = next[k] / norm;
    }

    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> proj(m);
    for (std::size_t i = 0; i < m; ++i) {
        proj[i] = 0.0;
        for (std::size_t k = 0; k < dim; ++k) proj[i] += (rows(i, k) - mean[k]) * direction[k];
    }
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (proj[a] != proj[b]) return proj[a] < proj[b];
        return a < b;
    });

    double best_ss = std::numeric_limits<double>::infinity();
    std::size_t best_cut = 1;
    for (std::size_t cut = 1; cut < m; ++cut) {
        Vector c0(dim, 0.0), c1(dim, 0.0);
        for (std::size_t i = 0; i < m; ++i) {
            Vector& c = i < cut ? c0 : c1;
            for (std::size_t k = 0; k < dim; ++k) c[k] += rows(order[i], k);
        }
        for (double& v : c0) v /= static_cast<double>(cut);
        for (double& v : c1) v /= static_cast<double>(m - cut);
        double ss = 0.0;
        for (std::size_t i = 0; i < m; ++i)
            ss += squared_distance(rows.row_ptr(order[i]), (i < cut ? c0 : c1).data(), dim);
        if (ss < best_ss) {
            best_ss = ss;
            best_cut = cut;
        }
    }

    centers.assign(2, Vector(dim, 0.0));
    for (std::size_t i = 0; i < m; ++i) {
        Vector& c = centers[i < best_cut ? 0 : 1];
        for (std::size_t k = 0; k < dim; ++k) c[k] += rows(order[i], k);
    }
    for (double& v : centers[0]) v /= static_cast<double>(best_cut);
    for (double& v : centers[1]) v /= static_cast<double>(m - best_cut);
    return true;
}

}  // namespace

ClusterSet kmeans_rows(const Matrix& rows, std::size_t q, std::uint64_t seed,
                       std::size_t max_iters) {
    const std::size_t m = rows.rows();
    if (m == 0) throw std::invalid_argument("kmeans_rows: no rows");
    if (q == 0) throw std::invalid_argument("kmeans_rows: q must be positive");
    if (q >= m) return singleton_clusters(rows, q, seed);

    // Lloyd from several seeded inits; keep the lowest objective. Small q is
    // where a single init gets stuck, so spend the restarts there.
    const std::size_t restarts = q <= 16 ? 8 : 2;
    ClusterSet best;
    double best_ss = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < restarts; ++r) {
        ClusterSet candidate = lloyd_once(rows, q, derive_seed(seed, "restart", r), max_iters,
                                          nullptr);
        const double ss = within_cluster_ss(rows, candidate);
        if (ss < best_ss) {
            best_ss = ss;
            best = std::move(candidate);
        }
    }
    if (q == 2) {
        std::vector<Vector> centers;
        if (principal_split_centers(rows, centers)) {
            ClusterSet candidate =
                lloyd_once(rows, q, derive_seed(seed, "principal"), max_iters, &centers);
            const double ss = within_cluster_ss(rows, candidate);
            if (ss < best_ss) {
                best_ss = ss;
                best = std::move(candidate);
            }
        }
    }
    best.q_requested = q;
    best.seed = seed;
    return best;
}

std::vector<int> top_k_classes(const Vector& center, std::size_t k) {
    std::vector<int> idx(center.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](int a, int b) {
        const double pa = center[static_cast<std::size_t>(a)];
        const double pb = center[static_cast<std::size_t>(b)];
        if (pa != pb) return pa > pb;
        return a < b;
    });
    idx.resize(std::min(k, idx.size()));
    return idx;
}

double within_cluster_ss(const Matrix& rows, const ClusterSet& set) {
    double total = 0.0;
    for (const Cluster& cl : set.clusters)
        for (std::size_t i : cl.member_rows)
            total += squared_distance(rows.row_ptr(i), cl.center.data(), rows.cols());
    return total;
}

}  // namespace cliloop
