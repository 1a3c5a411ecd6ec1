#pragma once

#include <cstdint>
#include <vector>

#include "cliloop/matrix.hpp"

namespace cliloop {

struct Cluster {
    std::vector<std::size_t> member_rows;  // ascending indices into the row matrix
    Vector center;                         // componentwise mean of member rows
};

struct ClusterSet {
    std::vector<Cluster> clusters;  // ordered by smallest member row
    std::size_t q_requested = 0;
    std::uint64_t seed = 0;
};

// K-means over probability rows. With q >= row count the rows are grouped
// by exact content, one cluster per distinct row. Otherwise k-means++
// seeded init followed by Lloyd iterations until the assignment is a
// fixpoint or max_iters; empty clusters are repaired by stealing the point
// farthest from its assigned center.
ClusterSet kmeans_rows(const Matrix& rows, std::size_t q, std::uint64_t seed,
                       std::size_t max_iters = 100);

// Indices of the k largest entries; ties broken by ascending index.
std::vector<int> top_k_classes(const Vector& center, std::size_t k);

double squared_distance(const double* a, const double* b, std::size_t n);

// Total within-cluster sum of squared distances to the centroid.
double within_cluster_ss(const Matrix& rows, const ClusterSet& set);

}  // namespace cliloop
