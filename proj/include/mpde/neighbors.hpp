#pragma once

#include "mpde/common.hpp"

namespace mpde::knn {

struct NeighborTable {
    MatrixXi indices;       // N x k, ascending squared distance, ties by index
    MatrixXd sq_distances;  // N x k
    int k = 0;
};

// Exact k nearest within `points`, excluding self.
NeighborTable build(const MatrixXd& points, int k);

// Exact k nearest data points for each query row (self excluded when a query
// row coincides with the data row of the same index and `exclude_same_index`).
NeighborTable build(const MatrixXd& queries, const MatrixXd& data, int k,
                    bool exclude_same_index);

}  // namespace mpde::knn
