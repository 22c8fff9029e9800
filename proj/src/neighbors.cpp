#include "mpde/neighbors.hpp"

#include <algorithm>
#include <vector>

namespace mpde::knn {

namespace {
struct Cand {
    double d2;
    Index idx;
    bool operator<(const Cand& o) const { return d2 < o.d2 || (d2 == o.d2 && idx < o.idx); }
};
}  // namespace

NeighborTable build(const MatrixXd& queries, const MatrixXd& data, int k, bool exclude_same_index) {
    Index nq = queries.rows(), nd = data.rows();
    if (k < 1 || k >= nd + (exclude_same_index ? 0 : 1))
        throw ConfigError("knn: need 1 <= k < N");
    NeighborTable table;
    table.k = k;
    table.indices.resize(nq, k);
    table.sq_distances.resize(nq, k);

#pragma omp parallel for schedule(static)
    for (Index i = 0; i < nq; ++i) {
        std::vector<Cand> cands;
        cands.reserve(nd);
        for (Index j = 0; j < nd; ++j) {
            if (exclude_same_index && j == i) continue;
            cands.push_back({(queries.row(i) - data.row(j)).squaredNorm(), j});
        }
        std::partial_sort(cands.begin(), cands.begin() + k, cands.end());
        for (int s = 0; s < k; ++s) {
            table.indices(i, s) = static_cast<int>(cands[s].idx);
            table.sq_distances(i, s) = cands[s].d2;
        }
    }
    return table;
}

NeighborTable build(const MatrixXd& points, int k) { return build(points, points, k, true); }

}  // namespace mpde::knn
