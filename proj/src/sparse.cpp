#include "mpde/sparse.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace mpde::op {

SparseOperator SparseOperator::from_triplets(Index n_rows, Index n_cols,
                                             std::vector<Triplet> trips, SymmetryTag tag) {
    std::sort(trips.begin(), trips.end(), [](const Triplet& a, const Triplet& b) {
        return a.row < b.row || (a.row == b.row && a.col < b.col);
    });
    SparseOperator op;
    op.n_rows = n_rows;
    op.n_cols = n_cols;
    op.tag = tag;
    op.row_ptr.assign(n_rows + 1, 0);
    op.col_idx.reserve(trips.size());
    op.values.reserve(trips.size());
    for (std::size_t i = 0; i < trips.size();) {
        Index r = trips[i].row, c = trips[i].col;
        if (r < 0 || r >= n_rows || c < 0 || c >= n_cols)
            throw ConfigError("triplet out of bounds");
        double v = 0.0;
        while (i < trips.size() && trips[i].row == r && trips[i].col == c) v += trips[i++].value;
        op.col_idx.push_back(c);
        op.values.push_back(v);
        op.row_ptr[r + 1]++;
    }
    for (Index r = 0; r < n_rows; ++r) op.row_ptr[r + 1] += op.row_ptr[r];
    return op;
}

VectorXd SparseOperator::apply(const VectorXd& v) const {
    if (v.size() != n_cols) throw ConfigError("apply: length mismatch");
    VectorXd out = VectorXd::Zero(n_rows);
#pragma omp parallel for schedule(static)
    for (Index r = 0; r < n_rows; ++r) {
        double acc = 0.0;
        for (Index p = row_ptr[r]; p < row_ptr[r + 1]; ++p) acc += values[p] * v[col_idx[p]];
        out[r] = acc;
    }
    return out;
}

void SparseOperator::apply_transpose_rows(const std::vector<Index>& rows, const VectorXd& r,
                                          VectorXd& out) const {
    if (r.size() != static_cast<Index>(rows.size()))
        throw ConfigError("apply_transpose_rows: length mismatch");
    for (std::size_t s = 0; s < rows.size(); ++s) {
        Index row = rows[s];
        for (Index p = row_ptr[row]; p < row_ptr[row + 1]; ++p)
            out[col_idx[p]] += values[p] * r[s];
    }
}

VectorXd SparseOperator::apply_row_subset(const std::vector<Index>& rows, const VectorXd& v) const {
    VectorXd out(static_cast<Index>(rows.size()));
    for (std::size_t s = 0; s < rows.size(); ++s) {
        Index row = rows[s];
        double acc = 0.0;
        for (Index p = row_ptr[row]; p < row_ptr[row + 1]; ++p) acc += values[p] * v[col_idx[p]];
        out[static_cast<Index>(s)] = acc;
    }
    return out;
}

SparseOperator SparseOperator::select_rows(const std::vector<Index>& rows) const {
    SparseOperator out;
    out.n_rows = static_cast<Index>(rows.size());
    out.n_cols = n_cols;
    out.tag = SymmetryTag::General;
    out.row_ptr.assign(out.n_rows + 1, 0);
    for (std::size_t s = 0; s < rows.size(); ++s)
        out.row_ptr[s + 1] = out.row_ptr[s] + (row_ptr[rows[s] + 1] - row_ptr[rows[s]]);
    out.col_idx.resize(out.row_ptr.back());
    out.values.resize(out.row_ptr.back());
    for (std::size_t s = 0; s < rows.size(); ++s) {
        Index src = row_ptr[rows[s]], len = row_ptr[rows[s] + 1] - src, dst = out.row_ptr[s];
        std::copy_n(col_idx.begin() + src, len, out.col_idx.begin() + dst);
        std::copy_n(values.begin() + src, len, out.values.begin() + dst);
    }
    return out;
}

SparseOperator SparseOperator::slice_cols(Index col_begin, Index col_end) const {
    std::vector<Triplet> trips;
    for (Index r = 0; r < n_rows; ++r)
        for (Index p = row_ptr[r]; p < row_ptr[r + 1]; ++p)
            if (col_idx[p] >= col_begin && col_idx[p] < col_end)
                trips.push_back({r, col_idx[p] - col_begin, values[p]});
    return from_triplets(n_rows, col_end - col_begin, std::move(trips));
}

MatrixXd SparseOperator::to_dense() const {
    MatrixXd out = MatrixXd::Zero(n_rows, n_cols);
    for (Index r = 0; r < n_rows; ++r)
        for (Index p = row_ptr[r]; p < row_ptr[r + 1]; ++p) out(r, col_idx[p]) = values[p];
    return out;
}

Eigen::SparseMatrix<double> SparseOperator::to_eigen() const {
    Eigen::SparseMatrix<double> M(n_rows, n_cols);
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(values.size());
    for (Index r = 0; r < n_rows; ++r)
        for (Index p = row_ptr[r]; p < row_ptr[r + 1]; ++p)
            trips.emplace_back(static_cast<int>(r), static_cast<int>(col_idx[p]), values[p]);
    M.setFromTriplets(trips.begin(), trips.end());
    return M;
}

double SparseOperator::max_row_l1_norm() const {
    double best = 0.0;
    for (Index r = 0; r < n_rows; ++r) {
        double acc = 0.0;
        for (Index p = row_ptr[r]; p < row_ptr[r + 1]; ++p) acc += std::abs(values[p]);
        best = std::max(best, acc);
    }
    return best;
}

SparseOperator shift(const SparseOperator& L, const VectorXd& a) {
    if (a.size() != L.n_rows || L.n_rows > L.n_cols)
        throw ConfigError("shift: dimension mismatch");
    std::vector<Triplet> trips;
    trips.reserve(L.values.size() + a.size());
    for (Index r = 0; r < L.n_rows; ++r)
        for (Index p = L.row_ptr[r]; p < L.row_ptr[r + 1]; ++p)
            trips.push_back({r, L.col_idx[p], L.values[p]});
    for (Index r = 0; r < a.size(); ++r) trips.push_back({r, r, -a[r]});
    return SparseOperator::from_triplets(L.n_rows, L.n_cols, std::move(trips));
}

SparseOperator add(const SparseOperator& A, const SparseOperator& B) {
    if (A.n_rows != B.n_rows || A.n_cols != B.n_cols) throw ConfigError("add: shape mismatch");
    std::vector<Triplet> trips;
    trips.reserve(A.values.size() + B.values.size());
    for (const SparseOperator* M : {&A, &B})
        for (Index r = 0; r < M->n_rows; ++r)
            for (Index p = M->row_ptr[r]; p < M->row_ptr[r + 1]; ++p)
                trips.push_back({r, M->col_idx[p], M->values[p]});
    return SparseOperator::from_triplets(A.n_rows, A.n_cols, std::move(trips));
}

SparseOperator multiply(const SparseOperator& A, const SparseOperator& B) {
    if (A.n_cols != B.n_rows) throw ConfigError("multiply: shape mismatch");
    std::vector<Triplet> trips;
    for (Index r = 0; r < A.n_rows; ++r)
        for (Index p = A.row_ptr[r]; p < A.row_ptr[r + 1]; ++p) {
            Index mid = A.col_idx[p];
            double av = A.values[p];
            for (Index q = B.row_ptr[mid]; q < B.row_ptr[mid + 1]; ++q)
                trips.push_back({r, B.col_idx[q], av * B.values[q]});
        }
    return SparseOperator::from_triplets(A.n_rows, B.n_cols, std::move(trips));
}

SparseOperator vstack(const SparseOperator& A, const SparseOperator& B) {
    if (A.n_cols != B.n_cols) throw ConfigError("vstack: column mismatch");
    std::vector<Triplet> trips;
    trips.reserve(A.values.size() + B.values.size());
    for (Index r = 0; r < A.n_rows; ++r)
        for (Index p = A.row_ptr[r]; p < A.row_ptr[r + 1]; ++p)
            trips.push_back({r, A.col_idx[p], A.values[p]});
    for (Index r = 0; r < B.n_rows; ++r)
        for (Index p = B.row_ptr[r]; p < B.row_ptr[r + 1]; ++p)
            trips.push_back({A.n_rows + r, B.col_idx[p], B.values[p]});
    return SparseOperator::from_triplets(A.n_rows + B.n_rows, A.n_cols, std::move(trips));
}

void save_operator(const SparseOperator& op, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path);
    out << op.n_rows << " " << op.n_cols << " " << op.nnz() << "\n";
    for (Index r = 0; r < op.n_rows; ++r)
        for (Index p = op.row_ptr[r]; p < op.row_ptr[r + 1]; ++p)
            out << r << " " << op.col_idx[p] << " " << fmt17(op.values[p]) << "\n";
}

SparseOperator load_operator(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read " + path);
    Index n_rows, n_cols, nnz;
    in >> n_rows >> n_cols >> nnz;
    std::vector<Triplet> trips;
    trips.reserve(nnz);
    for (Index i = 0; i < nnz; ++i) {
        Triplet t{};
        in >> t.row >> t.col >> t.value;
        trips.push_back(t);
    }
    if (!in) throw ConfigError("malformed operator file " + path);
    return SparseOperator::from_triplets(n_rows, n_cols, std::move(trips));
}

}  // namespace mpde::op
