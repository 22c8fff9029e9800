#pragma once

#include <string>
#include <vector>

#include <Eigen/SparseCore>

#include "mpde/common.hpp"

namespace mpde::op {

enum class SymmetryTag { General, GraphLaplacianLike };

struct Triplet {
    Index row, col;
    double value;
};

// Row-major CSR with columns sorted in each row; mat-vec accumulates in
// column order so results are independent of assembly thread count.
struct SparseOperator {
    Index n_rows = 0, n_cols = 0;
    std::vector<Index> row_ptr;  // size n_rows + 1
    std::vector<Index> col_idx;
    std::vector<double> values;
    SymmetryTag tag = SymmetryTag::General;

    Index nnz() const { return static_cast<Index>(values.size()); }

    static SparseOperator from_triplets(Index n_rows, Index n_cols, std::vector<Triplet> trips,
                                        SymmetryTag tag = SymmetryTag::General);

    VectorXd apply(const VectorXd& v) const;
    // accumulate values[row]^T * r into out (size n_cols) for the given rows
    void apply_transpose_rows(const std::vector<Index>& rows, const VectorXd& r, VectorXd& out) const;
    VectorXd apply_row_subset(const std::vector<Index>& rows, const VectorXd& v) const;

    SparseOperator select_rows(const std::vector<Index>& rows) const;
    SparseOperator slice_cols(Index col_begin, Index col_end) const;  // keeps row count
    MatrixXd to_dense() const;
    Eigen::SparseMatrix<double> to_eigen() const;

    double max_row_l1_norm() const;
};

// L - diag(a) (the spec's shifted operator; dimensions must match)
SparseOperator shift(const SparseOperator& L, const VectorXd& a);

// C = A + B (same shape)
SparseOperator add(const SparseOperator& A, const SparseOperator& B);

// C = A * B via row-wise triplet accumulation
SparseOperator multiply(const SparseOperator& A, const SparseOperator& B);

// Stack A on top of B (same column count)
SparseOperator vstack(const SparseOperator& A, const SparseOperator& B);

// Text coordinate format: "n_rows n_cols nnz" then "row col value" lines.
void save_operator(const SparseOperator& op, const std::string& path);
SparseOperator load_operator(const std::string& path);

}  // namespace mpde::op
