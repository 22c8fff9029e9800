"""Mesh-free solver for elliptic PDEs on point-cloud manifolds.

The heavy lifting lives in the compiled extension ``mpde._core``; this
package re-exports it and adds a couple of small conveniences.
"""

from ._core import (
    ConfigError,
    NumericalFailure,
    assemble_operator,
    diffusion_kappa,
    embed,
    estimate_density,
    exact_solution,
    gram_a,
    knn,
    rhs_f,
    run_experiment,
    sample_cloud,
    set_threads,
    solve_closed,
    test_grid,
    train_nn,
)

__all__ = [
    "ConfigError",
    "NumericalFailure",
    "assemble_operator",
    "diffusion_kappa",
    "embed",
    "estimate_density",
    "exact_solution",
    "gram_a",
    "knn",
    "rhs_f",
    "run_experiment",
    "sample_cloud",
    "set_threads",
    "solve_closed",
    "test_grid",
    "train_nn",
    "assemble_scipy",
]


def assemble_scipy(points, kappa, epsilon, d, k, convention="matched", scale=1.15):
    """Assemble the discrete operator as a ``scipy.sparse.csr_matrix``."""
    import scipy.sparse as sp

    n_rows, n_cols, rows, cols, vals = assemble_operator(
        points, kappa, epsilon, d, k, convention, scale
    )
    return sp.coo_matrix((vals, (rows, cols)), shape=(n_rows, n_cols)).tocsr()
