"""PCA matrix denoising, bounds and downstream clustering."""

from ._core import (
    IoError,
    NumericalError,
    add_noise,
    adjusted_rand_index,
    bayes_t_estimator,
    frobenius_norm,
    generate,
    inf_operator_norm,
    kmeans,
    leave_one_out_residual,
    lower_bound_montecarlo,
    normalized_laplacian,
    pca_denoise,
    project_rows,
    run_experiments,
    select_rank,
    sign_cluster,
    spectral_norm,
    svd,
    theorem1_bounds,
    two_inf_norm,
)

__all__ = [
    "IoError",
    "NumericalError",
    "add_noise",
    "adjusted_rand_index",
    "bayes_t_estimator",
    "frobenius_norm",
    "generate",
    "inf_operator_norm",
    "kmeans",
    "leave_one_out_residual",
    "lower_bound_montecarlo",
    "normalized_laplacian",
    "pca_denoise",
    "project_rows",
    "run_experiments",
    "select_rank",
    "sign_cluster",
    "spectral_norm",
    "svd",
    "theorem1_bounds",
    "two_inf_norm",
]
