"""Graph convolutional segmentation of building footprints."""

from ._gcnseg import (
    Error,
    Graph,
    Model,
    cheb_apply,
    degree,
    eig_sym,
    grid_graph,
    init_model,
    lambda_max,
    laplacian,
    load_raster,
    metrics,
    nll_loss,
    patch_count,
    renormalized_adjacency,
    save_raster,
    slice_patches,
    synthetic_samples,
    train,
    verify,
)

__all__ = [
    "Error",
    "Graph",
    "Model",
    "cheb_apply",
    "degree",
    "eig_sym",
    "grid_graph",
    "init_model",
    "lambda_max",
    "laplacian",
    "load_raster",
    "metrics",
    "nll_loss",
    "patch_count",
    "renormalized_adjacency",
    "save_raster",
    "slice_patches",
    "synthetic_samples",
    "train",
    "verify",
]
