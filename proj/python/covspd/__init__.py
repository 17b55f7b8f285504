"""Covariance descriptors on SPD manifolds with a log-Euclidean RBF SVM."""

import json
import os

from ._covspd import (
    CovspdWarning,
    DataError,
    Error,
    NumericalError,
    UsageError,
    compute_covariance,
    fuse,
    gram_matrix,
    load_tensor,
    log_euclidean_distance,
    make_folds,
    map_point,
    matrix_log,
    preset_weights,
    rbf_kernel,
    regularize,
    resize_feature_maps,
    save_tensor,
    tensor_covariance,
    video_distance,
)
from . import _covspd

__all__ = [
    "CovspdWarning",
    "DataError",
    "Error",
    "NumericalError",
    "UsageError",
    "compute_covariance",
    "cross_validate",
    "extract",
    "fuse",
    "gram_matrix",
    "load_tensor",
    "log_euclidean_distance",
    "make_folds",
    "map_point",
    "matrix_log",
    "preset_weights",
    "rbf_kernel",
    "regularize",
    "resize_feature_maps",
    "save_tensor",
    "synthesize",
    "tensor_covariance",
    "video_distance",
]


def synthesize(directory, subjects=10, separation=0.5, seed=0):
    """Write a synthetic dataset into `directory`; returns the manifest path."""
    return _covspd._synthesize(os.fspath(directory), subjects, separation, seed)


def extract(manifest, out, **config):
    """Extract log-descriptors for a manifest into a store directory.

    Keyword arguments follow the pipeline config keys (regions, epsilon,
    ratio, resize, strict, ...). Returns the number of samples stored.
    """
    return _covspd._extract(os.fspath(manifest), os.fspath(out), json.dumps(config))


def cross_validate(store, **config):
    """Nested subject-independent cross-validation on a descriptor store.

    Returns the evaluation report as a dict with an extra "fold_accuracy" list.
    """
    return json.loads(_covspd._cross_validate(os.fspath(store), json.dumps(config)))
