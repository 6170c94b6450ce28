"""Common spatial patterns via the generalized eigenproblem, one-vs-rest.

For class c with mean covariance S_c and rest covariance S_r, the filters W
solve S_c w = lambda (S_c + S_r) w. scipy returns eigenvectors normalized so
that W.T (S_c + S_r) W = I; the extreme-eigenvalue filters maximize or
minimize the variance ratio between the class and the rest. Features are
log-variances of the spatially filtered signals, unregularized.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh

from ..signal_core.types import EpochSet, ParameterError, ShapeError, SignalError

log = logging.getLogger(__name__)

DEFAULT_N_COMPONENTS = 4
LOG_EPS = 1e-20


class CspFitError(SignalError):
    """Singular composite covariance; reject more channels first."""


@dataclass
class CspModel:
    """Per-class spatial filter banks and the covariances they came from.

    ``filters[c]`` is [n_channels x n_components] for class c; the first
    n_components/2 columns carry the largest eigenvalues (variance high for
    the class), the rest the smallest.
    """

    filters: np.ndarray         # [n_classes x n_channels x n_components]
    class_covs: np.ndarray      # [n_classes x n_channels x n_channels]
    rest_covs: np.ndarray       # [n_classes x n_channels x n_channels]
    eigenvalues: np.ndarray     # [n_classes x n_components]
    class_names: tuple

    @property
    def n_channels(self) -> int:
        return self.filters.shape[1]

    @property
    def n_features(self) -> int:
        return self.filters.shape[0] * self.filters.shape[2]


def _mean_epoch_cov(epochs: np.ndarray) -> np.ndarray:
    centered = epochs - epochs.mean(axis=2, keepdims=True)
    n_frames = epochs.shape[2]
    covs = np.einsum("eif,ejf->eij", centered, centered) / (n_frames - 1)
    return covs.mean(axis=0)


def _rank_aware_generalized_eig(s_class: np.ndarray, composite: np.ndarray,
                                n_components: int):
    """Solve s_class w = lambda composite w restricted to the non-null
    subspace of the composite covariance.

    Re-referenced (common average) data is rank deficient by one, which
    makes the composite only positive SEMI-definite; whitening in its
    retained eigenbasis sidesteps that without any shrinkage. For full-rank
    inputs this reduces to the ordinary generalized eigensolution, with
    W.T composite W = I on the retained subspace.
    """
    try:
        comp_vals, comp_vecs = eigh(composite)
    except np.linalg.LinAlgError as exc:
        raise CspFitError(f"eigendecomposition failed: {exc}") from exc
    tol = comp_vals.max() * 1e-10
    keep = comp_vals > tol
    if int(keep.sum()) < max(n_components, 2):
        raise CspFitError(
            f"composite covariance rank {int(keep.sum())} too low for "
            f"{n_components} components; reject bad channels before fitting")
    whitener = comp_vecs[:, keep] / np.sqrt(comp_vals[keep])  # [n_ch x k]
    eigvals, rotated = eigh(whitener.T @ s_class @ whitener)
    eigvecs = whitener @ rotated
    if not np.all(np.isfinite(eigvecs)):
        raise CspFitError("non-finite spatial filters")
    return eigvals, eigvecs


def csp_fit(epoch_set: EpochSet, n_components: int = DEFAULT_N_COMPONENTS) -> CspModel:
    """Fit one-vs-rest CSP filters on labeled epochs.

    Parameters
    ----------
    epoch_set : EpochSet
        Training epochs; needs >= 2 classes with >= 2 epochs each.
    n_components : int
        Filters kept per class (half from each end of the spectrum).
    """
    labels = epoch_set.labels
    present = np.unique(labels)
    if len(present) < 2:
        raise ParameterError("CSP needs at least two classes present")
    if n_components < 2 or n_components % 2 != 0:
        raise ParameterError("n_components must be even and >= 2")
    for c in present:
        if np.sum(labels == c) < 2:
            raise ParameterError(
                f"class {epoch_set.class_names[c]!r} has fewer than 2 epochs")

    n_classes = len(epoch_set.class_names)
    n_channels = epoch_set.n_channels
    filters = np.zeros((n_classes, n_channels, n_components))
    class_covs = np.zeros((n_classes, n_channels, n_channels))
    rest_covs = np.zeros_like(class_covs)
    eigenvalues = np.zeros((n_classes, n_components))

    for c in range(n_classes):
        if c not in present:
            raise ParameterError(
                f"class {epoch_set.class_names[c]!r} missing from training data")
        s_class = _mean_epoch_cov(epoch_set.epochs[labels == c])
        s_rest = _mean_epoch_cov(epoch_set.epochs[labels != c])
        composite = s_class + s_rest
        eigvals, eigvecs = _rank_aware_generalized_eig(s_class, composite,
                                                       n_components)
        half = n_components // 2
        order = np.concatenate([np.arange(len(eigvals) - 1,
                                          len(eigvals) - 1 - half, -1),
                                np.arange(half)])
        filters[c] = eigvecs[:, order]
        eigenvalues[c] = eigvals[order]
        class_covs[c] = s_class
        rest_covs[c] = s_rest

    return CspModel(filters=filters, class_covs=class_covs, rest_covs=rest_covs,
                    eigenvalues=eigenvalues, class_names=epoch_set.class_names)


def csp_transform(model: CspModel, epoch_set: EpochSet) -> np.ndarray:
    """Log-variance of each spatially filtered signal, [n_epochs x n_features].

    No shrinkage or regularization is applied; zero-variance projections are
    epsilon-guarded (and logged) instead of producing -inf.
    """
    if epoch_set.n_channels != model.n_channels:
        raise ShapeError(
            f"epochs have {epoch_set.n_channels} channels, CSP was fit on "
            f"{model.n_channels}")
    return csp_transform_array(model, epoch_set.epochs)


def csp_transform_array(model: CspModel, epochs: np.ndarray) -> np.ndarray:
    """Same as :func:`csp_transform` for a bare [n x channels x frames] array."""
    if epochs.shape[1] != model.n_channels:
        raise ShapeError("channel count does not match the fitted CSP model")
    blocks = []
    for c in range(model.filters.shape[0]):
        projected = np.einsum("kj,ejf->ekf", model.filters[c].T, epochs)
        variances = projected.var(axis=2, ddof=1)
        if np.any(variances <= LOG_EPS):
            log.warning("zero-variance CSP projection; epsilon-guarding log")
        blocks.append(np.log(np.maximum(variances, LOG_EPS)))
    return np.concatenate(blocks, axis=1)
