"""Frechet distance between Gaussian fits of feature sets.

FID = ||mu_A - mu_B||^2 + Tr(Sig_A + Sig_B - 2 (Sig_A Sig_B)^{1/2}).

The cross term uses the symmetrized product Sig_A^{1/2} Sig_B Sig_A^{1/2}:
its eigenvalues are clipped at zero (logged) so float noise never produces a
complex square root.
"""

import logging

import numpy as np

log = logging.getLogger(__name__)

SHRINKAGE_EPS = 1e-6


def _psd_sqrt(mat):
    vals, vecs = np.linalg.eigh((mat + mat.T) / 2.0)
    clipped = np.clip(vals, 0.0, None)
    if (vals < -1e-8).any():
        log.info("clipped %d negative eigenvalues (min %.3e)", (vals < 0).sum(), vals.min())
    return (vecs * np.sqrt(clipped)) @ vecs.T


def frechet_from_stats(mu_a, sig_a, mu_b, sig_b):
    mu_a = np.asarray(mu_a, np.float64)
    mu_b = np.asarray(mu_b, np.float64)
    sig_a = np.atleast_2d(np.asarray(sig_a, np.float64))
    sig_b = np.atleast_2d(np.asarray(sig_b, np.float64))
    diff = mu_a - mu_b
    root_a = _psd_sqrt(sig_a)
    inner = root_a @ sig_b @ root_a
    vals = np.linalg.eigvalsh((inner + inner.T) / 2.0)
    tr_cross = np.sqrt(np.clip(vals, 0.0, None)).sum()
    fid = float(diff @ diff + np.trace(sig_a) + np.trace(sig_b) - 2.0 * tr_cross)
    return max(fid, 0.0)


def feature_stats(feats, shrinkage=SHRINKAGE_EPS):
    """(mean, covariance) of a feature set; shrinkage applied and logged when
    the sample count cannot support a full-rank covariance."""
    feats = np.asarray(feats, np.float64)
    if feats.ndim != 2 or len(feats) < 2:
        raise ValueError(f"need at least 2 feature rows, got shape {feats.shape}")
    mu = feats.mean(axis=0)
    sig = np.cov(feats, rowvar=False)
    sig = np.atleast_2d(sig)
    if len(feats) < feats.shape[1] + 1:
        log.info("covariance shrinkage eps=%.1e applied (n=%d, dim=%d)",
                 shrinkage, len(feats), feats.shape[1])
        sig = sig + shrinkage * np.eye(feats.shape[1])
    return mu, sig


def frechet_distance(feats_a, feats_b):
    mu_a, sig_a = feature_stats(feats_a)
    mu_b, sig_b = feature_stats(feats_b)
    return frechet_from_stats(mu_a, sig_a, mu_b, sig_b)
