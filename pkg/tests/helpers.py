"""Shared test fixtures: random SPD factories, synthetic datasets, and the
arithmetic-harmonic-mean oracle used to cross-check geodesic midpoints."""

from __future__ import annotations

import numpy as np

from gmml import LabeledDataset


def rand_spd(rng: np.random.Generator, d: int, lo: float = 0.5, hi: float = 2.0) -> np.ndarray:
    """Random SPD matrix with eigenvalues drawn uniformly from [lo, hi]."""
    q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    w = rng.uniform(lo, hi, size=d)
    m = q @ np.diag(w) @ q.T
    return (m + m.T) / 2


def ahm_mean(a: np.ndarray, b: np.ndarray, tol: float = 1e-14) -> np.ndarray:
    """Geometric mean a #_{1/2} b by the arithmetic-harmonic iteration.

    A_{k+1} = (A_k + B_k)/2 and B_{k+1} = 2(A_k^{-1} + B_k^{-1})^{-1} both
    converge to the midpoint of the geodesic; entirely independent of the
    package's Cholesky-based path.
    """
    ak = np.asarray(a, dtype=float).copy()
    bk = np.asarray(b, dtype=float).copy()
    for _ in range(200):
        an = (ak + bk) / 2
        hn = 2 * np.linalg.inv(np.linalg.inv(ak) + np.linalg.inv(bk))
        ak, bk = an, (hn + hn.T) / 2
        if np.linalg.norm(ak - bk) < tol:
            break
    return (ak + bk) / 2


def spd_sqrt(a: np.ndarray) -> np.ndarray:
    """Principal square root via eigendecomposition (oracle path)."""
    w, v = np.linalg.eigh(a)
    return v @ np.diag(np.sqrt(w)) @ v.T


def make_blobs(
    rng: np.random.Generator,
    n_per_class: int = 40,
    centers=((0.0, 0.0), (8.0, 8.0)),
    sigma: float = 0.5,
    name: str = "blobs",
) -> LabeledDataset:
    """Well-separated isotropic Gaussian blobs, one per class."""
    centers = np.asarray(centers, dtype=float)
    pts = np.vstack([rng.normal(c, sigma, (n_per_class, centers.shape[1])) for c in centers])
    labels = np.repeat(np.arange(centers.shape[0]), n_per_class)
    return LabeledDataset(points=pts, labels=labels, name=name)


def make_anisotropic(
    rng: np.random.Generator,
    n_per_class: int = 100,
    d: int = 10,
    signal_sigma: float = 0.25,
    noise_sigma: float = 4.0,
    name: str = "aniso",
) -> LabeledDataset:
    """Two classes separated only along feature 0; the rest is loud noise.

    Euclidean k-NN is nearly blind here (noise dominates distances), while
    a metric that upweights feature 0 separates the classes easily.
    """
    n = 2 * n_per_class
    pts = rng.normal(0.0, noise_sigma, (n, d))
    labels = np.repeat([0, 1], n_per_class)
    pts[:, 0] = rng.normal(0.0, signal_sigma, n) + np.where(labels == 0, -1.0, 1.0)
    return LabeledDataset(points=pts, labels=labels, name=name)


def write_csv(path, data: LabeledDataset) -> None:
    """Dump a dataset as comma-delimited text with the label last."""
    rows = []
    for p, l in zip(data.points, data.labels):
        rows.append(",".join(repr(float(v)) for v in p) + f",{int(l)}")
    path.write_text("\n".join(rows) + "\n")
