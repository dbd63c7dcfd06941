"""Two-dimensional embeddings of per-flow feature vectors.

Four methods: PCA, Fisher LDA, classical (Torgerson) MDS and spectral
embedding over a k-nearest-neighbour graph. All are deterministic; every
eigenvector is sign-normalised so its first non-negligible entry is positive.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.csgraph
import scipy.sparse.linalg

from . import kernels
from .flow_model import FeatureVector

# above these sizes MDS/spectral avoid dense n x n eigenproblems
MDS_DENSE_LIMIT = 2000
SPECTRAL_DENSE_LIMIT = 1500
LDA_RIDGE = 1e-6
_REL_TOL = 1e-10


class EmbeddingError(ValueError):
    pass


@dataclass
class EmbeddingResult:
    method: str
    points: np.ndarray
    labels: list
    params: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)
    components: Optional[np.ndarray] = None  # (2, d) projection axes for linear methods

    def __post_init__(self):
        if self.points.shape != (len(self.labels), 2):
            raise EmbeddingError(f"points shape {self.points.shape} does not match {len(self.labels)} labels")
        if not np.all(np.isfinite(self.points)):
            raise EmbeddingError(f"{self.method}: non-finite coordinates")

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "params": self.params,
            "points": self.points.tolist(),
            "labels": list(self.labels),
            "meta": self.meta,
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["x", "y", "dataset"])
        for (x, y), label in zip(self.points.tolist(), self.labels):
            writer.writerow([repr(x), repr(y), label])
        return buf.getvalue()


@dataclass(frozen=True)
class Standardization:
    mean: np.ndarray
    scale: np.ndarray

    def apply(self, X: np.ndarray) -> np.ndarray:
        out = X - self.mean
        nz = self.scale > 0
        out[:, nz] /= self.scale[nz]
        out[:, ~nz] = 0.0
        return out


def as_matrix(vectors) -> np.ndarray:
    if isinstance(vectors, np.ndarray):
        return np.asarray(vectors, dtype=np.float64)
    vectors = list(vectors)
    if vectors and isinstance(vectors[0], FeatureVector):
        return np.array([v.values for v in vectors], dtype=np.float64)
    return np.asarray(vectors, dtype=np.float64)


def standardize(vectors) -> tuple[np.ndarray, Standardization]:
    """Zero mean and unit (population) variance per column.

    Constant columns are set to zero rather than divided by zero.
    """
    X = as_matrix(vectors)
    if X.ndim != 2 or X.shape[0] < 2:
        raise EmbeddingError("standardize needs at least 2 vectors")
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    # std of a constant float column can come out as rounding noise
    scale[scale <= _REL_TOL * np.maximum(np.abs(mean), 1.0)] = 0.0
    params = Standardization(mean, scale)
    return params.apply(X), params


def fix_signs(vecs: np.ndarray) -> np.ndarray:
    """Flip columns so each one's first non-negligible entry is positive."""
    vecs = vecs.copy()
    for j in range(vecs.shape[1]):
        col = vecs[:, j]
        big = np.abs(col) > 1e-8 * np.abs(col).max() if col.size else np.array([], dtype=bool)
        if big.any() and col[np.argmax(big)] < 0:
            vecs[:, j] = -col
    return vecs


def _eigh_desc(M: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    vals, vecs = np.linalg.eigh(M)
    order = np.argsort(vals)[::-1]
    return vals[order], vecs[:, order]


@dataclass(frozen=True)
class PCAFit:
    mean: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # columns, descending eigenvalue order

    def scores(self, X: np.ndarray, n_components: int = 2) -> np.ndarray:
        return (X - self.mean) @ self.eigenvectors[:, :n_components]


def pca_fit(X: np.ndarray) -> PCAFit:
    """Eigendecomposition of the (population) covariance matrix."""
    X = as_matrix(X)
    if X.shape[0] < 3:
        raise EmbeddingError("PCA needs at least 3 vectors")
    mean = X.mean(axis=0)
    Xc = X - mean
    cov = Xc.T @ Xc / X.shape[0]
    vals, vecs = _eigh_desc(cov)
    vals = np.clip(vals, 0.0, None)
    if np.sum(vals > _REL_TOL * max(vals[0], 1e-300)) < 2 or vals[0] <= 0:
        raise EmbeddingError("insufficient variance: fewer than 2 non-degenerate components")
    return PCAFit(mean, vals, fix_signs(vecs))


def pca_2d(X, labels: Sequence[str] | None = None) -> EmbeddingResult:
    X = as_matrix(X)
    fit = pca_fit(X)
    labels = list(labels) if labels is not None else [""] * X.shape[0]
    total = fit.eigenvalues.sum()
    return EmbeddingResult(
        "pca",
        fit.scores(X),
        labels,
        meta={
            "eigenvalues": fit.eigenvalues.tolist(),
            "explained_variance_ratio": (fit.eigenvalues[:2] / total).tolist(),
        },
        components=fit.eigenvectors[:, :2].T.copy(),
    )


def _class_index(labels: Sequence[str]) -> tuple[list, np.ndarray]:
    classes: dict = {}
    idx = np.fromiter((classes.setdefault(l, len(classes)) for l in labels), dtype=np.int64, count=len(labels))
    return list(classes), idx


def lda_2d(X, labels: Sequence[str]) -> EmbeddingResult:
    """Project onto the two leading Fisher discriminants.

    The generalized eigenproblem ``Sb w = lambda Sw w`` is solved with
    Sw-orthonormal eigenvectors, so the coordinates do not depend on an
    invertible affine change of the inputs (up to sign). With two classes
    only one discriminant exists; the second axis is then the leading
    principal direction of the data with the first axis projected out, and
    ``meta["second_axis"]`` says so.
    """
    X = as_matrix(X)
    labels = list(labels)
    if len(labels) != X.shape[0]:
        raise EmbeddingError("labels and vectors differ in length")
    classes, idx = _class_index(labels)
    if len(classes) < 2:
        raise EmbeddingError("LDA needs at least 2 classes")
    counts = np.bincount(idx)
    if counts.min() < 2:
        raise EmbeddingError("LDA needs at least 2 vectors per class")

    d = X.shape[1]
    mean = X.mean(axis=0)
    Sw = np.zeros((d, d))
    Sb = np.zeros((d, d))
    for c in range(len(classes)):
        Xk = X[idx == c]
        mu = Xk.mean(axis=0)
        D = Xk - mu
        Sw += D.T @ D
        diff = (mu - mean)[:, None]
        Sb += counts[c] * (diff @ diff.T)

    if np.trace(Sb) <= _REL_TOL * max(np.trace(Sw), 1e-300):
        raise EmbeddingError("no discriminative direction: class means coincide")

    regularized = False
    w_eig = np.linalg.eigvalsh(Sw)
    if w_eig[0] <= _REL_TOL * max(w_eig[-1], 1e-300):
        Sw = Sw + LDA_RIDGE * np.trace(Sw) / d * np.eye(d)
        regularized = True

    vals, vecs = scipy.linalg.eigh(Sb, Sw)
    order = np.argsort(vals)[::-1]
    vals, vecs = vals[order], vecs[:, order]
    n_disc = int(np.sum(vals > _REL_TOL * vals[0]))

    meta = {"eigenvalues": vals[: max(n_disc, 1)].tolist(), "regularized": regularized, "classes": classes}
    if n_disc >= 2:
        W = vecs[:, :2]
        meta["second_axis"] = "discriminant"
    else:
        w = vecs[:, 0]
        u = w / np.linalg.norm(w)
        Xc = X - mean
        resid = Xc - np.outer(Xc @ u, u)
        rvals, rvecs = _eigh_desc(resid.T @ resid / X.shape[0])
        W = np.column_stack([w, rvecs[:, 0]])
        meta["second_axis"] = "residual_pca"
    W = fix_signs(W)
    return EmbeddingResult("lda", (X - mean) @ W, labels, meta=meta, components=W.T.copy())


def _squared_distances(X: np.ndarray) -> np.ndarray:
    g = np.sum(X * X, axis=1)
    D2 = g[:, None] + g[None, :] - 2.0 * (X @ X.T)
    np.maximum(D2, 0.0, out=D2)
    np.fill_diagonal(D2, 0.0)
    return D2


def classical_mds(D2: np.ndarray, n_components: int = 2) -> tuple[np.ndarray, np.ndarray]:
    """Torgerson scaling of a squared-distance matrix.

    Returns coordinates (n, n_components) and the eigenvalues of the doubly
    centred Gram matrix in descending order.
    """
    n = D2.shape[0]
    J = np.eye(n) - 1.0 / n
    B = -0.5 * J @ D2 @ J
    vals, vecs = _eigh_desc((B + B.T) / 2)
    scale = max(abs(vals[0]), 1e-300)
    if vals[0] <= 0 or np.sum(vals > _REL_TOL * scale) < n_components:
        raise EmbeddingError("MDS: fewer than 2 positive eigenvalues")
    vecs = fix_signs(vecs[:, :n_components])
    return vecs * np.sqrt(vals[:n_components]), vals


def mds_2d(X, labels: Sequence[str] | None = None) -> EmbeddingResult:
    """Classical MDS on Euclidean distances.

    Small inputs build the doubly centred squared-distance matrix directly.
    For larger ones the same top eigenpairs are obtained from the d x d
    scatter matrix: for Euclidean distances the centred Gram matrix is
    ``Xc @ Xc.T``, whose nonzero spectrum it shares.
    """
    X = as_matrix(X)
    n = X.shape[0]
    if n < 3:
        raise EmbeddingError("MDS needs at least 3 vectors")
    labels = list(labels) if labels is not None else [""] * n
    if n <= MDS_DENSE_LIMIT:
        coords, vals = classical_mds(_squared_distances(X))
        path = "dense"
    else:
        Xc = X - X.mean(axis=0)
        svals, svecs = _eigh_desc(Xc.T @ Xc)
        scale = max(abs(svals[0]), 1e-300)
        if svals[0] <= 0 or np.sum(svals > _REL_TOL * scale) < 2:
            raise EmbeddingError("MDS: fewer than 2 positive eigenvalues")
        U = Xc @ svecs[:, :2] / np.sqrt(svals[:2])
        coords = fix_signs(U) * np.sqrt(svals[:2])
        vals = svals
        path = "gram"
    return EmbeddingResult(
        "mds", coords, labels, meta={"eigenvalues": [float(v) for v in vals[:10]], "solver": path}
    )


def knn_graph(X: np.ndarray, k: int) -> scipy.sparse.csr_matrix:
    """Symmetrised, unit-weight k-nearest-neighbour adjacency."""
    n = X.shape[0]
    nbrs = kernels.knn(X, k)
    rows = np.repeat(np.arange(n), k)
    A = scipy.sparse.coo_matrix((np.ones(n * k), (rows, nbrs.ravel())), shape=(n, n)).tocsr()
    A = A.maximum(A.T)
    A.data[:] = 1.0
    return A


def spectral_2d(X, labels: Sequence[str] | None = None, k: int = 10) -> EmbeddingResult:
    """Laplacian eigenmap on a symmetric kNN graph.

    Coordinates are the eigenvectors of the symmetric normalised Laplacian
    for its 2nd and 3rd smallest eigenvalues.
    """
    X = as_matrix(X)
    n = X.shape[0]
    if k < 1 or n < k + 1:
        raise EmbeddingError(f"spectral embedding needs k >= 1 and at least k+1 vectors (n={n}, k={k})")
    labels = list(labels) if labels is not None else [""] * n
    A = knn_graph(X, k)
    n_comp, _ = scipy.sparse.csgraph.connected_components(A, directed=False)
    if n_comp > 1:
        raise EmbeddingError(f"graph disconnected ({n_comp} components); increase k")
    deg = np.asarray(A.sum(axis=1)).ravel()
    dinv = 1.0 / np.sqrt(deg)
    S = scipy.sparse.diags(dinv) @ A @ scipy.sparse.diags(dinv)

    if n <= SPECTRAL_DENSE_LIMIT or n < 4:
        L = np.eye(n) - S.toarray()
        vals, vecs = scipy.linalg.eigh((L + L.T) / 2, subset_by_index=[0, 2])
        solver = "dense"
    else:
        # largest eigenpairs of S are the smallest of L = I - S
        v0 = np.sqrt(deg) * (1.0 + 0.5 * np.cos(np.arange(n)))
        svals, svecs = scipy.sparse.linalg.eigsh(S, k=3, which="LA", v0=v0, tol=1e-10)
        order = np.argsort(svals)[::-1]
        vals, vecs = 1.0 - svals[order], svecs[:, order]
        solver = "arpack"
    coords = fix_signs(vecs[:, 1:3])
    return EmbeddingResult(
        "spectral",
        coords,
        labels,
        params={"k": k},
        meta={"eigenvalues": vals.tolist(), "solver": solver, "edges": int(A.nnz // 2)},
    )


METHODS = ("pca", "lda", "mds", "spectral")


def embed(method: str, Z: np.ndarray, labels: Sequence[str], k: int = 10) -> EmbeddingResult:
    if method == "pca":
        return pca_2d(Z, labels)
    if method == "lda":
        return lda_2d(Z, labels)
    if method == "mds":
        return mds_2d(Z, labels)
    if method == "spectral":
        return spectral_2d(Z, labels, k=k)
    raise ValueError(f"unknown embedding method {method!r}; choose from {METHODS}")
