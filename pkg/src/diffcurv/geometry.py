"""Affinity kernels, Markov diffusion operators, diffusion maps and distances.

The pipeline is: pairwise Gaussian affinities -> density-corrected
(anisotropic) normalization -> row-stochastic Markov operator -> spectral
decomposition.  Eigenvectors are scaled so that Euclidean distances between
full diffusion coordinates reproduce diffusion distances exactly, with the
first coordinate identically 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, Union

import numpy as np
from scipy.spatial.distance import cdist

from .errors import (
    ConvergenceFailure,
    DegenerateCloud,
    InvalidConfig,
    ZeroRow,
)

#: Above this size the dense full eigendecomposition gives way to an
#: iterative partial one and callers must pass n_components.
DENSE_EIG_LIMIT = 2000


def _freeze(a) -> np.ndarray:
    out = np.ascontiguousarray(a, dtype=np.float64)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class PointCloud:
    """N points in ambient dimension n, one point per row.

    All coordinates must be finite; ids, when given, must be unique and
    match the number of points.
    """

    points: np.ndarray
    ids: tuple[str, ...] | None = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2:
            raise InvalidConfig(f"points must be a 2-d array, got shape {pts.shape}")
        n, dim = pts.shape
        if n < 2:
            raise InvalidConfig(f"need at least 2 points, got {n}")
        if dim < 1:
            raise InvalidConfig("ambient dimension must be >= 1")
        if not np.all(np.isfinite(pts)):
            raise InvalidConfig("point coordinates contain NaN or Inf")
        if self.ids is not None:
            ids = tuple(str(s) for s in self.ids)
            if len(ids) != n:
                raise InvalidConfig(f"{len(ids)} ids for {n} points")
            if len(set(ids)) != n:
                raise InvalidConfig("point ids must be unique")
            object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "points", _freeze(pts))

    @property
    def n_points(self) -> int:
        return self.points.shape[0]

    @property
    def ambient_dim(self) -> int:
        return self.points.shape[1]


@dataclass(frozen=True)
class FixedBandwidth:
    """Use a fixed kernel bandwidth sigma (squared-distance units)."""

    sigma: float


@dataclass(frozen=True)
class AdaptiveKnn:
    """Set sigma to the mean squared distance to the k-th nearest neighbor."""

    k: int


BandwidthRule = Union[FixedBandwidth, AdaptiveKnn]


@dataclass(frozen=True)
class KernelConfig:
    """Kernel bandwidth rule plus density-normalization exponent alpha.

    alpha = 0 keeps the plain Gaussian kernel, alpha = 1 removes sampling
    density entirely.  bandwidth None resolves to AdaptiveKnn(ceil(log2 N)).
    """

    bandwidth: BandwidthRule | None = None
    alpha: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise InvalidConfig(f"alpha must be in [0, 1], got {self.alpha}")
        bw = self.bandwidth
        if isinstance(bw, FixedBandwidth) and not bw.sigma > 0:
            raise InvalidConfig(f"sigma must be positive, got {bw.sigma}")
        if isinstance(bw, AdaptiveKnn) and bw.k < 1:
            raise InvalidConfig(f"k must be >= 1, got {bw.k}")


@dataclass(frozen=True)
class AffinityMatrix:
    """Symmetric nonnegative affinities with strictly positive diagonal."""

    values: np.ndarray
    kind: Literal["gaussian", "anisotropic"]
    sigma: float  # bandwidth that produced the underlying Gaussian affinities

    def __post_init__(self):
        object.__setattr__(self, "values", _freeze(self.values))

    @property
    def n_points(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class DiffusionOperator:
    """Row-stochastic Markov matrix plus the affinity row sums (degrees).

    degrees induce the stationary weights pi = degrees / degrees.sum() used
    by diffusion distances.  Row sums must be 1 to within 1e-9 (fresh
    operators from markov_normalize hit 1e-10; matrix powers drift slightly).
    """

    p: np.ndarray
    degrees: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.p, dtype=np.float64)
        d = np.asarray(self.degrees, dtype=np.float64)
        if p.ndim != 2 or p.shape[0] != p.shape[1]:
            raise InvalidConfig(f"operator must be square, got shape {p.shape}")
        if d.shape != (p.shape[0],):
            raise InvalidConfig("degrees length must match operator size")
        if not np.all(d > 0):
            raise InvalidConfig("degrees must be strictly positive")
        if p.min() < 0 or p.max() > 1 + 1e-12:
            raise InvalidConfig("transition probabilities must lie in [0, 1]")
        err = np.abs(p.sum(axis=1) - 1.0).max()
        if err > 1e-9:
            raise InvalidConfig(f"rows must sum to 1, worst error {err:.3e}")
        object.__setattr__(self, "p", _freeze(p))
        object.__setattr__(self, "degrees", _freeze(d))

    @property
    def n_points(self) -> int:
        return self.p.shape[0]

    @property
    def stationary(self) -> np.ndarray:
        """Degree-normalized stationary weights pi."""
        return self.degrees / self.degrees.sum()


@dataclass(frozen=True)
class DiffusionMap:
    """Eigenpairs of a diffusion operator plus a default diffusion time.

    eigenvalues are sorted descending with lambda_1 = 1.  Column j of
    eigenvectors is the right eigenvector phi_j, scaled so that
    sum_i pi_i phi_j(i)^2 = 1; phi_1 is then identically 1 and Euclidean
    distances between full coordinate vectors equal diffusion distances.
    degrees are carried over from the operator for reconstruction.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    t: int
    degrees: np.ndarray

    def __post_init__(self):
        if self.t < 0:
            raise InvalidConfig(f"diffusion time must be >= 0, got {self.t}")
        object.__setattr__(self, "eigenvalues", _freeze(self.eigenvalues))
        object.__setattr__(self, "eigenvectors", _freeze(self.eigenvectors))
        object.__setattr__(self, "degrees", _freeze(self.degrees))

    @property
    def n_points(self) -> int:
        return self.eigenvectors.shape[0]

    @property
    def n_components(self) -> int:
        return self.eigenvalues.shape[0]


def pairwise_sq_dists(points: np.ndarray) -> np.ndarray:
    """Exact symmetric matrix of squared Euclidean distances."""
    return cdist(points, points, "sqeuclidean")


def resolve_sigma(cloud: PointCloud, cfg: KernelConfig) -> float:
    """Resolve the kernel bandwidth for a cloud under the config's rule."""
    bw = cfg.bandwidth
    if bw is None:
        bw = AdaptiveKnn(max(1, math.ceil(math.log2(cloud.n_points))))
    if isinstance(bw, FixedBandwidth):
        return float(bw.sigma)
    if bw.k >= cloud.n_points:
        raise InvalidConfig(f"k = {bw.k} must be < N = {cloud.n_points}")
    sq = pairwise_sq_dists(cloud.points)
    # Row-wise k-th smallest including the zero self-distance, i.e. the
    # k-th nearest neighbor.
    kth = np.partition(sq, bw.k, axis=1)[:, bw.k]
    sigma = float(kth.mean())
    if sigma <= 0:
        raise DegenerateCloud("adaptive bandwidth is zero (all points identical)")
    return sigma


def gaussian_affinity(cloud: PointCloud, cfg: KernelConfig | None = None) -> AffinityMatrix:
    """Gaussian affinities exp(-||x_i - x_j||^2 / sigma) with unit diagonal."""
    if cfg is None:
        cfg = KernelConfig()
    sigma = resolve_sigma(cloud, cfg)
    sq = pairwise_sq_dists(cloud.points)
    values = np.exp(-sq / sigma)
    return AffinityMatrix(values=values, kind="gaussian", sigma=sigma)


def anisotropic_normalize(g: AffinityMatrix, alpha: float) -> AffinityMatrix:
    """Divide affinities by (d_i d_j)^alpha where d_i are the row sums.

    alpha = 0 returns the input unchanged; alpha = 1 cancels sampling
    density so the diffusion geometry matches uniform sampling.
    """
    if g.kind != "gaussian":
        raise InvalidConfig("anisotropic normalization expects a gaussian affinity")
    if not 0.0 <= alpha <= 1.0:
        raise InvalidConfig(f"alpha must be in [0, 1], got {alpha}")
    d = g.values.sum(axis=1)
    q = d**alpha
    values = g.values / np.outer(q, q)
    return AffinityMatrix(values=values, kind="anisotropic", sigma=g.sigma)


def markov_normalize(k: AffinityMatrix) -> DiffusionOperator:
    """Row-normalize an affinity matrix into a Markov transition matrix."""
    values = k.values
    if values.min() < 0:
        raise InvalidConfig("affinities must be nonnegative")
    degrees = values.sum(axis=1)
    if np.any(degrees == 0):
        raise ZeroRow(f"{int((degrees == 0).sum())} affinity rows sum to zero")
    p = values / degrees[:, None]
    return DiffusionOperator(p=p, degrees=degrees)


def build_diffusion_operator(
    cloud: PointCloud, cfg: KernelConfig | None = None
) -> tuple[DiffusionOperator, float]:
    """Full kernel -> anisotropic -> Markov pipeline.

    Returns the operator together with the resolved bandwidth sigma.
    """
    if cfg is None:
        cfg = KernelConfig()
    g = gaussian_affinity(cloud, cfg)
    k = anisotropic_normalize(g, cfg.alpha)
    return markov_normalize(k), g.sigma


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    """Make the largest-magnitude entry of each column positive (first wins ties)."""
    idx = np.abs(vectors).argmax(axis=0)
    signs = np.sign(vectors[idx, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs[None, :]


def spectral_decompose(
    op: DiffusionOperator, t: int = 1, n_components: int | None = None
) -> DiffusionMap:
    """Eigendecompose a diffusion operator via its symmetric conjugate.

    D^{1/2} P D^{-1/2} is symmetric when P came from a symmetric affinity,
    so a symmetric solver gives a real spectrum; eigenvectors are converted
    back to right eigenvectors of P.  Dense full decomposition up to
    DENSE_EIG_LIMIT points, iterative partial decomposition above (pass
    n_components).
    """
    p, d = op.p, op.degrees
    n = p.shape[0]
    sqrt_d = np.sqrt(d)
    inv_sqrt_d = 1.0 / sqrt_d
    s = (sqrt_d[:, None] * p) * inv_sqrt_d[None, :]
    s = 0.5 * (s + s.T)  # guard the last-ulp asymmetry of the conjugation

    if n_components is None and n > DENSE_EIG_LIMIT:
        raise InvalidConfig(
            f"N = {n} exceeds the dense limit {DENSE_EIG_LIMIT}; pass n_components"
        )
    if n_components is not None and not 1 <= n_components <= n:
        raise InvalidConfig(f"n_components must be in [1, {n}]")

    if n_components is None or n_components == n:
        try:
            evals, psi = np.linalg.eigh(s)
        except np.linalg.LinAlgError as exc:
            raise ConvergenceFailure(f"dense symmetric eigensolver failed: {exc}") from exc
        evals = evals[::-1]
        psi = psi[:, ::-1]
    else:
        from scipy.sparse.linalg import ArpackNoConvergence, eigsh

        try:
            evals, psi = eigsh(s, k=n_components, which="LA")
        except ArpackNoConvergence as exc:
            res = float(np.linalg.norm(exc.eigenvalues)) if exc.eigenvalues is not None else float("nan")
            raise ConvergenceFailure(
                f"iterative eigensolver stalled ({len(exc.eigenvalues)} of "
                f"{n_components} pairs converged, residual norm {res:.3e})"
            ) from exc
        order = np.argsort(-evals, kind="stable")
        evals = evals[order]
        psi = psi[:, order]

    # Stable descending order with original-index tie-breaking.
    order = np.argsort(-evals, kind="stable")
    evals = evals[order]
    psi = _fix_signs(psi[:, order])
    total = d.sum()
    phi = math.sqrt(total) * (inv_sqrt_d[:, None] * psi)
    return DiffusionMap(eigenvalues=evals, eigenvectors=phi, t=t, degrees=d)


def diffusion_coordinates(dmap: DiffusionMap, t: int, d: int) -> np.ndarray:
    """Rows lambda_j^t phi_j(x_i) for j = 1..d (first coordinate included)."""
    if not 0 <= t:
        raise InvalidConfig(f"t must be >= 0, got {t}")
    if not 1 <= d <= dmap.n_components:
        raise InvalidConfig(f"d must be in [1, {dmap.n_components}], got {d}")
    scale = dmap.eigenvalues[:d] ** t
    return dmap.eigenvectors[:, :d] * scale[None, :]


def reconstruct_operator(dmap: DiffusionMap) -> np.ndarray:
    """Reassemble P from the eigenpairs (only exact for a full decomposition)."""
    lam, phi, d = dmap.eigenvalues, dmap.eigenvectors, dmap.degrees
    return (phi * lam[None, :]) @ phi.T * d[None, :] / d.sum()


def power_operator(op: DiffusionOperator, t: int) -> DiffusionOperator:
    """t-step transition matrix P^t with the original degrees retained."""
    if t < 1:
        raise InvalidConfig(f"t must be >= 1, got {t}")
    if t == 1:
        return op
    pt = np.linalg.matrix_power(op.p, t)
    return DiffusionOperator(p=pt, degrees=op.degrees)


def diffusion_distance(op: DiffusionOperator, t: int, i: int, j: int) -> float:
    """Distance between the t-step distributions of points i and j.

    Direct-sum form: sqrt( sum_z (P^t[i,z] - P^t[j,z])^2 / pi(z) ) with pi
    the degree-normalized stationary weights.  This is the oracle that the
    spectral coordinates are tested against.
    """
    if not 1 <= t:
        raise InvalidConfig(f"t must be >= 1, got {t}")
    n = op.n_points
    if not (0 <= i < n and 0 <= j < n):
        raise InvalidConfig(f"indices ({i}, {j}) out of range for N = {n}")
    pt = power_operator(op, t).p
    diff = pt[i] - pt[j]
    return float(np.sqrt((diff * diff / op.stationary).sum()))


def pairwise_diffusion_distances(op: DiffusionOperator, t: int) -> np.ndarray:
    """All-pairs diffusion distances at time t.

    Rows of P^t are weighted by pi^{-1/2} and pairwise distances computed
    with the Gram trick; bitwise-identical rows (duplicate points) map to
    exactly zero distance.
    """
    if t < 1:
        raise InvalidConfig(f"t must be >= 1, got {t}")
    pt = power_operator(op, t).p
    a = pt / np.sqrt(op.stationary)[None, :]
    gram = a @ a.T
    sq = np.diag(gram)[:, None] + np.diag(gram)[None, :] - 2.0 * gram
    sq = 0.5 * (sq + sq.T)
    np.maximum(sq, 0.0, out=sq)
    np.fill_diagonal(sq, 0.0)
    return np.sqrt(sq)
