"""Local polynomial weights on a fixed design.

Univariate weights of degree ``d`` feed the linear mean estimators; bivariate
local linear weights restricted to design pairs above the diagonal feed the
covariance kernel estimators.  Everything here depends on the design and the
bandwidth only, never on the data, so weight matrices can be reused across
replications.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from densesparse.exceptions import InsufficientSupport, SingularDesign

__all__ = [
    "DesignGrid",
    "WeightVector",
    "BivariateWeightField",
    "WeightReport",
    "epanechnikov",
    "weight_matrix",
    "local_poly_weights",
    "bivariate_weights",
    "smooth_upper",
    "check_weight_assumptions",
    "COND_LIMIT",
]

#: Largest accepted condition number of a local normal-equations matrix.
COND_LIMIT = 1e12


def epanechnikov(u):
    """Epanechnikov kernel ``0.75 (1 - u^2)`` on ``[-1, 1]``, zero outside."""
    u = np.asarray(u, dtype=float)
    return np.where(np.abs(u) < 1.0, 0.75 * (1.0 - u * u), 0.0)


@dataclass(frozen=True)
class DesignGrid:
    """Ordered sampling locations of one sample on the unit interval."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=float).ravel()
        if pts.size == 0:
            raise ValueError("design grid must contain at least one point")
        if not np.all(np.isfinite(pts)):
            raise ValueError("design grid contains non-finite points")
        if np.any(np.diff(pts) <= 0):
            raise ValueError("design points must be strictly increasing")
        if pts[0] < 0.0 or pts[-1] > 1.0:
            raise ValueError("design points must lie in [0, 1]")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def p(self) -> int:
        return self.points.size

    def __len__(self) -> int:
        return self.points.size

    @classmethod
    def uniform(cls, p: int) -> "DesignGrid":
        """``p`` equispaced points including both end points."""
        return cls(np.linspace(0.0, 1.0, p))

    @classmethod
    def midpoints(cls, p: int) -> "DesignGrid":
        """Cell midpoints ``(j - 1/2) / p``, ``j = 1..p``."""
        return cls((np.arange(1, p + 1) - 0.5) / p)

    def __eq__(self, other):
        if not isinstance(other, DesignGrid):
            return NotImplemented
        return self.points.shape == other.points.shape and bool(
            np.all(self.points == other.points)
        )

    def __hash__(self):
        return hash(self.points.tobytes())


@dataclass(frozen=True)
class WeightVector:
    """Weights of a linear smoother at a single target."""

    target: float
    bandwidth: float
    degree: int
    values: np.ndarray
    grid: DesignGrid = field(repr=False)

    @property
    def w3_constant(self) -> float:
        """``max_j |w_j| * p * h``; bounded in ``p`` and ``h`` for a sane design."""
        return float(np.max(np.abs(self.values)) * self.grid.p * self.bandwidth)

    def apply(self, y) -> float:
        return float(self.values @ np.asarray(y, dtype=float))


@dataclass(frozen=True)
class BivariateWeightField:
    """Pair weights ``w[j, l]`` of a local linear surface fit at ``(t, s)``.

    Entries outside the admissible pairs (``j < l``, or ``j <= l`` when
    ``strict`` is false) are exactly zero.
    """

    target: tuple
    bandwidth: float
    strict: bool
    values: np.ndarray
    grid: DesignGrid = field(repr=False)

    def apply(self, surface) -> float:
        return float(np.sum(self.values * np.asarray(surface, dtype=float)))


def _as_grid(grid) -> DesignGrid:
    return grid if isinstance(grid, DesignGrid) else DesignGrid(grid)


def weight_matrix(targets, grid, h: float, d: int, kernel=epanechnikov) -> np.ndarray:
    """Local polynomial weights for many targets at once.

    Parameters
    ----------
    targets : array_like
        Points in ``[0, 1]`` at which the smoother is evaluated.
    grid : DesignGrid or array_like
        Design points.
    h : float
        Bandwidth; only points with ``|t_j - t| < h`` receive weight.
    d : int
        Polynomial degree (``d >= 0``).

    Returns
    -------
    ndarray
        Array of shape ``(len(targets), p)``; row ``g`` holds the weights
        ``w_j(targets[g]; h)``.

    Raises
    ------
    InsufficientSupport
        If some target has fewer than ``d + 1`` design points in its window.
    SingularDesign
        If a local normal-equations matrix has condition number above
        :data:`COND_LIMIT`.
    """
    if h <= 0:
        raise ValueError("bandwidth must be positive")
    if d < 0:
        raise ValueError("degree must be nonnegative")
    grid = _as_grid(grid)
    t = np.atleast_1d(np.asarray(targets, dtype=float))
    u = (grid.points[None, :] - t[:, None]) / h
    k = kernel(u)
    support = np.count_nonzero(k > 0, axis=1)
    bad = np.flatnonzero(support < d + 1)
    if bad.size:
        raise InsufficientSupport(
            f"{bad.size} target(s) have fewer than {d + 1} design points within "
            f"h={h:g} (first at t={t[bad[0]]:.6g}, {support[bad[0]]} point(s))"
        )
    powers = u[:, :, None] ** np.arange(d + 1)  # (G, p, d+1)
    kx = k[:, :, None] * powers
    gram = np.einsum("gja,gjb->gab", kx, powers)
    cond = np.linalg.cond(gram)
    if np.any(~np.isfinite(cond) | (cond > COND_LIMIT)):
        g = int(np.argmax(np.where(np.isfinite(cond), cond, np.inf)))
        raise SingularDesign(
            f"local design at t={t[g]:.6g} is singular (condition number {cond[g]:.3g})"
        )
    e1 = np.zeros(d + 1)
    e1[0] = 1.0
    coef = np.linalg.solve(gram, np.broadcast_to(e1, (t.size, d + 1))[..., None])[..., 0]
    return np.einsum("gja,ga->gj", kx, coef)


def local_poly_weights(t: float, grid, h: float, d: int) -> WeightVector:
    """Weights of the degree-``d`` local polynomial smoother at ``t``."""
    grid = _as_grid(grid)
    w = weight_matrix([t], grid, h, d)[0]
    w.setflags(write=False)
    return WeightVector(target=float(t), bandwidth=float(h), degree=int(d), values=w, grid=grid)


def _pair_mask(p: int, strict: bool) -> np.ndarray:
    return np.triu(np.ones((p, p)), k=1 if strict else 0)


def bivariate_weights(t: float, s: float, grid, h: float, strict: bool = True,
                      kernel=epanechnikov) -> BivariateWeightField:
    """Local linear surface weights at ``(t, s)`` built on pairs above the diagonal.

    The fit regresses on ``(1, t_j - t, t_l - s)`` with product kernel weights
    ``K((t_j - t)/h) K((t_l - s)/h)``, using only pairs ``j < l`` (``strict``)
    or ``j <= l``.  The returned weights reproduce constants and both linear
    coordinates exactly.
    """
    if t > s:
        raise ValueError("bivariate weights are defined on the half-plane t <= s")
    grid = _as_grid(grid)
    x = grid.points
    u = (x - t) / h
    v = (x - s) / h
    kk = np.outer(kernel(u), kernel(v)) * _pair_mask(grid.p, strict)
    if np.count_nonzero(kk) < 3:
        raise InsufficientSupport(
            f"fewer than 3 admissible design pairs near ({t:.6g}, {s:.6g}) for h={h:g}"
        )
    uu = np.broadcast_to(u[:, None], kk.shape)
    vv = np.broadcast_to(v[None, :], kk.shape)
    basis = np.stack([np.ones_like(kk), uu, vv])  # (3, p, p)
    gram = np.einsum("ajl,bjl,jl->ab", basis, basis, kk)
    cond = np.linalg.cond(gram)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise SingularDesign(
            f"bivariate design at ({t:.6g}, {s:.6g}) is singular (condition number {cond:.3g})"
        )
    coef = np.linalg.solve(gram, np.array([1.0, 0.0, 0.0]))
    values = np.einsum("a,ajl->jl", coef, basis) * kk
    values.setflags(write=False)
    return BivariateWeightField(target=(float(t), float(s)), bandwidth=float(h),
                                strict=bool(strict), values=values, grid=grid)


def smooth_upper(surface, grid, h: float, targets, strict: bool = True,
                 kernel=epanechnikov) -> np.ndarray:
    """Apply :func:`bivariate_weights` to ``surface`` on a whole target lattice.

    Returns a ``(G, G)`` array whose cell ``[a, b]`` with
    ``targets[a] <= targets[b]`` equals
    ``bivariate_weights(targets[a], targets[b], grid, h, strict).apply(surface)``.
    Cells below the diagonal are NaN.

    The local normal equations are bilinear in the two kernel vectors, so all
    their entries follow from a handful of ``(G, p) @ (p, p) @ (p, G)``
    products instead of one weighted fit per cell.
    """
    grid = _as_grid(grid)
    t = np.atleast_1d(np.asarray(targets, dtype=float))
    y = np.asarray(surface, dtype=float)
    mask = _pair_mask(grid.p, strict)
    u = (grid.points[None, :] - t[:, None]) / h  # (G, p)
    k = kernel(u)
    ku = [k, k * u, k * u * u]

    upper = t[:, None] <= t[None, :]
    count = (k > 0).astype(float) @ mask @ (k > 0).astype(float).T
    bad = upper & (count < 3)
    if np.any(bad):
        a, b = np.argwhere(bad)[0]
        raise InsufficientSupport(
            f"fewer than 3 admissible design pairs near ({t[a]:.6g}, {t[b]:.6g}) for h={h:g}"
        )

    def bil(a, b, m):
        return ku[a] @ m @ ku[b].T

    m00, m10, m01 = bil(0, 0, mask), bil(1, 0, mask), bil(0, 1, mask)
    m20, m11, m02 = bil(2, 0, mask), bil(1, 1, mask), bil(0, 2, mask)
    ym = y * mask
    n0, n1, n2 = bil(0, 0, ym), bil(1, 0, ym), bil(0, 1, ym)

    idx = np.nonzero(upper)
    gram = np.empty((idx[0].size, 3, 3))
    gram[:, 0, 0] = m00[idx]
    gram[:, 0, 1] = gram[:, 1, 0] = m10[idx]
    gram[:, 0, 2] = gram[:, 2, 0] = m01[idx]
    gram[:, 1, 1] = m20[idx]
    gram[:, 1, 2] = gram[:, 2, 1] = m11[idx]
    gram[:, 2, 2] = m02[idx]
    cond = np.linalg.cond(gram)
    if np.any(~np.isfinite(cond) | (cond > COND_LIMIT)):
        c = int(np.argmax(np.where(np.isfinite(cond), cond, np.inf)))
        raise SingularDesign(
            f"bivariate design at ({t[idx[0][c]]:.6g}, {t[idx[1][c]]:.6g}) is singular "
            f"(condition number {cond[c]:.3g})"
        )
    rhs = np.stack([n0[idx], n1[idx], n2[idx]], axis=-1)
    out = np.full((t.size, t.size), np.nan)
    out[idx] = np.linalg.solve(gram, rhs[..., None])[:, 0, 0]
    return out


@dataclass(frozen=True)
class WeightReport:
    """Measured constants of the weight assumptions over a set of probes."""

    abs_sum: float        # sup_t sum_j |w_j(t)|
    max_weight: float     # sup_t max_j |w_j(t)| * p * h
    support: float        # sup_t #{j : w_j(t) != 0} / (p * h)
    max_support: int      # sup_t #{j : w_j(t) != 0}
    lipschitz: float      # sup over probe pairs of the scaled difference ratio
    probes: np.ndarray = field(repr=False)


def check_weight_assumptions(grid, h: float, d: int, n_probe: int = 50,
                             probes=None) -> WeightReport:
    """Measure the weight constants on a set of probe targets.

    ``lipschitz`` is the largest value of
    ``max_j |w_j(t) - w_j(s)| * p * h / min(|t - s| / h, 1)`` over all probe
    pairs with ``t != s``; pairs of identical probes contribute zero.
    """
    grid = _as_grid(grid)
    if probes is None:
        if n_probe < 2:
            raise ValueError("need at least two probes")
        probes = np.linspace(grid.points[0], grid.points[-1], n_probe)
    probes = np.asarray(probes, dtype=float)
    w = weight_matrix(probes, grid, h, d)
    ph = grid.p * h
    nonzero = np.count_nonzero(w, axis=1)
    diff = np.max(np.abs(w[:, None, :] - w[None, :, :]), axis=-1) * ph
    dist = np.abs(probes[:, None] - probes[None, :])
    scale = np.minimum(dist / h, 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(dist > 0, diff / np.where(scale > 0, scale, 1.0), 0.0)
    return WeightReport(
        abs_sum=float(np.max(np.abs(w).sum(axis=1))),
        max_weight=float(np.max(np.abs(w)) * ph),
        support=float(np.max(nonzero) / ph),
        max_support=int(np.max(nonzero)),
        lipschitz=float(np.max(ratio)) if ratio.size else 0.0,
        probes=probes,
    )
