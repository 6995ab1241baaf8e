"""Finite metric measure spaces and their standing hypotheses.

A space is a finite point cloud with a symmetric quasi-metric matrix, a
reference measure ``nu``, a probability measure ``mu`` and a distinguished
open set ``omega`` capturing all balls where ``mu`` exceeds m-dimensional
growth.  All checks operate on radii in ``[resolution_h, diam]``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyRadiusList, EmptySet, OmegaIsWholeSpace

INF_DISTANCE = math.inf


@dataclass
class MetricMeasureSpace:
    rho: np.ndarray            # (N, N) symmetric quasi-distances
    nu: np.ndarray             # (N,) reference weights
    mu: np.ndarray             # (N,) probability weights
    omega: np.ndarray          # (N,) boolean mask of the open set
    quasi_const: float = 1.0
    resolution_h: float = 0.0
    points: list = field(default_factory=list)   # point identifiers
    coords: np.ndarray | None = None             # optional, for provenance

    def __post_init__(self):
        self.rho = np.asarray(self.rho, dtype=float)
        self.nu = np.asarray(self.nu, dtype=float)
        self.mu = np.asarray(self.mu, dtype=float)
        self.omega = np.asarray(self.omega, dtype=bool)
        n = self.rho.shape[0]
        if not self.points:
            self.points = list(range(n))
        if self.resolution_h <= 0.0:
            off = self.rho[~np.eye(n, dtype=bool)] if n > 1 else np.array([1.0])
            pos = off[off > 0]
            self.resolution_h = float(pos.min()) if pos.size else 1.0

    @property
    def n_points(self) -> int:
        return self.rho.shape[0]

    def diam(self) -> float:
        return float(self.rho.max()) if self.n_points > 1 else 0.0

    def ball(self, x: int, r: float) -> np.ndarray:
        """Indices of the open ball {y : rho(x,y) < r}."""
        return np.flatnonzero(self.rho[x] < r)

    def ball_mask(self, x: int, r: float) -> np.ndarray:
        return self.rho[x] < r

    def mu_mass(self, idx) -> float:
        return float(self.mu[idx].sum())

    def nu_mass(self, idx) -> float:
        return float(self.nu[idx].sum())

    def l2_norm(self, values: np.ndarray) -> float:
        """L2(mu) norm of a function given by per-point values."""
        return float(np.sqrt(np.sum(np.asarray(values) ** 2 * self.mu)))

    def inner(self, u: np.ndarray, v: np.ndarray) -> float:
        return float(np.sum(np.asarray(u) * np.asarray(v) * self.mu))

    def set_diam(self, idx) -> float:
        idx = np.asarray(idx)
        if idx.size <= 1:
            return 0.0
        return float(self.rho[np.ix_(idx, idx)].max())

    def set_dist(self, idx_a, idx_b) -> float:
        """min over pairs of rho; inf when either set is empty."""
        a = np.asarray(idx_a)
        b = np.asarray(idx_b)
        if a.size == 0 or b.size == 0:
            return INF_DISTANCE
        return float(self.rho[np.ix_(a, b)].min())


@dataclass
class RegularityReport:
    c1: float
    c2: float
    n_dim: float
    c_doub: float
    violations: list
    degenerate: bool = False

    @property
    def passed(self) -> bool:
        return not self.violations and not self.degenerate


@dataclass
class QuasiMetricReport:
    ok: bool
    worst_triple: tuple | None
    worst_excess: float
    reason: str = ""


def verify_quasi_metric(space: MetricMeasureSpace) -> QuasiMetricReport:
    """Check symmetry, vanishing exactly on the diagonal, and the
    quasi-triangle inequality with the declared constant over all triples."""
    rho = space.rho
    n = space.n_points
    asym = np.abs(rho - rho.T)
    i, j = np.unravel_index(np.argmax(asym), asym.shape)
    if asym[i, j] > 0:
        return QuasiMetricReport(False, (int(i), int(j), -1), float(asym[i, j]),
                                 "symmetry violation")
    diag = np.abs(np.diag(rho))
    if diag.max() > 0:
        k = int(np.argmax(diag))
        return QuasiMetricReport(False, (k, k, -1), float(diag.max()),
                                 "nonzero diagonal")
    off = rho + np.where(np.eye(n, dtype=bool), np.inf, 0.0)
    if n > 1 and off.min() <= 0:
        i, j = np.unravel_index(np.argmin(off), off.shape)
        return QuasiMetricReport(False, (int(i), int(j), -1), 0.0,
                                 "zero distance off the diagonal")
    # rho(x,z) <= K (rho(x,y) + rho(y,z)) for all triples; vectorize over y
    worst = (-1, -1, -1)
    worst_excess = 0.0
    k_q = space.quasi_const
    for y in range(n):
        bound = k_q * (rho[:, y][:, None] + rho[y, :][None, :])
        excess = rho - bound
        i, j = np.unravel_index(np.argmax(excess), excess.shape)
        if excess[i, j] > worst_excess + 1e-15:
            worst_excess = float(excess[i, j])
            worst = (int(i), y, int(j))
    if worst_excess > 1e-12 * max(1.0, rho.max()):
        return QuasiMetricReport(False, worst, worst_excess,
                                 "quasi-triangle inequality violation")
    return QuasiMetricReport(True, None, 0.0)


def ball(space: MetricMeasureSpace, x: int, r: float) -> np.ndarray:
    return space.ball(x, r)


def default_radii(space: MetricMeasureSpace, kappa: float = 0.5,
                  exhaustive: bool = False) -> list:
    """Geometric grid of radii in [resolution_h, diam]; exhaustive mode
    returns every distinct positive distance instead."""
    d = space.diam()
    h = space.resolution_h
    if exhaustive:
        vals = np.unique(space.rho[space.rho > 0])
        return [float(v) for v in vals if h <= v <= d] or [h]
    if d <= h:
        return [h]
    radii = []
    r = d
    while r >= h:
        radii.append(float(r))
        r *= kappa
    return radii[::-1]


def check_ahlfors_regularity(space: MetricMeasureSpace, n_dim: float,
                             radii, c1_target: float | None = None,
                             c2_target: float | None = None) -> RegularityReport:
    """Fit the tightest Ahlfors constants nu(B(x,r)) / r^n over the sample."""
    radii = list(radii)
    if not radii:
        raise EmptyRadiusList("no radii supplied")
    ratios = []
    violations = []
    for x in range(space.n_points):
        for r in radii:
            mass = space.nu_mass(space.ball_mask(x, r))
            ratio = mass / r ** n_dim
            ratios.append(ratio)
            if c1_target is not None and ratio < c1_target:
                violations.append((x, r, mass, c1_target * r ** n_dim))
            if c2_target is not None and ratio > c2_target:
                violations.append((x, r, mass, c2_target * r ** n_dim))
    ratios = np.array(ratios)
    degenerate = space.n_points <= 1 or ratios.min() <= 0
    c1 = float(ratios.min())
    c2 = float(ratios.max())
    c_doub = (c2 / c1) * 2 ** n_dim if c1 > 0 else math.inf
    return RegularityReport(c1, c2, n_dim, c_doub, violations, degenerate)


def check_growth_condition(space: MetricMeasureSpace, m: float,
                           radii=None) -> tuple[float, list]:
    """Return (C_H, non_ahlfors_balls) where C_H = max mu(B(x,r)) / r^m and
    the list collects the (x, r) with mu(B(x,r)) > r^m."""
    if m <= 0:
        raise ValueError("growth order m must be positive")
    if radii is None:
        radii = default_radii(space)
    c_h = 0.0
    non_ahlfors = []
    for x in range(space.n_points):
        for r in radii:
            mass = space.mu_mass(space.ball_mask(x, r))
            ratio = mass / r ** m
            c_h = max(c_h, ratio)
            if mass > r ** m:
                non_ahlfors.append((x, float(r)))
    return c_h, non_ahlfors


def verify_omega_capture(space: MetricMeasureSpace, m: float,
                         radii=None) -> bool:
    """True iff every non-Ahlfors ball is contained in omega as a point set."""
    _, non_ahlfors = check_growth_condition(space, m, radii)
    for x, r in non_ahlfors:
        members = space.ball_mask(x, r)
        if not space.omega[members].all():
            return False
    return True


def dist_to_complement(space: MetricMeasureSpace, x: int) -> float:
    """d(x): distance to the complement of omega.  Infinite sentinel when
    omega is the whole space (the domination route is then rejected)."""
    outside = ~space.omega
    if not outside.any():
        return INF_DISTANCE
    return float(space.rho[x, outside].min())


def dist_to_complement_all(space: MetricMeasureSpace) -> np.ndarray:
    outside = ~space.omega
    if not outside.any():
        raise OmegaIsWholeSpace("omega is the whole space; d(x) undefined")
    return space.rho[:, outside].min(axis=1)


def dilate(space: MetricMeasureSpace, idx, lam: float) -> np.ndarray:
    """lambda E := E union {x : dist(x, E) <= (lambda - 1) diam(E)}."""
    idx = np.asarray(idx)
    if idx.size == 0:
        raise EmptySet("cannot dilate the empty set")
    if lam < 1.0:
        raise ValueError("dilation parameter must be >= 1")
    reach = (lam - 1.0) * space.set_diam(idx)
    dists = space.rho[:, idx].min(axis=1)
    mask = dists <= reach
    mask[idx] = True
    return np.flatnonzero(mask)


# ---------------------------------------------------------------------------
# JSON space files


def space_to_json(space: MetricMeasureSpace) -> dict:
    doc = {
        "points": list(space.points),
        "nu": space.nu.tolist(),
        "mu": space.mu.tolist(),
        "omega": [space.points[i] for i in np.flatnonzero(space.omega)],
        "quasi_const": space.quasi_const,
        "resolution_h": space.resolution_h,
    }
    if space.coords is not None:
        doc["metric"] = {"type": "euclidean", "coords": space.coords.tolist()}
    else:
        doc["metric"] = {"type": "explicit", "matrix": space.rho.tolist()}
    return doc


def space_from_json(doc: dict) -> MetricMeasureSpace:
    points = list(doc["points"])
    metric = doc["metric"]
    if metric["type"] == "euclidean":
        coords = np.asarray(metric["coords"], dtype=float)
        diff = coords[:, None, :] - coords[None, :, :]
        rho = np.sqrt((diff ** 2).sum(axis=-1))
    elif metric["type"] == "explicit":
        rho = np.asarray(metric["matrix"], dtype=float)
        if np.abs(rho - rho.T).max() > 1e-12:
            raise ValueError("explicit metric matrix must be symmetric to 1e-12")
        coords = None
    else:
        raise ValueError(f"unknown metric type {metric['type']!r}")
    index = {p: i for i, p in enumerate(points)}
    omega = np.zeros(len(points), dtype=bool)
    for p in doc.get("omega", []):
        omega[index[p]] = True
    return MetricMeasureSpace(
        rho=rho,
        nu=np.asarray(doc["nu"], dtype=float),
        mu=np.asarray(doc["mu"], dtype=float),
        omega=omega,
        quasi_const=float(doc.get("quasi_const", 1.0)),
        resolution_h=float(doc.get("resolution_h", 0.0)),
        points=points,
        coords=coords if metric["type"] == "euclidean" else None,
    )


def load_space(path) -> MetricMeasureSpace:
    with open(path) as fh:
        return space_from_json(json.load(fh))


def save_space(space: MetricMeasureSpace, path) -> None:
    with open(path, "w") as fh:
        json.dump(space_to_json(space), fh)
