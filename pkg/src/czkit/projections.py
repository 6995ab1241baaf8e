"""Averaging projection, martingale differences, and good/bad splits.

Functions are plain numpy vectors aligned with the space's point order.
Components are stored sparsely as (indices, values) per transit cube.

On a finite space the decomposition stops at the finest generation: a child
that is terminal *or a leaf* receives the raw increment ``phi - <phi>_Q``,
which makes the reconstruction exact (no truncation error) while keeping
every component zero-mean and the family mutually orthogonal.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ClassificationMissing, ZeroMass
from .lattice import Cube, DyadicLattice, build_lattice, classify_all_good_bad, \
    classify_terminal_transit
from .space import MetricMeasureSpace


@dataclass
class MartingaleDecomposition:
    lattice: DyadicLattice
    lambda_part: float
    components: dict = field(default_factory=dict)  # cube id -> (idx, values)

    def component_vector(self, cid: int) -> np.ndarray:
        idx, vals = self.components[cid]
        out = np.zeros(self.lattice.space.n_points)
        out[idx] = vals
        return out

    def component_norm_sq(self, cid: int) -> float:
        idx, vals = self.components[cid]
        return float(np.sum(vals ** 2 * self.lattice.space.mu[idx]))

    def reconstruct(self) -> np.ndarray:
        out = np.full(self.lattice.space.n_points, self.lambda_part)
        for idx, vals in self.components.values():
            out[idx] += vals
        return out

    def norms_sq(self) -> dict:
        return {cid: self.component_norm_sq(cid) for cid in self.components}


def average(space: MetricMeasureSpace, phi: np.ndarray, members: np.ndarray) -> float:
    """mu-weighted mean of phi over a member set; cubes need mu-mass."""
    mass = space.mu[members].sum()
    if mass <= 0:
        raise ZeroMass("average over a cube of zero mu-mass")
    return float(np.sum(phi[members] * space.mu[members]) / mass)


def _delta_on(lat: DyadicLattice, phi: np.ndarray, cube: Cube):
    """Sparse Delta_Q phi for a transit cube Q: constant increments on
    transit non-leaf children, raw increment on terminal or leaf children."""
    space = lat.space
    avg_q = average(space, phi, cube.members)
    idx_parts = []
    val_parts = []
    for cid in cube.children:
        child = lat.cubes[cid]
        if child.terminal is None:
            raise ClassificationMissing("terminal/transit flags missing")
        if child.terminal or child.is_leaf:
            idx_parts.append(child.members)
            val_parts.append(phi[child.members] - avg_q)
        else:
            avg_j = average(space, phi, child.members)
            idx_parts.append(child.members)
            val_parts.append(np.full(child.members.size, avg_j - avg_q))
    if not idx_parts:
        return np.array([], dtype=int), np.array([])
    return np.concatenate(idx_parts), np.concatenate(val_parts)


def delta_proj(lat: DyadicLattice, phi: np.ndarray, cube: Cube) -> np.ndarray:
    """Dense Delta_Q phi (zero off Q)."""
    if cube.terminal is not False:
        raise ClassificationMissing("delta projection requires a transit cube")
    idx, vals = _delta_on(lat, phi, cube)
    out = np.zeros(lat.space.n_points)
    out[idx] = vals
    return out


def component_cubes(lat: DyadicLattice):
    """Transit cubes carrying a component: transit and not a leaf."""
    return [lat.cubes[cid] for cid in lat.transit_ids()
            if not lat.cubes[cid].is_leaf]


def decompose(lat: DyadicLattice, phi: np.ndarray) -> MartingaleDecomposition:
    """phi = Lambda phi + sum over transit cubes of Delta_Q phi, exactly."""
    root = lat.root
    if root.terminal is None:
        raise ClassificationMissing("classify terminal/transit before decomposing")
    lam = average(lat.space, phi, root.members)
    comps = {}
    for cube in component_cubes(lat):
        idx, vals = _delta_on(lat, phi, cube)
        if idx.size:
            comps[cube.id] = (idx, vals)
    return MartingaleDecomposition(lattice=lat, lambda_part=lam, components=comps)


@dataclass
class ProjectionReport:
    idempotence_err: float
    zero_mean_err: float
    mutual_orthogonality_err: float
    lambda_orthogonality_err: float
    tol: float = 1e-10

    @property
    def passed(self) -> bool:
        return max(self.idempotence_err, self.zero_mean_err,
                   self.mutual_orthogonality_err,
                   self.lambda_orthogonality_err) <= self.tol


def properties_check(dec: MartingaleDecomposition, phi: np.ndarray,
                     tol: float = 1e-10) -> ProjectionReport:
    """Numerical check of the projection algebra: idempotence, zero mean,
    mutual orthogonality, orthogonality to the constant part."""
    lat = dec.lattice
    space = lat.space
    scale = max(space.l2_norm(phi) ** 2, 1.0)

    idem = 0.0
    zmean = 0.0
    for cid, (idx, vals) in dec.components.items():
        dense = dec.component_vector(cid)
        twice = delta_proj(lat, dense, lat.cubes[cid])
        idem = max(idem, float(np.max(np.abs(twice - dense))) if dense.size else 0.0)
        zmean = max(zmean, abs(float(np.sum(vals * space.mu[idx]))))

    cids = list(dec.components)
    ortho = 0.0
    for i, ca in enumerate(cids):
        ia, va = dec.components[ca]
        dense_a = np.zeros(space.n_points)
        dense_a[ia] = va
        for cb in cids[i + 1:]:
            ib, vb = dec.components[cb]
            ortho = max(ortho, abs(float(np.sum(dense_a[ib] * vb * space.mu[ib]))))

    lam_orth = 0.0
    for cid in cids:
        idx, vals = dec.components[cid]
        lam_orth = max(lam_orth, abs(dec.lambda_part *
                                     float(np.sum(vals * space.mu[idx]))))
    return ProjectionReport(idem / scale, zmean / scale, ortho / scale,
                            lam_orth / scale, tol)


def split_good_bad(dec: MartingaleDecomposition):
    """(f_good, f_bad): Lambda part plus good-cube components vs the rest."""
    lat = dec.lattice
    n = lat.space.n_points
    f_good = np.full(n, dec.lambda_part)
    f_bad = np.zeros(n)
    for cid, (idx, vals) in dec.components.items():
        cube = lat.cubes[cid]
        if cube.good is None:
            raise ClassificationMissing("good/bad flags missing")
        if cube.good:
            f_good[idx] += vals
        else:
            f_bad[idx] += vals
    return f_good, f_bad


def expected_bad_norm(space: MetricMeasureSpace, f: np.ndarray, kappa: float,
                      alpha: float, delta_bad: float, s_param: int,
                      ensemble: int, master_seed: int = 0):
    """Monte Carlo mean of ||f_bad|| over random lattice pairs.

    Returns (mean, stderr, check) where check compares the mean against
    delta_bad * ||f|| + 3 * stderr."""
    norms = []
    for i in range(ensemble):
        lat1 = build_lattice(space, kappa, seed=hash((master_seed, i, 1)) % 2**32)
        lat2 = build_lattice(space, kappa, seed=hash((master_seed, i, 2)) % 2**32)
        classify_terminal_transit(lat1)
        classify_all_good_bad(lat1, lat2, alpha, delta_bad, s_param)
        dec = decompose(lat1, f)
        _, f_bad = split_good_bad(dec)
        norms.append(space.l2_norm(f_bad))
    norms = np.array(norms)
    mean = float(norms.mean())
    stderr = float(norms.std(ddof=1) / np.sqrt(ensemble)) if ensemble > 1 else 0.0
    check = mean <= delta_bad * space.l2_norm(f) + 3 * stderr
    return mean, stderr, check
