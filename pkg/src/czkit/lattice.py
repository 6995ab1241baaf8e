"""Christ-type dyadic lattices on a finite space.

Construction is a greedy net hierarchy: at each generation a maximal
separated net is chosen in seeded random order, every point joins its
nearest net center, and each generation's regions attach to the region of
their center one generation up.  Effective member sets are rebuilt bottom-up
as unions of children, which makes nesting exact by construction.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateScale, LeafCube, RootTerminal
from .space import MetricMeasureSpace


@dataclass
class Cube:
    id: int
    generation: int
    members: np.ndarray            # sorted point indices
    center: int
    parent: int | None
    children: list = field(default_factory=list)
    size: float = 0.0              # kappa ** generation
    terminal: bool | None = None   # None until classified
    good: bool | None = None

    @property
    def is_leaf(self) -> bool:
        return not self.children


@dataclass
class DyadicLattice:
    space: MetricMeasureSpace
    kappa: float
    seed: int
    k_min: int
    k_max: int
    cubes: dict                    # id -> Cube
    by_gen: dict                   # generation -> list of cube ids
    labels: dict                   # generation -> (N,) array of cube ids
    root_id: int
    eta: float = 1.0

    @property
    def root(self) -> Cube:
        return self.cubes[self.root_id]

    def generations(self):
        return range(self.k_min, self.k_max + 1)

    def cube_mu(self, cube: Cube) -> float:
        return float(self.space.mu[cube.members].sum())

    def transit_ids(self):
        return [cid for cid, c in self.cubes.items() if c.terminal is False]

    def scale(self, k: int) -> float:
        return self.kappa ** k


def _default_k_range(space: MetricMeasureSpace, kappa: float):
    diam = space.diam()
    h = space.resolution_h
    if diam <= 0:
        return 0, 1
    # coarsest scale strictly above diam, finest scale not below resolution
    k_min = int(math.floor(math.log(diam) / math.log(kappa)))
    while kappa ** k_min <= diam:
        k_min -= 1
    k_max = int(math.floor(math.log(h) / math.log(kappa)))
    while kappa ** k_max < h:
        k_max -= 1
    return k_min, k_max


def build_lattice(space: MetricMeasureSpace, kappa: float, seed: int = 0,
                  k_range: tuple | None = None) -> DyadicLattice:
    """Greedy net-based lattice construction (properties (i)-(v) by design)."""
    if not 0.0 < kappa < 1.0:
        raise ValueError("kappa must lie in (0,1)")
    n = space.n_points
    rho = space.rho
    if k_range is None:
        k_min, k_max = _default_k_range(space, kappa)
    else:
        k_min, k_max = k_range
    if k_max < k_min:
        raise DegenerateScale(f"empty generation range {k_min}..{k_max}")
    if kappa ** k_max < space.resolution_h / 2 and k_range is not None:
        # user asked for scales below the resolution; only complain when the
        # whole range is degenerate
        if kappa ** k_min < space.resolution_h:
            raise DegenerateScale("all scales below resolution_h")

    rng = np.random.default_rng(seed)

    # per-generation nets and nearest-center labels (raw regions)
    centers_by_gen = {}
    raw_label = {}     # generation -> (N,) index into centers list
    for k in range(k_min, k_max + 1):
        scale = kappa ** k
        order = rng.permutation(n)
        selected = []
        mindist = np.full(n, np.inf)
        for p in order:
            if mindist[p] >= scale:
                selected.append(int(p))
                np.minimum(mindist, rho[p], out=mindist)
        selected.sort()                      # ties in argmin -> lowest id
        centers = np.array(selected)
        dist = rho[np.ix_(np.arange(n), centers)]
        raw_label[k] = np.argmin(dist, axis=1)
        centers_by_gen[k] = centers

    if len(centers_by_gen[k_min]) != 1:
        # force a single root region at the coarsest generation
        centers_by_gen[k_min] = centers_by_gen[k_min][:1]
        raw_label[k_min] = np.zeros(n, dtype=int)

    # region tree: a region at generation k attaches to the raw region of its
    # center one generation up
    next_id = 0
    cubes = {}
    by_gen = {}
    region_cube_id = {}   # (k, region index) -> cube id
    for k in range(k_min, k_max + 1):
        by_gen[k] = []
        for ridx, center in enumerate(centers_by_gen[k]):
            cid = next_id
            next_id += 1
            parent = None
            if k > k_min:
                parent = region_cube_id[(k - 1, int(raw_label[k - 1][center]))]
            cube = Cube(id=cid, generation=k, members=np.array([], dtype=int),
                        center=int(center), parent=parent, size=kappa ** k)
            cubes[cid] = cube
            region_cube_id[(k, ridx)] = cid
            by_gen[k].append(cid)
            if parent is not None:
                cubes[parent].children.append(cid)

    # bottom-up effective membership: finest = nearest-center cells,
    # coarser = union of children
    member_lists = {cid: [] for cid in cubes}
    finest_labels = raw_label[k_max]
    for p in range(n):
        cid = region_cube_id[(k_max, int(finest_labels[p]))]
        member_lists[cid].append(p)
    for k in range(k_max, k_min - 1, -1):
        for cid in by_gen[k]:
            cubes[cid].members = np.array(sorted(member_lists[cid]), dtype=int)
            parent = cubes[cid].parent
            if parent is not None:
                member_lists[parent].extend(member_lists[cid])

    # drop empty cubes (regions no finest cell chained into)
    for k in range(k_min, k_max + 1):
        alive = []
        for cid in by_gen[k]:
            cube = cubes[cid]
            if cube.members.size == 0:
                if cube.parent is not None:
                    cubes[cube.parent].children.remove(cid)
                del cubes[cid]
            else:
                alive.append(cid)
        by_gen[k] = alive

    labels = {}
    for k in range(k_min, k_max + 1):
        lab = np.full(n, -1, dtype=int)
        for cid in by_gen[k]:
            lab[cubes[cid].members] = cid
        labels[k] = lab

    root_id = by_gen[k_min][0]
    return DyadicLattice(space=space, kappa=kappa, seed=seed, k_min=k_min,
                         k_max=k_max, cubes=cubes, by_gen=by_gen,
                         labels=labels, root_id=root_id)


# ---------------------------------------------------------------------------
# property verification


@dataclass
class LatticePropertyReport:
    partition_ok: bool
    nesting_ok: bool
    unique_ancestor_ok: bool
    c_diam: float
    a0: float
    c_boundary: float          # fitted constant of the small-boundary bound
    eta: float
    failures: list

    @property
    def passed(self) -> bool:
        return self.partition_ok and self.nesting_ok and self.unique_ancestor_ok


def verify_lattice_properties(lat: DyadicLattice, eta: float = 1.0,
                              ts=None) -> LatticePropertyReport:
    """Check Christ-cube properties (i)-(v) exactly and fit the constant of
    the small-boundary inequality (vi) on a few relative thicknesses."""
    space = lat.space
    failures = []
    n = space.n_points

    partition_ok = True
    for k in lat.generations():
        lab = lat.labels[k]
        if (lab < 0).any():
            partition_ok = False
            failures.append(("partition", k, "uncovered points"))
        seen = np.zeros(n, dtype=int)
        for cid in lat.by_gen[k]:
            seen[lat.cubes[cid].members] += 1
        if (seen > 1).any():
            partition_ok = False
            failures.append(("disjointness", k, "overlapping cubes"))

    nesting_ok = True
    unique_ancestor_ok = True
    for cid, cube in lat.cubes.items():
        if cube.parent is not None:
            pm = set(lat.cubes[cube.parent].members.tolist())
            if not set(cube.members.tolist()) <= pm:
                nesting_ok = False
                failures.append(("nesting", cid, cube.parent))
        if cube.generation > lat.k_min:
            anc = lat.labels[cube.generation - 1][cube.members]
            if np.unique(anc).size != 1:
                unique_ancestor_ok = False
                failures.append(("unique_ancestor", cid, None))

    c_diam = 0.0
    a0 = math.inf
    for cube in lat.cubes.values():
        d = space.set_diam(cube.members)
        c_diam = max(c_diam, d / cube.size)
        outside = np.setdiff1d(np.arange(n), cube.members, assume_unique=False)
        if outside.size:
            r_in = float(space.rho[cube.center, outside].min())
        else:
            r_in = max(space.diam(), space.resolution_h)
        a0 = min(a0, r_in / cube.size)

    # (vi): nu{x in Q : dist(x, X \ Q) <= t * s(Q)} <= C t^eta nu(Q)
    if ts is None:
        ts = [lat.kappa, lat.kappa ** 2, lat.kappa ** 3]
    c_boundary = 0.0
    for cube in lat.cubes.values():
        outside = np.setdiff1d(np.arange(n), cube.members)
        if outside.size == 0 or cube.members.size == 0:
            continue
        dist_out = space.rho[np.ix_(cube.members, outside)].min(axis=1)
        nu_q = space.nu[cube.members].sum()
        if nu_q <= 0:
            continue
        for t in ts:
            layer = space.nu[cube.members[dist_out <= t * cube.size]].sum()
            c_boundary = max(c_boundary, layer / (t ** eta * nu_q))

    return LatticePropertyReport(partition_ok, nesting_ok, unique_ancestor_ok,
                                 c_diam, float(a0), c_boundary, eta, failures)


# ---------------------------------------------------------------------------
# skeletons, terminal/transit, good/bad


def skeleton(lat: DyadicLattice, cube: Cube) -> np.ndarray:
    """Discrete skeleton: points of a child within one resolution step of
    leaving that child."""
    if cube.is_leaf:
        raise LeafCube(f"cube {cube.id} has no children")
    space = lat.space
    h = space.resolution_h
    pts = []
    n = space.n_points
    for cid in cube.children:
        child = lat.cubes[cid]
        outside = np.setdiff1d(np.arange(n), child.members)
        if outside.size == 0:
            continue
        d = space.rho[np.ix_(child.members, outside)].min(axis=1)
        pts.extend(child.members[d <= h].tolist())
    return np.array(sorted(set(pts)), dtype=int)


def skeleton_by_generation(lat: DyadicLattice) -> dict:
    """generation k -> (points, cube_ids): skeleton points of all cubes at
    generation k together with the id of the cube they belong to."""
    space = lat.space
    h = space.resolution_h
    out = {}
    for k in lat.generations():
        if k == lat.k_max:
            continue
        child_lab = lat.labels[k + 1]
        # point leaves its generation-(k+1) cube within one resolution step
        same = child_lab[:, None] == child_lab[None, :]
        d_other = np.where(same, np.inf, space.rho).min(axis=1)
        mask = d_other <= h
        pts = np.flatnonzero(mask)
        out[k] = (pts, lat.labels[k][pts])
    return out


def classify_terminal_transit(lat: DyadicLattice, m: float | None = None,
                              radii=None):
    """Flag every cube terminal or transit; the root must come out transit.

    Returns the fitted growth constant of the transit-cube estimate
    mu(B(center, r)) <= C r^m for r >= s(Q) (only when m is given)."""
    space = lat.space
    omega = space.omega
    for cube in lat.cubes.values():
        if cube.parent is None:
            cube.terminal = lat.cube_mu(cube) <= 0.0
        else:
            parent = lat.cubes[cube.parent]
            in_omega = bool(omega[parent.members].all())
            cube.terminal = in_omega or lat.cube_mu(cube) <= 0.0
    if lat.root.terminal:
        raise RootTerminal("root cube is terminal; mu carries no mass")

    c_fit = 0.0
    if m is not None:
        diam = space.diam()
        for cid in lat.transit_ids():
            cube = lat.cubes[cid]
            r = cube.size
            while r <= max(diam, cube.size):
                mass = space.mu_mass(space.ball_mask(cube.center, r))
                c_fit = max(c_fit, mass / r ** m)
                r *= 2.0
    return c_fit


def scale_gap(kappa: float, delta_bad: float, s_param: int) -> int:
    """Smallest positive integer r with kappa^r <= delta_bad^S."""
    r = 1
    target = delta_bad ** s_param
    while kappa ** r > target:
        r += 1
    return r


def classify_good_bad(cube: Cube, other: DyadicLattice, alpha: float,
                      delta_bad: float, s_param: int,
                      skeletons: dict | None = None):
    """Good/bad classification of a cube against a second lattice.

    Bad iff some cube R of the other lattice, at least r generations coarser,
    has dist(Q, sk R) < s(Q)^alpha s(R)^(1-alpha).  Returns (is_good, witness).
    """
    r_gap = scale_gap(other.kappa, delta_bad, s_param)
    if skeletons is None:
        skeletons = skeleton_by_generation(other)
    space = other.space
    sq = cube.size
    for k in other.generations():
        if k > cube.generation - r_gap:
            continue
        if k not in skeletons:
            continue
        pts, owners = skeletons[k]
        if pts.size == 0:
            continue
        sr = other.scale(k)
        threshold = sq ** alpha * sr ** (1 - alpha)
        d = space.rho[np.ix_(cube.members, pts)].min(axis=0)
        hits = d < threshold
        if hits.any():
            witness = int(owners[np.argmin(d)])
            return False, witness
    return True, None


def classify_all_good_bad(lat: DyadicLattice, other: DyadicLattice,
                          alpha: float, delta_bad: float, s_param: int):
    """Set the good flag on every cube of ``lat`` against ``other``."""
    skel = skeleton_by_generation(other)
    for cube in lat.cubes.values():
        good, _ = classify_good_bad(cube, other, alpha, delta_bad, s_param,
                                    skeletons=skel)
        cube.good = good


def estimate_bad_probability(cube_members: np.ndarray, cube_generation: int,
                             space: MetricMeasureSpace, kappa: float,
                             alpha: float, delta_bad: float, s_param: int,
                             ensemble_size: int, master_seed: int = 0):
    """Monte Carlo estimate of P{Q is bad} over random second lattices.

    Returns (p_hat, stderr, low_confidence)."""
    probe = Cube(id=-1, generation=cube_generation, members=cube_members,
                 center=int(cube_members[0]), parent=None,
                 size=kappa ** cube_generation)
    bad = 0
    for i in range(ensemble_size):
        lat2 = build_lattice(space, kappa, seed=hash((master_seed, i)) % 2**32)
        good, _ = classify_good_bad(probe, lat2, alpha, delta_bad, s_param)
        if not good:
            bad += 1
    p_hat = bad / ensemble_size
    stderr = math.sqrt(max(p_hat * (1 - p_hat), 1e-12) / ensemble_size)
    return p_hat, stderr, ensemble_size < 100


# ---------------------------------------------------------------------------
# JSON dump


def lattice_to_json(lat: DyadicLattice) -> dict:
    gens = []
    for k in lat.generations():
        gens.append({
            "k": k,
            "cubes": [{
                "id": cid,
                "center": lat.cubes[cid].center,
                "members": lat.cubes[cid].members.tolist(),
                "parent": lat.cubes[cid].parent,
                "terminal": lat.cubes[cid].terminal,
                "good": lat.cubes[cid].good,
            } for cid in lat.by_gen[k]],
        })
    return {"kappa": lat.kappa, "seed": lat.seed, "generations": gens}


def save_lattice(lat: DyadicLattice, path) -> None:
    with open(path, "w") as fh:
        json.dump(lattice_to_json(lat), fh)


def lattice_from_json(doc: dict, space: MetricMeasureSpace) -> DyadicLattice:
    kappa = float(doc["kappa"])
    cubes = {}
    by_gen = {}
    for gen in doc["generations"]:
        k = int(gen["k"])
        by_gen[k] = []
        for c in gen["cubes"]:
            cube = Cube(id=int(c["id"]), generation=k,
                        members=np.asarray(c["members"], dtype=int),
                        center=int(c["center"]),
                        parent=None if c["parent"] is None else int(c["parent"]),
                        size=kappa ** k,
                        terminal=c.get("terminal"), good=c.get("good"))
            cubes[cube.id] = cube
            by_gen[k].append(cube.id)
    for cube in cubes.values():
        if cube.parent is not None:
            cubes[cube.parent].children.append(cube.id)
    k_min = min(by_gen)
    k_max = max(by_gen)
    labels = {}
    for k, cids in by_gen.items():
        lab = np.full(space.n_points, -1, dtype=int)
        for cid in cids:
            lab[cubes[cid].members] = cid
        labels[k] = lab
    return DyadicLattice(space=space, kappa=kappa, seed=int(doc.get("seed", 0)),
                         k_min=k_min, k_max=k_max, cubes=cubes, by_gen=by_gen,
                         labels=labels, root_id=by_gen[k_min][0])
