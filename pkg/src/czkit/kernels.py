"""Calderon-Zygmund kernels of order m, the discretized operator, and the
kernel-level / testing-condition checks.

A kernel is held as a dense matrix with the diagonal already resolved by the
chosen diagonal policy; the operator acts by T f(x) = sum_y k(x,y) f(y) mu(y).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NonFiniteKernelValue, OmegaIsWholeSpace
from .space import MetricMeasureSpace, dilate, dist_to_complement_all


@dataclass
class KernelSpec:
    matrix: np.ndarray          # (N, N), diagonal per policy
    m: float
    tau: float
    C_CZ: float
    delta_CZ: float = 0.5
    dominated_by_d: bool = False
    diagonal_policy: str = "zero"
    name: str = "explicit"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=float)
        if not np.isfinite(self.matrix).all():
            raise NonFiniteKernelValue("kernel matrix contains non-finite values")

    @property
    def n(self) -> int:
        return self.matrix.shape[0]


def _resolve_diagonal(values: np.ndarray, space: MetricMeasureSpace,
                      policy: str, fill) -> np.ndarray:
    out = values.copy()
    n = out.shape[0]
    if policy == "zero":
        out[np.eye(n, dtype=bool)] = 0.0
    elif policy == "truncate":
        out[np.eye(n, dtype=bool)] = fill(space.resolution_h)
    else:
        raise ValueError(f"unknown diagonal policy {policy!r}")
    return out


def power_kernel(space: MetricMeasureSpace, m: float, tau: float = 1.0,
                 amplitude: float = 1.0, diagonal_policy: str = "zero") -> KernelSpec:
    """k(x,y) = amplitude / rho(x,y)^m with the declared C_CZ fitted on the
    instance so size and smoothness hypotheses certifiably hold."""
    with np.errstate(divide="ignore"):
        vals = amplitude / np.where(space.rho > 0, space.rho, np.inf) ** m
    vals = _resolve_diagonal(vals, space, diagonal_policy,
                             lambda h: amplitude / h ** m)
    spec = KernelSpec(vals, m=m, tau=tau, C_CZ=1.0, name="power",
                      params={"amplitude": amplitude},
                      diagonal_policy=diagonal_policy)
    rep = check_size_and_smoothness(spec, space)
    spec.C_CZ = max(rep.c_size, rep.c_smooth, amplitude)
    return spec


def bergman_kernel(space: MetricMeasureSpace, m: float, tau: float = 1.0,
                   diagonal_policy: str = "zero") -> KernelSpec:
    """Bergman-model kernel k(x,y) = 1 / max(d(x), d(y))^m (d = distance to
    the complement of omega); saturates the domination bound."""
    d = dist_to_complement_all(space)
    dm = np.maximum(d[:, None], d[None, :]) ** m
    with np.errstate(divide="ignore"):
        vals = np.where(dm > 0, 1.0 / np.where(dm > 0, dm, 1.0), np.inf)
    if not np.isfinite(vals).all():
        # points with d = 0 on both slots: bound is infinite there; the model
        # kernel is only meaningful when supp mu stays inside omega, clip
        vals = np.where(np.isfinite(vals), vals, 0.0)
    vals = _resolve_diagonal(vals, space, diagonal_policy, lambda h: 0.0)
    spec = KernelSpec(vals, m=m, tau=tau, C_CZ=1.0, dominated_by_d=True,
                      name="bergman", diagonal_policy=diagonal_policy)
    rep = check_size_and_smoothness(spec, space)
    spec.C_CZ = max(rep.c_size, rep.c_smooth, 1.0)
    return spec


def constant_kernel(space: MetricMeasureSpace, value: float = 1.0,
                    m: float = 1.0, tau: float = 1.0,
                    diagonal_policy: str = "zero") -> KernelSpec:
    vals = np.full((space.n_points, space.n_points), value)
    vals = _resolve_diagonal(vals, space, diagonal_policy, lambda h: value)
    return KernelSpec(vals, m=m, tau=tau, C_CZ=max(abs(value), 1e-300),
                      name="constant", params={"value": value},
                      diagonal_policy=diagonal_policy)


def zero_kernel(space: MetricMeasureSpace, m: float = 1.0,
                tau: float = 1.0) -> KernelSpec:
    return KernelSpec(np.zeros((space.n_points, space.n_points)), m=m, tau=tau,
                      C_CZ=0.0, name="zero")


def explicit_kernel(space: MetricMeasureSpace, matrix, m: float, tau: float,
                    C_CZ: float | None = None) -> KernelSpec:
    matrix = np.asarray(matrix, dtype=float)
    spec = KernelSpec(matrix, m=m, tau=tau, C_CZ=C_CZ if C_CZ else 1.0,
                      name="explicit")
    if C_CZ is None:
        rep = check_size_and_smoothness(spec, space)
        spec.C_CZ = max(rep.c_size, rep.c_smooth)
    return spec


# ---------------------------------------------------------------------------
# operator action


def apply(kernel: KernelSpec, space: MetricMeasureSpace,
          f: np.ndarray) -> np.ndarray:
    """(T f)(x) = sum_y k(x,y) f(y) mu(y)."""
    return kernel.matrix @ (np.asarray(f) * space.mu)


def adjoint_apply(kernel: KernelSpec, space: MetricMeasureSpace,
                  g: np.ndarray) -> np.ndarray:
    """Adjoint in L2(mu): kernel transposed."""
    return kernel.matrix.T @ (np.asarray(g) * space.mu)


def bilinear(kernel: KernelSpec, space: MetricMeasureSpace,
             f: np.ndarray, g: np.ndarray) -> float:
    """<T f, g>_mu."""
    return space.inner(apply(kernel, space, f), g)


# ---------------------------------------------------------------------------
# hypothesis checks


@dataclass
class SizeSmoothnessReport:
    c_size: float
    c_smooth: float
    declared: float

    @property
    def passed(self) -> bool:
        return max(self.c_size, self.c_smooth) <= self.declared * (1 + 1e-12)


def check_size_and_smoothness(kernel: KernelSpec,
                              space: MetricMeasureSpace) -> SizeSmoothnessReport:
    """Fit the smallest size constant |k| * rho^m over pairs and the smallest
    smoothness constant over admissible triples rho(x,x') <= delta rho(x,y)."""
    rho = space.rho
    k = kernel.matrix
    n = space.n_points
    off = ~np.eye(n, dtype=bool)
    c_size = float(np.max(np.abs(k[off]) * rho[off] ** kernel.m)) if n > 1 else 0.0

    c_smooth = 0.0
    m, tau, delta = kernel.m, kernel.tau, kernel.delta_CZ
    for y in range(n):
        # triples (x, x', y): |k(x,y)-k(x',y)| <= C rho(x,x')^tau / rho(x,y)^(tau+m)
        col = k[:, y]
        ry = rho[:, y]
        valid_x = ry > 0
        diff = np.abs(col[:, None] - col[None, :])       # (x, x')
        admissible = (rho <= delta * ry[:, None]) & valid_x[:, None] & (rho > 0)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = diff * ry[:, None] ** (tau + m) / rho ** tau
        ratio = np.where(admissible, ratio, 0.0)
        c_smooth = max(c_smooth, float(ratio.max()) if ratio.size else 0.0)
    return SizeSmoothnessReport(c_size, c_smooth, kernel.C_CZ)


@dataclass
class DominationReport:
    pairwise_ok: bool
    worst_pair: tuple | None
    worst_ratio: float
    terminal_fit: float        # fitted C in |k| <= C / s(parent)^m on terminal cubes

    @property
    def passed(self) -> bool:
        return self.pairwise_ok


def check_d_domination(kernel: KernelSpec, space: MetricMeasureSpace,
                       lattice=None) -> DominationReport:
    """Verify |k(x,y)| <= 1 / max(d(x)^m, d(y)^m) pairwise; on terminal cubes
    also fit the scale-corrected constant of the parent-in-omega bound."""
    d = dist_to_complement_all(space)       # raises OmegaIsWholeSpace
    m = kernel.m
    dm = np.maximum(d[:, None], d[None, :]) ** m
    with np.errstate(divide="ignore"):
        bound = np.where(dm > 0, 1.0 / np.where(dm > 0, dm, 1.0), np.inf)
    k = np.abs(kernel.matrix)
    excess = k - bound
    ok = bool((excess <= 1e-12).all())
    worst = None
    ratio = 0.0
    if not ok:
        i, j = np.unravel_index(np.argmax(excess), excess.shape)
        worst = (int(i), int(j))
        ratio = float(k[i, j] / bound[i, j]) if bound[i, j] > 0 else math.inf

    term_fit = 0.0
    if lattice is not None:
        for cube in lattice.cubes.values():
            if cube.terminal and cube.parent is not None:
                parent = lattice.cubes[cube.parent]
                if not space.omega[parent.members].all():
                    continue    # terminal via zero mass; no omega geometry
                sub = k[np.ix_(cube.members, cube.members)]
                term_fit = max(term_fit, float(sub.max()) * parent.size ** m)
    return DominationReport(ok, worst, ratio, term_fit)


@dataclass
class T1Report:
    A: float
    worst_cube_direct: tuple | None
    worst_cube_adjoint: tuple | None
    per_cube: list              # (label, mu, ratio_direct, ratio_adjoint)


def indicator(space: MetricMeasureSpace, members: np.ndarray) -> np.ndarray:
    chi = np.zeros(space.n_points)
    chi[members] = 1.0
    return chi


def check_T1(kernel: KernelSpec, space: MetricMeasureSpace, lattice,
             dilations=(1.2, 1.4, 1.5), lambda_bmo: float = 3.0) -> T1Report:
    """Fit the testing constant A over all lattice cubes and their dilations:
    ||T chi_Q||^2 <= A mu(Q) and same for the adjoint."""
    families = []
    for cid, cube in lattice.cubes.items():
        families.append((f"Q{cid}", cube.members))
        for lam in tuple(dilations) + (lambda_bmo,):
            families.append((f"Q{cid}x{lam}", dilate(space, cube.members, lam)))
    a_val = 0.0
    worst_d = None
    worst_a = None
    per_cube = []
    seen = set()
    for label, members in families:
        key = members.tobytes()
        if key in seen:
            continue
        seen.add(key)
        mass = space.mu_mass(members)
        if mass <= 0:
            continue
        chi = indicator(space, members)
        rd = space.l2_norm(apply(kernel, space, chi)) ** 2 / mass
        ra = space.l2_norm(adjoint_apply(kernel, space, chi)) ** 2 / mass
        per_cube.append((label, mass, rd, ra))
        if rd > a_val:
            a_val, worst_d = rd, (label,)
        if ra > a_val:
            a_val, worst_a = ra, (label,)
    return T1Report(a_val, worst_d, worst_a, per_cube)


def operator_norm(kernel: KernelSpec, space: MetricMeasureSpace,
                  tol: float = 1e-8, max_iter: int = 10000,
                  seed: int = 0):
    """Power iteration for the L2(mu) -> L2(mu) operator norm.

    Returns (norm, converged)."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(space.n_points)
    nv = space.l2_norm(v)
    if nv == 0 or not np.any(kernel.matrix):
        return 0.0, True
    v /= nv
    lam_old = 0.0
    for _ in range(max_iter):
        tv = apply(kernel, space, v)
        lam = space.inner(tv, tv)            # Rayleigh quotient of T*T
        w = adjoint_apply(kernel, space, tv)
        nw = space.l2_norm(w)
        if nw == 0:
            return 0.0, True
        v = w / nw
        if abs(lam - lam_old) <= tol * max(lam, 1e-300):
            return float(math.sqrt(lam)), True
        lam_old = lam
    return float(math.sqrt(lam_old)), False


def dense_operator(kernel: KernelSpec, space: MetricMeasureSpace) -> np.ndarray:
    """The operator as a Euclidean matrix: D^(1/2) K D^(1/2), D = diag(mu).
    Its spectral norm equals the L2(mu) operator norm."""
    s = np.sqrt(space.mu)
    return s[:, None] * kernel.matrix * s[None, :]


def operator_norm_dense(kernel: KernelSpec, space: MetricMeasureSpace) -> float:
    from scipy.linalg import svdvals
    a = dense_operator(kernel, space)
    vals = svdvals(a)
    return float(vals[0]) if vals.size else 0.0


# ---------------------------------------------------------------------------
# kernel files


def kernel_to_json(kernel: KernelSpec) -> dict:
    doc = {"type": kernel.name, "m": kernel.m, "tau": kernel.tau,
           "C_CZ": kernel.C_CZ, "delta_CZ": kernel.delta_CZ,
           "diagonal_policy": kernel.diagonal_policy}
    if kernel.name == "explicit":
        doc["matrix"] = kernel.matrix.tolist()
    else:
        doc["params"] = kernel.params
    return doc


def kernel_from_json(doc: dict, space: MetricMeasureSpace) -> KernelSpec:
    ktype = doc["type"]
    m = float(doc.get("m", 1.0))
    tau = float(doc.get("tau", 1.0))
    params = doc.get("params", {})
    if ktype == "power":
        return power_kernel(space, m, tau, amplitude=params.get("amplitude", 1.0))
    if ktype == "bergman":
        return bergman_kernel(space, m, tau)
    if ktype == "constant":
        return constant_kernel(space, value=params.get("value", 1.0), m=m, tau=tau)
    if ktype == "zero":
        return zero_kernel(space, m=m, tau=tau)
    if ktype == "explicit":
        return explicit_kernel(space, doc["matrix"], m=m, tau=tau,
                               C_CZ=doc.get("C_CZ"))
    raise ValueError(f"unknown kernel type {ktype!r}")


def load_kernel(path, space: MetricMeasureSpace) -> KernelSpec:
    with open(path) as fh:
        return kernel_from_json(json.load(fh), space)
