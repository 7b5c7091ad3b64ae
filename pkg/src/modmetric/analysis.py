"""Thickness across refinements, quasiconvexity constants, Sobolev-to-Lipschitz checks.

On a finite graph every nonempty family has positive modulus, so thickness
is judged by the trend of ``Mod_p Gamma(E, F; C)`` as the mesh is refined:
bounded below, decaying, or inconclusive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import dijkstra as cs_dijkstra

from .essential import MetricMatrix, NoConnectionError
from .graph import (GraphError, MetricMeasureGraph, Path, distances_from, path_to, refine,
                    dijkstra, set_distance)
from .modulus import FamilySpec, _check_p, default_eps_mod, energy, p_modulus
from .oracle import FamilyOracle

# sets with more sources than this use the uniform-cap sandwich instead of per-pair caps
EXACT_PAIR_LIMIT = 64


# -- quasiconvexity ----------------------------------------------------------------

@dataclass
class QuasiconvexityResult:
    value: float
    lo: float
    hi: float

    def to_dict(self) -> dict:
        return {"value": self.value, "bracket": [self.lo, self.hi]}


def quasiconvexity_constant(g: MetricMeasureGraph, p: float, E, F, eps_mod: float | None = None,
                            tol_C: float = 1e-3, tol: float = 1e-6) -> QuasiconvexityResult:
    """Least ``C`` with ``Mod_p Gamma(E, F; C) >= eps_mod``, to within ``tol_C``."""
    p = _check_p(p)
    E, F = frozenset(int(v) for v in E), frozenset(int(v) for v in F)
    if not E or not F or E & F:
        raise GraphError("E and F must be nonempty and disjoint")
    if tol_C <= 0:
        raise ValueError("tol_C must be > 0")
    eps = default_eps_mod(g, p) if eps_mod is None else float(eps_mod)

    def positive(C):
        fam = FamilySpec(E, F, cap_factor=C)
        res = p_modulus(g, fam, p, tol=tol, threshold=eps)
        return res.flag == "infinite" or (res.flag == "finite" and res.lower >= eps)

    lo, hi = 1.0, max(1.0, float(g.edge_len.sum()) / set_distance(g, E, F))
    if positive(lo):
        return QuasiconvexityResult(lo, lo, lo)
    if not positive(hi):
        raise NoConnectionError("no positive-modulus family even at the largest cap")
    while hi - lo > tol_C:
        mid = 0.5 * (lo + hi)
        if positive(mid):
            hi = mid
        else:
            lo = mid
    return QuasiconvexityResult(hi, lo, hi)


# -- thickness profiles --------------------------------------------------------------

@dataclass
class LevelModulus:
    n: int
    lower: float  # modulus of a subfamily of Gamma(E, F; C)
    upper: float  # modulus of a superfamily
    exact: bool
    # density admissible for the superfamily (hence for Gamma(E, F; C))
    density: np.ndarray | None = field(default=None, repr=False)


@dataclass
class ThicknessProfile:
    levels: list[int]
    moduli: list[float]
    upper: list[float]
    exponent: float
    residual: float
    verdict: str
    note: str = ""
    details: list[LevelModulus] = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {"levels": self.levels, "moduli": self.moduli, "upper": self.upper,
                "exponent": self.exponent, "residual": self.residual,
                "verdict": self.verdict, "note": self.note}


def fit_exponent(levels: Sequence[int], values: Sequence[float]) -> tuple[float, float]:
    """Least-squares slope of log(value) against log(resolution) and RMS residual.

    A negative slope means the modulus shrinks as the mesh is refined.
    """
    x = np.log(np.asarray(levels, dtype=float))
    y = np.log(np.maximum(np.asarray(values, dtype=float), 1e-300))
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    res = y - A @ coef
    return float(coef[0]), float(np.sqrt(np.mean(res ** 2)))


def _stable(levels, values, rel_change, min_exponent) -> tuple[bool, float, float]:
    slope, resid = fit_exponent(levels, values)
    a, b = values[-2], values[-1]
    change = abs(b - a) / max(a, b) if max(a, b) > 0 else 0.0
    return change < rel_change and slope >= min_exponent, slope, resid


def admissible_scaling(g: MetricMeasureGraph, fam: FamilySpec, rho: np.ndarray,
                       p: float) -> tuple[np.ndarray, float]:
    """Rescale ``rho`` to be admissible for ``fam``; returns it with its energy.

    The energy is a certified upper bound on the modulus of ``fam``.
    """
    path = FamilyOracle(g, fam).min_path(rho)
    if path is None:
        return np.zeros_like(rho), 0.0
    L = float(sum(rho[e] * g.edge_len[e] for e in path.edges))
    if L <= 0:
        return rho, math.inf
    adm = rho / L
    return adm, energy(g, adm, p)


def level_modulus(g: MetricMeasureGraph, p: float, C: float, E, F, tol: float = 1e-4,
                  exact_limit: int = EXACT_PAIR_LIMIT) -> LevelModulus:
    """``Mod_p Gamma(E, F; C)``, or a bracket for it when the sets are large.

    For small sets the per-pair cap ``len <= C d(s, t)`` is solved directly.
    Otherwise the family is bracketed between uniform caps: ``C d(E, F)``
    gives a subfamily, ``C max d(s, t)`` a superfamily.  The superfamily is
    only solved when the subfamily's density does not already certify a
    matching upper bound.
    """
    E, F = sorted(E), sorted(F)
    n = int(g.recipe["n"]) if g.recipe else g.n_nodes
    if len(E) * len(F) <= exact_limit ** 2 and min(len(E), len(F)) <= exact_limit:
        fam = FamilySpec(E, F, cap_factor=C)
        res = p_modulus(g, fam, p, tol=tol)
        adm, up = admissible_scaling(g, fam, res.rho, p)
        return LevelModulus(n, res.lower, min(up, res.upper), True, adm)
    dmin = set_distance(g, E, F)
    dmax = _max_pair_distance(g, E, F)
    sup_fam = FamilySpec(E, F, cap_value=C * dmax)
    sub = p_modulus(g, FamilySpec(E, F, cap_value=C * dmin), p, tol=tol)
    adm, up = admissible_scaling(g, sup_fam, sub.rho, p)
    if up > sub.lower * (1 + 10 * tol):
        sup = p_modulus(g, sup_fam, p, tol=tol)
        adm, up = admissible_scaling(g, sup_fam, sup.rho, p)
    return LevelModulus(n, sub.lower, up, False, adm)


def _max_pair_distance(g, E, F) -> float:
    F = list(F)
    return max(float(distances_from(g, s)[F].max()) for s in E)


def thickness_profile(g0: MetricMeasureGraph, levels: int, p: float, C: float,
                      E_spec: Callable[[MetricMeasureGraph], frozenset],
                      F_spec: Callable[[MetricMeasureGraph], frozenset],
                      rel_change: float = 0.25, min_exponent: float = -0.1,
                      critical_p: float | None = None, tol: float = 1e-4,
                      exact_limit: int = EXACT_PAIR_LIMIT) -> ThicknessProfile:
    """Refinement trend of ``Mod_p Gamma(E, F; C)`` starting from ``g0``.

    ``E_spec``/``F_spec`` re-sample the sets on each level.  The verdict is
    ``bounded-below`` when the lower series changes by less than
    ``rel_change`` over the last refinement and its exponent is at least
    ``min_exponent``; ``decaying`` when the upper series has exponent below
    ``min_exponent`` and still drops over the last refinement; otherwise
    ``inconclusive``.  ``p == critical_p`` is always reported inconclusive.
    """
    p = _check_p(p)
    if levels < 3:
        raise ValueError("at least 3 refinement levels are needed")
    g = g0
    details = []
    for k in range(levels):
        if k:
            g = refine(g)
        details.append(level_modulus(g, p, C, E_spec(g), F_spec(g), tol, exact_limit))
    ns = [d.n for d in details]
    lows = [d.lower for d in details]
    ups = [d.upper for d in details]
    low_ok, slope, resid = _stable(ns, lows, rel_change, min_exponent)
    up_ok, up_slope, _ = _stable(ns, ups, rel_change, min_exponent)
    note = ""
    if critical_p is not None and math.isclose(p, critical_p):
        verdict, note = "inconclusive", "critical exponent: no verdict by design"
    elif low_ok:
        verdict = "bounded-below"
    elif up_slope < min_exponent and ups[-1] < ups[-2]:
        verdict, slope = "decaying", up_slope
    else:
        verdict = "inconclusive"
    return ThicknessProfile(ns, lows, ups, slope, resid, verdict, note, details)


# -- Sobolev-to-Lipschitz ------------------------------------------------------------

class PreconditionError(ValueError):
    """Declared upper gradient fails along a path."""

    def __init__(self, msg: str, report: "ViolationReport"):
        super().__init__(msg)
        self.report = report


@dataclass
class DiscreteFunction:
    values: np.ndarray
    gradient: np.ndarray | float = 1.0  # per-edge declared upper gradient
    cap_factor: float | None = None  # paths longer than cap_factor * d(ends) are excluded

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if not np.all(np.isfinite(self.values)):
            raise ValueError("function values must be finite")

    def gradient_on(self, g: MetricMeasureGraph) -> np.ndarray:
        grad = np.broadcast_to(np.asarray(self.gradient, dtype=float), (g.n_edges,))
        if np.any(grad < 0):
            raise ValueError("upper gradient must be >= 0")
        return np.array(grad)


@dataclass
class ViolationReport:
    excess: float  # max |f(end) - f(start)| - integral of g_f; <= 0 means no violation
    path: Path | None

    def to_dict(self) -> dict:
        return {"excess": self.excess,
                "path": None if self.path is None else list(self.path.nodes)}


def upper_gradient_violations(g: MetricMeasureGraph, f: DiscreteFunction) -> ViolationReport:
    """Worst path for the upper-gradient inequality of ``f``.

    Relaxes the potential ``h(y) = min_x f(x) + int_x^y g_f`` (a shortest-path
    problem from a virtual source wired to every node at cost ``f(x)``); the
    excess at ``y`` is ``f(y) - h(y)``, and the same with ``-f``.
    """
    if len(f.values) != g.n_nodes:
        raise GraphError("function must be defined on every node")
    cost = f.gradient_on(g) * g.edge_len
    best = ViolationReport(-math.inf, None)
    for sign in (1.0, -1.0):
        vals = sign * f.values
        rep = _potential_violation(g, vals, cost, f.cap_factor)
        if rep.excess > best.excess:
            best = rep
    if g.n_nodes == 1:
        best = ViolationReport(0.0, None)
    return best


def _potential_violation(g, vals, cost, cap_factor) -> ViolationReport:
    n = g.n_nodes
    if cap_factor is None:
        shift = vals - vals.min()
        rows = np.concatenate([g.edge_u, g.edge_v, np.full(n, n)])
        cols = np.concatenate([g.edge_v, g.edge_u, np.arange(n)])
        # zero-cost edges would vanish from the sparse matrix
        data = np.concatenate([cost, cost, shift]) + 0.0
        data = np.where(data == 0.0, 1e-300, data)
        A = sp.csr_matrix((data, (rows, cols)), shape=(n + 1, n + 1))
        h, pred = cs_dijkstra(A, indices=n, return_predecessors=True)
        h = h[:n] + vals.min()
        gap = vals - h
        # nodes whose potential came straight from the virtual source have zero excess
        y = int(np.argmax(gap))
        nodes = [y]
        while pred[nodes[-1]] not in (n, -9999):
            nodes.append(int(pred[nodes[-1]]))
        nodes.reverse()
        path = Path.from_nodes(g, nodes) if len(nodes) > 1 else None
        return ViolationReport(float(gap[y]) if path else 0.0, path)
    best = ViolationReport(0.0, None)
    rho = cost / g.edge_len
    for x in range(n):
        # the unconstrained g-length is a lower bound for the capped one
        dist, pred = dijkstra(g, [x], cost)
        d = distances_from(g, x)
        for y in range(n):
            if y == x or vals[y] - vals[x] - dist[y] <= best.excess:
                continue
            pt = path_to(g, pred, y)
            if float(g.edge_len[list(pt.edges)].sum()) > cap_factor * d[y] * (1 + 1e-12):
                pt = FamilyOracle(g, FamilySpec({x}, {y}, cap_factor=cap_factor)).min_path(rho)
            excess = vals[y] - vals[x] - float(cost[list(pt.edges)].sum())
            if excess > best.excess:
                best = ViolationReport(excess, pt)
    return best


@dataclass
class LipschitzReport:
    constant: float
    worst_pair: tuple[int, int] | None
    passed: bool
    precondition: ViolationReport | None = None

    def to_dict(self) -> dict:
        return {"constant": self.constant,
                "worst_pair": None if self.worst_pair is None else list(self.worst_pair),
                "passed": self.passed,
                "precondition": None if self.precondition is None else self.precondition.to_dict()}


def lipschitz_constant(values: np.ndarray, d: MetricMatrix, among: Sequence[int] | None = None,
                       against: Sequence[int] | None = None) -> tuple[float, tuple | None]:
    """Largest ``|f(x) - f(y)| / d(x, y)`` over node pairs of ``d``."""
    idx = {v: i for i, v in enumerate(d.nodes)}
    A = list(d.nodes if among is None else among)
    B = list(d.nodes if against is None else against)
    best, pair = 0.0, None
    for x in A:
        for y in B:
            if x == y:
                continue
            diff = abs(values[x] - values[y])
            dist = d.values[idx[x], idx[y]]
            ratio = diff / dist if dist > 0 else (math.inf if diff > 0 else 0.0)
            if ratio > best:
                best, pair = float(ratio), (int(x), int(y))
    return best, pair


def sobolev_to_lipschitz_check(g: MetricMeasureGraph, d_p: MetricMatrix, f: DiscreteFunction,
                               tol: float = 1e-6) -> LipschitzReport:
    """Lipschitz constant of ``f`` with respect to ``d_p`` after validating ``g_f``."""
    pre = upper_gradient_violations(g, f)
    if pre.excess > tol:
        raise PreconditionError(f"declared upper gradient fails by {pre.excess:.3g}", pre)
    const, pair = lipschitz_constant(f.values, d_p)
    return LipschitzReport(float(const), pair, bool(const <= 1.0 + tol), pre)


def counterexample_function(g: MetricMeasureGraph, E, density: np.ndarray, C: float, D: float,
                            n: float = 1e3) -> DiscreteFunction:
    """``v(x) = min over paths from E of sum (1 + g/n) len`` with ``g = n C D density``.

    When ``density`` is admissible for ``Gamma(E, F; C)``, every path in that
    family costs at least ``C D`` extra, while ``g/n`` has energy
    ``(C D)^p Mod`` which vanishes along a decaying profile.
    """
    gdens = n * C * D * np.asarray(density, dtype=float)
    w = (1.0 + gdens / n) * g.edge_len
    v = distances_from(g, sorted(E), w)
    return DiscreteFunction(v, 1.0 + gdens / n)


__all__ = ["DiscreteFunction", "LevelModulus", "LipschitzReport", "PreconditionError",
           "QuasiconvexityResult", "ThicknessProfile", "ViolationReport",
           "counterexample_function", "fit_exponent", "level_modulus", "lipschitz_constant",
           "quasiconvexity_constant", "sobolev_to_lipschitz_check", "thickness_profile",
           "upper_gradient_violations"]
