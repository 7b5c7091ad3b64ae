"""Essential lengths of curve families and the essential metric.

The essential length of a family under a length functional ``w`` is the
threshold ``lam*`` at which the sub-family ``{w(path) <= lam}`` stops being
modulus-null, i.e. reaches modulus ``eps_mod``.  Pairwise essential lengths
between (balls around) points form a pre-distance, which :func:`metrize`
turns into the largest pseudometric below it.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .graph import (EdgeLengthMap, GraphError, MetricMeasureGraph, closed_ball, diameter,
                    distance_matrix, set_distance, weights_of)
from .modulus import FamilySpec, _check_p, default_eps_mod, p_modulus
from .oracle import FamilyOracle


class NoConnectionError(RuntimeError):
    """No positive-modulus family joins the two sets."""


@dataclass
class EssentialLengthResult:
    value: float
    lo: float
    hi: float
    mod_lo: float  # certified upper bound on the modulus at ``lo``
    mod_hi: float  # certified lower bound on the modulus at ``hi``
    threshold: float
    probes: int = 0

    def to_dict(self) -> dict:
        return {"value": self.value, "bracket": [self.lo, self.hi],
                "modulus_at_bracket": [self.mod_lo, self.mod_hi],
                "threshold": self.threshold, "probes": self.probes}


@dataclass
class Params:
    """Numerical knobs shared by the essential-metric routines."""

    eps_mod: float | None = None
    tol_lam: float | None = None
    tol: float = 1e-6
    delta_schedule: tuple[float, ...] = (0.0,)
    max_iter: int = 20000

    def resolved(self, g: MetricMeasureGraph, p: float) -> "Params":
        eps = default_eps_mod(g, p) if self.eps_mod is None else float(self.eps_mod)
        tl = 1e-3 * diameter(g) if self.tol_lam is None else float(self.tol_lam)
        if eps <= 0 or tl <= 0 or self.tol <= 0:
            raise ValueError("tolerances must be positive")
        sched = tuple(sorted({float(d) for d in self.delta_schedule}, reverse=True))
        if not sched or sched[-1] < 0:
            raise ValueError("delta schedule must be nonempty and nonnegative")
        return Params(eps, tl, self.tol, sched, self.max_iter)


class _Prober:
    """Positivity decisions for ``{w <= lam}`` sub-families with a shared path pool."""

    def __init__(self, g, w, E, F, p, params: Params):
        self.g, self.p, self.params = g, p, params
        self.w = weights_of(g, w)
        self.base = FamilySpec(frozenset(E), frozenset(F), self.w)
        self.pool = []  # (w-length, path)
        self.probes = 0

    def decide(self, lam: float):
        self.probes += 1
        fam = self.base.with_cap(lam)
        warm = [pt for L, pt in self.pool if L <= lam * (1 + 1e-12) + 1e-15]
        res = p_modulus(self.g, fam, self.p, tol=self.params.tol,
                        threshold=self.params.eps_mod, warm=warm,
                        max_iter=self.params.max_iter, oracle=FamilyOracle(self.g, fam))
        known = {pt.edges for _, pt in self.pool}
        for pt in res.paths:
            if pt.edges not in known:
                self.pool.append((float(sum(self.w[e] for e in pt.edges)), pt))
                known.add(pt.edges)
        if res.flag == "empty":
            return False, 0.0
        if res.flag == "infinite":
            return True, math.inf
        if res.lower >= self.params.eps_mod:
            return True, res.lower
        return False, res.upper


def essential_length(g: MetricMeasureGraph, w, E, F, p: float = 2.0,
                     params: Params | None = None) -> EssentialLengthResult:
    """Essential infimum of the ``w``-length over paths from ``E`` to ``F``.

    Bisection over ``[w-dist(E, F), sum(w)]`` for the least cap at which the
    capped family reaches modulus ``eps_mod``; the returned value is the upper
    end of the final bracket (width at most ``tol_lam``).
    """
    p = _check_p(p)
    params = (params or Params()).resolved(g, p)
    E, F = frozenset(int(v) for v in E), frozenset(int(v) for v in F)
    if not E or not F:
        raise GraphError("E and F must be nonempty")
    if E & F:
        raise GraphError("E and F must be disjoint")
    wt = weights_of(g, w)
    prober = _Prober(g, wt, E, F, p, params)
    lo = set_distance(g, E, F, wt)
    hi = float(wt.sum())
    ok, m = prober.decide(lo)
    if ok:
        return EssentialLengthResult(lo, lo, lo, m, m, params.eps_mod, prober.probes)
    mod_lo = m
    ok, mod_hi = prober.decide(hi)
    if not ok:
        raise NoConnectionError("no positive-modulus family at the upper bracket")
    # gallop up from the lower end before bisecting; lam* is usually near lo
    step = params.tol_lam
    while lo + step < hi:
        ok, m = prober.decide(lo + step)
        if ok:
            hi, mod_hi = lo + step, m
            break
        lo, mod_lo = lo + step, m
        step *= 2.0
    while hi - lo > params.tol_lam:
        mid = 0.5 * (lo + hi)
        ok, m = prober.decide(mid)
        if ok:
            hi, mod_hi = mid, m
        else:
            lo, mod_lo = mid, m
    return EssentialLengthResult(hi, lo, hi, mod_lo, mod_hi, params.eps_mod, prober.probes)


@dataclass
class PreDistance:
    value: float
    profile: list[tuple[float, float]] = field(default_factory=list)


def essential_predistance(g: MetricMeasureGraph, w, x: int, y: int, p: float = 2.0,
                          params: Params | None = None) -> PreDistance:
    """Essential length between closed balls around ``x`` and ``y``, for each radius.

    The schedule runs from the largest radius down; the value at the smallest
    one (radius 0 means the singletons) is returned, with the whole profile.
    """
    if x == y:
        raise GraphError("x and y must differ")
    params = (params or Params()).resolved(g, _check_p(p))
    profile = []
    for delta in params.delta_schedule:
        E, F = closed_ball(g, x, delta), closed_ball(g, y, delta)
        if E & F:
            profile.append((delta, 0.0))
            continue
        profile.append((delta, essential_length(g, w, E, F, p, params).value))
    return PreDistance(profile[-1][1], profile)


# -- metric matrices -------------------------------------------------------------

@dataclass
class MetricMatrix:
    nodes: list[int]
    values: np.ndarray

    def __post_init__(self):
        self.nodes = [int(v) for v in self.nodes]
        self.values = np.asarray(self.values, dtype=float)

    def __getitem__(self, pair) -> float:
        i, j = (self.nodes.index(v) for v in pair)
        return float(self.values[i, j])

    def axiom_violations(self, tol: float = 1e-9) -> dict:
        """Largest violation of symmetry, zero diagonal, and the triangle inequality."""
        D = self.values
        sym = float(np.nanmax(np.abs(np.where(np.isinf(D) & np.isinf(D.T), 0.0, D - D.T)))) \
            if D.size else 0.0
        diag = float(np.abs(np.diag(D)).max()) if D.size else 0.0
        tri = 0.0
        for k in range(len(D)):
            with np.errstate(invalid="ignore"):
                excess = D - (D[:, k][:, None] + D[k, :][None, :])
            excess = np.where(np.isnan(excess), 0.0, excess)
            tri = max(tri, float(excess.max()))
        neg = float(max(0.0, -D.min())) if D.size else 0.0
        return {"symmetry": sym, "diagonal": diag, "triangle": tri, "negative": neg,
                "ok": max(sym, diag, tri, neg) <= tol}

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["node"] + self.nodes)
        for v, row in zip(self.nodes, self.values):
            wr.writerow([v] + [format(float(x), ".17g") for x in row])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {"nodes": self.nodes,
                "values": [[None if math.isinf(x) else float(x) for x in row]
                           for row in self.values]}

    @classmethod
    def from_csv(cls, text: str) -> "MetricMatrix":
        rows = list(csv.reader(io.StringIO(text)))
        nodes = [int(v) for v in rows[0][1:]]
        vals = np.array([[float(x) for x in r[1:]] for r in rows[1:]])
        return cls(nodes, vals)


def metrize(pre: np.ndarray) -> np.ndarray:
    """Largest pseudometric below ``pre``: chain infimum by Floyd-Warshall.

    ``inf`` entries act as missing links.
    """
    D = np.array(pre, dtype=float, copy=True)
    if D.ndim != 2 or D.shape[0] != D.shape[1]:
        raise ValueError("pre-distance must be a square matrix")
    if np.any(np.isnan(D)) or np.any(D < 0):
        raise ValueError("pre-distance entries must be >= 0")
    flat = np.where(np.isinf(D), -1.0, D)
    if not np.allclose(flat, flat.T, rtol=1e-9, atol=0.0):
        raise ValueError("pre-distance must be symmetric")
    D = np.minimum(D, D.T)
    np.fill_diagonal(D, 0.0)
    for k in range(len(D)):
        np.minimum(D, D[:, k][:, None] + D[k, :][None, :], out=D)
    return D


def _pair_job(args):
    g, w, x, y, p, params = args
    return essential_predistance(g, w, x, y, p, params)


def predistance_matrix(g: MetricMeasureGraph, w, nodes: Sequence[int], p: float = 2.0,
                       params: Params | None = None, jobs: int = 1):
    """Pairwise essential pre-distances among ``nodes`` plus per-pair profiles."""
    nodes = [int(v) for v in nodes]
    if len(set(nodes)) != len(nodes):
        raise GraphError("node list has duplicates")
    params = (params or Params()).resolved(g, _check_p(p))
    pairs = [(i, j) for i in range(len(nodes)) for j in range(i + 1, len(nodes))]
    tasks = [(g, w, nodes[i], nodes[j], p, params) for i, j in pairs]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_pair_job, tasks))
    else:
        results = [_pair_job(t) for t in tasks]
    pre = np.zeros((len(nodes), len(nodes)))
    profiles = {}
    for (i, j), r in zip(pairs, results):
        pre[i, j] = pre[j, i] = r.value
        profiles[(nodes[i], nodes[j])] = r.profile
    return pre, profiles


def essential_row(g: MetricMeasureGraph, x: int, p: float = 2.0, params: Params | None = None,
                  w=None, jobs: int = 1) -> np.ndarray:
    """Essential pre-distances from ``x`` to every node (``0`` at ``x``)."""
    params = (params or Params()).resolved(g, _check_p(p))
    others = [y for y in range(g.n_nodes) if y != x]
    tasks = [(g, w, x, y, p, params) for y in others]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_pair_job, tasks))
    else:
        results = [_pair_job(t) for t in tasks]
    row = np.zeros(g.n_nodes)
    row[others] = [r.value for r in results]
    return row


@dataclass
class EssentialMetric:
    metric: MetricMatrix
    pre: np.ndarray
    profiles: dict

    @property
    def discrepancy(self) -> float:
        """Largest drop from pre-distance to metric (triangle repair)."""
        return float(np.max(self.pre - self.metric.values)) if self.pre.size else 0.0


def essential_metric(g: MetricMeasureGraph, p: float = 2.0, nodes: Sequence[int] | None = None,
                     params: Params | None = None, w=None, jobs: int = 1) -> EssentialMetric:
    """Metrized essential pre-distance (``w`` defaults to edge lengths)."""
    nodes = list(range(g.n_nodes)) if nodes is None else [int(v) for v in nodes]
    pre, profiles = predistance_matrix(g, w, nodes, p, params, jobs)
    return EssentialMetric(MetricMatrix(nodes, metrize(pre)), pre, profiles)


def essential_metric_infty(g: MetricMeasureGraph, x: int, y: int,
                           params: Params | None = None) -> float:
    """Essential length between ``{x}`` and ``{y}`` for infinity-modulus."""
    if x == y:
        raise GraphError("x and y must differ")
    return essential_length(g, None, {x}, {y}, math.inf, params).value


def graph_metric(g: MetricMeasureGraph, nodes: Sequence[int], w=None) -> MetricMatrix:
    """Shortest-path metric among ``nodes`` as a :class:`MetricMatrix`."""
    return MetricMatrix(list(nodes), distance_matrix(g, nodes, w))


__all__ = ["EssentialLengthResult", "EssentialMetric", "MetricMatrix", "NoConnectionError",
           "Params", "PreDistance", "essential_length", "essential_metric",
           "essential_metric_infty", "essential_predistance", "graph_metric", "metrize",
           "predistance_matrix", "EdgeLengthMap"]
