"""The three reference experiments: grid identity, cusp threshold, collapsed disc."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .analysis import counterexample_function, thickness_profile
from .essential import Params, essential_metric, graph_metric
from .graph import (GraphError, collapsed_disc, cusp_domain, distances_from, grid_square,
                    set_distance)
from .pullback import (factorization_check, path_pullback_metric, pullback_essential_metric,
                       quotient_space)


@dataclass
class Check:
    name: str
    passed: bool
    value: float
    bound: float

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed,
                "value": _num(self.value), "bound": _num(self.bound)}


@dataclass
class Report:
    experiment: str
    checks: list[Check] = field(default_factory=list)
    artifacts: dict = field(default_factory=dict)
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failed(self) -> list[str]:
        return [c.name for c in self.checks if not c.passed]

    def to_dict(self) -> dict:
        return {"experiment": self.experiment, "passed": self.passed,
                "checks": [c.to_dict() for c in self.checks],
                "seconds": round(self.seconds, 3)}


def _num(x):
    return None if x is None or (isinstance(x, float) and not math.isfinite(x)) else float(x)


def sample_pairs(n_nodes: int, count: int, rng: np.random.Generator) -> list[tuple[int, int]]:
    pairs = set()
    while len(pairs) < count:
        a, b = (int(v) for v in rng.choice(n_nodes, size=2, replace=False))
        pairs.add((min(a, b), max(a, b)))
    return sorted(pairs)


def grid_identity(n: int = 16, p: float = 2.0, pairs: int = 20, seed: int = 0,
                  params: Params | None = None, jobs: int = 1, tol_rel: float = 0.05) -> Report:
    """Essential metric against graph distance on the unit grid."""
    t0 = time.perf_counter()
    g = grid_square(n)
    rng = np.random.default_rng(seed)
    sample = sample_pairs(g.n_nodes, pairs, rng)
    nodes = sorted({v for pr in sample for v in pr})
    em = essential_metric(g, p, nodes, params, jobs=jobs)
    d = graph_metric(g, nodes)
    worst = max(abs(em.metric[x, y] - d[x, y]) / d[x, y] for x, y in sample)
    rep = Report("grid-identity")
    rep.checks.append(Check("max relative gap |d_p - d| / d", worst <= tol_rel, worst, tol_rel))
    rep.artifacts = {"graph": g, "pairs": sample, "essential": em, "distance": d}
    rep.seconds = time.perf_counter() - t0
    return rep


def lobe_sets(cutoff: float = 0.5):
    """Node-set samplers for the two cusp lobes ``x <= -cutoff`` and ``x >= cutoff``."""

    def left(g):
        return frozenset(np.flatnonzero(g.pos[:, 0] <= -cutoff + 1e-9).tolist())

    def right(g):
        return frozenset(np.flatnonzero(g.pos[:, 0] >= cutoff - 1e-9).tolist())

    return left, right


def cusp_threshold(p_exp: float = 2.0, levels: tuple[int, ...] = (8, 16, 32, 64),
                   qs: tuple[float, ...] = (2.0, 3.0, 4.0), C: float = 2.0, cutoff: float = 0.5,
                   min_exponent: float = -0.5, rel_change: float = 0.25) -> Report:
    """Thickness verdicts on the cusp for exponents below, at and above ``p_exp + 1``.

    ``min_exponent = -0.5`` sits between the subcritical decay rate
    ``-(p_exp + 1 - q)`` (``-1`` at ``q = 2``) and the ``O(1/n)`` drift of a
    convergent sequence at these resolutions (about ``-0.33`` at ``q = 4``).
    For each decaying exponent the counterexample function is built from the
    finest level's density and its Lipschitz constant between the lobes is
    reported against ``(C + 1) / 2``.
    """
    t0 = time.perf_counter()
    if any(b != 2 * a for a, b in zip(levels[:-1], levels[1:])):
        raise ValueError("levels must double")
    left, right = lobe_sets(cutoff)
    rep = Report("cusp-threshold")
    crit = p_exp + 1.0
    for q in qs:
        prof = thickness_profile(cusp_domain(p_exp, levels[0]), len(levels), q, C, left, right,
                                 rel_change=rel_change, min_exponent=min_exponent,
                                 critical_p=crit)
        rep.artifacts[f"q={q:g}"] = prof
        if math.isclose(q, crit):
            rep.checks.append(Check(f"q={q:g} reported inconclusive",
                                    prof.verdict == "inconclusive", prof.exponent, min_exponent))
        else:
            want = "decaying" if q < crit else "bounded-below"
            rep.checks.append(Check(f"q={q:g} verdict {want}", prof.verdict == want,
                                    prof.exponent, min_exponent))
            if prof.verdict == "decaying":
                lip = counterexample_lipschitz(cusp_domain(p_exp, levels[-1]), prof, C,
                                               left, right)
                rep.artifacts[f"counterexample q={q:g}"] = lip
                rep.checks.append(Check(f"q={q:g} counterexample Lipschitz constant",
                                        lip >= (C + 1) / 2, lip, (C + 1) / 2))
    rep.seconds = time.perf_counter() - t0
    return rep


def counterexample_lipschitz(g, profile, C: float, left, right) -> float:
    """Largest ``|v(y) - v(x)| / d(x, y)`` over ``x`` in E, ``y`` in F.

    ``v`` is the counterexample function of the finest level's density,
    which is admissible for ``Gamma(E, F; C)``.  ``v`` vanishes on E, so the
    ratio reduces to ``v(y) / d(E, y)``.
    """
    E, F = sorted(left(g)), sorted(right(g))
    density = profile.details[-1].density
    D = set_distance(g, E, F)
    v = counterexample_function(g, E, density, C, D)
    dE = distances_from(g, E)
    return float(max(v.values[y] / dE[y] for y in F))


def straddling_pairs(g, count: int, rng: np.random.Generator, segment) -> list[tuple[int, int]]:
    """Lattice node pairs on either side of a horizontal ``segment``, close to its line."""
    x0, y0, x1, _ = segment
    n = int(g.recipe["n"])
    span = x1 - x0
    lx = [i / n for i in range(n + 1) if x0 - span / 2 <= i / n <= x0 - span / 8]
    rx = [i / n for i in range(n + 1) if x1 + span / 8 <= i / n <= x1 + span / 2]
    ys = [j / n for j in range(n + 1) if abs(j / n - y0) <= span / 16 + 1e-12]
    if len(lx) * len(rx) * len(ys) ** 2 < count:
        raise GraphError(f"only {len(lx) * len(rx) * len(ys) ** 2} straddling pairs at n={n}")
    pairs = set()
    while len(pairs) < count:
        a = g.find_node(float(rng.choice(lx)), float(rng.choice(ys)))
        b = g.find_node(float(rng.choice(rx)), float(rng.choice(ys)))
        pairs.add((a, b))
    return sorted(pairs)


def collapsed_disc_experiment(n: int = 64, pairs: int = 10, seed: int = 0, p: float = 2.0,
                              eps_mod: float = 1e-6, tol_rel: float = 0.10,
                              endpoint_bound: float = 0.02, jobs: int = 1,
                              null_weight: float | None = 1e-9) -> Report:
    """Essential against path pull-back of the segment-collapsing map."""
    t0 = time.perf_counter()
    g, lu = collapsed_disc(n, null_weight=null_weight)
    seg = g.recipe["segment"]
    rng = np.random.default_rng(seed)
    sample = straddling_pairs(g, pairs, rng, seg)
    a, b = g.find_node(seg[0], seg[1]), g.find_node(seg[2], seg[3])
    nodes = sorted({v for pr in sample for v in pr} | {a, b})
    params = Params(eps_mod=eps_mod)
    em = pullback_essential_metric(g, lu, p, nodes, params, jobs=jobs)
    pm = path_pullback_metric(g, lu, nodes)
    euclid = {pr: float(np.hypot(*(g.pos[pr[0]] - g.pos[pr[1]]))) for pr in sample}
    worst = max(abs(em.metric[pr] - euclid[pr]) / euclid[pr] for pr in sample)
    rep = Report("collapsed-disc")
    rep.checks.append(Check("max relative gap essential pull-back vs Euclidean",
                            worst <= tol_rel, worst, tol_rel))
    rep.checks.append(Check("path pull-back between segment endpoints",
                            pm[a, b] <= endpoint_bound, pm[a, b], endpoint_bound))
    tol_lam = Params().resolved(g, p).tol_lam
    order = float(np.max(pm.values - em.metric.values))
    rep.checks.append(Check("path pull-back <= essential pull-back", order <= 2 * tol_lam,
                            order, 2 * tol_lam))
    rep.artifacts = {"graph": g, "lu": lu, "pairs": sample, "endpoints": (a, b),
                     "essential": em, "path": pm, "euclid": euclid,
                     "quotient_essential": quotient_space(em.metric, tol_lam),
                     "quotient_path": quotient_space(pm, tol_lam),
                     "factorization": factorization_check(pm, em.metric, 2 * tol_lam)}
    rep.seconds = time.perf_counter() - t0
    return rep


EXPERIMENTS = {"grid-identity": grid_identity, "cusp-threshold": cusp_threshold,
               "collapsed-disc": collapsed_disc_experiment}
