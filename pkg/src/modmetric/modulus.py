"""p-modulus of curve families by an active-set cutting-plane method.

The restricted problem over a finite path set is solved exactly (dual
projected Newton for ``1 < p < inf``, LP for ``p = 1`` and ``p = inf``); the
separation oracle then returns the cheapest family member.  Every iterate
gives a certified bracket: the dual value is a lower bound, and the density
rescaled by the oracle's minimum length is admissible, hence an upper bound.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from scipy.optimize import linprog

from .graph import EdgeLengthMap, GraphError, MetricMeasureGraph, Path, diameter
from .oracle import FamilyOracle

log = logging.getLogger(__name__)


class ModulusNotConverged(RuntimeError):
    """Iteration budget exhausted; carries the best certified bounds."""

    def __init__(self, msg: str, lower: float, upper: float, iters: int):
        super().__init__(f"{msg} (lower={lower:.6g}, upper={upper:.6g}, iters={iters})")
        self.lower = lower
        self.upper = upper
        self.iters = iters


@dataclass(frozen=True, eq=False)
class FamilySpec:
    """Paths from ``sources`` to ``targets``, optionally length-capped.

    ``cap_weights`` is the capped length functional (default edge lengths).
    ``cap_value`` is a uniform cap on that functional; ``cap_factor = C``
    additionally requires ``len(path) <= C * d(start, end)`` for each
    source/target pair.
    """

    sources: frozenset
    targets: frozenset
    cap_weights: np.ndarray | EdgeLengthMap | None = None
    cap_value: float = math.inf
    cap_factor: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "sources", frozenset(int(v) for v in self.sources))
        object.__setattr__(self, "targets", frozenset(int(v) for v in self.targets))
        if not self.sources or not self.targets:
            raise GraphError("source and target sets must be nonempty")
        if not self.cap_value >= 0:
            raise GraphError("cap value must be >= 0 or inf")
        if self.cap_factor is not None and not self.cap_factor >= 1:
            raise GraphError("cap factor must be >= 1")

    def with_cap(self, cap_value: float) -> "FamilySpec":
        return FamilySpec(self.sources, self.targets, self.cap_weights, cap_value,
                          self.cap_factor)


@dataclass
class ModulusResult:
    value: float
    flag: str  # "finite" | "infinite" | "empty"
    rho: np.ndarray
    paths: list[Path] = field(default_factory=list)
    weights: np.ndarray = field(default_factory=lambda: np.zeros(0))
    converged: bool = True
    iters: int = 0
    lower: float = 0.0
    upper: float = 0.0
    p: float = 2.0

    @property
    def gap(self) -> float:
        if self.flag != "finite" or self.upper <= 0:
            return 0.0
        return (self.upper - self.lower) / self.upper

    def to_dict(self) -> dict:
        nz = np.flatnonzero(self.rho)
        return {
            "value": None if math.isinf(self.value) else float(self.value),
            "flag": self.flag,
            "rho": [{"edge": int(e), "value": float(self.rho[e])} for e in nz],
            "active_paths": [list(pt.nodes) for pt, lam in zip(self.paths, self.weights)
                             if lam > 0] if len(self.weights) else [list(pt.nodes) for pt in self.paths],
            "iters": int(self.iters),
            "gap": float(self.gap),
        }


def energy(g: MetricMeasureGraph, rho: np.ndarray, p: float) -> float:
    if math.isinf(p):
        return float(rho.max()) if len(rho) else 0.0
    return float(np.dot(g.edge_mu, rho ** p))


def default_eps_mod(g: MetricMeasureGraph, p: float) -> float:
    """Scale-invariant floor separating numerically-zero from real modulus."""
    diam = diameter(g)
    if math.isinf(p):
        return 1e-9 / diam
    return 1e-9 * g.total_measure / diam ** p


# -- restricted problems ---------------------------------------------------------

class _PathSet:
    """Active path pool with a sparse incidence matrix over the edges it uses."""

    def __init__(self, g: MetricMeasureGraph):
        self.g = g
        self.paths: list[Path] = []
        self.keys: set[tuple[int, ...]] = set()
        self.col_of: dict[int, int] = {}
        self.cols: list[int] = []
        self.rows: list[tuple[list[int], list[float]]] = []
        self._cache: sp.csr_matrix | None = None

    def add(self, path: Path) -> bool:
        if path.edges in self.keys:
            return False
        self.keys.add(path.edges)
        self.paths.append(path)
        counts: dict[int, float] = {}
        for e in path.edges:
            counts[e] = counts.get(e, 0.0) + self.g.edge_len[e]
        idx = []
        for e in counts:
            if e not in self.col_of:
                self.col_of[e] = len(self.cols)
                self.cols.append(e)
            idx.append(self.col_of[e])
        self.rows.append((idx, list(counts.values())))
        return True

    def matrix(self) -> sp.csr_matrix:
        if self._cache is None or self._cache.shape[0] != len(self.rows):
            self._cache = self._build()
        return self._cache

    def _build(self) -> sp.csr_matrix:
        indptr = np.cumsum([0] + [len(r[0]) for r in self.rows])
        indices = np.concatenate([r[0] for r in self.rows]) if self.rows else np.zeros(0, int)
        data = np.concatenate([r[1] for r in self.rows]) if self.rows else np.zeros(0)
        return sp.csr_matrix((data, indices, indptr), shape=(len(self.rows), len(self.cols)))


def _dual_newton(N: sp.csr_matrix, mu: np.ndarray, p: float, lam: np.ndarray,
                 tol: float = 1e-13, max_iter: int = 500):
    """Maximise the concave dual of ``min sum mu rho^p s.t. N rho >= 1``.

    ``rho = (N^T lam / (p mu))^(1/(p-1))``.  Bound-constrained projected
    Newton (Bertsekas) on ``lam >= 0``.  Returns ``(lam, rho, dual_value)``.
    """
    dense = N.shape[0] * N.shape[1] <= 12_000_000
    if dense:
        N = N.toarray()
    Nt = N.T if dense else N.T.tocsr()
    r = 1.0 / (p - 1.0)
    q = p / (p - 1.0)
    scale = (1.0 / (p * mu)) ** r

    def evaluate(lam):
        s = Nt @ lam
        rho = scale * s ** r
        f = -lam.sum() + (p - 1.0) * float(np.dot(mu, (s / (p * mu)) ** q))
        return s, rho, f

    s, rho, f = evaluate(lam)
    for _ in range(max_iter):
        grad = N @ rho - 1.0
        pg = np.where(lam > 0, grad, np.minimum(grad, 0.0))
        pg_norm = float(np.abs(pg).max())
        if pg_norm <= tol:
            break
        eps = min(1e-9, pg_norm)
        act = (lam <= eps) & (grad > 0)
        free = ~act
        d = np.zeros_like(lam)
        d[act] = -grad[act]
        if free.any():
            floor = 1e-12 * max(float(s.max()), 1e-300)
            dr = scale * r * np.maximum(s, floor) ** (r - 1.0)
            NF = N[np.flatnonzero(free)]
            H = (NF * dr) @ NF.T if dense else (NF.multiply(dr) @ NF.T).toarray()
            H[np.diag_indices_from(H)] += 1e-14 * max(1.0, float(np.abs(np.diag(H)).max()))
            try:
                d[free] = -cho_solve(cho_factor(H), grad[free])
            except (LinAlgError, ValueError):
                d[free] = -np.linalg.lstsq(H, grad[free], rcond=None)[0]
        alpha = 1.0
        while True:
            new = np.maximum(lam + alpha * d, 0.0)
            s2, rho2, f2 = evaluate(new)
            decrease = alpha * float(-grad[free] @ d[free]) + float(grad[act] @ (lam[act] - new[act]))
            if f2 <= f - 1e-4 * decrease + 1e-15 * abs(f):
                break
            alpha *= 0.5
            if alpha < 1e-10:
                # no representable progress left
                return lam, rho, -f
        lam, s, rho, f = new, s2, rho2, f2
    return lam, rho, -f


def _solve_lp(N: sp.csr_matrix, mu: np.ndarray, p: float):
    """Restricted problem for ``p = 1`` (min mu.rho) and ``p = inf`` (min max rho)."""
    k, m = N.shape
    if math.isinf(p):
        c = np.zeros(m + 1)
        c[-1] = 1.0
        A = sp.hstack([-N, sp.csr_matrix((k, 1))]).tocsr()
        B = sp.hstack([sp.identity(m), -np.ones((m, 1))]).tocsr()
        res = linprog(c, A_ub=sp.vstack([A, B]), b_ub=np.concatenate([-np.ones(k), np.zeros(m)]),
                      bounds=[(0, None)] * (m + 1), method="highs")
        if res.status != 0:
            raise RuntimeError(f"LP failed: {res.message}")
        lam = -res.ineqlin.marginals[:k]
        return np.maximum(lam, 0.0), res.x[:m], float(res.fun)
    res = linprog(mu, A_ub=-N, b_ub=-np.ones(k), bounds=[(0, None)] * m, method="highs")
    if res.status != 0:
        raise RuntimeError(f"LP failed: {res.message}")
    return np.maximum(-res.ineqlin.marginals, 0.0), res.x, float(res.fun)


# -- driver -----------------------------------------------------------------------

def _check_p(p: float) -> float:
    p = float(p)
    if not 1.0 <= p <= math.inf:
        raise ValueError("p must lie in [1, inf]")
    return p


def p_modulus(g: MetricMeasureGraph, fam: FamilySpec, p: float = 2.0, tol: float = 1e-8,
              max_iter: int = 20000, threshold: float | None = None,
              oracle: FamilyOracle | None = None, warm: list[Path] | None = None
              ) -> ModulusResult:
    """Modulus of ``fam`` to relative duality gap ``tol``.

    With ``threshold`` the iteration also stops as soon as the certified
    bracket lies entirely on one side of it (``converged`` stays False unless
    the gap target was met too).  ``warm`` seeds the path pool; paths that are
    not family members must not be passed.
    """
    p = _check_p(p)
    if tol <= 0:
        raise ValueError("tol must be > 0")
    oracle = oracle or FamilyOracle(g, fam)
    m = g.n_edges
    if oracle.common:
        return ModulusResult(math.inf, "infinite", np.zeros(m), [Path((oracle.common[0],))],
                             np.zeros(1), True, 0, math.inf, math.inf, p)
    pool = _PathSet(g)
    rho = np.zeros(m)
    lam = np.zeros(0)
    lower, upper = 0.0, math.inf
    for path in warm or ():
        pool.add(path)
    if pool.paths:
        lam, rho, lower = _restricted(g, pool, p, np.zeros(len(pool.paths)))
    stalls = 0
    for it in range(1, max_iter + 1):
        path = oracle.min_path(rho)
        if path is None:
            return ModulusResult(0.0, "empty", np.zeros(m), [], np.zeros(0), True, it, 0.0, 0.0, p)
        length = float(sum(rho[e] * g.edge_len[e] for e in path.edges))
        if length > 0:
            upper = min(upper, energy(g, rho, p) / (length if math.isinf(p) else length ** p))
        gap = (upper - lower) / upper if math.isfinite(upper) and upper > 0 else math.inf
        done = gap <= tol
        decided = threshold is not None and (lower >= threshold or upper < threshold)
        if done or decided:
            return ModulusResult(lower, "finite", rho, list(pool.paths), lam, done, it,
                                 lower, upper, p)
        if not pool.add(path):
            stalls += 1
            if stalls > 3:
                break
            lam, rho, lower = _restricted(g, pool, p, lam, tight=True)
            continue
        lam = np.append(lam, 0.0)
        if 1.0 < p < math.inf and np.any(lam > 0):
            # start the new constraint strictly inside so the dual Hessian stays finite
            lam[-1] = 1e-3 * _single_path_lambda(pool.matrix()[-1], g.edge_mu[np.array(pool.cols)], p)
        lam, rho, lower = _restricted(g, pool, p, lam)
    raise ModulusNotConverged("modulus iteration did not converge", lower, upper, max_iter)


def _restricted(g, pool: _PathSet, p: float, lam0: np.ndarray, tight: bool = False):
    N = pool.matrix()
    cols = np.array(pool.cols)
    mu = g.edge_mu[cols]
    if p == 1.0 or math.isinf(p):
        lam, x, val = _solve_lp(N, mu, p)
    else:
        if not np.any(lam0 > 0):
            # single-path closed form as the starting point
            lam0 = np.zeros(len(pool.paths))
            lam0[0] = _single_path_lambda(N[0], mu, p)
        lam, x, val = _dual_newton(N, mu, p, lam0, tol=1e-15 if tight else 1e-13)
    rho = np.zeros(g.n_edges)
    rho[cols] = x
    return lam, rho, val


def _single_path_lambda(row: sp.csr_matrix, mu: np.ndarray, p: float) -> float:
    idx, ell = row.indices, row.data
    r = 1.0 / (p - 1.0)
    # rho_e = (lam*ell_e/(p mu_e))^r and sum rho_e ell_e = 1
    base = float(np.sum(ell * (ell / (p * mu[idx])) ** r))
    return base ** (-(p - 1.0))


def modulus_positive(g: MetricMeasureGraph, fam: FamilySpec, p: float = 2.0,
                     eps_mod: float | None = None, tol: float = 1e-6, **kw):
    """Decide ``Mod_p(fam) >= eps_mod``.

    Returns ``(flag, result)``; the result carries the optimal density (or the
    empty-family witness) as the certificate.
    """
    if eps_mod is None:
        eps_mod = default_eps_mod(g, p)
    if eps_mod <= 0:
        raise ValueError("eps_mod must be > 0")
    res = p_modulus(g, fam, p, tol=tol, threshold=eps_mod, **kw)
    if res.flag == "infinite":
        return True, res
    if res.flag == "empty":
        return False, res
    return res.lower >= eps_mod, res
