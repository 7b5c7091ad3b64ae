"""Separation oracle: cheapest family member under a density.

For an uncapped family this is a multi-source Dijkstra with edge weights
``rho_e * len_e``.  A length cap turns it into a resource-constrained shortest
path problem, solved exactly by label setting over ``(rho-length,
cap-length)`` pairs with Pareto dominance and an A* bound.
"""

from __future__ import annotations

import heapq
import math

import numpy as np

from .graph import MetricMeasureGraph, Path, dijkstra, distances_from, path_to, weights_of

_REL = 1e-12


def _slack(cap: float) -> float:
    return cap + _REL * max(1.0, abs(cap))


class FamilyOracle:
    """Precomputed search state for one family; ``min_path(rho)`` per call."""

    def __init__(self, g: MetricMeasureGraph, fam):
        self.g = g
        self.fam = fam
        self.adj = g.adjacency_lists()
        self.len = g.edge_len.tolist()
        self.w = weights_of(g, fam.cap_weights)
        self.wl = self.w.tolist()
        self.sources = sorted(fam.sources)
        self.targets = sorted(fam.targets)
        self.is_target = np.zeros(g.n_nodes, dtype=bool)
        self.is_target[self.targets] = True
        self.common = sorted(fam.sources & fam.targets)
        self.capped = fam.cap_factor is not None or math.isfinite(fam.cap_value)
        if self.capped:
            # cap-length still needed to reach some target
            self.w_to_target = distances_from(g, self.targets, self.w)
        if fam.cap_factor is not None:
            self._prepare_pair_caps()

    def _prepare_pair_caps(self):
        g, fam = self.g, self.fam
        C = float(fam.cap_factor)
        self.pair_cap = {}
        tgt = np.array(self.targets)
        for s in self.sources:
            d = distances_from(g, s)
            cap = C * d[tgt]
            if math.isfinite(self.fam.cap_value):
                cap = np.minimum(cap, self.fam.cap_value)
            self.pair_cap[s] = cap
        self.target_pos = {t: i for i, t in enumerate(self.targets)}
        if len(self.targets) <= 256:
            self.w_from_target = np.array([distances_from(g, t, self.w) for t in self.targets])
        else:
            self.w_from_target = None

    # -- public -------------------------------------------------------------

    def is_empty(self) -> bool:
        return self.min_path(np.zeros(self.g.n_edges)) is None

    def min_path(self, rho: np.ndarray) -> Path | None:
        """Family member of least ``sum rho_e len_e``; ``None`` iff the family is empty."""
        if self.common:
            return Path((self.common[0],))
        cost = np.asarray(rho, dtype=float) * self.g.edge_len
        if not self.capped:
            dist, pred = dijkstra(self.g, self.sources, cost, targets=self.targets)
            reach = [t for t in self.targets if math.isfinite(dist[t])]
            if not reach:
                return None
            t = min(reach, key=lambda v: (dist[v], v))
            return path_to(self.g, pred, t)
        h = distances_from(self.g, self.targets, cost)
        if self.fam.cap_factor is None:
            limit = np.full(self.g.n_nodes, _slack(self.fam.cap_value)) - self.w_to_target
            best = self._labels(self.sources, cost.tolist(), h.tolist(), limit.tolist(),
                                lambda t, b: b <= _slack(self.fam.cap_value), math.inf)
            return best[1] if best else None
        return self._pairwise(cost.tolist(), h)

    # -- label setting --------------------------------------------------------

    def _pairwise(self, cost, h):
        order = sorted(self.sources, key=lambda s: (h[s], s))
        best_a, best_path = math.inf, None
        hl = h.tolist()
        for s in order:
            if h[s] >= best_a:
                break
            caps = self.pair_cap[s]
            if self.w_from_target is not None:
                limit = np.max(caps[:, None] - self.w_from_target, axis=0)
            else:
                limit = np.full(self.g.n_nodes, caps.max()) - self.w_to_target
            limit = limit + _REL * max(1.0, float(caps.max()))
            tp = self.target_pos

            def accept(t, b, caps=caps):
                return b <= _slack(caps[tp[t]])

            found = self._labels([s], cost, hl, limit.tolist(), accept, best_a)
            if found and found[0] < best_a:
                best_a, best_path = found
        return best_path

    def _labels(self, sources, cost, h, limit, accept, bound):
        """A* label setting; returns ``(rho_length, path)`` or ``None``.

        ``limit[v]`` is the largest cap-length a label at ``v`` may carry and
        still reach an acceptable target.  Labels with ``a + h[v] >= bound``
        are discarded.
        """
        adj, wl, is_t = self.adj, self.wl, self.is_target
        la, lb, lnode, lpar, ledge, alive = [], [], [], [], [], []
        front: dict[int, list[int]] = {}
        heap = []
        for s in sources:
            if limit[s] < 0 or h[s] >= bound or not math.isfinite(h[s]):
                continue
            i = len(la)
            la.append(0.0); lb.append(0.0); lnode.append(s); lpar.append(-1)
            ledge.append(-1); alive.append(True)
            front.setdefault(s, []).append(i)
            heap.append((h[s], s, 0.0, i))
        heapq.heapify(heap)
        while heap:
            key, v, b, i = heapq.heappop(heap)
            if not alive[i]:
                continue
            a = la[i]
            if key >= bound:
                break
            if is_t[v] and accept(v, b):
                return a, self._rebuild(i, lnode, lpar, ledge)
            for w, e in adj[v]:
                b2 = b + wl[e]
                if b2 > limit[w]:
                    continue
                a2 = a + cost[e]
                k2 = a2 + h[w]
                if k2 >= bound:
                    continue
                lst = front.get(w)
                if lst is not None:
                    dominated = False
                    for j in lst:
                        if la[j] <= a2 and lb[j] <= b2:
                            dominated = True
                            break
                    if dominated:
                        continue
                    keep = []
                    for j in lst:
                        if a2 <= la[j] and b2 <= lb[j]:
                            alive[j] = False
                        else:
                            keep.append(j)
                    lst[:] = keep
                else:
                    lst = front[w] = []
                j = len(la)
                la.append(a2); lb.append(b2); lnode.append(w); lpar.append(i)
                ledge.append(e); alive.append(True)
                lst.append(j)
                heapq.heappush(heap, (k2, w, b2, j))
        return None

    @staticmethod
    def _rebuild(i, lnode, lpar, ledge) -> Path:
        nodes, edges = [], []
        while i >= 0:
            nodes.append(lnode[i])
            if ledge[i] >= 0:
                edges.append(ledge[i])
            i = lpar[i]
        return Path(tuple(reversed(nodes)), tuple(reversed(edges)))


def separation_oracle(g: MetricMeasureGraph, rho, fam) -> Path | None:
    """Cheapest member of ``fam`` under density ``rho``, or ``None`` if the family is empty."""
    return FamilyOracle(g, fam).min_path(np.asarray(rho, dtype=float))
