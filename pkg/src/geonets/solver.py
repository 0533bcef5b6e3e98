"""Drive the balancing defect of a net to zero over free vertex positions.

Two mechanisms: damped Newton on the length gradient (via the finite-
difference Hessian) once the defect is moderate, and Armijo-backtracking
length descent as the globalization fallback.  Newton targets zeros of the
gradient, so saddle-type stationary nets are found; pure descent phases keep
the length non-increasing.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (BvpError, EdgeCollapseError, GeonetsError, SolverError,
                     ValidationError)
from .multigraph import WeightedMultigraph, is_good
from .net import EdgeTooLongError, Net, NetEvaluator
from .riemann.charts import ChartPoint


@dataclass
class SolveResult:
    net: Net
    converged: bool
    iterations: int
    trace: list = field(default_factory=list)
    message: str = ""

    @property
    def final_defect(self):
        return self.trace[-1]["defect"] if self.trace else float("nan")


class _NewtonDriver:
    """Damped Newton on the gradient with a persistent spectral factorization.

    The step solves (H^2 + mu I) delta = -H g, which is plain Newton for
    mu -> 0 and degrades gracefully across null and negative eigenvalues;
    mu adapts: shrink on clean halvings, grow when a step fails to halve the
    defect (the spec's damping trigger) or is rejected outright.
    """

    def __init__(self, ev, reuse=3):
        self.ev = ev
        self.reuse = reuse
        self.lam = None
        self.Q = None
        self.age = 10 ** 9
        self.mu = None

    def invalidate(self):
        self.lam = None
        self.age = 10 ** 9

    def _refresh(self, x):
        H = self.ev.hessian(x, scheme="forward")
        self.lam, self.Q = np.linalg.eigh(H)
        self.age = 0
        lam_max = float(np.max(np.abs(self.lam))) if self.lam.size else 1.0
        if self.mu is None:
            self.mu = 1e-6 * lam_max ** 2 + 1e-14
        self._mu_min = 1e-16 * lam_max ** 2 + 1e-18

    def step(self, x, B, tol_stat):
        if self.lam is None or self.age >= self.reuse or \
                self.lam.size != self.ev.dim:
            self._refresh(x)
        g = self.ev.gradient(x)
        cap = 0.1 * self.ev.M.inj_radius_lb
        for _attempt in range(14):
            coef = self.lam / (self.lam ** 2 + self.mu)
            delta = -self.Q @ (coef * (self.Q.T @ g))
            mx = float(np.max(np.abs(delta))) if delta.size else 0.0
            if mx > cap:
                delta *= cap / mx
            try:
                B_try = self.ev.max_defect(x + delta)
            except (BvpError, GeonetsError):
                B_try = np.inf
            if B_try <= max(0.9999 * B, 0.5 * tol_stat):
                self.age += 1
                if B_try > 0.5 * B:
                    self.mu *= 8.0  # damping triggered: step did not halve
                else:
                    self.mu = max(self.mu * 0.25, self._mu_min)
                return True, x + delta
            if self.age > 0:
                self._refresh(x)  # maybe the reused factorization went stale
                continue
            self.mu *= 10.0
        return False, x


def stationarize(net0: Net, max_iter=300, tol_stat=1e-8, newton_threshold=0.5,
                 armijo_c=1e-4, polish_target=1e-12, collapse_ratio=1e-6,
                 hessian_reuse=3, on_trace=None) -> SolveResult:
    """Find a stationary net near net0.

    Returns a verified net with max defect <= tol_stat, or raises
    SolverError / EdgeCollapseError.  The trace records one row per
    iteration with phase, defect, and length; length is non-increasing
    along descent rows, and accepted Newton rows shrink the defect.
    """
    if net0.mode != "bvp":
        net0 = net0.as_bvp()
    M = net0.M
    ev = NetEvaluator(net0)
    newton = _NewtonDriver(ev, reuse=hessian_reuse)
    x = ev.x0.copy()
    trace = []
    alpha_prev = 1.0
    collapse_at = collapse_ratio * M.inj_radius_lb
    moved = False

    def record(phase, B, L):
        row = {"iter": len(trace), "phase": phase, "defect": float(B),
               "length": float(L), "dim": ev.dim}
        trace.append(row)
        if on_trace:
            on_trace(row)

    it = 0
    while it < max_iter:
        it += 1
        B = ev.max_defect(x)
        L = ev.length(x)
        if B <= tol_stat:
            record("converged", B, L)
            if moved:
                x = _polish(ev, newton, x, polish_target)
            return _finish(net0, ev, x, tol_stat, trace, it, moved)

        # edge maintenance: collapse check and cap-triggered subdivision
        lengths = ev.edge_lengths(x)
        short = [e for e, le in lengths.items() if le < collapse_at]
        if short:
            raise EdgeCollapseError(
                f"edge {short[0]!r} collapsed below "
                f"{collapse_ratio:g} * inj_radius_lb",
                detail={"edge": short[0], "length": lengths[short[0]]})
        too_long = sorted(e for e, le in lengths.items()
                          if le > M.max_edge_len)
        if too_long:
            net = ev.rebuild_net(x)
            for eid in too_long:
                net = net.subdivide_edge(eid, 2)
            net = _rehomed(net)
            ev = NetEvaluator(net)
            newton = _NewtonDriver(ev, reuse=hessian_reuse)
            x = ev.x0.copy()
            moved = True
            record("subdivide", B, L)
            continue

        accepted = False
        if B < newton_threshold:
            accepted, x = newton.step(x, B, tol_stat)
            if accepted:
                moved = True
                record("newton", B, L)
        if not accepted:
            ok, x, alpha_prev = _descent_step(ev, x, L, alpha_prev, armijo_c)
            if ok:
                moved = True
                newton.invalidate()
                record("descent", B, L)
            else:
                forced, x = newton.step(x, B, tol_stat)
                if not forced:
                    raise SolverError(
                        f"stalled at defect {B:.3g} (length {L:.6g})",
                        detail={"defect": float(B), "iterations": it})
                moved = True
                record("newton", B, L)

        # keep periodic coordinates inside the cell, migrate charts if a
        # vertex drifted toward a chart boundary
        x, ev, changed = _maybe_rehome(ev, x)
        if changed:
            newton = _NewtonDriver(ev, reuse=hessian_reuse)

    raise SolverError(f"no convergence within {max_iter} iterations",
                      detail={"iterations": max_iter,
                              "defect": float(ev.max_defect(x))})


def _descent_step(ev, x, L, alpha_prev, armijo_c):
    g = ev.gradient(x)
    g2 = float(g @ g)
    if g2 == 0.0:
        return False, x, alpha_prev
    alpha = min(2.0 * alpha_prev, 1.0)
    for _ in range(40):
        x_try = x - alpha * g
        try:
            L_try = ev.length(x_try)
        except (BvpError, GeonetsError):
            alpha *= 0.5
            continue
        if L_try <= L - armijo_c * alpha * g2:
            return True, x_try, alpha
        alpha *= 0.5
    return False, x, alpha_prev


def _polish(ev, newton, x, target):
    B = ev.max_defect(x)
    for _ in range(6):
        if B <= target:
            break
        ok, x_new = newton.step(x, B, target)
        if not ok:
            break
        B_new = ev.max_defect(x_new)
        if B_new >= B:
            break
        x, B = x_new, B_new
    return x


def _rehomed(net: Net) -> Net:
    pos = {v: net.M.rehome(p) for v, p in net.positions.items()}
    return Net(net.M, net.graph, pos, net.pinned,
               resolution=net.resolution, enforce_cap=False)


def _maybe_rehome(ev, x):
    """Wrap/migrate drifting vertices; rebuild the evaluator if anything moved."""
    M = ev.M
    pos = ev.positions_from(x)
    changed = False
    for v in ev.free:
        p = pos[v]
        better = M.rehome(p)
        if better.chart != p.chart:
            changed = True
            break
        ch = M.charts[p.chart]
        if ch.periodic.any() and not np.allclose(ch.wrap(p.xy), p.xy):
            changed = True
            break
    if not changed:
        return x, ev, False
    net = _rehomed(ev.rebuild_net(x))
    ev2 = NetEvaluator(net)
    return ev2.x0.copy(), ev2, True


def _finish(net0, ev, x, tol_stat, trace, iterations, moved):
    if not moved and net0.mode == "bvp":
        out = net0
    else:
        out = ev.rebuild_net(x)
    gate = out.max_defect()
    if gate > tol_stat:
        raise SolverError(
            f"verification gate failed: defect {gate:.3g} > {tol_stat:g}",
            detail={"defect": float(gate)})
    return SolveResult(net=out, converged=True, iterations=iterations,
                       trace=trace, message="stationary")


# ----------------------------------------------------------------------
# multistart


def multistart(M, graph: WeightedMultigraph, seeds, region=None, rng_seed=0,
               tol_stat=1e-8, max_iter=200, dedup_length=1e-6,
               dedup_hausdorff=1e-4, workers=1, max_build_attempts=6):
    """Random restarts of stationarize over a fixed multigraph.

    Deterministic for a fixed rng_seed: per-seed generators come from spawned
    SeedSequences, failures are skipped, survivors are verified, deduplicated
    by (length, vertex-set Hausdorff distance), and sorted by (length,
    lexicographic vertex coordinates).

    region: optional (ChartPoint, radius) ball restricting seed positions,
    measured in the comparison embedding.
    """
    if not is_good(graph):
        raise ValidationError("multigraph is not good", module="solver",
                              operation="multistart")
    if seeds < 1:
        raise ValidationError("seeds must be >= 1", module="solver",
                              operation="multistart")
    children = np.random.SeedSequence(rng_seed).spawn(seeds)

    def run_one(child):
        rng = np.random.default_rng(child)
        try:
            net0 = _seed_net(M, graph, rng, region, max_build_attempts)
            if net0 is None:
                return None
            res = stationarize(net0, max_iter=max_iter, tol_stat=tol_stat)
            return res.net
        except GeonetsError:
            return None

    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=workers) as pool:
            found = list(pool.map(run_one, children))
    else:
        found = [run_one(c) for c in children]
    found = [n for n in found if n is not None]
    return _dedupe(M, found, dedup_length, dedup_hausdorff)


def _seed_net(M, graph, rng, region, attempts):
    pos = {}
    for v in sorted(graph.vertices, key=str):
        pos[v] = _sample(M, rng, region)
    # break every edge once with a jittered midpoint so parallel edges get
    # independent geometry
    g = graph
    from .multigraph import subdivide_edge
    for eid in sorted(graph.edges, key=str):
        g, info = subdivide_edge(g, eid, 2)
        (w,) = info["new_vertices"]
        a, b, _m = graph.edges[eid]
        pos[w] = _midpoint(M, pos[a], pos[b], rng)
    for _ in range(attempts):
        try:
            return Net(M, g, pos)
        except EdgeTooLongError as e:
            g, info = subdivide_edge(g, e.eid, 2)
            (w,) = info["new_vertices"]
            e1, e2 = info["new_edges"]
            a, b = g.edges[e1][0], g.edges[e2][1]
            pos[w] = _midpoint(M, pos[a], pos[b], rng)
        except (BvpError, GeonetsError):
            return None
    return None


def _sample(M, rng, region):
    if region is None:
        return M.sample_point(rng)
    center, radius = region
    c_amb = M.ambient_point(center)
    for _ in range(4000):
        p = M.sample_point(rng)
        if np.linalg.norm(M.ambient_point(p) - c_amb) <= radius:
            return p
    raise ValidationError("region sampling failed (ball too small?)",
                          module="solver", operation="multistart")


def _midpoint(M, pa, pb, rng, jitter=0.15):
    c, xa, xb = M.common_chart(pa, pb)
    d = M.charts[c].delta(xa, xb)
    mid = xa + 0.5 * d + jitter * np.linalg.norm(d) * rng.standard_normal(M.dim)
    return M.wrap_point(ChartPoint(c, mid))


def _dedupe(M, nets, tol_len, tol_haus):
    def key(net):
        pts = net.ambient_vertex_positions()
        flat = np.sort(pts.round(9).ravel())
        return (round(net.total_length(), 9), tuple(flat))

    nets = sorted(nets, key=key)
    kept = []
    for net in nets:
        dup = False
        for other in kept:
            if abs(net.total_length() - other.total_length()) > tol_len:
                continue
            if _hausdorff_points(net.ambient_vertex_positions(),
                                 other.ambient_vertex_positions()) <= tol_haus:
                dup = True
                break
        if not dup:
            kept.append(net)
    return kept


def _hausdorff_points(A, B):
    d = np.linalg.norm(A[:, None, :] - B[None, :, :], axis=-1)
    return max(float(d.min(axis=1).max()), float(d.min(axis=0).max()))
