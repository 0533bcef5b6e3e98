"""Geodesic nets and their variational data.

A net is a weighted multigraph realized on a manifold: vertex positions plus
one geodesic path per edge.  In the default ("bvp") representation every edge
is the unique short geodesic between its endpoint positions, making total
length a function of the vertex positions alone; this is the finite-
dimensional model that the gradient, Hessian, and solver work in.  Surgery
can also produce "explicit" nets whose edges carry stored multi-chart paths
(for example half great circles), which support verification but not
re-solving.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (BvpError, DegenerateEdgeError, NonStationaryError,
                     ValidationError)
from .multigraph import WeightedMultigraph, is_cycle_graph
from .riemann.charts import ChartPoint
from .riemann.geodesics import (GeodesicPath, geodesic_bvp, geodesic_ivp,
                                parallel_transport)

DEFAULT_TOL_STAT = 1e-8
DEFAULT_TOL_NULL = 1e-6
DEFAULT_TOL_PAR = 1e-4


class EdgeTooLongError(ValidationError):
    module = "net"
    operation = "build"

    def __init__(self, message, eid=None, length=None):
        super().__init__(message, detail={"edge": eid, "length": length})
        self.eid = eid
        self.length = length


def _edge_nsteps(M, arc, resolution):
    return max(16, int(np.ceil(arc / (M.inj_radius_lb / resolution))))


def _bvp_with_retry(M, p, q, v0_hint, nsteps, check_uniqueness=True):
    """BVP solve that falls back to the straight-line guess on a stale hint."""
    if v0_hint is not None:
        try:
            return geodesic_bvp(M, p, q, v0_hint=v0_hint, nsteps=nsteps,
                                check_uniqueness=check_uniqueness)
        except BvpError:
            pass
    return geodesic_bvp(M, p, q, nsteps=nsteps,
                        check_uniqueness=check_uniqueness)


class Net:
    """A weighted multigraph with a geometric realization."""

    def __init__(self, M, graph: WeightedMultigraph, positions, pinned=(),
                 paths=None, hints=None, resolution=64, enforce_cap=True):
        self.M = M
        self.graph = graph
        self.positions = {v: M.wrap_point(p) for v, p in positions.items()}
        self.pinned = frozenset(pinned)
        self.resolution = int(resolution)
        missing = set(graph.vertices) - set(self.positions)
        if missing:
            raise ValidationError(f"vertices without positions: {sorted(missing)}",
                                  module="net", operation="build")
        if paths is not None:
            self.paths = dict(paths)
            self.mode = "explicit"
        else:
            self.paths = {}
            self.mode = "bvp"
            hints = hints or {}
            for eid in sorted(graph.edges, key=str):
                a, b, _m = graph.edges[eid]
                if a == b:
                    raise ValidationError(
                        f"loop edge {eid!r} has no bvp realization; supply an "
                        "explicit path", module="net", operation="build")
                arc_hint = hints.get(eid)
                path = _bvp_with_retry(
                    M, self.positions[a], self.positions[b],
                    None if arc_hint is None else np.asarray(arc_hint,
                                                             dtype=float),
                    self._nsteps_for(a, b, arc_hint))
                if enforce_cap and path.length > M.max_edge_len:
                    raise EdgeTooLongError(
                        f"edge {eid!r} length {path.length:.6g} exceeds the "
                        f"working cap {M.max_edge_len:.6g}",
                        eid=eid, length=path.length)
                self.paths[eid] = path

    def _nsteps_for(self, a, b, hint):
        pa = self.M.ambient_point(self.positions[a])
        pb = self.M.ambient_point(self.positions[b])
        arc = 2.0 * float(np.linalg.norm(pa - pb))  # generous chord proxy
        return _edge_nsteps(self.M, max(arc, 1e-3), self.resolution)

    # -- bookkeeping -----------------------------------------------------

    @property
    def free_vids(self):
        return sorted((v for v in self.graph.vertices if v not in self.pinned),
                      key=str)

    def positions_vector(self):
        return np.concatenate([self.positions[v].xy for v in self.free_vids]) \
            if self.free_vids else np.zeros(0)

    def vertex_slices(self):
        n = self.M.dim
        return {v: slice(i * n, (i + 1) * n)
                for i, v in enumerate(self.free_vids)}

    def with_positions(self, new_positions, enforce_cap=True):
        if self.mode != "bvp":
            raise ValidationError("explicit nets cannot be repositioned",
                                  module="net", operation="with_positions")
        hints = {eid: p.pieces[0].v0 for eid, p in self.paths.items()}
        pos = dict(self.positions)
        pos.update(new_positions)
        return Net(self.M, self.graph, pos, self.pinned, hints=hints,
                   resolution=self.resolution, enforce_cap=enforce_cap)

    def with_metric(self, M2, enforce_cap=True):
        """The same combinatorics and positions realized under another metric."""
        if self.mode != "bvp":
            raise ValidationError("explicit nets cannot be re-metrized",
                                  module="net", operation="with_metric")
        hints = {eid: p.pieces[0].v0 for eid, p in self.paths.items()}
        return Net(M2, self.graph, self.positions, self.pinned, hints=hints,
                   resolution=self.resolution, enforce_cap=enforce_cap)

    def as_bvp(self, enforce_cap=True):
        """Re-derive all edges from vertex positions (explicit -> bvp)."""
        if self.mode == "bvp":
            return self
        hints = {}
        for eid, path in self.paths.items():
            c0, v0 = path.start_velocity()
            a = self.graph.edges[eid][0]
            if self.positions[a].chart == c0:
                hints[eid] = v0
        return Net(self.M, self.graph, self.positions, self.pinned,
                   hints=hints, resolution=self.resolution,
                   enforce_cap=enforce_cap)

    # -- measurements -----------------------------------------------------

    def total_length(self):
        return float(sum(m * self.paths[eid].length
                         for eid, (_a, _b, m) in self.graph.edges.items()))

    def edge_end_tangents(self, eid):
        """Unit inward tangents at both endpoints, in the path's own charts."""
        path = self.paths[eid]
        cs, us = path.unit_in_start()
        ce, ue = path.unit_in_end()
        start = path.pieces[0]
        end = path.pieces[-1]
        return (cs, start.x0, us), (ce, end.end_x, ue)

    def _tangent_at_vertex(self, eid, vid):
        """Unit inward tangent of the edge at one of its vertices, expressed
        in the vertex's home chart."""
        a, b, _m = self.graph.edges[eid]
        (cs, xs, us), (ce, xe, ue) = self.edge_end_tangents(eid)
        out = []
        if vid == a:
            out.append((cs, xs, us))
        if vid == b:
            out.append((ce, xe, ue))
        home = self.positions[vid]
        res = []
        for (c, x, u) in out:
            if c != home.chart:
                u = self.M.push_vector(ChartPoint(c, x), u, home.chart)
            nu = self.M.norm(home.chart, home.xy, u)
            res.append(u / nu)
        return res

    def defect(self):
        """Multiplicity-weighted sum of unit inward tangents per vertex."""
        B = {v: np.zeros(self.M.dim) for v in self.graph.vertices}
        for eid, (a, b, m) in self.graph.edges.items():
            path = self.paths[eid]
            if path.length <= 0.0:
                raise DegenerateEdgeError(f"edge {eid!r} has zero length",
                                          operation="balancing_defect")
            for vid in {a, b}:
                for u in self._tangent_at_vertex(eid, vid):
                    B[vid] += m * u
        return B

    def defect_norms(self, B=None):
        B = B or self.defect()
        out = {}
        for v, vec in B.items():
            p = self.positions[v]
            out[v] = float(self.M.norm(p.chart, p.xy, vec))
        return out

    def max_defect(self, include_pinned=False):
        norms = self.defect_norms()
        vids = self.graph.vertices if include_pinned else \
            [v for v in self.graph.vertices if v not in self.pinned]
        return max((norms[v] for v in vids), default=0.0)

    def gradient(self):
        """d(total length)/d(free vertex coordinates) = -(lowered defect)."""
        B = self.defect()
        n = self.M.dim
        out = np.zeros(n * len(self.free_vids))
        for i, v in enumerate(self.free_vids):
            p = self.positions[v]
            g = self.M.metric(p.chart, p.xy)
            out[i * n:(i + 1) * n] = -(g @ B[v])
        return out

    def is_stationary(self, tol=DEFAULT_TOL_STAT):
        return self.max_defect() <= tol

    # -- structure edits ---------------------------------------------------

    def subdivide_edge(self, eid, l=2):
        """Insert l-1 interior break points along an edge (both modes)."""
        from .multigraph import subdivide_edge as g_subdivide
        path = self.paths[eid]
        g2, info = g_subdivide(self.graph, eid, l)
        pos = dict(self.positions)
        if self.mode == "bvp":
            hints = {e: p.pieces[0].v0 for e, p in self.paths.items()
                     if e != eid}
            T = path.T_total
            for i, nv in enumerate(info["new_vertices"], start=1):
                pos[nv] = self.M.rehome(path.point_at(T * i / l))
            return Net(self.M, g2, pos, self.pinned, hints=hints,
                       resolution=self.resolution)
        paths = {e: p for e, p in self.paths.items() if e != eid}
        rest = path
        T = path.T_total
        for i, (nv, ne) in enumerate(zip(info["new_vertices"],
                                         info["new_edges"][:-1]), start=1):
            left, rest = rest.split_at(T * i / l - (T * (i - 1) / l))
            paths[ne] = left
            pos[nv] = self.M.wrap_point(left.end_point())
        paths[info["new_edges"][-1]] = rest
        return Net(self.M, g2, pos, self.pinned, paths=paths,
                   resolution=self.resolution)

    # -- comparison helpers -------------------------------------------------

    def ambient_vertex_positions(self):
        return np.stack([self.M.ambient_point(self.positions[v])
                         for v in sorted(self.graph.vertices, key=str)])

    def image_samples(self):
        """Ambient samples of the whole image (with edge ids)."""
        pts = []
        for eid in sorted(self.paths, key=str):
            P, _t = self.paths[eid].ambient_samples()
            pts.append(P)
        return np.concatenate(pts, axis=0)

    def validate(self, tol_endpoint=1e-9):
        scale = 1.0 + max(float(np.max(np.abs(p.xy)))
                          for p in self.positions.values())
        for eid, (a, b, _m) in self.graph.edges.items():
            path = self.paths[eid]
            if path.length <= 0:
                raise DegenerateEdgeError(f"edge {eid!r} has zero length",
                                          operation="validate")
            da = np.linalg.norm(self.M.ambient_point(path.start_point())
                                - self.M.ambient_point(self.positions[a]))
            db = np.linalg.norm(self.M.ambient_point(path.end_point())
                                - self.M.ambient_point(self.positions[b]))
            if max(da, db) > tol_endpoint * scale * 10.0:
                raise ValidationError(
                    f"edge {eid!r} endpoints off vertex positions by "
                    f"{max(da, db):.3g}", module="net", operation="validate")
            if self.mode == "bvp" and path.length >= self.M.inj_radius_lb:
                raise ValidationError(
                    f"edge {eid!r} length {path.length:.6g} at or above "
                    "inj_radius_lb", module="net", operation="validate")
        return True


# ----------------------------------------------------------------------
# fast repeated evaluation over free coordinates


class NetEvaluator:
    """Length/defect/gradient/Hessian as functions of free vertex coordinates.

    Chart homes and per-edge integrator step counts are frozen at
    construction so every quantity is a smooth deterministic function of the
    coordinate vector; edge boundary-value solves are cached and hot-started.
    """

    def __init__(self, net: Net):
        if net.mode != "bvp":
            raise ValidationError("evaluator requires a bvp-mode net",
                                  module="net", operation="NetEvaluator")
        self.M = net.M
        self.net = net
        self.graph = net.graph
        self.pinned = net.pinned
        self.free = net.free_vids
        self.n = net.M.dim
        self.home = {v: net.positions[v].chart for v in net.graph.vertices}
        self.fixed_xy = {v: net.positions[v].xy for v in net.pinned}
        self.x0 = net.positions_vector()
        self.nsteps = {eid: sum(p.nsteps for p in path.pieces)
                       for eid, path in net.paths.items()}
        self.hints = {eid: path.pieces[0].v0.copy()
                      for eid, path in net.paths.items()}
        self._cache = {}

    @property
    def dim(self):
        return self.n * len(self.free)

    def positions_from(self, x):
        pos = {}
        for i, v in enumerate(self.free):
            pos[v] = ChartPoint(self.home[v], x[i * self.n:(i + 1) * self.n])
        for v in self.pinned:
            pos[v] = ChartPoint(self.home[v], self.fixed_xy[v])
        return pos

    def _edges_at(self, x):
        pos = self.positions_from(x)
        out = {}
        for eid in sorted(self.graph.edges, key=str):
            a, b, m = self.graph.edges[eid]
            key = (pos[a].xy.tobytes(), pos[b].xy.tobytes())
            hit = self._cache.get(eid)
            if hit is not None and hit[0] == key:
                out[eid] = hit[1]
                continue
            path = _bvp_with_retry(self.M, pos[a], pos[b],
                                   self.hints.get(eid), self.nsteps[eid],
                                   check_uniqueness=False)
            self.hints[eid] = path.pieces[0].v0.copy()
            self._cache[eid] = (key, path)
            out[eid] = path
        return pos, out

    def length(self, x):
        _pos, paths = self._edges_at(x)
        return float(sum(m * paths[eid].length
                         for eid, (_a, _b, m) in self.graph.edges.items()))

    def _defect(self, x):
        pos, paths = self._edges_at(x)
        B = {v: np.zeros(self.n) for v in self.graph.vertices}
        for eid, (a, b, m) in self.graph.edges.items():
            path = paths[eid]
            for vid, (c, xx, u) in (
                    (a, _start_tangent(path)), (b, _end_tangent(path))):
                home = pos[vid]
                if c != home.chart:
                    u = self.M.push_vector(ChartPoint(c, xx), u, home.chart)
                u = u / self.M.norm(home.chart, home.xy, u)
                B[vid] += m * u
        return pos, B

    def defect_norms(self, x):
        pos, B = self._defect(x)
        return {v: float(self.M.norm(pos[v].chart, pos[v].xy, B[v]))
                for v in self.graph.vertices}

    def max_defect(self, x):
        norms = self.defect_norms(x)
        return max((norms[v] for v in self.graph.vertices
                    if v not in self.pinned), default=0.0)

    def gradient(self, x):
        pos, B = self._defect(x)
        out = np.zeros(self.dim)
        for i, v in enumerate(self.free):
            g = self.M.metric(pos[v].chart, pos[v].xy)
            out[i * self.n:(i + 1) * self.n] = -(g @ B[v])
        return out

    def hessian(self, x, rel_step=1e-5, scheme="central"):
        """Symmetrized finite differences of the analytic gradient.

        Central differences serve classification; the cheaper forward scheme
        is accurate enough for solver steps.
        """
        d = self.dim
        H = np.zeros((d, d))
        if scheme == "forward":
            g0 = self.gradient(x)
            for i in range(d):
                h = rel_step * (1.0 + abs(x[i]))
                xp = x.copy()
                xp[i] += h
                H[:, i] = (self.gradient(xp) - g0) / h
        else:
            for i in range(d):
                h = rel_step * (1.0 + abs(x[i]))
                xp = x.copy()
                xp[i] += h
                xm = x.copy()
                xm[i] -= h
                H[:, i] = (self.gradient(xp) - self.gradient(xm)) / (2.0 * h)
        return 0.5 * (H + H.T)

    def rebuild_net(self, x, enforce_cap=False):
        pos = self.positions_from(x)
        hints = dict(self.hints)
        return Net(self.M, self.graph, pos, self.pinned, hints=hints,
                   resolution=self.net.resolution, enforce_cap=enforce_cap)

    def edge_lengths(self, x):
        _pos, paths = self._edges_at(x)
        return {eid: paths[eid].length for eid in paths}


def _start_tangent(path):
    c, u = path.unit_in_start()
    return c, path.pieces[0].x0, u


def _end_tangent(path):
    c, u = path.unit_in_end()
    return c, path.pieces[-1].end_x, u


# ----------------------------------------------------------------------
# operation-level API


def net_length(net: Net) -> float:
    return net.total_length()


def balancing_defect(net: Net):
    return net.defect()


def length_gradient(net: Net):
    return net.gradient()


@dataclass
class VariationReport:
    total_length: float
    defect_norms: dict
    max_defect: float
    gradient: np.ndarray
    hessian: np.ndarray
    eigenvalues: np.ndarray
    null_vectors: np.ndarray
    n_reparam_nulls: int
    parallel_residuals: list
    classification: str
    min_nontrivial_eigenvalue: float
    tolerances: dict = field(default_factory=dict)
    model_note: str = ("classification refers to the finite-dimensional "
                       "vertex-position model")


def _slide_basis(net: Net, defect_norms, tol_stat):
    """Orthonormal basis of break-point slide directions (reparametrizations).

    A free vertex with exactly two edge-ends and a balanced defect slides
    along its own geodesic without changing the image; such directions are
    quotiented before nondegeneracy classification.
    """
    n = net.M.dim
    free = net.free_vids
    slices = net.vertex_slices()
    cols = []
    for v in free:
        if net.graph.edge_ends_at(v) != 2:
            continue
        if defect_norms[v] > max(100.0 * tol_stat, 1e-7):
            continue
        eid = net.graph.incident_edges(v)[0]
        tau = net._tangent_at_vertex(eid, v)[0]
        col = np.zeros(n * len(free))
        col[slices[v]] = tau / np.linalg.norm(tau)
        cols.append(col)
    if not cols:
        return np.zeros((n * len(free), 0))
    S = np.stack(cols, axis=1)
    Q, _ = np.linalg.qr(S)
    return Q


def _parallelism_residual(net: Net, eta):
    """Max over edges of |transport(W_a) - W_b|_g / edge length."""
    M = net.M
    slices = net.vertex_slices()
    n = M.dim

    def w_at(v):
        if v in slices:
            return np.asarray(eta[slices[v]], dtype=float)
        return np.zeros(n)

    # normalize: largest vertex g-norm = 1
    scale = 0.0
    for v in net.graph.vertices:
        p = net.positions[v]
        scale = max(scale, float(M.norm(p.chart, p.xy, w_at(v))))
    if scale == 0.0:
        return 0.0
    worst = 0.0
    for eid, (a, b, _m) in net.graph.edges.items():
        path = net.paths[eid]
        wa = w_at(a) / scale
        wb = w_at(b) / scale
        # express wa in the path's start chart
        pa = net.positions[a]
        c0 = path.pieces[0].chart
        if pa.chart != c0:
            wa = M.push_vector(pa, wa, c0)
        c_end, w_end = parallel_transport(M, path, wa)
        pb = net.positions[b]
        if pb.chart != c_end:
            wb_end = M.push_vector(pb, wb, c_end)
        else:
            wb_end = wb
        xe = path.pieces[-1].end_x
        resid = float(M.norm(c_end, xe, w_end - wb_end)) / path.length
        worst = max(worst, resid)
    return worst


def hessian_and_classify(net: Net, tol_null=DEFAULT_TOL_NULL,
                         tol_par=DEFAULT_TOL_PAR, tol_stat=DEFAULT_TOL_STAT,
                         rel_step=1e-5, evaluator=None,
                         hessian=None) -> VariationReport:
    """Finite-difference Hessian, spectrum, and nondegeneracy classification.

    Null eigenvectors (relative threshold tol_null) are split into break-point
    slide directions, which are reparametrizations and are quotiented, and
    geometric null directions, which are tested for parallelism along the net
    by comparison with parallel transport.
    """
    if is_cycle_graph(net.graph) and len(net.graph.vertices) < 3:
        raise ValidationError("cycle nets need at least 3 break points",
                              module="net", operation="hessian_and_classify")
    norms = net.defect_norms()
    max_def = max((norms[v] for v in net.graph.vertices
                   if v not in net.pinned), default=0.0)
    if max_def > tol_stat:
        raise NonStationaryError(
            f"net is not stationary: max defect {max_def:.3g} > {tol_stat:g}",
            operation="hessian_and_classify")
    ev = evaluator or NetEvaluator(net)
    x = net.positions_vector()
    H = hessian if hessian is not None else ev.hessian(x, rel_step=rel_step)
    H = 0.5 * (H + H.T)
    lam, Q = np.linalg.eigh(H)
    lam_max = float(np.max(np.abs(lam))) if lam.size else 0.0
    thr = tol_null * lam_max
    null_idx = [i for i in range(lam.size) if abs(lam[i]) < thr]
    boundary = [i for i in range(lam.size)
                if thr / 3.0 <= abs(lam[i]) <= 3.0 * thr]

    S = _slide_basis(net, norms, tol_stat)
    n_slides = S.shape[1]

    def slide_fraction(vec):
        if n_slides == 0:
            return 0.0
        return float(np.linalg.norm(S.T @ vec) ** 2)

    # geometric null directions: null space with slides projected out
    geo = np.zeros((ev.dim, 0))
    if null_idx:
        N = Q[:, null_idx]
        G = N - S @ (S.T @ N) if n_slides else N
        U, sv, _ = np.linalg.svd(G, full_matrices=False)
        keep = sv > 0.5
        geo = U[:, keep]

    residuals = [_parallelism_residual(net, geo[:, k])
                 for k in range(geo.shape[1])]

    nontrivial = [abs(lam[i]) for i in range(lam.size)
                  if slide_fraction(Q[:, i]) < 0.5]
    min_nontrivial = float(min(nontrivial)) if nontrivial else float("inf")

    if boundary:
        cls = "indeterminate"
    elif all(r < tol_par for r in residuals):
        cls = "nondegenerate"
    else:
        cls = "degenerate"

    return VariationReport(
        total_length=net.total_length(),
        defect_norms=norms,
        max_defect=max_def,
        gradient=net.gradient(),
        hessian=H,
        eigenvalues=lam,
        null_vectors=geo,
        n_reparam_nulls=n_slides,
        parallel_residuals=residuals,
        classification=cls,
        min_nontrivial_eigenvalue=min_nontrivial,
        tolerances={"tol_null": tol_null, "tol_par": tol_par,
                    "tol_stat": tol_stat, "hessian_rel_step": rel_step},
    )


# ----------------------------------------------------------------------
# constructors


def closed_geodesic_net(M, chart, x0, v0, period, k=4, multiplicity=1,
                        prefix="", resolution=64):
    """Cycle net with k break points along a closed geodesic.

    Integrates the geodesic for one period, verifies closure, and cuts the
    loop into k explicit arcs.
    """
    if k < 3:
        raise ValidationError("need at least 3 break points", module="net",
                              operation="closed_geodesic_net")
    x0 = np.asarray(x0, dtype=float)
    v0 = np.asarray(v0, dtype=float)
    loop = geodesic_ivp(M, chart, x0, v0, period)
    gap = M.ambient_distance(loop.start_point(), loop.end_point())
    if gap > 1e-6 * max(1.0, loop.length):
        raise ValidationError(f"curve does not close: gap {gap:.3g}",
                              module="net", operation="closed_geodesic_net")
    graph = WeightedMultigraph.cycle(k, multiplicity, prefix=prefix)
    pos = {}
    paths = {}
    for i in range(k):
        t = period * i / k
        c, x, v = loop.state_at(t)
        pos[f"{prefix}v{i}"] = M.rehome(ChartPoint(c, x))
        arc = geodesic_ivp(M, c, x, v, period / k)
        paths[f"{prefix}e{i}"] = arc
    return Net(M, graph, pos, paths=paths, resolution=resolution)
