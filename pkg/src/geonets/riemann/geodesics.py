"""Geodesic initial- and boundary-value problems, segments, and transport.

Integration is fixed-step RK4 on the first-order system (x' = v,
v'^k = -Gamma^k_ij v^i v^j), batched over trajectories so that shooting
Jacobians cost one extra integration sweep instead of n.  Flat charts
(constant metric) use the closed-form straight lines.

A GeodesicSegment lives in a single chart and is defined by its initial data
(chart, x0, v0, T, nsteps); samples are rederived deterministically on
demand.  A GeodesicPath chains segments across chart transitions and is the
general edge geometry: boundary-value edges are single-piece paths, while
surgery may produce long multi-chart paths.
"""

from __future__ import annotations

import numpy as np

from ..errors import (BvpError, ChartDomainError, DegenerateEdgeError,
                      IvpError, OutsideUniquenessError)
from .charts import ChartPoint

MIN_SAMPLES = 16


def _accel(M, chart, X, V):
    ch = M.charts[chart]
    if ch.conformal is not None:
        # g = e^{2 phi} I: a^k = -(2 (dphi . v) v^k - |v|^2 dphi^k)
        dphi = ch.conformal[1](X)
        vd = np.sum(V * dphi, axis=-1, keepdims=True)
        v2 = np.sum(V * V, axis=-1, keepdims=True)
        return v2 * dphi - 2.0 * vd * V
    # fused geodesic acceleration: a = -g^{-1} (v^i v^j (d_i g_jl - d_l g_ij / 2))
    g = np.asarray(ch.metric(X), dtype=float)
    dg = M.metric_grad(chart, X)
    t1 = np.einsum("...ijl,...i,...j->...l", dg, V, V)
    t2 = np.einsum("...lij,...i,...j->...l", dg, V, V)
    return -np.linalg.solve(g, (t1 - 0.5 * t2)[..., None])[..., 0]


def _rk4_sweep(M, chart, X0, V0, T, nsteps, store=False):
    """Integrate a batch of geodesics in one chart.  X0, V0: (B, n)."""
    X = np.array(X0, dtype=float)
    V = np.array(V0, dtype=float)
    h = T / nsteps
    ch = M.charts[chart]
    if store:
        XS = np.empty((nsteps + 1,) + X.shape)
        VS = np.empty_like(XS)
        XS[0], VS[0] = X, V
    if ch.flat:
        if store:
            ts = (np.arange(1, nsteps + 1) * h)[:, None, None]
            XS[1:] = X[None] + ts * V[None]
            VS[1:] = V[None]
            return XS, VS
        return X + T * V, V
    for i in range(nsteps):
        k1x = V
        k1v = _accel(M, chart, X, V)
        k2x = V + 0.5 * h * k1v
        k2v = _accel(M, chart, X + 0.5 * h * k1x, k2x)
        k3x = V + 0.5 * h * k2v
        k3v = _accel(M, chart, X + 0.5 * h * k2x, k3x)
        k4x = V + h * k3v
        k4v = _accel(M, chart, X + h * k3x, k4x)
        X = X + (h / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
        V = V + (h / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
        if store:
            XS[i + 1], VS[i + 1] = X, V
    if store:
        return XS, VS
    return X, V


def _default_nsteps(M, arc_length):
    step = M.inj_radius_lb / 160.0
    return max(MIN_SAMPLES, int(np.ceil(abs(arc_length) / step)))


class GeodesicSegment:
    """A geodesic arc inside one chart, determined by its initial data."""

    def __init__(self, M, chart, x0, v0, T, nsteps=None):
        self.M = M
        self.chart = int(chart)
        self.x0 = np.array(x0, dtype=float)
        self.v0 = np.array(v0, dtype=float)
        self.T = float(T)
        self.speed0 = float(M.norm(chart, self.x0, self.v0))
        if nsteps is None:
            nsteps = _default_nsteps(M, self.speed0 * self.T)
        self.nsteps = max(MIN_SAMPLES, int(nsteps))
        if self.nsteps % 2:
            self.nsteps += 1  # even interval count keeps Simpson applicable
        self._X = None
        self._V = None
        self._cumlen = None
        self._end_state = None  # (x_end, v_end) known without full samples

    # -- sampling ------------------------------------------------------

    def _materialize(self):
        if self._X is None:
            XS, VS = _rk4_sweep(self.M, self.chart, self.x0[None], self.v0[None],
                                self.T, self.nsteps, store=True)
            self._X = XS[:, 0, :]
            self._V = VS[:, 0, :]
            speeds = self.M.norm(self.chart, self._X, self._V)
            dt = self.T / self.nsteps
            seglen = 0.5 * (speeds[:-1] + speeds[1:]) * dt
            self._cumlen = np.concatenate([[0.0], np.cumsum(seglen)])
        return self._X, self._V

    @property
    def samples(self):
        return self._materialize()[0]

    @property
    def velocities(self):
        return self._materialize()[1]

    @property
    def cumlen(self):
        self._materialize()
        return self._cumlen

    @property
    def length(self):
        # |v|_g is conserved along geodesics, so speed0 * T agrees with the
        # sample quadrature to integration accuracy; prefer the cheap form
        # until samples exist.
        if self.M.charts[self.chart].flat or self._X is None:
            return self.speed0 * self.T
        return float(self.cumlen[-1])

    @property
    def end_x(self):
        if self._X is None and self._end_state is not None:
            return self._end_state[0]
        return self.samples[-1]

    @property
    def end_v(self):
        if self._X is None and self._end_state is not None:
            return self._end_state[1]
        return self.velocities[-1]

    def speed_drift(self):
        """Max relative deviation of |v|_g from its initial value."""
        X, V = self._materialize()
        speeds = self.M.norm(self.chart, X, V)
        return float(np.max(np.abs(speeds - self.speed0)) / self.speed0)

    def recompute_length(self):
        """Chord-sum length of the polyline under midpoint metrics."""
        X = self.samples
        mids = 0.5 * (X[:-1] + X[1:])
        d = X[1:] - X[:-1]
        g = self.M.metric(self.chart, mids)
        return float(np.sum(np.sqrt(np.einsum("si,sij,sj->s", d, g, d))))

    # -- endpoint tangents ---------------------------------------------

    def unit_in_start(self):
        return self.v0 / self.speed0

    def unit_in_end(self):
        ve = self.end_v
        return -ve / self.M.norm(self.chart, self.end_x, ve)

    # -- surgery support -----------------------------------------------

    def state_at(self, t):
        """Exact (x, v) at time t in [0, T], by sub-stepping from a sample."""
        t = float(np.clip(t, 0.0, self.T))
        h = self.T / self.nsteps
        i = min(int(t / h), self.nsteps - 1)
        X, V = self._materialize()
        x, v = X[i][None], V[i][None]
        rem = t - i * h
        if rem > 1e-15 * max(1.0, self.T):
            x, v = _rk4_sweep(self.M, self.chart, x, v, rem, 1)
        return x[0], v[0]

    def split(self, t):
        """Two segments covering [0, t] and [t, T]."""
        xm, vm = self.state_at(t)
        n1 = max(MIN_SAMPLES, int(round(self.nsteps * t / self.T)))
        n2 = max(MIN_SAMPLES, self.nsteps - n1)
        a = GeodesicSegment(self.M, self.chart, self.x0, self.v0, t, n1)
        b = GeodesicSegment(self.M, self.chart, xm, vm, self.T - t, n2)
        return a, b

    def reversed(self):
        return GeodesicSegment(self.M, self.chart, self.end_x, -self.end_v,
                               self.T, self.nsteps)


class GeodesicPath:
    """A chain of geodesic segments joined across chart transitions."""

    def __init__(self, pieces):
        if not pieces:
            raise ValueError("empty path")
        self.pieces = list(pieces)
        self.M = self.pieces[0].M

    @property
    def T_total(self):
        return sum(p.T for p in self.pieces)

    @property
    def length(self):
        return float(sum(p.length for p in self.pieces))

    def start_point(self):
        p = self.pieces[0]
        return self.M.wrap_point(ChartPoint(p.chart, p.x0))

    def end_point(self):
        p = self.pieces[-1]
        return self.M.wrap_point(ChartPoint(p.chart, p.end_x))

    def start_velocity(self):
        return self.pieces[0].chart, self.pieces[0].v0

    def end_velocity(self):
        return self.pieces[-1].chart, self.pieces[-1].end_v

    def unit_in_start(self):
        """(chart, unit inward tangent at the start vertex)."""
        p = self.pieces[0]
        return p.chart, p.unit_in_start()

    def unit_in_end(self):
        p = self.pieces[-1]
        return p.chart, p.unit_in_end()

    def speed_drift(self):
        return max(p.speed_drift() for p in self.pieces)

    def _locate(self, t):
        t = float(np.clip(t, 0.0, self.T_total))
        acc = 0.0
        for i, p in enumerate(self.pieces):
            if t <= acc + p.T or i == len(self.pieces) - 1:
                return i, t - acc
            acc += p.T
        raise AssertionError

    def point_at(self, t) -> ChartPoint:
        i, tl = self._locate(t)
        x, _ = self.pieces[i].state_at(tl)
        return ChartPoint(self.pieces[i].chart, x)

    def state_at(self, t):
        i, tl = self._locate(t)
        x, v = self.pieces[i].state_at(tl)
        return self.pieces[i].chart, x, v

    def split_at(self, t):
        i, tl = self._locate(t)
        p = self.pieces[i]
        eps = 1e-12 * max(1.0, p.T)
        if tl <= eps or tl >= p.T - eps:
            raise ValueError("split point coincides with a piece boundary")
        a, b = p.split(tl)
        left = GeodesicPath(self.pieces[:i] + [a])
        right = GeodesicPath([b] + self.pieces[i + 1:])
        return left, right

    def reversed(self):
        return GeodesicPath([p.reversed() for p in reversed(self.pieces)])

    @staticmethod
    def join(a: "GeodesicPath", b: "GeodesicPath"):
        return GeodesicPath(a.pieces + b.pieces)

    def ambient_samples(self):
        """All polyline samples embedded in the comparison space, with times."""
        pts, ts = [], []
        acc = 0.0
        for p in self.pieces:
            X = p.samples
            pts.append(self.M.ambient(p.chart, X))
            ts.append(acc + np.linspace(0.0, p.T, p.nsteps + 1))
            acc += p.T
        return np.concatenate(pts, axis=0), np.concatenate(ts)

    def ambient_at(self, t):
        i, tl = self._locate(t)
        x, _ = self.pieces[i].state_at(tl)
        return self.M.ambient(self.pieces[i].chart, x)

    def velocity_ambient_at(self, t, h=1e-6):
        a = self.ambient_at(min(max(t + h, 0.0), self.T_total))
        b = self.ambient_at(min(max(t - h, 0.0), self.T_total))
        return (a - b) / (2.0 * h)


# ----------------------------------------------------------------------
# initial value problem with chart hopping


def geodesic_ivp(M, chart, x0, v0, T, nsteps=None) -> GeodesicPath:
    """Integrate a geodesic for time T, hopping charts when needed."""
    x = np.array(x0, dtype=float)
    v = np.array(v0, dtype=float)
    chart = int(chart)
    chart0, x_start, v_start = chart, x.copy(), v.copy()
    speed = float(M.norm(chart, x, v))
    if speed <= 0.0:
        raise DegenerateEdgeError("zero initial velocity", module="riemann",
                                  operation="geodesic_ivp")
    if nsteps is None:
        nsteps = _default_nsteps(M, speed * T)
    h = T / nsteps
    pieces = []
    ch = M.charts[chart]
    hop_margin = 0.1 * float(np.min(ch.box[:, 1] - ch.box[:, 0])) / 2.0
    t_piece_start = 0.0
    x_piece, v_piece = x.copy(), v.copy()
    steps_done = 0
    total_steps = 0
    while total_steps < nsteps:
        xn, vn = _rk4_sweep(M, chart, x[None], v[None], h, 1)
        x, v = xn[0], vn[0]
        steps_done += 1
        total_steps += 1
        ch = M.charts[chart]
        needs_hop = (not ch.periodic.all()) and ch.depth(x) < hop_margin
        if needs_hop and total_steps < nsteps:
            hopped = False
            for tr in M.transitions:
                if tr.src != chart or not tr.applies_at(x):
                    continue
                pieces.append(GeodesicSegment(
                    M, chart, x_piece, v_piece, steps_done * h,
                    max(MIN_SAMPLES, steps_done)))
                x_new = tr.push_point(x)
                v_new = tr.push_vector(x, v)
                chart = tr.dst
                x, v = x_new, v_new
                x_piece, v_piece = x.copy(), v.copy()
                t_piece_start += steps_done * h
                steps_done = 0
                hopped = True
                break
            if not hopped:
                raise IvpError(
                    "trajectory exits atlas with no applicable transition",
                    detail={"chart": chart, "x": x.tolist()})
    if steps_done > 0 or not pieces:
        pieces.append(GeodesicSegment(M, chart, x_piece, v_piece,
                                      max(steps_done, 1) * h,
                                      max(MIN_SAMPLES, steps_done, 1)))
    path = GeodesicPath(pieces)
    if path.speed_drift() > 1e-8 * max(1.0, speed * T) and nsteps < 2 ** 18:
        return geodesic_ivp(M, chart0, x_start, v_start, T, nsteps=2 * nsteps)
    return path


# ----------------------------------------------------------------------
# boundary value problem by shooting


def geodesic_bvp(M, p: ChartPoint, q: ChartPoint, v0_hint=None, nsteps=None,
                 tol=1e-12, max_iter=30, check_uniqueness=True) -> GeodesicPath:
    """Shortest geodesic between nearby points, as a single-chart path.

    Shooting with damped Newton on the initial velocity; the initial guess is
    the straight chart line.  Raises OutsideUniquenessError when the produced
    length reaches inj_radius_lb, BvpError on non-convergence.
    """
    chart, xp, xq = M.common_chart(p, q)
    ch = M.charts[chart]
    d0 = ch.delta(xp, xq)
    if np.max(np.abs(d0)) < 1e-14:
        raise DegenerateEdgeError("degenerate edge: p = q", module="riemann",
                                  operation="geodesic_bvp")
    n = M.dim
    v = np.array(d0 if v0_hint is None else v0_hint, dtype=float)

    if ch.flat:
        v = d0
        seg = GeodesicSegment(M, chart, xp, v, 1.0,
                              nsteps or _default_nsteps(M, M.norm(chart, xp, v)))
        path = GeodesicPath([seg])
        _check_uniqueness(M, path, check_uniqueness)
        return path

    if nsteps is None:
        arc = float(M.norm(chart, xp, v)) * 1.3
        nsteps = _default_nsteps(M, arc)

    scale = 1.0 + float(np.max(np.abs(xq)))

    def endpoints(Vs):
        X0 = np.broadcast_to(xp, Vs.shape).copy()
        return _rk4_sweep(M, chart, X0, Vs, 1.0, nsteps)

    XT, VT = endpoints(v[None])
    end_state = (XT[0], VT[0])
    r = ch.delta(XT[0], xq)
    for _ in range(max_iter):
        if np.max(np.abs(r)) <= tol * scale:
            break
        hs = 1e-7 * (1.0 + np.abs(v))
        ends, _vends = endpoints(v[None] + np.diag(hs))
        J = np.empty((n, n))
        for j in range(n):
            # d(endpoint)/dv_j from the forward-difference residuals
            J[:, j] = (r - ch.delta(ends[j], xq)) / hs[j]
        try:
            dv = np.linalg.solve(J, r)
        except np.linalg.LinAlgError:
            raise BvpError("singular shooting Jacobian",
                           detail={"p": xp.tolist(), "q": xq.tolist()})
        step = 1.0
        best = None
        for _ in range(8):
            v_try = v + step * dv
            XT, VT = endpoints(v_try[None])
            r_try = ch.delta(XT[0], xq)
            if np.max(np.abs(r_try)) < 0.9 * np.max(np.abs(r)):
                best = (v_try, r_try, (XT[0], VT[0]))
                break
            step *= 0.5
        if best is None:
            raise BvpError("shooting did not converge within damping budget",
                           detail={"p": xp.tolist(), "q": xq.tolist()})
        v, r, end_state = best
    else:
        raise BvpError("shooting did not converge within iteration budget",
                       detail={"p": xp.tolist(), "q": xq.tolist(),
                               "residual": float(np.max(np.abs(r)))})

    seg = GeodesicSegment(M, chart, xp, v, 1.0, nsteps)
    seg._end_state = end_state
    path = GeodesicPath([seg])
    _check_uniqueness(M, path, check_uniqueness)
    return path


def _check_uniqueness(M, path, enabled):
    if enabled and path.length >= M.inj_radius_lb:
        raise OutsideUniquenessError(
            f"geodesic length {path.length:.6g} outside uniqueness regime "
            f"(inj_radius_lb = {M.inj_radius_lb:.6g})")


# ----------------------------------------------------------------------
# parallel transport


def parallel_transport(M, path: GeodesicPath, w):
    """Transport a tangent vector from the start of the path to its end.

    The geodesic and the transport equation are reintegrated jointly from the
    path's stored initial data; returns (end_chart, w_end).
    """
    w = np.array(w, dtype=float)
    for k, piece in enumerate(path.pieces):
        if k > 0:
            prev = path.pieces[k - 1]
            tr = M.transition(prev.chart, piece.chart)
            if tr is None:
                raise ChartDomainError("path pieces not joined by a transition",
                                       operation="parallel_transport")
            w = tr.push_vector(prev.end_x, w)
        w = _transport_piece(M, piece, w)
    return path.pieces[-1].chart, w


def _transport_piece(M, seg, w):
    chart = seg.chart
    ch = M.charts[chart]
    if ch.flat:
        return w
    x = seg.x0[None].copy()
    v = seg.v0[None].copy()
    w = w[None].copy()
    h = seg.T / seg.nsteps

    if ch.conformal is not None:
        gradphi = ch.conformal[1]

        def rhs(x_, v_, w_):
            dphi = gradphi(x_)
            vd = np.sum(v_ * dphi, axis=-1, keepdims=True)
            wd = np.sum(w_ * dphi, axis=-1, keepdims=True)
            vv = np.sum(v_ * v_, axis=-1, keepdims=True)
            vw = np.sum(v_ * w_, axis=-1, keepdims=True)
            av = vv * dphi - 2.0 * vd * v_
            aw = vw * dphi - vd * w_ - wd * v_
            return v_, av, aw
    else:
        def rhs(x_, v_, w_):
            gam = M.christoffel(chart, x_)
            av = -np.einsum("...kij,...i,...j->...k", gam, v_, v_)
            aw = -np.einsum("...kij,...i,...j->...k", gam, v_, w_)
            return v_, av, aw

    for _ in range(seg.nsteps):
        k1x, k1v, k1w = rhs(x, v, w)
        k2x, k2v, k2w = rhs(x + 0.5 * h * k1x, v + 0.5 * h * k1v, w + 0.5 * h * k1w)
        k3x, k3v, k3w = rhs(x + 0.5 * h * k2x, v + 0.5 * h * k2v, w + 0.5 * h * k2w)
        k4x, k4v, k4w = rhs(x + h * k3x, v + h * k3v, w + h * k3w)
        x = x + (h / 6.0) * (k1x + 2 * k2x + 2 * k3x + k4x)
        v = v + (h / 6.0) * (k1v + 2 * k2v + 2 * k3v + k4v)
        w = w + (h / 6.0) * (k1w + 2 * k2w + 2 * k3w + k4w)
    return w[0]
