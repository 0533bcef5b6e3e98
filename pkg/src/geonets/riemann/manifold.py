"""Manifolds presented as coordinate atlases with metric tensor fields.

Built-ins: flat torus (one periodic chart), round sphere (two stereographic
charts joined by the inversion u -> u/|u|^2), and ellipsoids presented as
pullbacks of the sphere charts (so they share the same closed-form
transition).  All computations stay intrinsic; the embeddings carried by the
built-ins are only used as a comparison space for coincidence detection and
plotting.
"""

from __future__ import annotations

import numpy as np

from ..errors import ChartDomainError, MetricNotPositiveError, ValidationError
from .charts import Chart, ChartPoint, Transition


def _sym_eig_min(g):
    return float(np.linalg.eigvalsh(g)[0])


class ChartManifold:
    """A manifold given by charts, transitions, and an injectivity-radius bound.

    Parameters
    ----------
    charts : list of Chart
    transitions : list of Transition
    inj_radius_lb : float
        Positive lower bound on the injectivity radius; the working regime for
        edge representation.
    max_edge_len : float, optional
        Length cap for single-chart geodesic segments.  Defaults to just under
        inj_radius_lb; the two-chart built-ins use a smaller cap so any capped
        segment fits entirely inside one chart.
    embedding : callable, optional
        (chart_index, coords (..., n)) -> (..., m) isometric-up-to-wrap
        comparison embedding used for coincidence detection and plots.
    """

    def __init__(self, charts, transitions, inj_radius_lb, max_edge_len=None,
                 embedding=None, embedding_jac=None, ambient_dim=None,
                 name="custom", builtin=None, params=None):
        if inj_radius_lb <= 0:
            raise ValidationError("inj_radius_lb must be positive",
                                  module="riemann", operation="ChartManifold")
        self.charts = list(charts)
        self.transitions = list(transitions)
        self.dim = self.charts[0].dim
        self.inj_radius_lb = float(inj_radius_lb)
        self.max_edge_len = float(max_edge_len) if max_edge_len else \
            0.999 * self.inj_radius_lb
        self._embedding = embedding
        self._embedding_jac = embedding_jac
        self.ambient_dim = ambient_dim
        self.name = name
        self.builtin = builtin
        self.params = dict(params or {})
        self._trans_index = {}
        for t in self.transitions:
            self._trans_index.setdefault((t.src, t.dst), t)

    # ------------------------------------------------------------------
    # metric evaluation

    def chart(self, i) -> Chart:
        return self.charts[i]

    def metric(self, chart, x):
        return np.asarray(self.charts[chart].metric(np.asarray(x, dtype=float)),
                          dtype=float)

    def metric_grad(self, chart, x, h=None):
        """d g_ij / d x_k with layout (..., k, i, j)."""
        ch = self.charts[chart]
        x = np.asarray(x, dtype=float)
        if ch.metric_grad is not None:
            return np.asarray(ch.metric_grad(x), dtype=float)
        n = self.dim
        out = np.empty(x.shape[:-1] + (n, n, n))
        for k in range(n):
            hk = (h if h is not None
                  else 1e-5 * (1.0 + np.abs(x[..., k])))
            e = np.zeros_like(x)
            e[..., k] = hk
            gp = ch.metric(x + e)
            gm = ch.metric(x - e)
            out[..., k, :, :] = (gp - gm) / (2.0 * hk)[..., None, None]
        return out

    def christoffel(self, chart, x):
        """Levi-Civita symbols, layout (..., k, i, j) = Gamma^k_ij."""
        g = self.metric(chart, x)
        dg = self.metric_grad(chart, x)
        ginv = np.linalg.inv(g)
        # lower symbol: [i g_jl] + [j g_il] - [l g_ij], layout (..., l, i, j)
        low = (np.einsum("...ijl->...lij", dg)
               + np.einsum("...jil->...lij", dg)
               - dg)
        return 0.5 * np.einsum("...kl,...lij->...kij", ginv, low)

    def evaluate_geometry(self, chart, x, validate=True):
        """Metric, inverse metric, and Christoffel symbols at one point."""
        x = np.asarray(x, dtype=float)
        ch = self.charts[chart]
        if validate:
            ch.require_inside(x, margin=1e-9)
        g = self.metric(chart, x)
        if validate and _sym_eig_min(g) <= 0.0:
            raise MetricNotPositiveError(
                f"metric not positive definite at {x.tolist()} in {ch.name}",
                operation="evaluate_geometry")
        ginv = np.linalg.inv(g)
        gamma = self.christoffel(chart, x)
        gamma = 0.5 * (gamma + np.swapaxes(gamma, -1, -2))
        return g, ginv, gamma

    def inner(self, chart, x, v, w):
        g = self.metric(chart, x)
        return np.einsum("...i,...ij,...j->...", v, g, w)

    def norm(self, chart, x, v):
        return np.sqrt(np.maximum(self.inner(chart, x, v, v), 0.0))

    def unit(self, chart, x, v):
        nv = self.norm(chart, x, v)
        return v / nv

    # ------------------------------------------------------------------
    # atlas navigation

    def transition(self, src, dst):
        return self._trans_index.get((src, dst))

    def to_chart(self, point: ChartPoint, dst: int):
        """Re-express a point in chart dst, or None when no transition applies."""
        if point.chart == dst:
            return point
        tr = self.transition(point.chart, dst)
        if tr is None or not tr.applies_at(point.xy):
            return None
        x = self.charts[dst].wrap(tr.push_point(point.xy))
        return ChartPoint(dst, x)

    def push_vector(self, point: ChartPoint, v, dst: int):
        """Push a tangent vector at point into chart dst coordinates."""
        if point.chart == dst:
            return np.asarray(v, dtype=float)
        tr = self.transition(point.chart, dst)
        if tr is None or not tr.applies_at(point.xy):
            raise ChartDomainError(
                f"no transition {point.chart}->{dst} at {point.xy.tolist()}",
                operation="push_vector")
        return tr.push_vector(point.xy, v)

    def rehome(self, point: ChartPoint) -> ChartPoint:
        """Wrap the point and move it to the chart where it sits deepest."""
        here = ChartPoint(point.chart, self.charts[point.chart].wrap(point.xy))
        best = here
        best_depth = self.charts[here.chart].depth(here.xy)
        for dst in range(len(self.charts)):
            if dst == here.chart:
                continue
            cand = self.to_chart(here, dst)
            if cand is None:
                continue
            d = self.charts[dst].depth(cand.xy)
            if d > best_depth + 1e-12:
                best, best_depth = cand, d
        return best

    def wrap_point(self, point: ChartPoint) -> ChartPoint:
        return ChartPoint(point.chart, self.charts[point.chart].wrap(point.xy))

    def common_chart(self, p: ChartPoint, q: ChartPoint):
        """Best single chart containing both points: (chart, xp, xq)."""
        best = None
        best_depth = -np.inf
        for c in range(len(self.charts)):
            pc = self.to_chart(p, c)
            qc = self.to_chart(q, c)
            if pc is None or qc is None:
                continue
            d = min(self.charts[c].depth(pc.xy), self.charts[c].depth(qc.xy))
            if d > best_depth:
                best, best_depth = (c, pc.xy, qc.xy), d
        if best is None:
            raise ChartDomainError(
                "no single chart contains both points", operation="geodesic_bvp")
        return best

    # ------------------------------------------------------------------
    # comparison embedding

    def ambient(self, chart, X):
        """Embed coordinates (..., n) into the comparison space (..., m)."""
        if self._embedding is None:
            if len(self.charts) > 1:
                raise ValidationError(
                    "multi-chart manifold requires a comparison embedding",
                    module="riemann", operation="ambient")
            return np.asarray(X, dtype=float)
        return self._embedding(chart, np.asarray(X, dtype=float))

    def ambient_point(self, p: ChartPoint):
        return self.ambient(p.chart, p.xy)

    def ambient_jac(self, chart, X):
        """d(embedding)/dx, layout (..., m, n); finite differences if needed."""
        X = np.asarray(X, dtype=float)
        if self._embedding_jac is not None:
            return self._embedding_jac(chart, X)
        n = self.dim
        cols = []
        for j in range(n):
            e = np.zeros(n)
            h = 1e-7
            e[j] = h
            cols.append((self.ambient(chart, X + e)
                         - self.ambient(chart, X - e)) / (2.0 * h))
        return np.stack(cols, axis=-1)

    def ambient_distance(self, p: ChartPoint, q: ChartPoint) -> float:
        return float(np.linalg.norm(self.ambient_point(p) - self.ambient_point(q)))

    # ------------------------------------------------------------------
    # sampling and validation

    def sample_point(self, rng) -> ChartPoint:
        """Area-weighted random point (rejection on sqrt(det g))."""
        vols, sups = self._chart_weights()
        w = vols / vols.sum()
        for _ in range(10000):
            c = int(rng.choice(len(self.charts), p=w))
            ch = self.charts[c]
            x = self._sample_in_quad_domain(ch, rng)
            if x is None:
                continue
            dens = np.sqrt(np.linalg.det(ch.metric(x)))
            if rng.random() * sups[c] <= dens:
                return ChartPoint(c, ch.wrap(x))
        raise ValidationError("rejection sampling failed", module="riemann",
                              operation="sample_point")

    def _sample_in_quad_domain(self, ch, rng):
        dom = ch.quad_domain or ("box", ch.box)
        kind = dom[0]
        if kind == "box":
            bounds = np.asarray(dom[1], dtype=float)
            return bounds[:, 0] + rng.random(self.dim) * (bounds[:, 1] - bounds[:, 0])
        if kind == "disc":
            r = float(dom[1]) * np.sqrt(rng.random())
            th = 2.0 * np.pi * rng.random()
            return np.array([r * np.cos(th), r * np.sin(th)])
        raise ValidationError(f"unknown quadrature domain {kind!r}",
                              module="riemann", operation="sample_point")

    def _chart_weights(self):
        if not hasattr(self, "_weights_cache"):
            vols, sups = [], []
            for c, ch in enumerate(self.charts):
                pts = []
                rng = np.random.default_rng(12345 + c)
                for _ in range(256):
                    x = self._sample_in_quad_domain(ch, rng)
                    if x is not None:
                        pts.append(x)
                pts = np.asarray(pts)
                dens = np.sqrt(np.linalg.det(ch.metric(pts)))
                dom = ch.quad_domain or ("box", ch.box)
                if dom[0] == "box":
                    b = np.asarray(dom[1], dtype=float)
                    coord_vol = float(np.prod(b[:, 1] - b[:, 0]))
                else:
                    coord_vol = np.pi * float(dom[1]) ** 2
                vols.append(coord_vol * float(dens.mean()))
                sups.append(float(dens.max()) * 1.5)
            self._weights_cache = (np.asarray(vols), np.asarray(sups))
        return self._weights_cache

    def validate(self, samples=64, tol=1e-8):
        """Check metric positivity and transition round-trips on samples."""
        rng = np.random.default_rng(0)
        for c, ch in enumerate(self.charts):
            lo, hi = ch.box[:, 0], ch.box[:, 1]
            X = lo + rng.random((samples, self.dim)) * (hi - lo)
            g = ch.metric(X)
            ev = np.linalg.eigvalsh(g)
            if np.min(ev) <= 0:
                raise MetricNotPositiveError(
                    f"metric not positive definite somewhere in {ch.name}",
                    operation="validate")
        for t in self.transitions:
            back = self.transition(t.dst, t.src)
            if back is None:
                continue
            ch = self.charts[t.src]
            lo, hi = ch.box[:, 0], ch.box[:, 1]
            X = lo + rng.random((4 * samples, self.dim)) * (hi - lo)
            for x in X:
                if not t.applies_at(x):
                    continue
                y = t.push_point(x)
                if not back.applies_at(y):
                    continue
                x2 = back.push_point(y)
                err = np.max(np.abs(ch.delta(x, x2)))
                if err > tol * (1.0 + np.max(np.abs(x))):
                    raise ValidationError(
                        f"transition {t.src}->{t.dst} not inverted to {tol}",
                        module="riemann", operation="validate")
        return True


# ----------------------------------------------------------------------
# stereographic machinery shared by sphere and ellipsoid


def _stereo_embed(U, zsign):
    """Inverse stereographic projection of the unit sphere, (..., 2) -> (..., 3)."""
    s = 1.0 + np.sum(U * U, axis=-1)
    X = 2.0 * U[..., 0] / s
    Y = 2.0 * U[..., 1] / s
    Z = zsign * (np.sum(U * U, axis=-1) - 1.0) / s
    return np.stack([X, Y, Z], axis=-1)


def _stereo_jac(U, zsign):
    """d(embedding)/du, layout (..., 3, 2)."""
    s = 1.0 + np.sum(U * U, axis=-1)
    s2 = s * s
    u1, u2 = U[..., 0], U[..., 1]
    J = np.empty(U.shape[:-1] + (3, 2))
    J[..., 0, 0] = 2.0 / s - 4.0 * u1 * u1 / s2
    J[..., 0, 1] = -4.0 * u1 * u2 / s2
    J[..., 1, 0] = J[..., 0, 1]
    J[..., 1, 1] = 2.0 / s - 4.0 * u2 * u2 / s2
    J[..., 2, 0] = zsign * 4.0 * u1 / s2
    J[..., 2, 1] = zsign * 4.0 * u2 / s2
    return J


def _stereo_hess(U, zsign):
    """Second derivatives of the embedding, layout (..., 3, 2, 2)."""
    U = np.asarray(U, dtype=float)
    s = 1.0 + np.sum(U * U, axis=-1)
    inv_s2 = (1.0 / (s * s))[..., None, None, None]
    inv_s3 = (1.0 / (s * s * s))[..., None, None, None]
    eye = np.eye(2)
    u_m = U[..., :, None, None]
    u_i = U[..., None, :, None]
    u_j = U[..., None, None, :]
    d_mj = eye[:, None, :]
    d_mi = eye[:, :, None]
    d_ij = eye[None, :, :]
    H = np.empty(U.shape[:-1] + (3, 2, 2))
    H[..., :2, :, :] = (-4.0 * (d_mj * u_i + d_mi * u_j + d_ij * u_m) * inv_s2
                        + 16.0 * u_m * u_i * u_j * inv_s3)
    H[..., 2, :, :] = zsign * (4.0 * eye * inv_s2[..., 0, :, :]
                               - 16.0 * (u_i * u_j)[..., 0, :, :] * inv_s3[..., 0, :, :])
    return H


def _inversion(u):
    r2 = np.sum(u * u, axis=-1, keepdims=True)
    return u / r2


def _inversion_jac(u):
    r2 = float(np.sum(u * u))
    n = u.shape[-1]
    return (np.eye(n) * r2 - 2.0 * np.outer(u, u)) / (r2 * r2)


def _ellipse_perimeter(a, b, npts=2048):
    t = np.linspace(0.0, 2.0 * np.pi, npts, endpoint=False)
    return float(np.sqrt((a * np.sin(t)) ** 2 + (b * np.cos(t)) ** 2).sum()
                 * (2.0 * np.pi / npts))


# ----------------------------------------------------------------------
# built-ins


def flat_torus(lx=2.0 * np.pi, ly=2.0 * np.pi):
    """Flat torus with side lengths (lx, ly), one periodic chart, g = I."""
    lx, ly = float(lx), float(ly)
    eye = np.eye(2)

    def metric(X):
        X = np.asarray(X, dtype=float)
        return np.broadcast_to(eye, X.shape[:-1] + (2, 2)).copy()

    def metric_grad(X):
        X = np.asarray(X, dtype=float)
        return np.zeros(X.shape[:-1] + (2, 2, 2))

    def conf_factor(X):
        X = np.asarray(X, dtype=float)
        return np.ones(X.shape[:-1])

    def conf_gradphi(X):
        X = np.asarray(X, dtype=float)
        return np.zeros_like(X)

    box = np.array([[0.0, lx], [0.0, ly]])
    ch = Chart(box, [True, True], metric, metric_grad,
               quad_domain=("box", box), flat=True, name="torus",
               conformal=(conf_factor, conf_gradphi))
    r1, r2 = lx / (2.0 * np.pi), ly / (2.0 * np.pi)

    def embed(chart, X):
        X = np.asarray(X, dtype=float)
        a1 = 2.0 * np.pi * X[..., 0] / lx
        a2 = 2.0 * np.pi * X[..., 1] / ly
        return np.stack([r1 * np.cos(a1), r1 * np.sin(a1),
                         r2 * np.cos(a2), r2 * np.sin(a2)], axis=-1)

    def embed_jac(chart, X):
        X = np.asarray(X, dtype=float)
        a1 = 2.0 * np.pi * X[..., 0] / lx
        a2 = 2.0 * np.pi * X[..., 1] / ly
        J = np.zeros(X.shape[:-1] + (4, 2))
        J[..., 0, 0] = -np.sin(a1)
        J[..., 1, 0] = np.cos(a1)
        J[..., 2, 1] = -np.sin(a2)
        J[..., 3, 1] = np.cos(a2)
        return J

    inj = min(lx, ly) / 2.0
    return ChartManifold([ch], [], inj_radius_lb=inj,
                         max_edge_len=0.999 * inj, embedding=embed,
                         embedding_jac=embed_jac,
                         ambient_dim=4, name=f"flat_torus({lx:g},{ly:g})",
                         builtin="flat_torus", params={"lx": lx, "ly": ly})


def _make_two_stereo_charts(axes, box_radius=3.0):
    """Two stereographic charts for diag(axes) . S^2, one per pole."""
    a = np.asarray(axes, dtype=float)

    def make_metric(zsign):
        def metric(U):
            J = _stereo_jac(np.asarray(U, dtype=float), zsign)
            JD = J * (a ** 2)[..., :, None]
            return np.einsum("...mi,...mj->...ij", J, JD)
        return metric

    def make_metric_grad(zsign):
        def metric_grad(U):
            U = np.asarray(U, dtype=float)
            J = _stereo_jac(U, zsign)
            H = _stereo_hess(U, zsign)
            D2 = (a ** 2)
            # dg_ij/dx_k = sum_m d_m^2 (H_mki J_mj + J_mi H_mkj)
            t1 = np.einsum("m,...mki,...mj->...kij", D2, H, J)
            return t1 + np.swapaxes(t1, -1, -2)
        return metric_grad

    B = box_radius
    box = np.array([[-B, B], [-B, B]])
    charts = []
    for zsign, nm in ((1.0, "stereo_n"), (-1.0, "stereo_s")):
        charts.append(Chart(box, [False, False], make_metric(zsign),
                            make_metric_grad(zsign),
                            quad_domain=("disc", 1.0), name=nm))

    def applicable(x):
        r2 = float(np.sum(x * x))
        return r2 > (1.0 / (B * B)) and r2 < (B * B) * 4.0

    transitions = [
        Transition(0, 1, _inversion, jac=_inversion_jac, applicable=applicable),
        Transition(1, 0, _inversion, jac=_inversion_jac, applicable=applicable),
    ]

    def embed(chart, X):
        zsign = 1.0 if chart == 0 else -1.0
        return _stereo_embed(np.asarray(X, dtype=float), zsign) * a

    def embed_jac(chart, X):
        zsign = 1.0 if chart == 0 else -1.0
        return _stereo_jac(np.asarray(X, dtype=float), zsign) * a[:, None]

    return charts, transitions, embed, embed_jac


def round_sphere(radius=1.0):
    """Round sphere of the given radius, two stereographic charts."""
    r = float(radius)
    charts, transitions, embed, embed_jac = _make_two_stereo_charts([r, r, r])

    # conformal closed forms are cheaper than the pullback Jacobians
    def metric(U):
        U = np.asarray(U, dtype=float)
        s = 1.0 + np.sum(U * U, axis=-1)
        lam = 4.0 * r * r / (s * s)
        out = np.zeros(U.shape[:-1] + (2, 2))
        out[..., 0, 0] = lam
        out[..., 1, 1] = lam
        return out

    def metric_grad(U):
        U = np.asarray(U, dtype=float)
        s = 1.0 + np.sum(U * U, axis=-1)
        dl = -16.0 * r * r * U / (s * s * s)[..., None]
        out = np.zeros(U.shape[:-1] + (2, 2, 2))
        out[..., 0, 0, 0] = dl[..., 0]
        out[..., 0, 1, 1] = dl[..., 0]
        out[..., 1, 0, 0] = dl[..., 1]
        out[..., 1, 1, 1] = dl[..., 1]
        return out

    def conf_factor(U):
        U = np.asarray(U, dtype=float)
        s = 1.0 + np.sum(U * U, axis=-1)
        return 4.0 * r * r / (s * s)

    def conf_gradphi(U):
        U = np.asarray(U, dtype=float)
        s = 1.0 + np.sum(U * U, axis=-1)
        return -2.0 * U / s[..., None]

    for ch in charts:
        ch.metric = metric
        ch.metric_grad = metric_grad
        ch.conformal = (conf_factor, conf_gradphi)

    inj = np.pi * r
    return ChartManifold(charts, transitions, inj_radius_lb=inj,
                         max_edge_len=1.7 * r, embedding=embed,
                         embedding_jac=embed_jac, ambient_dim=3,
                         name=f"round_sphere({r:g})", builtin="round_sphere",
                         params={"radius": r})


def ellipsoid(a=1.0, b=1.0, c=1.5):
    """Ellipsoid with semi-axes (a, b, c), sphere-pullback stereographic charts."""
    axes = np.array([float(a), float(b), float(c)])
    charts, transitions, embed, embed_jac = _make_two_stereo_charts(axes)
    amin, amax = float(axes.min()), float(axes.max())
    others = np.sort(axes)[:2]
    conj = np.pi * float(others[0] * others[1]) / amax
    perims = [_ellipse_perimeter(axes[i], axes[j])
              for i, j in ((0, 1), (0, 2), (1, 2))]
    inj = min(conj, min(perims) / 2.0)
    return ChartManifold(charts, transitions, inj_radius_lb=inj,
                         max_edge_len=min(1.7 * amin, 0.999 * inj),
                         embedding=embed, embedding_jac=embed_jac,
                         ambient_dim=3,
                         name=f"ellipsoid({a:g},{b:g},{c:g})",
                         builtin="ellipsoid",
                         params={"a": float(a), "b": float(b), "c": float(c)})


BUILTINS = {
    "flat_torus": flat_torus,
    "round_sphere": round_sphere,
    "ellipsoid": ellipsoid,
}
