"""Coordinate charts, chart points, and transitions between charts.

A chart is a box in R^n with a metric field.  Metric callables are expected
to broadcast: given an array of shape (..., n) they return (..., n, n).
An optional analytic gradient field returns (..., n, n, n) indexed as
[..., k, i, j] = d g_ij / d x_k; when absent, Christoffel symbols fall back
to central finite differences of the metric.
"""

from __future__ import annotations

import numpy as np

from ..errors import ChartDomainError


class ChartPoint:
    """A point of the manifold given as (chart index, coordinates)."""

    __slots__ = ("chart", "xy")

    def __init__(self, chart: int, xy):
        self.chart = int(chart)
        self.xy = np.array(xy, dtype=float)
        self.xy.flags.writeable = False

    def __repr__(self):
        coords = ", ".join(repr(float(c)) for c in self.xy)
        return f"ChartPoint({self.chart}, [{coords}])"

    def close_to(self, other, tol=1e-12):
        return self.chart == other.chart and np.max(np.abs(self.xy - other.xy)) <= tol


class Chart:
    """One coordinate chart: a domain box, periodicity flags, a metric field.

    Parameters
    ----------
    box : array (n, 2)
        Coordinate bounds; for periodic coordinates the box is the period cell.
    periodic : sequence of bool
        Per-coordinate periodicity.
    metric : callable
        x -> g(x), broadcasting over leading axes.
    metric_grad : callable, optional
        x -> dg(x) with layout [..., k, i, j]; finite differences when None.
    quad_domain : tuple, optional
        ("box", bounds) or ("disc", radius): the region this chart integrates
        in a volume partition of the manifold.  None means the chart takes no
        part in volume quadrature.
    flat : bool
        True means the metric is constant in these coordinates (geodesics are
        straight coordinate lines); enables closed-form fast paths.
    """

    def __init__(self, box, periodic, metric, metric_grad=None,
                 quad_domain=None, flat=False, name="", conformal=None):
        self.box = np.asarray(box, dtype=float)
        self.dim = self.box.shape[0]
        self.periodic = np.asarray(periodic, dtype=bool)
        self.metric = metric
        self.metric_grad = metric_grad
        self.quad_domain = quad_domain
        self.flat = bool(flat)
        self.name = name or "chart"
        self.periods = self.box[:, 1] - self.box[:, 0]
        # conformally flat fast path: (factor, grad_log_factor) callables with
        # g = factor * I and grad_log_factor = d(log factor)/dx / 2 ... the
        # gradient of phi where factor = exp(2 phi).
        self.conformal = conformal

    def wrap(self, x):
        """Map periodic coordinates into the fundamental cell."""
        x = np.asarray(x, dtype=float)
        if not self.periodic.any():
            return x
        out = np.array(x, dtype=float, copy=True)
        lo = self.box[:, 0]
        per = self.periods
        sel = self.periodic
        out[..., sel] = lo[sel] + np.mod(out[..., sel] - lo[sel], per[sel])
        return out

    def delta(self, x_from, x_to):
        """Shortest coordinate displacement from x_from to x_to (wrap-aware)."""
        d = np.asarray(x_to, dtype=float) - np.asarray(x_from, dtype=float)
        if not self.periodic.any():
            return d
        d = np.array(d, copy=True)
        per = self.periods
        sel = self.periodic
        d[..., sel] = d[..., sel] - per[sel] * np.round(d[..., sel] / per[sel])
        return d

    def contains(self, x, margin=0.0):
        x = np.asarray(x, dtype=float)
        ok = np.ones(x.shape[:-1], dtype=bool)
        for i in range(self.dim):
            if self.periodic[i]:
                continue
            ok &= (x[..., i] >= self.box[i, 0] - margin)
            ok &= (x[..., i] <= self.box[i, 1] + margin)
        return ok

    def require_inside(self, x, margin=0.0, what="point"):
        if not np.all(self.contains(x, margin=margin)):
            raise ChartDomainError(
                f"{what} {np.asarray(x).tolist()} outside domain of {self.name}",
                operation="evaluate_geometry",
            )

    # Center-of-box depth, used to pick the best chart for a point.
    def depth(self, x):
        x = np.asarray(x, dtype=float)
        d = np.inf * np.ones(x.shape[:-1])
        for i in range(self.dim):
            if self.periodic[i]:
                continue
            d = np.minimum(d, x[..., i] - self.box[i, 0])
            d = np.minimum(d, self.box[i, 1] - x[..., i])
        return d


class Transition:
    """A partial map between two charts with an optional analytic Jacobian."""

    def __init__(self, src: int, dst: int, fwd, jac=None, applicable=None):
        self.src = int(src)
        self.dst = int(dst)
        self.fwd = fwd
        self._jac = jac
        self._applicable = applicable

    def applies_at(self, x):
        if self._applicable is None:
            return True
        return bool(self._applicable(np.asarray(x, dtype=float)))

    def jacobian(self, x, h=1e-7):
        x = np.asarray(x, dtype=float)
        if self._jac is not None:
            return np.asarray(self._jac(x), dtype=float)
        n = x.shape[-1]
        J = np.empty((n, n))
        for j in range(n):
            e = np.zeros(n)
            e[j] = h * (1.0 + abs(x[j]))
            J[:, j] = (self.fwd(x + e) - self.fwd(x - e)) / (2.0 * e[j])
        return J

    def push_point(self, x):
        return np.asarray(self.fwd(np.asarray(x, dtype=float)), dtype=float)

    def push_vector(self, x, v):
        return self.jacobian(x) @ np.asarray(v, dtype=float)
