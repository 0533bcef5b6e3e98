"""One-parameter conformal metric deformations g_t = (1 + t*phi) g_0.

The bump phi is defined through the manifold's comparison embedding, which
makes it chart-independent by construction: phi(x) depends only on the
embedded distance from the bump center, vanishes identically outside the
declared ball, and is smooth inside it.
"""

from __future__ import annotations

import numpy as np

from ..errors import ValidationError
from .charts import Chart, ChartPoint
from .manifold import ChartManifold


class Bump:
    """Smooth nonnegative bump supported in a ball around a center point.

    value = amplitude * exp(1 - 1/(1 - rho^2)) for rho < 1, else 0, where
    rho is the embedded distance to the center divided by the radius.  The
    maximum value (= amplitude) is attained at the center.  A Bump with
    center None is the constant amplitude (test-only global family).
    """

    def __init__(self, M: ChartManifold, center: ChartPoint | None, radius=0.5,
                 amplitude=1.0):
        if amplitude < 0:
            raise ValidationError("bump amplitude must be nonnegative",
                                  module="riemann", operation="Bump")
        self.M = M
        self.center = center
        self.radius = float(radius)
        self.amplitude = float(amplitude)
        self._c = M.ambient_point(center) if center is not None else None

    def value(self, chart, X):
        X = np.asarray(X, dtype=float)
        if self._c is None:
            return np.full(X.shape[:-1], self.amplitude)
        E = self.M.ambient(chart, X)
        rho2 = np.sum((E - self._c) ** 2, axis=-1) / (self.radius ** 2)
        out = np.zeros(X.shape[:-1])
        inside = rho2 < 1.0
        if np.any(inside):
            r2 = rho2[inside]
            out[inside] = self.amplitude * np.exp(1.0 - 1.0 / (1.0 - r2))
        return out

    def value_at(self, p: ChartPoint):
        return float(self.value(p.chart, p.xy[None])[0])

    def grad(self, chart, X):
        """d(phi)/dx in chart coordinates, (..., n); zero outside support."""
        X = np.asarray(X, dtype=float)
        if self._c is None:
            return np.zeros_like(X)
        E = self.M.ambient(chart, X)
        diff = E - self._c
        rho2 = np.sum(diff * diff, axis=-1) / (self.radius ** 2)
        out = np.zeros_like(X)
        inside = rho2 < 1.0
        if np.any(inside):
            r2 = rho2[inside]
            val = self.amplitude * np.exp(1.0 - 1.0 / (1.0 - r2))
            dval_drho2 = -val / (1.0 - r2) ** 2
            J = self.M.ambient_jac(chart, X[inside])
            drho2_dx = 2.0 * np.einsum("...m,...mj->...j", diff[inside], J) \
                / (self.radius ** 2)
            out[inside] = dval_drho2[..., None] * drho2_dx
        return out

    @property
    def max_value(self):
        return self.amplitude

    def describe(self):
        if self.center is None:
            return {"kind": "constant", "amplitude": self.amplitude}
        return {"kind": "ball", "amplitude": self.amplitude,
                "radius": self.radius,
                "center": {"chart": self.center.chart,
                           "x": [float(c) for c in self.center.xy]}}


def zero_bump(M):
    return Bump(M, None, amplitude=0.0)


class ConformalFamily:
    """t -> (1 + t*phi) g_0 for t in [0, t_max]."""

    def __init__(self, base: ChartManifold, bump: Bump, t_max=0.1):
        if t_max < 0:
            raise ValidationError("t_max must be nonnegative",
                                  module="riemann", operation="ConformalFamily")
        self.base = base
        self.bump = bump
        self.t_max = float(t_max)
        self._cache = {}

    def phi(self, chart, X):
        return self.bump.value(chart, X)

    def manifold_at(self, t) -> ChartManifold:
        t = float(t)
        if t < -1e-15 or t > self.t_max + 1e-12:
            raise ValidationError(f"t = {t} outside family range [0, {self.t_max}]",
                                  module="riemann", operation="manifold_at")
        if t == 0.0:
            return self.base
        key = repr(t)
        if key not in self._cache:
            self._cache[key] = self._build(t)
        return self._cache[key]

    def field_at(self, t):
        bump = self.bump

        def field(chart, X):
            g0 = self.base.charts[chart].metric(X)
            fac = 1.0 + t * bump.value(chart, X)
            return g0 * fac[..., None, None]

        return field

    def _build(self, t):
        base = self.base
        bump = self.bump
        charts = []
        constant = bump.center is None
        for idx, ch in enumerate(base.charts):
            g0, dg0 = ch.metric, ch.metric_grad

            def metric(X, g0=g0, idx=idx):
                X = np.asarray(X, dtype=float)
                fac = 1.0 + t * bump.value(idx, X)
                return g0(X) * np.asarray(fac)[..., None, None]

            mg = None
            if constant and dg0 is not None:
                def mg(X, dg0=dg0):
                    return dg0(np.asarray(X, dtype=float)) * (1.0 + t * bump.amplitude)

            conf = None
            if ch.conformal is not None:
                fac0, gradphi0 = ch.conformal

                def conf_factor(X, fac0=fac0, idx=idx):
                    X = np.asarray(X, dtype=float)
                    return fac0(X) * (1.0 + t * bump.value(idx, X))

                def conf_gradphi(X, gradphi0=gradphi0, idx=idx):
                    X = np.asarray(X, dtype=float)
                    if constant:
                        return gradphi0(X)
                    f = 1.0 + t * bump.value(idx, X)
                    return gradphi0(X) + 0.5 * t * bump.grad(idx, X) / f[..., None]

                conf = (conf_factor, conf_gradphi)

            charts.append(Chart(ch.box, ch.periodic, metric, mg,
                                quad_domain=ch.quad_domain,
                                flat=ch.flat and constant,
                                name=ch.name + f"@t={t:g}", conformal=conf))
        scale = 1.0 + t * bump.max_value
        return ChartManifold(
            charts, base.transitions,
            inj_radius_lb=base.inj_radius_lb / scale,
            max_edge_len=min(base.max_edge_len,
                             0.999 * base.inj_radius_lb / scale),
            embedding=base._embedding, ambient_dim=base.ambient_dim,
            name=base.name + f" (1+{t:g}*phi)", builtin=None,
            params=dict(base.params))
