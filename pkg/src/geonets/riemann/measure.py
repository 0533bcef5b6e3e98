"""Sampled metric-space distance, volume quadrature, and curve integrals.

A *metric field* on an atlas is a callable (chart_index, coords (..., n)) ->
(..., n, n).  Manifolds expose their own field via `metric_field`, conformal
families via `ConformalFamily.field_at`.
"""

from __future__ import annotations

import numpy as np

from ..errors import ValidationError


def metric_field(M):
    """The manifold's own metric as a field callable."""

    def field(chart, X):
        return M.charts[chart].metric(np.asarray(X, dtype=float))

    return field


def _unit_directions(n, count):
    if n == 2:
        th = np.linspace(0.0, np.pi, count, endpoint=False)  # lines, not rays
        return np.stack([np.cos(th), np.sin(th)], axis=-1)
    rng = np.random.default_rng(2718)
    V = rng.standard_normal((count, n))
    return V / np.linalg.norm(V, axis=1, keepdims=True)


def _chart_grid(ch, points_per_dim):
    axes = []
    for i in range(ch.dim):
        lo, hi = ch.box[i]
        axes.append(np.linspace(lo, hi, points_per_dim,
                                endpoint=not ch.periodic[i]))
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack(mesh, axis=-1).reshape(-1, ch.dim)


def metric_distance(base, g1, g2, points_per_dim=64, n_directions=32,
                    extra_points=None):
    """Sampled sup of |g1(v,v) - g2(v,v)| / g_base(v,v).

    A lower estimate of the true supremum, taken over a uniform grid per
    chart plus optional extra sample points, and over a fixed set of
    coordinate directions.  Symmetric in (g1, g2); zero iff the fields agree
    on all samples.
    """
    gb = metric_field(base)
    dirs = _unit_directions(base.dim, n_directions)
    worst = 0.0
    for c, ch in enumerate(base.charts):
        X = _chart_grid(ch, points_per_dim)
        if extra_points:
            extras = [np.asarray(x, dtype=float)[None]
                      for (ci, x) in extra_points if ci == c]
            if extras:
                X = np.concatenate([X] + extras, axis=0)
        A = np.asarray(g1(c, X), dtype=float)
        B = np.asarray(g2(c, X), dtype=float)
        G = np.asarray(gb(c, X), dtype=float)
        num = np.abs(np.einsum("di,pij,dj->pd", dirs, A - B, dirs))
        den = np.einsum("di,pij,dj->pd", dirs, G, dirs)
        worst = max(worst, float(np.max(num / den)))
    return worst


def direction_sup_on_curves(gref, g1, g2, sample_blocks):
    """Sup of |g1(v,v)-g2(v,v)|/gref(v,v) over given (chart, X, V) samples."""
    worst = 0.0
    for chart, X, V in sample_blocks:
        A = np.asarray(g1(chart, X), dtype=float)
        B = np.asarray(g2(chart, X), dtype=float)
        G = np.asarray(gref(chart, X), dtype=float)
        num = np.abs(np.einsum("si,sij,sj->s", V, A - B, V))
        den = np.einsum("si,sij,sj->s", V, G, V)
        worst = max(worst, float(np.max(num / den)))
    return worst


# ----------------------------------------------------------------------
# volume quadrature


def _gauss_legendre(a, b, npts):
    x, w = np.polynomial.legendre.leggauss(npts)
    return 0.5 * (b - a) * x + 0.5 * (a + b), 0.5 * (b - a) * w


def _quad_nodes(ch, resolution):
    """Nodes and weights of the chart's quadrature domain."""
    dom = ch.quad_domain
    if dom is None:
        return None
    kind = dom[0]
    if kind == "box":
        bounds = np.asarray(dom[1], dtype=float)
        axes, wts = [], []
        for i in range(ch.dim):
            lo, hi = bounds[i]
            if ch.periodic[i]:
                x = np.linspace(lo, hi, resolution, endpoint=False)
                w = np.full(resolution, (hi - lo) / resolution)
            else:
                x, w = _gauss_legendre(lo, hi, resolution)
            axes.append(x)
            wts.append(w)
        mesh = np.meshgrid(*axes, indexing="ij")
        X = np.stack(mesh, axis=-1).reshape(-1, ch.dim)
        wmesh = np.meshgrid(*wts, indexing="ij")
        W = np.prod(np.stack(wmesh, axis=-1).reshape(-1, ch.dim), axis=-1)
        return X, W
    if kind == "disc":
        R = float(dom[1])
        r, wr = _gauss_legendre(0.0, R, resolution)
        th = np.linspace(0.0, 2.0 * np.pi, 2 * resolution, endpoint=False)
        wth = 2.0 * np.pi / (2 * resolution)
        rr, tt = np.meshgrid(r, th, indexing="ij")
        X = np.stack([rr * np.cos(tt), rr * np.sin(tt)], axis=-1).reshape(-1, 2)
        W = (wr[:, None] * (rr * wth)).reshape(-1)
        return X, W
    raise ValidationError(f"unknown quadrature domain {kind!r}",
                          module="riemann", operation="volume_integral")


def volume_integral(M, f, resolution=64, field=None):
    """Integral of a scalar field over M with the Riemannian volume element.

    f : callable (chart, coords (..., n)) -> (...)
    field : optional metric field overriding the manifold's own metric.
    """
    field = field or metric_field(M)
    total = 0.0
    covered = False
    for c, ch in enumerate(M.charts):
        nodes = _quad_nodes(ch, resolution)
        if nodes is None:
            continue
        covered = True
        X, W = nodes
        dens = np.sqrt(np.linalg.det(np.asarray(field(c, X), dtype=float)))
        total += float(np.sum(W * dens * np.asarray(f(c, X), dtype=float)))
    if not covered:
        raise ValidationError(
            "no chart declares a quadrature domain: partition gap",
            module="riemann", operation="volume_integral")
    return total


def manifold_volume(M, resolution=64, field=None):
    return volume_integral(M, lambda c, X: np.ones(X.shape[:-1]),
                           resolution=resolution, field=field)


# ----------------------------------------------------------------------
# curve quadrature under arbitrary metric fields


def _simpson_weights(m):
    """Composite Simpson weights for m+1 nodes (m even)."""
    w = np.ones(m + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w / 3.0


def path_length_under(path, field, f=None):
    """Integral of f (default 1) along the path with the field's length element.

    Composite Simpson on each piece's sample polyline; the same nodes serve
    lengths and line integrals so ratios of constants are exact.
    """
    total = 0.0
    for piece in path.pieces:
        X, V = piece.samples, piece.velocities
        g = np.asarray(field(piece.chart, X), dtype=float)
        speed = np.sqrt(np.einsum("si,sij,sj->s", V, g, V))
        vals = speed if f is None else speed * np.asarray(
            f(piece.chart, X), dtype=float)
        m = piece.nsteps
        dt = piece.T / m
        if m % 2 == 0:
            total += float(np.sum(_simpson_weights(m) * vals) * dt)
        else:
            total += float(np.trapezoid(vals, dx=dt))
    return total


def polyline_length_under(chart, X, field):
    """Metric chord-sum length of an explicit polyline in one chart."""
    X = np.asarray(X, dtype=float)
    mids = 0.5 * (X[:-1] + X[1:])
    d = X[1:] - X[:-1]
    g = np.asarray(field(chart, mids), dtype=float)
    return float(np.sum(np.sqrt(np.einsum("si,sij,sj->s", d, g, d))))
