"""Ready-made nets and manifolds used by tests, demos, and experiments."""

from __future__ import annotations

import numpy as np

from .multigraph import WeightedMultigraph
from .net import Net, closed_geodesic_net
from .riemann import ChartPoint, flat_torus


def theta_net_on_sphere(S, angles_deg=(0.0, 120.0, 240.0)):
    """Three pole-to-pole meridians, each broken at the equator.

    Vertices: south pole (chart 0 origin), north pole (chart 1 origin), and
    one break point per meridian on the equator.  All six half-meridian edges
    carry multiplicity 1.  The configuration is stationary: tangents at each
    pole meet at equal angles and each equator break point is balanced.
    """
    vids = ["ps", "pn"] + [f"q{i}" for i in range(len(angles_deg))]
    pos = {
        "ps": ChartPoint(0, [0.0, 0.0]),
        "pn": ChartPoint(1, [0.0, 0.0]),
    }
    edges = {}
    for i, ang in enumerate(np.deg2rad(np.asarray(angles_deg, dtype=float))):
        pos[f"q{i}"] = ChartPoint(0, [np.cos(ang), np.sin(ang)])
        edges[f"s{i}"] = ("ps", f"q{i}", 1)
        edges[f"n{i}"] = ("pn", f"q{i}", 1)
    graph = WeightedMultigraph(vids, edges)
    return Net(S, graph, pos)


def tripod_net(M, center, anchors, pin_anchors=True, multiplicities=(1, 1, 1)):
    """A free junction joined to three anchor points."""
    vids = ["c"] + [f"a{i}" for i in range(len(anchors))]
    edges = {f"e{i}": ("c", f"a{i}", int(multiplicities[i]))
             for i in range(len(anchors))}
    graph = WeightedMultigraph(vids, edges)
    pos = {"c": center}
    for i, p in enumerate(anchors):
        pos[f"a{i}"] = p
    pinned = [f"a{i}" for i in range(len(anchors))] if pin_anchors else []
    return Net(M, graph, pos, pinned=pinned)


def plane_patch(side=100.0):
    """A large flat torus used as a planar chart for local experiments."""
    return flat_torus(side, side)


def torus_line_net(T, p=1, q=0, origin=(0.0, 0.0), k=None, multiplicity=1,
                   prefix=""):
    """Closed (p, q) geodesic on the flat torus with k break points."""
    lx = T.params["lx"]
    ly = T.params["ly"]
    v = np.array([p * lx, q * ly])
    period = 1.0
    L = float(np.linalg.norm(v))
    if k is None:
        k = max(3, int(np.ceil(L / (0.8 * T.max_edge_len))))
    return closed_geodesic_net(T, 0, np.asarray(origin, dtype=float), v,
                               period, k=k, multiplicity=multiplicity,
                               prefix=prefix)


def sphere_great_circle_net(S, axis=(0.0, 0.0, 1.0), k=4, multiplicity=1,
                            phase=0.0, prefix="", resolution=160):
    """Great circle orthogonal to `axis` as a cycle net with k break points.

    Break points are placed exactly on the circle; the edges are the minor
    arcs between consecutive break points (unique short geodesics), so the
    configuration is stationary to solver precision.
    """
    if k < 3:
        raise ValueError("need at least 3 break points")
    r = S.params["radius"]
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    probe = np.array([1.0, 0.0, 0.0])
    if abs(axis @ probe) > 0.9:
        probe = np.array([0.0, 1.0, 0.0])
    e1 = probe - (probe @ axis) * axis
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(axis, e1)
    graph = WeightedMultigraph.cycle(k, multiplicity, prefix=prefix)
    pos = {}
    for i in range(k):
        t = phase + 2.0 * np.pi * i / k
        amb = r * (np.cos(t) * e1 + np.sin(t) * e2)
        pos[f"{prefix}v{i}"] = sphere_point_from_ambient(S, amb)
    return Net(S, graph, pos, resolution=resolution)


def sphere_point_from_ambient(S, a):
    """Chart representation of an ambient point on a round sphere."""
    r = S.params["radius"]
    x, y, z = np.asarray(a, dtype=float) / r
    if z < 0.5:
        return ChartPoint(0, [x / (1.0 - z), y / (1.0 - z)])
    return ChartPoint(1, [x / (1.0 + z), y / (1.0 + z)])


def rotate_sphere_net(net: Net, R):
    """Apply an ambient rotation matrix to a net on a round sphere."""
    S = net.M
    pos = {}
    for v, p in net.positions.items():
        pos[v] = sphere_point_from_ambient(S, R @ S.ambient_point(p))
    return Net(S, net.graph, pos, net.pinned, resolution=net.resolution)


def ellipsoid_equator_net(E, k=6, multiplicity=1, prefix="", resolution=160):
    """Principal-section closed geodesic of an ellipsoid in the z = 0 plane.

    In the sphere-pullback charts the section is the unit circle, traversed
    with the chart-coordinate parametrization; the geodesic property follows
    from reflection symmetry.
    """
    if k < 3:
        raise ValueError("need at least 3 break points")
    # the z = 0 principal section is the chart-0 unit circle: place break
    # points exactly on it; reflection symmetry makes each connecting arc a
    # geodesic inside the section
    graph = WeightedMultigraph.cycle(k, multiplicity, prefix=prefix)
    pos = {}
    for i in range(k):
        t = 2.0 * np.pi * i / k
        pos[f"{prefix}v{i}"] = ChartPoint(0, [np.cos(t), np.sin(t)])
    return Net(E, graph, pos, resolution=resolution)
