"""Geometry kernel: charts, manifolds, geodesics, transport, and measure."""

from .charts import Chart, ChartPoint, Transition
from .family import Bump, ConformalFamily, zero_bump
from .geodesics import (GeodesicPath, GeodesicSegment, geodesic_bvp,
                        geodesic_ivp, parallel_transport)
from .manifold import (BUILTINS, ChartManifold, ellipsoid, flat_torus,
                       round_sphere)
from .measure import (direction_sup_on_curves, manifold_volume, metric_distance,
                      metric_field, path_length_under, polyline_length_under,
                      volume_integral)

__all__ = [
    "BUILTINS", "Bump", "Chart", "ChartManifold", "ChartPoint",
    "ConformalFamily", "GeodesicPath", "GeodesicSegment", "Transition",
    "direction_sup_on_curves", "ellipsoid", "flat_torus", "geodesic_bvp",
    "geodesic_ivp", "manifold_volume", "metric_distance", "metric_field",
    "parallel_transport", "path_length_under", "polyline_length_under",
    "round_sphere", "volume_integral", "zero_bump",
]
