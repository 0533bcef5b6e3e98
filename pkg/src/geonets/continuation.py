"""Follow a stationary net along a conformal metric family g_t = (1+t*phi)g_0.

Secant predictor over the vertex-position vector, Newton corrector under the
deformed metric, bisection of the t-step on corrector failure, and a halt
(not an error) when the continued net degenerates: past that point the
continued branch is no longer numerically certified.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ContinuationError, GeonetsError, NonStationaryError
from .net import Net, NetEvaluator, hessian_and_classify
from .solver import stationarize


@dataclass
class ContinuationStep:
    t: float
    net: Net
    report: object


@dataclass
class ContinuationResult:
    steps: list = field(default_factory=list)
    status: str = "completed"
    halt_info: dict = field(default_factory=dict)

    def table(self):
        return length_along_family(self)


def continue_net(net0: Net, fam, t_grid, tol_stat=1e-8, tol_null=1e-6,
                 tol_par=1e-4, max_corrector_iter=12, min_step=1e-6,
                 classify_steps=True, on_degenerate_start="error"):
    """Track net0 over the t-grid of the family.

    Every accepted step re-verifies stationarity under g_t; with
    classify_steps the variation report is computed and degeneration halts
    the continuation at the last good t.  t_grid must start at 0; the t = 0
    entry returns net0 itself.
    """
    t_grid = [float(t) for t in t_grid]
    if not t_grid or abs(t_grid[0]) > 1e-15:
        raise ContinuationError("t grid must start at 0",
                                detail={"t0": t_grid[0] if t_grid else None})
    if any(b <= a for a, b in zip(t_grid, t_grid[1:])):
        raise ContinuationError("t grid must increase strictly")
    if net0.mode != "bvp":
        net0 = net0.as_bvp()
    if net0.max_defect() > tol_stat:
        raise NonStationaryError("continuation start is not stationary",
                                 module="continuation",
                                 operation="continue_net")

    report0 = hessian_and_classify(net0, tol_null=tol_null, tol_par=tol_par,
                                   tol_stat=tol_stat)
    if report0.classification != "nondegenerate":
        if on_degenerate_start == "error":
            raise ContinuationError(
                f"start net classified {report0.classification}; pass "
                "on_degenerate_start='proceed' to continue anyway",
                detail={"classification": report0.classification})
    result = ContinuationResult()
    result.steps.append(ContinuationStep(0.0, net0, report0))

    xs = [net0.positions_vector()]
    ts = [0.0]
    template = net0
    remaining = list(t_grid[1:])
    while remaining:
        t_next = remaining[0]
        dt = t_next - ts[-1]
        # secant predictor over the free coordinate vector
        if len(xs) >= 2 and (ts[-1] - ts[-2]) > 0:
            x_pred = xs[-1] + (xs[-1] - xs[-2]) * (dt / (ts[-1] - ts[-2]))
        else:
            x_pred = xs[-1].copy()
        try:
            net_t = _correct(template, fam, t_next, x_pred, tol_stat,
                             max_corrector_iter)
        except GeonetsError:
            mid = ts[-1] + 0.5 * dt
            if 0.5 * dt < min_step:
                result.status = "corrector_failed"
                result.halt_info = {"t_failed": t_next, "t_last": ts[-1]}
                return result
            remaining.insert(0, mid)
            continue
        report = None
        if classify_steps:
            report = hessian_and_classify(net_t, tol_null=tol_null,
                                          tol_par=tol_par, tol_stat=tol_stat)
            if report.classification != "nondegenerate":
                result.status = "degenerate_halt"
                result.halt_info = {
                    "critical_interval": (ts[-1], t_next),
                    "classification": report.classification,
                    "min_nontrivial_eigenvalue":
                        report.min_nontrivial_eigenvalue,
                }
                return result
        result.steps.append(ContinuationStep(t_next, net_t, report))
        xs.append(net_t.positions_vector())
        ts.append(t_next)
        template = net_t
        remaining.pop(0)
    return result


def _correct(template: Net, fam, t, x_pred, tol_stat, max_iter):
    M_t = fam.manifold_at(t)
    seed = template.with_metric(M_t, enforce_cap=False)
    ev = NetEvaluator(seed)
    if x_pred.shape == ev.x0.shape:
        seed_pos = ev.positions_from(x_pred)
        seed = Net(M_t, seed.graph, seed_pos, seed.pinned,
                   resolution=seed.resolution, enforce_cap=False)
    res = stationarize(seed, max_iter=max_iter, tol_stat=tol_stat,
                       newton_threshold=np.inf)
    return res.net


def length_along_family(result: ContinuationResult):
    """Rows of (t, length, defect, min nontrivial eigenvalue), sorted by t."""
    rows = []
    for step in result.steps:
        rows.append({
            "t": step.t,
            "length": step.net.total_length(),
            "defect": step.net.max_defect(),
            "min_nontrivial_eigenvalue":
                (step.report.min_nontrivial_eigenvalue
                 if step.report is not None else float("nan")),
        })
    return sorted(rows, key=lambda r: r["t"])
