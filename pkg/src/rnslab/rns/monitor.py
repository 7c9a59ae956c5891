"""Empirical constants of the two bootstrap inequalities.

At each checkpoint T the monitor solves

    theta(T) = eps A_wh + A_w3 + C1 V(T) theta(T)
    Vh(T)    = A_vh + C2 (1/lam + V(T)) Vh(T)

for C1, C2, where A_* are the e^{a|D_3|}-weighted B^{7/2} norms of the
initial pieces and V, Vh the running L~^inf(B^{7/2}) norms of v_Phi and
v^h_Phi.  Checkpoints with a vanishing denominator are skipped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .solver import RunResult


@dataclass(frozen=True)
class MonitorReport:
    """Largest fitted constants over the run and what they predict.

    ``c0`` is max(C1, C2, 0); ``lam_pred = 1/(2 c0)`` and
    ``eta_pred = 1/(12 c0)`` are infinite when c0 = 0 (nothing to absorb).
    """

    c1: float
    c2: float
    checkpoints: int
    skipped: int
    c1_series: list = field(default_factory=list)
    c2_series: list = field(default_factory=list)

    @property
    def c0(self) -> float:
        return max(self.c1, self.c2, 0.0)

    @property
    def lam_pred(self) -> float:
        return math.inf if self.c0 == 0.0 else 1.0 / (2.0 * self.c0)

    @property
    def eta_pred(self) -> float:
        return math.inf if self.c0 == 0.0 else 1.0 / (12.0 * self.c0)

    @property
    def trivial(self) -> bool:
        """Both inequalities hold with nothing to absorb (for instance w0 = 0)."""
        return self.c0 == 0.0

    @property
    def finite(self) -> bool:
        return bool(np.isfinite(self.c1) and np.isfinite(self.c2))


def _checkpoint_rows(result: RunResult, every: int | None):
    every = result.config.checkpoint_every if every is None else every
    rows = [d for d in result.history if d.step % every == 0]
    if result.history and (not rows or rows[-1] is not result.history[-1]):
        rows.append(result.history[-1])
    return rows


def proposition_monitor(result: RunResult, every: int | None = None, tiny: float = 1e-300) -> MonitorReport:
    cfg = result.config
    n0 = result.norms0
    c1s, c2s = [], []
    rows = _checkpoint_rows(result, every)
    skipped = 0
    for d in rows:
        v, vh, theta = d.v_phi_tilde, d.vh_phi_tilde, d.theta
        ok = False
        if v * theta > tiny:
            c1s.append((theta - (cfg.eps * n0.wh + n0.w3)) / (v * theta))
            ok = True
        if vh > tiny:
            c2s.append((vh - n0.vh) / ((1.0 / cfg.lam + v) * vh))
            ok = True
        skipped += not ok
    c1 = max(c1s) if c1s else 0.0
    c2 = max(c2s) if c2s else 0.0
    return MonitorReport(c1, c2, len(rows), skipped, c1s, c2s)


def refinement_stable(coarse: MonitorReport, fine: MonitorReport, factor: float = 2.0,
                      floor: float = 1e-12) -> bool:
    """Both constants agree within ``factor`` (values below ``floor`` count as equal)."""
    for a, b in ((coarse.c1, fine.c1), (coarse.c2, fine.c2)):
        if not (np.isfinite(a) and np.isfinite(b)):
            return False
        if abs(a) <= floor and abs(b) <= floor:
            continue
        if a * b <= 0 or max(abs(a), abs(b)) > factor * min(abs(a), abs(b)):
            return False
    return True


def predicted_region_consistent(report: MonitorReport, runs) -> bool:
    """Every run with eta <= eta_pred and lam >= lam_pred kept the bootstrap.

    ``runs`` yields (eta, lam, held) triples.
    """
    return all(held for eta, lam, held in runs if eta <= report.eta_pred and lam >= report.lam_pred)
