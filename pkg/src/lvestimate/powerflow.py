"""Backward/forward sweep power flow and quasi-static time-series runs.

Per-unit system: 1 MVA base, voltage base equal to each bus's nominal
voltage. A line's impedance is converted with the base of its downstream bus.
Loads are constant power.
"""

from __future__ import annotations

import csv
import math
from collections import deque
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from lvestimate.feeder import Feeder
from lvestimate.profiles import TimeSeries, pv_ac_power

BASE_KVA = 1000.0


class PowerFlowError(RuntimeError):
    """The sweep failed to converge (typically an infeasible loading)."""

    def __init__(self, message: str, timestep: int | None = None):
        super().__init__(message if timestep is None else f"timestep {timestep}: {message}")
        self.timestep = timestep


@dataclass(frozen=True, eq=False)
class SnapshotInjection:
    """Net demand per bus, ordered like ``feeder.buses``.

    PV output enters as negative active demand only; there is no reactive
    PV term.
    """

    p_kw: np.ndarray
    q_kvar: np.ndarray


class RadialNetwork:
    """Feeder topology prepared for repeated sweeps.

    ``subtree[k, j]`` is 1 when bus ``j`` lies at or below bus ``k``, so the
    backward sweep is ``subtree @ i_bus`` and the forward sweep is
    ``subtree.T @ (z * i_branch)``.
    """

    def __init__(self, feeder: Feeder):
        self.feeder = feeder
        self.bus_ids = [b.id for b in feeder.buses]
        index = {bid: k for k, bid in enumerate(self.bus_ids)}
        self.index = index
        n = len(self.bus_ids)
        self.source = index[feeder.source.id]
        self.v_source = complex(feeder.source_voltage_pu)

        neighbours: dict[int, list[tuple[int, complex]]] = {k: [] for k in range(n)}
        for ln in feeder.lines:
            a, b = index[ln.from_bus], index[ln.to_bus]
            neighbours[a].append((b, complex(ln.resistance, ln.reactance)))
            neighbours[b].append((a, complex(ln.resistance, ln.reactance)))

        parent = np.full(n, -1)
        z = np.zeros(n, dtype=complex)
        order = [self.source]
        seen = {self.source}
        queue = deque([self.source])
        while queue:
            k = queue.popleft()
            for child, z_ohm in neighbours[k]:
                if child in seen:
                    continue
                seen.add(child)
                parent[child] = k
                v_base = feeder.buses[child].nominal_voltage
                z[child] = z_ohm / (v_base**2 / (BASE_KVA * 1000.0))
                order.append(child)
                queue.append(child)
        if len(order) != n:
            raise PowerFlowError("feeder is not connected")
        self.parent = parent
        self.z = z
        self.order = order

        subtree = np.zeros((n, n))
        for k in reversed(order):
            subtree[k, k] = 1.0
            if parent[k] >= 0:
                subtree[parent[k]] += subtree[k]
        self.subtree = subtree
        self._branch = np.array([k for k in range(n) if parent[k] >= 0])

    def residual(self, v: np.ndarray, s: np.ndarray) -> float:
        """Largest nodal power mismatch (pu) with branch currents from voltage drops."""
        br = self._branch
        i_branch = np.zeros(len(v), dtype=complex)
        i_branch[br] = (v[self.parent[br]] - v[br]) / self.z[br]
        i_net = i_branch.copy()
        np.subtract.at(i_net, self.parent[br], i_branch[br])
        s_calc = v * np.conj(i_net)
        mask = np.ones(len(v), dtype=bool)
        mask[self.source] = False
        return float(np.max(np.abs(s_calc[mask] - s[mask]), initial=0.0))


def solve_snapshot(
    feeder: Feeder | RadialNetwork,
    injection: SnapshotInjection,
    tol: float = 1e-8,
    max_iter: int = 50,
) -> np.ndarray:
    """Solve one radial power flow by backward/forward sweep.

    Args:
        feeder: the feeder, or a prepared ``RadialNetwork`` to skip setup.
        injection: net demand per bus in kW / kvar.
        tol: convergence threshold on the per-bus voltage magnitude change (pu).
        max_iter: sweep budget.

    Returns:
        Complex per-unit bus voltages ordered like ``feeder.buses``.

    Raises:
        PowerFlowError: if the sweep does not converge within ``max_iter``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    net = feeder if isinstance(feeder, RadialNetwork) else RadialNetwork(feeder)
    s = (np.asarray(injection.p_kw, dtype=float) + 1j * np.asarray(injection.q_kvar, dtype=float)) / BASE_KVA
    s[net.source] = 0.0
    v = np.full(len(s), net.v_source, dtype=complex)
    if not np.any(s):
        return v
    for _ in range(max_iter):
        i_bus = np.conj(s / v)
        i_branch = net.subtree @ i_bus
        v_new = net.v_source - net.subtree.T @ (net.z * i_branch)
        if not np.all(np.isfinite(v_new)) or np.any(np.abs(v_new) < 1e-6):
            break
        change = np.max(np.abs(np.abs(v_new) - np.abs(v)))
        v = v_new
        if change < tol and net.residual(v, s) < 10 * tol:
            return v
    raise PowerFlowError(f"sweep did not converge in {max_iter} iterations")


@dataclass(frozen=True, eq=False)
class VoltageDataset:
    """Ground-truth voltage magnitudes (pu), one row per bus, one column per step."""

    bus_ids: tuple[int, ...]
    timestamps: tuple[datetime, ...]
    voltages: np.ndarray
    nominal_voltage: tuple[int, ...]

    def row(self, bus_id: int) -> np.ndarray:
        return self.voltages[self.bus_ids.index(bus_id)]

    @property
    def n_steps(self) -> int:
        return len(self.timestamps)

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["timestamp", *self.bus_ids])
            for t, stamp in enumerate(self.timestamps):
                w.writerow([stamp.isoformat(), *(f"{x:.9f}" for x in self.voltages[:, t])])


def injections(feeder: Feeder, profiles: Mapping[str, TimeSeries], n_steps: int) -> tuple[np.ndarray, np.ndarray]:
    """Net per-bus demand matrices (buses x steps) in kW and kvar.

    A load's demand is ``rated_kw`` scaled by its profile normalised to a
    peak of 1; reactive demand follows the load's power factor.
    """
    index = {b.id: k for k, b in enumerate(feeder.buses)}
    p = np.zeros((len(index), n_steps))
    q = np.zeros((len(index), n_steps))

    def series(pid: str) -> TimeSeries:
        if pid not in profiles:
            raise KeyError(f"unknown profile {pid!r}")
        ts = profiles[pid]
        if ts.step != 15:
            raise ValueError(f"profile {pid!r} has step {ts.step}; downscale to 15 minutes first")
        if len(ts) < n_steps:
            raise ValueError(f"profile {pid!r} has {len(ts)} steps, need {n_steps}")
        return ts

    for ld in feeder.loads:
        ts = series(ld.profile_id)
        peak = float(np.max(np.abs(ts.values)))
        shape = ts.values[:n_steps] / peak if peak > 0 else np.zeros(n_steps)
        kw = ld.rated_kw * shape
        p[index[ld.bus]] += kw
        q[index[ld.bus]] += kw * math.tan(math.acos(ld.power_factor))
    for pv in feeder.pv_systems:
        ac = pv_ac_power(series(pv.irradiance_profile_id), pv)
        p[index[pv.bus]] -= ac.values[:n_steps]
    return p, q


def run_qsts(
    feeder: Feeder,
    profiles: Mapping[str, TimeSeries],
    days: int | None = None,
    tol: float = 1e-8,
    max_iter: int = 50,
    order: Sequence[int] | None = None,
) -> VoltageDataset:
    """Quasi-static time series: one independent snapshot solve per step.

    ``order`` only changes the evaluation sequence; results are stored by
    timestep index, so any permutation yields the same dataset.
    """
    used = {ld.profile_id for ld in feeder.loads} | {pv.irradiance_profile_id for pv in feeder.pv_systems}
    available = [profiles[pid] for pid in sorted(used) if pid in profiles]
    if len(available) != len(used):
        missing = sorted(pid for pid in used if pid not in profiles)
        raise KeyError(f"unresolved profiles: {missing}")
    reference = available[0] if available else next(iter(profiles.values()))
    lengths = {len(profiles[pid]) for pid in used}
    if len(lengths) > 1:
        raise ValueError("referenced profiles differ in length")
    n_steps = len(reference) if days is None else days * 96
    if n_steps > len(reference):
        raise ValueError(f"profiles cover {len(reference)} steps, need {n_steps}")

    p, q = injections(feeder, profiles, n_steps)
    net = RadialNetwork(feeder)
    volts = np.empty((len(net.bus_ids), n_steps))
    steps = range(n_steps) if order is None else list(order)
    if sorted(steps) != list(range(n_steps)):
        raise ValueError("order must be a permutation of the timestep indices")
    for t in steps:
        try:
            v = solve_snapshot(net, SnapshotInjection(p[:, t], q[:, t]), tol, max_iter)
        except PowerFlowError as exc:
            raise PowerFlowError(str(exc), timestep=t) from exc
        volts[:, t] = np.abs(v)
    stamps = tuple(reference.timestamps()[:n_steps])
    volts.flags.writeable = False
    return VoltageDataset(
        tuple(net.bus_ids),
        stamps,
        volts,
        tuple(b.nominal_voltage for b in feeder.buses),
    )
