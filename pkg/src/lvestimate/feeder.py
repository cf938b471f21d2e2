"""Radial LV feeder data model, JSON I/O, validation and a synthetic generator."""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

import numpy as np

NOMINAL_VOLTAGES = (208, 480)
BUS_KINDS = ("source", "junction", "load")
LOAD_CLASSES = ("residential", "commercial")


class FeederError(ValueError):
    """Raised when a feeder file cannot be parsed or violates an invariant."""


@dataclass(frozen=True)
class Bus:
    id: int
    label: int
    nominal_voltage: int
    coord_x: float
    coord_y: float
    kind: str


@dataclass(frozen=True)
class Line:
    from_bus: int
    to_bus: int
    resistance: float
    reactance: float


@dataclass(frozen=True)
class Load:
    bus: int
    rated_kw: float
    power_factor: float
    load_class: str
    profile_id: str


@dataclass(frozen=True)
class PVSystem:
    """Rooftop PV system; always operated at unity power factor."""

    bus: int
    irradiance_profile_id: str
    rated_dc_kw: float = 7.0
    dc_ac_ratio: float = 1.2
    inverter_efficiency: float = 0.96


@dataclass(frozen=True)
class Feeder:
    buses: tuple[Bus, ...]
    lines: tuple[Line, ...]
    loads: tuple[Load, ...] = ()
    pv_systems: tuple[PVSystem, ...] = ()
    source_voltage_pu: float = 1.0

    @property
    def source(self) -> Bus:
        return next(b for b in self.buses if b.kind == "source")

    def bus(self, bus_id: int) -> Bus:
        for b in self.buses:
            if b.id == bus_id:
                return b
        raise KeyError(bus_id)

    def load_buses(self, nominal_voltage: int | None = None) -> list[int]:
        """Ids of load-kind buses, optionally restricted to one voltage level."""
        return [
            b.id
            for b in self.buses
            if b.kind == "load"
            and (nominal_voltage is None or b.nominal_voltage == nominal_voltage)
        ]

    def without_pv(self) -> Feeder:
        return replace(self, pv_systems=())


# -- validation ---------------------------------------------------------------


def validate_feeder(f: Feeder) -> list[str]:
    """Check every feeder invariant.

    Returns:
        A list of human-readable violations; empty when the feeder is valid.
    """
    problems: list[str] = []
    kinds: dict[int, str] = {}
    seen: set[int] = set()
    for b in f.buses:
        if b.id in seen:
            problems.append(f"bus id {b.id} duplicated")
        seen.add(b.id)
        kinds[b.id] = b.kind
        if b.kind not in BUS_KINDS:
            problems.append(f"bus {b.id}: unknown kind {b.kind!r}")
        if b.nominal_voltage not in NOMINAL_VOLTAGES:
            problems.append(f"bus {b.id}: nominal_voltage {b.nominal_voltage} not in {NOMINAL_VOLTAGES}")
        if not (math.isfinite(b.coord_x) and math.isfinite(b.coord_y)):
            problems.append(f"bus {b.id}: non-finite coordinates")
    n_source = sum(1 for b in f.buses if b.kind == "source")
    if n_source != 1:
        problems.append(f"expected exactly one source bus, found {n_source}")
    if not f.source_voltage_pu > 0:
        problems.append("source_voltage_pu must be positive")

    adjacency: dict[int, list[int]] = {b.id: [] for b in f.buses}
    for i, ln in enumerate(f.lines):
        bad_end = False
        for end in (ln.from_bus, ln.to_bus):
            if end not in kinds:
                problems.append(f"line {i}: unknown bus {end}")
                bad_end = True
        if ln.from_bus == ln.to_bus:
            problems.append(f"line {i}: from_bus equals to_bus ({ln.from_bus})")
            bad_end = True
        if not ln.resistance > 0:
            problems.append(f"line {i}: resistance must be > 0")
        if not ln.reactance >= 0:
            problems.append(f"line {i}: reactance must be >= 0")
        if not bad_end:
            adjacency[ln.from_bus].append(ln.to_bus)
            adjacency[ln.to_bus].append(ln.from_bus)

    if len(f.lines) != len(f.buses) - 1:
        problems.append(f"not radial: {len(f.lines)} lines for {len(f.buses)} buses")
    elif n_source == 1:
        reached = _reachable(adjacency, f.source.id)
        if len(reached) != len(adjacency):
            problems.append("graph not connected")

    for ld in f.loads:
        if ld.bus not in kinds:
            problems.append(f"load at unknown bus {ld.bus}")
        elif kinds[ld.bus] != "load":
            problems.append(f"load at bus {ld.bus} whose kind is {kinds[ld.bus]!r}")
        if not ld.rated_kw > 0:
            problems.append(f"load at bus {ld.bus}: rated_kw must be > 0")
        if not 0 < ld.power_factor <= 1:
            problems.append(f"load at bus {ld.bus}: power_factor must be in (0, 1]")
        if ld.load_class not in LOAD_CLASSES:
            problems.append(f"load at bus {ld.bus}: unknown class {ld.load_class!r}")
    for pv in f.pv_systems:
        if pv.bus not in kinds:
            problems.append(f"pv system at unknown bus {pv.bus}")
        if not pv.rated_dc_kw > 0:
            problems.append(f"pv system at bus {pv.bus}: rated_dc_kw must be > 0")
        if not pv.dc_ac_ratio > 0:
            problems.append(f"pv system at bus {pv.bus}: dc_ac_ratio must be > 0")
        if not 0 < pv.inverter_efficiency <= 1:
            problems.append(f"pv system at bus {pv.bus}: inverter_efficiency must be in (0, 1]")
    return problems


def _reachable(adjacency: dict[int, list[int]], start: int) -> set[int]:
    seen = {start}
    queue = deque([start])
    while queue:
        node = queue.popleft()
        for nxt in adjacency[node]:
            if nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
    return seen


# -- JSON ---------------------------------------------------------------------

_BUS_KEYS = {"id", "label", "nominal_voltage", "coord_x", "coord_y", "kind"}
_LINE_KEYS = {"from_bus", "to_bus", "resistance", "reactance"}
_LOAD_KEYS = {"bus", "rated_kw", "power_factor", "class", "profile_id"}
_PV_KEYS = {"bus", "rated_dc_kw", "dc_ac_ratio", "inverter_efficiency", "irradiance_profile_id"}
_TOP_KEYS = {"buses", "lines", "loads", "pv_systems", "source_voltage_pu"}


def _check_keys(obj: Any, allowed: set[str], required: set[str], where: str) -> None:
    if not isinstance(obj, dict):
        raise FeederError(f"{where}: expected an object")
    unknown = set(obj) - allowed
    if unknown:
        raise FeederError(f"{where}: unknown keys {sorted(unknown)}")
    missing = required - set(obj)
    if missing:
        raise FeederError(f"{where}: missing keys {sorted(missing)}")


def feeder_from_dict(data: dict[str, Any]) -> Feeder:
    _check_keys(data, _TOP_KEYS, {"buses", "lines"}, "feeder")
    try:
        buses = []
        for i, b in enumerate(data["buses"]):
            _check_keys(b, _BUS_KEYS, _BUS_KEYS - {"label"}, f"buses[{i}]")
            buses.append(
                Bus(
                    id=int(b["id"]),
                    label=int(b.get("label", b["id"])),
                    nominal_voltage=int(b["nominal_voltage"]),
                    coord_x=float(b["coord_x"]),
                    coord_y=float(b["coord_y"]),
                    kind=str(b["kind"]),
                )
            )
        lines = []
        for i, ln in enumerate(data["lines"]):
            _check_keys(ln, _LINE_KEYS, {"from_bus", "to_bus", "resistance"}, f"lines[{i}]")
            lines.append(
                Line(
                    from_bus=int(ln["from_bus"]),
                    to_bus=int(ln["to_bus"]),
                    resistance=float(ln["resistance"]),
                    reactance=float(ln.get("reactance", 0.0)),
                )
            )
        loads = []
        for i, ld in enumerate(data.get("loads", [])):
            _check_keys(ld, _LOAD_KEYS, _LOAD_KEYS, f"loads[{i}]")
            loads.append(
                Load(
                    bus=int(ld["bus"]),
                    rated_kw=float(ld["rated_kw"]),
                    power_factor=float(ld["power_factor"]),
                    load_class=str(ld["class"]),
                    profile_id=str(ld["profile_id"]),
                )
            )
        pvs = []
        for i, pv in enumerate(data.get("pv_systems", [])):
            _check_keys(pv, _PV_KEYS, {"bus", "irradiance_profile_id"}, f"pv_systems[{i}]")
            pvs.append(
                PVSystem(
                    bus=int(pv["bus"]),
                    irradiance_profile_id=str(pv["irradiance_profile_id"]),
                    rated_dc_kw=float(pv.get("rated_dc_kw", 7.0)),
                    dc_ac_ratio=float(pv.get("dc_ac_ratio", 1.2)),
                    inverter_efficiency=float(pv.get("inverter_efficiency", 0.96)),
                )
            )
        source_v = float(data.get("source_voltage_pu", 1.0))
    except (TypeError, ValueError) as exc:
        if isinstance(exc, FeederError):
            raise
        raise FeederError(f"bad field value: {exc}") from exc
    return Feeder(tuple(buses), tuple(lines), tuple(loads), tuple(pvs), source_v)


def feeder_to_dict(f: Feeder) -> dict[str, Any]:
    return {
        "buses": [
            {
                "id": b.id,
                "label": b.label,
                "nominal_voltage": b.nominal_voltage,
                "coord_x": b.coord_x,
                "coord_y": b.coord_y,
                "kind": b.kind,
            }
            for b in f.buses
        ],
        "lines": [
            {
                "from_bus": ln.from_bus,
                "to_bus": ln.to_bus,
                "resistance": ln.resistance,
                "reactance": ln.reactance,
            }
            for ln in f.lines
        ],
        "loads": [
            {
                "bus": ld.bus,
                "rated_kw": ld.rated_kw,
                "power_factor": ld.power_factor,
                "class": ld.load_class,
                "profile_id": ld.profile_id,
            }
            for ld in f.loads
        ],
        "pv_systems": [
            {
                "bus": pv.bus,
                "rated_dc_kw": pv.rated_dc_kw,
                "dc_ac_ratio": pv.dc_ac_ratio,
                "inverter_efficiency": pv.inverter_efficiency,
                "irradiance_profile_id": pv.irradiance_profile_id,
            }
            for pv in f.pv_systems
        ],
        "source_voltage_pu": f.source_voltage_pu,
    }


def dumps_feeder(f: Feeder) -> str:
    return json.dumps(feeder_to_dict(f), indent=1, ensure_ascii=False) + "\n"


def save_feeder(f: Feeder, path: str | Path) -> None:
    Path(path).write_text(dumps_feeder(f), encoding="utf-8")


def load_feeder(path: str | Path) -> Feeder:
    """Read and validate a feeder JSON file.

    Raises:
        FeederError: on malformed JSON, unknown keys or any invariant violation.
    """
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FeederError(f"malformed feeder JSON: {exc}") from exc
    feeder = feeder_from_dict(data)
    problems = validate_feeder(feeder)
    if problems:
        raise FeederError("; ".join(problems))
    return feeder


# -- synthetic generator --------------------------------------------------------


def _ceil_fraction(frac: float, count: int) -> int:
    # rounding first keeps products like 0.07 * 100 from ceiling to 8
    return math.ceil(round(frac * count, 9))


@dataclass(frozen=True)
class FeederSpec:
    """Parameters of the synthetic feeder generator.

    Impedances are per km of conductor and keyed by nominal voltage; segment
    lengths are drawn uniformly from ``segment_length_m``.
    """

    n_buses: int
    pct_208: float = 0.7
    pv_penetration: float = 0.85
    seed: int = 0
    commercial_fraction: float = 0.15
    segment_length_m: tuple[float, float] = (50.0, 200.0)
    impedance_ohm_per_km: dict[int, tuple[float, float]] = field(
        default_factory=lambda: {480: (0.06, 0.05), 208: (0.10, 0.05)}
    )
    residential_kw: tuple[float, float] = (3.0, 8.0)
    commercial_kw: tuple[float, float] = (15.0, 40.0)
    n_residential_profiles: int = 5
    n_commercial_profiles: int = 3
    irradiance_profile_id: str = "ghi_0"


def generate_synthetic_feeder(spec: FeederSpec) -> Feeder:
    """Build a seeded random radial feeder.

    Bus 0 is the source at the origin. ``n_buses - 1 - n208`` load buses form
    a 480 V backbone; each 208 V bus belongs to the secondary of one backbone
    bus, attached either to it or to an earlier bus of the same secondary.
    Every bus sits one segment away from its parent. Ids (and labels) follow
    a depth-first walk from the source.
    """
    if spec.n_buses < 2:
        raise FeederError("n_buses must be >= 2")
    for name in ("pct_208", "pv_penetration", "commercial_fraction"):
        value = getattr(spec, name)
        if not 0.0 <= value <= 1.0:
            raise FeederError(f"{name} must be in [0, 1], got {value}")
    lo, hi = spec.segment_length_m
    if not 0 < lo <= hi:
        raise FeederError("segment_length_m must satisfy 0 < low <= high")

    rng = np.random.default_rng(spec.seed)
    n_load = spec.n_buses - 1
    n208 = _ceil_fraction(spec.pct_208, n_load)
    n480 = n_load - n208

    # grow the tree with provisional indices: backbone first, then secondaries
    parent = [-1]
    nominal = [480]
    xy = [(0.0, 0.0)]
    heading = [0.0]
    length = [0.0]
    members: dict[int, list[int]] = {}
    for i in range(1, spec.n_buses):
        if i <= n480:
            par = int(rng.integers(0, i))
            volts = 480
        else:
            # a 208 V bus sits on the secondary of one backbone transformer
            hub = int(rng.integers(1, n480 + 1)) if n480 else 0
            group = members.setdefault(hub, [])
            par = int(rng.choice(group)) if group and rng.random() < 0.5 else hub
            group.append(i)
            volts = 208
        if nominal[par] == 480:
            # branches leave a backbone bus in any direction
            theta = float(rng.uniform(0.0, 2.0 * math.pi))
        else:
            theta = heading[par] + float(rng.uniform(-math.pi / 4, math.pi / 4))
        seg = float(rng.uniform(lo, hi))
        px, py = xy[par]
        xy.append((round(px + seg * math.cos(theta), 3), round(py + seg * math.sin(theta), 3)))
        parent.append(par)
        nominal.append(volts)
        heading.append(theta)
        length.append(seg)

    # number buses in depth-first order so neighbouring ids are electrically close
    children: list[list[int]] = [[] for _ in parent]
    for i in range(1, len(parent)):
        children[parent[i]].append(i)
    order, stack = [], [0]
    while stack:
        node = stack.pop()
        order.append(node)
        stack.extend(reversed(children[node]))
    new_id = {old: k for k, old in enumerate(order)}

    buses = [Bus(0, 0, 480, 0.0, 0.0, "source")]
    lines: list[Line] = []
    for old in order[1:]:
        k = new_id[old]
        volts = nominal[old]
        buses.append(Bus(k, k, volts, xy[old][0], xy[old][1], "load"))
        r_km, x_km = spec.impedance_ohm_per_km[volts]
        lines.append(Line(new_id[parent[old]], k, r_km * length[old] / 1000.0, x_km * length[old] / 1000.0))

    load_ids = list(range(1, spec.n_buses))
    n_pv = _ceil_fraction(spec.pv_penetration, n_load)
    n_com = min(math.floor(spec.commercial_fraction * n_load), n_load - n_pv)
    commercial = set(int(b) for b in rng.choice(load_ids, size=n_com, replace=False)) if n_com else set()

    loads = []
    for b in load_ids:
        if b in commercial:
            kw = rng.uniform(*spec.commercial_kw)
            pf = rng.uniform(0.85, 0.95)
            pid = f"com_{int(rng.integers(spec.n_commercial_profiles))}"
            cls = "commercial"
        else:
            kw = rng.uniform(*spec.residential_kw)
            pf = rng.uniform(0.92, 0.99)
            pid = f"res_{int(rng.integers(spec.n_residential_profiles))}"
            cls = "residential"
        loads.append(Load(b, round(float(kw), 3), round(float(pf), 3), cls, pid))

    residential = [b for b in load_ids if b not in commercial]
    pv_buses = sorted(int(b) for b in rng.choice(residential, size=n_pv, replace=False)) if n_pv else []
    pvs = [PVSystem(b, spec.irradiance_profile_id) for b in pv_buses]

    return Feeder(tuple(buses), tuple(lines), tuple(loads), tuple(pvs), 1.0)
