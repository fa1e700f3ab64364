"""Household scenario: time grid, tariffs, loads, devices and limits.

Scenarios are immutable after validation and load from a versioned YAML
document (`hems-scenario/1`, schema documented in the README). Any series
field may be written as a full array, a scalar to broadcast, or a
`{csv: file, column: name}` reference to a one-row-per-interval CSV.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path

import yaml

SCENARIO_SCHEMA = "hems-scenario/1"

DEFAULT_PENALTIES = (1e-4, 2e-4, 3e-4)  # cents/kWh on pv/ess/ev exports
CASES = ("A", "B", "C", "D")


class ScenarioError(ValueError):
    """Raised for unparseable or invalid scenario documents."""


@dataclass(frozen=True)
class TimeGrid:
    T: int
    dt: float  # hours per interval


@dataclass(frozen=True)
class Tariff:
    buy: tuple[float, ...]   # cents/kWh
    sell: tuple[float, ...]  # cents/kWh


@dataclass(frozen=True)
class ApplianceSpec:
    name: str
    profile: tuple[float, ...]  # kW per interval as normally scheduled
    adt_hours: float            # acceptable delay time

    def adt_intervals(self, dt: float) -> int:
        # floor() so the delay never exceeds the stated tolerance; the tiny
        # epsilon absorbs division noise like 1.5/0.5 -> 2.9999...
        return int(math.floor(self.adt_hours / dt + 1e-9))


@dataclass(frozen=True)
class StorageSpec:
    charge_rate: float      # kW
    discharge_rate: float   # kW
    charge_eff: float       # (0, 1]
    discharge_eff: float    # (0, 1]
    soe_min: float          # kWh
    soe_max: float          # kWh
    soe_init: float         # kWh, stored energy just before the horizon


@dataclass(frozen=True)
class EVSpec:
    storage: StorageSpec
    arrival: int             # first interval of presence
    departure: int           # last interval of presence (inclusive)
    require_full_at_departure: bool = True


@dataclass(frozen=True)
class Scenario:
    grid: TimeGrid
    tariff: Tariff
    non_deferrable: tuple[float, ...]          # kW per interval
    appliances: tuple[ApplianceSpec, ...]
    ess: StorageSpec | None
    ess_end_reserve: bool                      # require end SOE >= soe_init
    ev: EVSpec | None
    pv_gen: tuple[float, ...]                  # kW per interval
    penalties: tuple[float, float, float]      # export penalties (pv, ess, ev)
    big_m: tuple[float, float]                 # import cap, export cap (kW)


# ---------------------------------------------------------------------------
# validation

def _check_series(name: str, values, T: int, nonneg: bool = True) -> tuple[float, ...]:
    if len(values) != T:
        raise ScenarioError(f"{name}: expected {T} values, got {len(values)}")
    out = []
    for i, v in enumerate(values):
        f = float(v)
        if not math.isfinite(f):
            raise ScenarioError(f"{name}[{i}]: non-finite value")
        if nonneg and f < 0:
            raise ScenarioError(f"{name}[{i}]: negative value {f}")
        out.append(f)
    return tuple(out)


def _check_storage(name: str, s: StorageSpec) -> None:
    if s.charge_rate <= 0 or s.discharge_rate <= 0:
        raise ScenarioError(f"{name}: charge/discharge rates must be positive")
    for eff, label in ((s.charge_eff, "charge_eff"), (s.discharge_eff, "discharge_eff")):
        if not (0.0 < eff <= 1.0):
            raise ScenarioError(f"{name}.{label}: must lie in (0, 1]")
    if not (0.0 <= s.soe_min <= s.soe_init <= s.soe_max):
        raise ScenarioError(
            f"{name}: need 0 <= soe_min <= soe_init <= soe_max, got "
            f"({s.soe_min}, {s.soe_init}, {s.soe_max})"
        )


def validate(sc: Scenario) -> Scenario:
    """Check every invariant; returns the scenario for chaining."""
    if sc.grid.T < 1:
        raise ScenarioError("grid.intervals: must be >= 1")
    if not (sc.grid.dt > 0):
        raise ScenarioError("grid.interval_hours: must be positive")
    T = sc.grid.T
    _check_series("tariff.buy", sc.tariff.buy, T)
    _check_series("tariff.sell", sc.tariff.sell, T)
    _check_series("non_deferrable", sc.non_deferrable, T)
    _check_series("pv_gen", sc.pv_gen, T)
    seen = set()
    for a in sc.appliances:
        if not a.name:
            raise ScenarioError("appliances: every appliance needs a name")
        if a.name in seen:
            raise ScenarioError(f"appliances: duplicate name {a.name!r}")
        seen.add(a.name)
        _check_series(f"appliances.{a.name}.profile", a.profile, T)
        if a.adt_hours < 0:
            raise ScenarioError(f"appliances.{a.name}.adt_hours: negative")
    if sc.ess is not None:
        _check_storage("ess", sc.ess)
    if sc.ev is not None:
        _check_storage("ev", sc.ev.storage)
        if not (0 <= sc.ev.arrival <= sc.ev.departure < T):
            raise ScenarioError(
                f"ev: need 0 <= arrival <= departure < {T} (availability window "
                f"must be a nonempty contiguous index range; pick a horizon "
                f"origin that avoids wrapping midnight)"
            )
    e1, e2, e3 = sc.penalties
    if not (0.0 <= e1 < e2 < e3):
        raise ScenarioError(
            "penalties: must be strictly increasing (pv_sold < ess_sold < ev_sold)"
        )
    n1, n2 = sc.big_m
    if not (n1 > 0 and n2 > 0):
        raise ScenarioError("limits: import_cap and export_cap must be positive")
    return sc


def default_big_m(
    non_deferrable: tuple[float, ...],
    appliances: tuple[ApplianceSpec, ...],
    ess: StorageSpec | None,
    ev: EVSpec | None,
    pv_gen: tuple[float, ...],
) -> tuple[float, float]:
    """Tightest safe caps: peak scheduled demand plus every charge rate on the
    import side; peak PV plus every deliverable discharge rate on export."""
    T = len(non_deferrable)
    peak_load = max(
        non_deferrable[t] + sum(a.profile[t] for a in appliances) for t in range(T)
    )
    n1 = peak_load
    n2 = max(pv_gen) if pv_gen else 0.0
    if ess is not None:
        n1 += ess.charge_rate
        n2 += ess.discharge_rate * ess.discharge_eff
    if ev is not None:
        n1 += ev.storage.charge_rate
        n2 += ev.storage.discharge_rate * ev.storage.discharge_eff
    return (max(n1, 1.0), max(n2, 1.0))


# ---------------------------------------------------------------------------
# YAML document handling

def read_series_csv(path) -> dict[str, list[float]]:
    """Read a one-row-per-interval CSV (header line) into column lists."""
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ScenarioError(f"{path}: empty CSV")
        cols: dict[str, list[float]] = {name: [] for name in reader.fieldnames}
        for row in reader:
            for name in reader.fieldnames:
                raw = row.get(name)
                if raw is None or raw == "":
                    raise ScenarioError(
                        f"{path}: line {reader.line_num}: missing value for {name!r}"
                    )
                try:
                    cols[name].append(float(raw))
                except ValueError as exc:
                    raise ScenarioError(
                        f"{path}: line {reader.line_num}: bad number {raw!r} for {name!r}"
                    ) from exc
    return cols


def _resolve_series(name: str, value, T: int, base_dir: Path | None):
    """Array, scalar broadcast, or {csv:..., column:...} reference."""
    if isinstance(value, dict):
        extra = set(value) - {"csv", "column"}
        if extra or "csv" not in value or "column" not in value:
            raise ScenarioError(f"{name}: csv reference needs exactly csv+column keys")
        path = Path(value["csv"])
        if not path.is_absolute() and base_dir is not None:
            path = base_dir / path
        cols = read_series_csv(path)
        col = value["column"]
        if col not in cols:
            raise ScenarioError(f"{name}: column {col!r} not in {path}")
        return cols[col]
    if isinstance(value, (int, float)):
        return [float(value)] * T
    if isinstance(value, list):
        return value
    raise ScenarioError(f"{name}: expected array, scalar or csv reference")


def _require_keys(name: str, mapping: dict, required: set[str], optional: set[str] = frozenset()) -> None:
    if not isinstance(mapping, dict):
        raise ScenarioError(f"{name}: expected a mapping")
    missing = required - set(mapping)
    if missing:
        raise ScenarioError(f"{name}: missing keys {sorted(missing)}")
    unknown = set(mapping) - required - optional
    if unknown:
        raise ScenarioError(f"{name}: unknown keys {sorted(unknown)}")


_STORAGE_KEYS = {
    "charge_rate",
    "discharge_rate",
    "charge_eff",
    "discharge_eff",
    "soe_min",
    "soe_max",
}


def _parse_storage(name: str, block: dict, soe_init_default=None) -> StorageSpec:
    soe_init = block.get("soe_init", soe_init_default)
    if soe_init is None:
        raise ScenarioError(f"{name}.soe_init: required")
    return StorageSpec(
        charge_rate=float(block["charge_rate"]),
        discharge_rate=float(block["discharge_rate"]),
        charge_eff=float(block["charge_eff"]),
        discharge_eff=float(block["discharge_eff"]),
        soe_min=float(block["soe_min"]),
        soe_max=float(block["soe_max"]),
        soe_init=float(soe_init),
    )


def parse_scenario(doc: dict, base_dir: Path | None = None) -> Scenario:
    """Build and validate a Scenario from a parsed document mapping."""
    if not isinstance(doc, dict):
        raise ScenarioError("document: expected a mapping at top level")
    if doc.get("schema") != SCENARIO_SCHEMA:
        raise ScenarioError(
            f"schema: expected {SCENARIO_SCHEMA!r}, got {doc.get('schema')!r}"
        )
    _require_keys(
        "document",
        doc,
        {"schema", "grid", "tariff", "non_deferrable"},
        {"appliances", "pv_gen", "ess", "ev", "penalties", "limits"},
    )
    _require_keys("grid", doc["grid"], {"intervals", "interval_hours"})
    try:
        T = int(doc["grid"]["intervals"])
        dt = float(doc["grid"]["interval_hours"])
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"grid: {exc}") from exc
    grid = TimeGrid(T, dt)

    _require_keys("tariff", doc["tariff"], {"buy", "sell"})
    buy = _resolve_series("tariff.buy", doc["tariff"]["buy"], T, base_dir)
    sell = _resolve_series("tariff.sell", doc["tariff"]["sell"], T, base_dir)
    nd = _resolve_series("non_deferrable", doc["non_deferrable"], T, base_dir)
    pv = _resolve_series("pv_gen", doc.get("pv_gen", 0.0), T, base_dir)

    appliances = []
    for i, block in enumerate(doc.get("appliances", []) or []):
        _require_keys(f"appliances[{i}]", block, {"name", "adt_hours", "profile"})
        profile = _resolve_series(
            f"appliances[{i}].profile", block["profile"], T, base_dir
        )
        appliances.append(
            ApplianceSpec(
                name=str(block["name"]),
                profile=_check_series(f"appliances[{i}].profile", profile, T),
                adt_hours=float(block["adt_hours"]),
            )
        )

    ess = None
    ess_end_reserve = True
    if doc.get("ess") is not None:
        _require_keys("ess", doc["ess"], _STORAGE_KEYS | {"soe_init"}, {"end_reserve"})
        ess = _parse_storage("ess", doc["ess"])
        ess_end_reserve = bool(doc["ess"].get("end_reserve", True))

    ev = None
    if doc.get("ev") is not None:
        _require_keys(
            "ev",
            doc["ev"],
            _STORAGE_KEYS | {"arrival", "departure"},
            {"soe_init", "require_full_at_departure"},
        )
        # Arrival state of charge defaults to 80% of capacity.
        storage = _parse_storage(
            "ev", doc["ev"], soe_init_default=0.8 * float(doc["ev"]["soe_max"])
        )
        ev = EVSpec(
            storage=storage,
            arrival=int(doc["ev"]["arrival"]),
            departure=int(doc["ev"]["departure"]),
            require_full_at_departure=bool(
                doc["ev"].get("require_full_at_departure", True)
            ),
        )

    penalties = DEFAULT_PENALTIES
    if doc.get("penalties") is not None:
        _require_keys("penalties", doc["penalties"], {"pv_sold", "ess_sold", "ev_sold"})
        penalties = (
            float(doc["penalties"]["pv_sold"]),
            float(doc["penalties"]["ess_sold"]),
            float(doc["penalties"]["ev_sold"]),
        )

    nd_t = _check_series("non_deferrable", nd, T)
    pv_t = _check_series("pv_gen", pv, T)
    auto_n1, auto_n2 = default_big_m(nd_t, tuple(appliances), ess, ev, pv_t)
    n1, n2 = auto_n1, auto_n2
    if doc.get("limits") is not None:
        _require_keys("limits", doc["limits"], set(), {"import_cap", "export_cap"})
        raw1 = doc["limits"].get("import_cap", "auto")
        raw2 = doc["limits"].get("export_cap", "auto")
        n1 = auto_n1 if raw1 == "auto" else float(raw1)
        n2 = auto_n2 if raw2 == "auto" else float(raw2)

    sc = Scenario(
        grid=grid,
        tariff=Tariff(_check_series("tariff.buy", buy, T), _check_series("tariff.sell", sell, T)),
        non_deferrable=nd_t,
        appliances=tuple(appliances),
        ess=ess,
        ess_end_reserve=ess_end_reserve,
        ev=ev,
        pv_gen=pv_t,
        penalties=penalties,
        big_m=(n1, n2),
    )
    return validate(sc)


def load_scenario(path) -> Scenario:
    """Load and validate a scenario from a YAML file."""
    path = Path(path)
    try:
        with open(path) as fh:
            doc = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise ScenarioError(f"{path}: YAML parse error: {exc}") from exc
    return parse_scenario(doc, base_dir=path.parent)


def scenario_to_mapping(sc: Scenario) -> dict:
    """Inverse of parse_scenario (series are written inline)."""
    doc: dict = {
        "schema": SCENARIO_SCHEMA,
        "grid": {"intervals": sc.grid.T, "interval_hours": sc.grid.dt},
        "tariff": {"buy": list(sc.tariff.buy), "sell": list(sc.tariff.sell)},
        "non_deferrable": list(sc.non_deferrable),
        "pv_gen": list(sc.pv_gen),
        "appliances": [
            {"name": a.name, "adt_hours": a.adt_hours, "profile": list(a.profile)}
            for a in sc.appliances
        ],
        "penalties": {
            "pv_sold": sc.penalties[0],
            "ess_sold": sc.penalties[1],
            "ev_sold": sc.penalties[2],
        },
        "limits": {"import_cap": sc.big_m[0], "export_cap": sc.big_m[1]},
    }
    if sc.ess is not None:
        doc["ess"] = {
            "charge_rate": sc.ess.charge_rate,
            "discharge_rate": sc.ess.discharge_rate,
            "charge_eff": sc.ess.charge_eff,
            "discharge_eff": sc.ess.discharge_eff,
            "soe_min": sc.ess.soe_min,
            "soe_max": sc.ess.soe_max,
            "soe_init": sc.ess.soe_init,
            "end_reserve": sc.ess_end_reserve,
        }
    if sc.ev is not None:
        s = sc.ev.storage
        doc["ev"] = {
            "charge_rate": s.charge_rate,
            "discharge_rate": s.discharge_rate,
            "charge_eff": s.charge_eff,
            "discharge_eff": s.discharge_eff,
            "soe_min": s.soe_min,
            "soe_max": s.soe_max,
            "soe_init": s.soe_init,
            "arrival": sc.ev.arrival,
            "departure": sc.ev.departure,
            "require_full_at_departure": sc.ev.require_full_at_departure,
        }
    return doc


def save_scenario(sc: Scenario, path) -> None:
    with open(path, "w") as fh:
        yaml.safe_dump(scenario_to_mapping(sc), fh, sort_keys=False)


# ---------------------------------------------------------------------------
# case synthesis

def synth_case(case: str, dsm: bool, base: Scenario) -> Scenario:
    """Derive a study case from a fully-specified scenario.

    A keeps loads only, B adds PV, C adds the ESS, D adds the EV as well.
    dsm=False zeroes every acceptable delay time.
    """
    case = case.upper()
    if case not in CASES:
        raise ScenarioError(f"case: expected one of {CASES}, got {case!r}")
    pv = base.pv_gen if case != "A" else tuple(0.0 for _ in base.pv_gen)
    ess = base.ess if case in ("C", "D") else None
    ev = base.ev if case == "D" else None
    appliances = base.appliances
    if not dsm:
        appliances = tuple(replace(a, adt_hours=0.0) for a in appliances)
    n1, n2 = default_big_m(base.non_deferrable, appliances, ess, ev, pv)
    sc = replace(
        base, pv_gen=pv, ess=ess, ev=ev, appliances=appliances, big_m=(n1, n2)
    )
    return validate(sc)
