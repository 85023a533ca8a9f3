"""Experiment spec files (TOML) and the label registries they refer to.

A spec looks like::

    name = "fig6"
    seed = 0
    output_dir = "esx-out/fig6"

    [cost]
    label = "paper_cost"
    h0 = 10.0

    [es]
    gamma = 0.1
    delta = 0.1

    [sim]
    x0 = "4pi"
    step = 0.005

    [[studies]]
    kind = "uniformity"
    name = "fig6"
    h0 = [10.0, 1000.0]

Numbers may be written as multiples of pi (``"2pi"``, ``"-pi"``, ``"0.5*pi"``).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from esx import cost as costs
from esx import dynamics as dyn
from esx.errors import ConfigError

STUDY_KINDS = ("closeness", "containment", "escape", "hpf_tracking", "pv", "simulate", "uniformity")

_PI_RE = re.compile(r"^\s*([+-]?(?:\d+\.?\d*|\.\d+)?)\s*\*?\s*pi\s*$")


class SpecParseError(ConfigError):
    def __init__(self, message, lineno=None):
        super().__init__(message)
        self.lineno = lineno


def number(value, fieldname: str = "value") -> float:
    """Float from a TOML number or a ``k*pi`` string."""
    if isinstance(value, bool):
        raise ConfigError(f"expected a number, got {value!r}", field=fieldname)
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        m = _PI_RE.match(value)
        if m:
            coef = m.group(1)
            if coef in ("", "+"):
                k = 1.0
            elif coef == "-":
                k = -1.0
            else:
                k = float(coef)
            return k * math.pi
        try:
            return float(value)
        except ValueError:
            pass
    raise ConfigError(f"expected a number or a multiple of pi, got {value!r}", field=fieldname)


def pv_default_cost(**kw) -> costs.CostModel:
    """Static power map of the default PV plant, as a cost label."""
    plant = dyn.default_pv_plant(**kw)
    return costs.CostModel(plant.static_map, None, "pv_default", dict(kw))


def cost_registry() -> dict:
    reg = dict(costs.builtin_costs())
    reg["pv_default"] = pv_default_cost
    reg["csv"] = lambda path: costs.load_tabulated_cost(path)
    return dict(sorted(reg.items()))


def build_cost(table: dict, base: Optional[Path] = None) -> costs.CostModel:
    table = dict(table)
    label = table.pop("label", None)
    reg = cost_registry()
    if label not in reg:
        raise ConfigError(f"unknown cost label {label!r}; known: {', '.join(reg)}", field="cost.label")
    if label == "csv":
        path = Path(table.get("path", ""))
        if base is not None and not path.is_absolute():
            path = base / path
        return reg["csv"](path)
    try:
        kwargs = {k: number(v, f"cost.{k}") for k, v in table.items()}
        return reg[label](**kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc), field="cost") from None


@dataclass
class ExperimentSpec:
    name: str
    cost: dict
    gamma: float
    delta: float
    x0: float
    horizon: Optional[float]
    step: float
    avg_step: float
    schemes: list
    studies: list
    seed: int = 0
    output_dir: str = "esx-out"
    record_every: int = 20
    ybar0: Optional[float] = None
    pv: dict = field(default_factory=dict)
    source: Optional[Path] = None
    raw: dict = field(default_factory=dict, repr=False)

    def build_cost(self, overrides: Optional[dict] = None) -> costs.CostModel:
        table = dict(self.cost)
        table.update(overrides or {})
        return build_cost(table, self.source.parent if self.source else None)

    def horizon_for(self, gamma: float) -> float:
        return self.horizon if self.horizon is not None else 60.0 / gamma


def _lineno(exc) -> Optional[int]:
    m = re.search(r"line (\d+)", str(exc))
    return int(m.group(1)) if m else None


def load_spec(path) -> ExperimentSpec:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read spec: {exc}", field="spec") from None
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        ln = _lineno(exc)
        raise SpecParseError(f"parse error in {path} at line {ln}: {exc}", lineno=ln) from None
    return parse_spec(raw, source=path)


def _get(table: dict, key: str, default: Any, prefix: str):
    v = table.get(key, default)
    if v is None:
        return None
    return number(v, f"{prefix}{key}")


def parse_spec(raw: dict, source: Optional[Path] = None) -> ExperimentSpec:
    name = raw.get("name")
    if not isinstance(name, str) or not name:
        raise ConfigError("missing spec name", field="name")
    cost_t = raw.get("cost", {"label": "paper_cost"})
    if not isinstance(cost_t, dict):
        raise ConfigError("must be a table", field="cost")
    if cost_t.get("label") not in cost_registry():
        raise ConfigError(f"unknown cost label {cost_t.get('label')!r}", field="cost.label")
    es = raw.get("es", {})
    sim = raw.get("sim", {})
    gamma = _get(es, "gamma", 0.1, "es.")
    delta = _get(es, "delta", 0.1, "es.")
    if not (gamma > 0 and delta > 0):
        raise ConfigError("gamma and delta must be positive", field="es")
    schemes = list(sim.get("schemes", ["classic"]))
    for s in schemes:
        if s not in dyn.SCHEMES:
            raise ConfigError(f"unknown scheme {s!r}", field="sim.schemes")
    horizon = _get(sim, "horizon", None, "sim.")
    step = _get(sim, "step", 1.0 / 200.0, "sim.")
    if horizon is not None and horizon < 10.0:
        raise ConfigError("horizon must cover at least 10 dither periods", field="sim.horizon")
    if not step > 0:
        raise ConfigError("step must be positive", field="sim.step")
    studies = raw.get("studies", [])
    if not isinstance(studies, list):
        raise ConfigError("must be an array of tables", field="studies")
    seen = set()
    for i, st in enumerate(studies):
        kind = st.get("kind")
        if kind not in STUDY_KINDS:
            raise ConfigError(f"unknown study kind {kind!r}", field=f"studies[{i}].kind")
        st.setdefault("name", f"{kind}{i}")
        if st["name"] in seen:
            raise ConfigError(f"duplicate study name {st['name']!r}", field=f"studies[{i}].name")
        seen.add(st["name"])
        for k, v in st.items():
            if k.endswith(("_tol", "_ratio", "_factor", "_fraction")) and isinstance(v, (int, float)) \
                    and not isinstance(v, bool) and v <= 0:
                raise ConfigError("threshold must be positive", field=f"studies[{i}].{k}")
    out = raw.get("output", {})
    return ExperimentSpec(
        name=name,
        cost=dict(cost_t),
        gamma=gamma,
        delta=delta,
        x0=_get(sim, "x0", 0.0, "sim."),
        horizon=horizon,
        step=step,
        avg_step=_get(sim, "avg_step", 0.05, "sim."),
        schemes=schemes,
        studies=[dict(s) for s in studies],
        seed=int(raw.get("seed", 0)),
        output_dir=str(raw.get("output_dir", f"esx-out/{name}")),
        record_every=int(out.get("record_every", 20)),
        ybar0=_get(sim, "ybar0", None, "sim."),
        pv=dict(raw.get("pv", {})),
        source=source,
        raw=raw,
    )
