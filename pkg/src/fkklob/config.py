"""Run configuration: a TOML file of ``section.key`` entries.

Both ``[model]`` tables and dotted keys (``model.lam = 0.25``) are accepted;
they flatten to the same names.  Unknown keys are rejected.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import ConfigError
from .fkk import ModelParams
from .pde import FilterParams, OmegaGrid, TerminalCondition
from .sim import SimConfig
from .vwap import AliasKernel

DEFAULTS: dict[str, Any] = {
    "model.lam": 0.25,
    "model.theta_p": 0.1,
    "model.delta_p": 0.01,
    "model.delta_i": 0.1,
    "model.tick": 0.01,
    "model.ask_a": 24.5,
    "model.bid_b": 24.0,
    "filter.sigma": 1.0,
    "filter.mu": 0.0,
    "filter.horizon_t": 10.0,
    "terminal.weight_a": 0.5,
    "terminal.weight_b": 0.5,
    "terminal.theta_1": 0.13,
    "terminal.theta_2": 0.38,
    "terminal.eps": None,
    "grid.n_nodes": 401,
    "grid.n_tau_steps": 100,
    "sim.n_sessions": 100,
    "sim.session_length": 1000,
    "sim.mix_mode": "iid",
    "sim.theta_0": None,
    "sim.bin_width": None,
    "price.times": [2.0, 4.0, 6.0, 8.0, 10.0],
    "fkk.levels": 20,
    "kernel.sigma_p": 0.0,
    "kernel.sigma_w": math.inf,
    "kernel.j": 1,
    "output.dir": "out",
    "seed": 0,
}


def _flatten(data: dict, prefix: str = "") -> dict[str, Any]:
    out: dict[str, Any] = {}
    for key, val in data.items():
        name = f"{prefix}{key}"
        if isinstance(val, dict):
            out.update(_flatten(val, name + "."))
        else:
            out[name] = val
    return out


@dataclass(frozen=True)
class RunConfig:
    values: dict[str, Any] = field(default_factory=lambda: dict(DEFAULTS))

    def __post_init__(self) -> None:
        unknown = sorted(set(self.values) - set(DEFAULTS))
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        merged = dict(DEFAULTS)
        merged.update(self.values)
        object.__setattr__(self, "values", merged)
        # build every sub-config once so errors surface at load time
        try:
            self.model
            self.filter
            self.terminal
            self.grid
            self.sim
            self.kernel
            if self.n_tau_steps < 1:
                raise ConfigError("grid.n_tau_steps must be >= 1")
            if not all(t > 0 for t in self.price_times):
                raise ConfigError("price.times must be positive")
        except (ValueError, TypeError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from exc

    def __getitem__(self, key: str) -> Any:
        return self.values[key]

    def with_overrides(self, **flat: Any) -> "RunConfig":
        vals = dict(self.values)
        vals.update(flat)
        return replace(self, values=vals)

    @property
    def model(self) -> ModelParams:
        v = self.values
        return ModelParams(
            lam=float(v["model.lam"]),
            theta_p=float(v["model.theta_p"]),
            delta_p=float(v["model.delta_p"]),
            delta_i=float(v["model.delta_i"]),
            tick=float(v["model.tick"]),
            ask_a=float(v["model.ask_a"]),
            bid_b=float(v["model.bid_b"]),
        )

    @property
    def filter(self) -> FilterParams:
        v = self.values
        return FilterParams(
            lam=float(v["model.lam"]),
            sigma=float(v["filter.sigma"]),
            mu=float(v["filter.mu"]),
            horizon_t=float(v["filter.horizon_t"]),
        )

    @property
    def terminal(self) -> TerminalCondition:
        v = self.values
        eps = v["terminal.eps"]
        return TerminalCondition(
            float(v["terminal.weight_a"]),
            float(v["terminal.weight_b"]),
            float(v["terminal.theta_1"]),
            float(v["terminal.theta_2"]),
            None if eps is None else float(eps),
        )

    @property
    def grid(self) -> OmegaGrid:
        return OmegaGrid(_as_int(self.values["grid.n_nodes"], "grid.n_nodes"))

    @property
    def n_tau_steps(self) -> int:
        return _as_int(self.values["grid.n_tau_steps"], "grid.n_tau_steps")

    @property
    def sim(self) -> SimConfig:
        v = self.values
        theta_0 = v["sim.theta_0"]
        return SimConfig(
            self.model,
            n_sessions=_as_int(v["sim.n_sessions"], "sim.n_sessions"),
            session_length=_as_int(v["sim.session_length"], "sim.session_length"),
            seed=self.seed,
            mix_mode=str(v["sim.mix_mode"]),
            theta_0=None if theta_0 is None else float(theta_0),
        )

    @property
    def bin_width(self) -> float:
        w = self.values["sim.bin_width"]
        return self.model.tick if w is None else float(w)

    @property
    def kernel(self) -> AliasKernel:
        v = self.values
        return AliasKernel(float(v["kernel.sigma_p"]), float(v["kernel.sigma_w"]), _as_int(v["kernel.j"], "kernel.j"))

    @property
    def price_times(self) -> list[float]:
        times = self.values["price.times"]
        if isinstance(times, (int, float)):
            times = [times]
        return [float(t) for t in times]

    @property
    def fkk_levels(self) -> int:
        return _as_int(self.values["fkk.levels"], "fkk.levels")

    @property
    def seed(self) -> int:
        return _as_int(self.values["seed"], "seed")

    @property
    def output_dir(self) -> Path:
        return Path(self.values["output.dir"])


def _as_int(val: Any, name: str) -> int:
    if isinstance(val, bool) or int(val) != val:
        raise ConfigError(f"{name} must be an integer, got {val!r}")
    return int(val)


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return RunConfig(_flatten(data))
