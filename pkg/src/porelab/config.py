"""Flat key=value configuration shared by the command-line tools.

A config file holds one ``key = value`` pair per line (``#`` comments and
blank lines allowed). Unknown keys are rejected. Command-line flags always
win over file values.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path

from .errors import ParameterError
from .lbm import LbmParams
from .losses import LossWeights


@dataclass
class Config:
    # loss weights
    alpha: float = 5.0
    beta: float = 1.0
    gamma: float = 0.1
    delta: float = 0.01
    # solver
    tau: float = 1.0
    g_x: float = 1e-6
    g_y: float = 0.0
    rho0: float = 1.0
    tol: float = 1e-8
    check_interval: int = 100
    max_iters: int = 1_000_000
    # generators
    size: int = 256
    porosity: float = 0.85
    porosity_min: float = 0.70
    porosity_max: float = 0.95
    kind: str = "trig"
    p_circle: float = 0.5
    obstacle_min: float = 3.0
    obstacle_max: float = 8.0
    wall_thickness: int = 2
    central: bool = False
    # experiment control
    seed: int = 0
    count: int = 10
    noise: float = 0.1
    jobs: int = 1
    bins: int = 20
    level_low: float = 0.05
    level_high: float = 0.95

    def lbm_params(self) -> LbmParams:
        return LbmParams(
            tau=self.tau, gravity=(self.g_x, self.g_y), rho0=self.rho0,
            tol=self.tol, check_interval=self.check_interval,
            max_iters=self.max_iters,
        )

    def loss_weights(self) -> LossWeights:
        return LossWeights(alpha=self.alpha, beta=self.beta,
                           gamma=self.gamma, delta=self.delta)

    @classmethod
    def from_file(cls, path) -> "Config":
        config = cls()
        known = {f.name: f.type for f in fields(cls)}
        text = Path(path).read_text(encoding="utf-8")
        for lineno, line in enumerate(text.splitlines(), start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if "=" not in stripped:
                raise ParameterError(f"{path}:{lineno}: expected key = value")
            key, _, raw = stripped.partition("=")
            key = key.strip()
            raw = raw.strip()
            if key not in known:
                raise ParameterError(f"{path}:{lineno}: unknown config key {key!r}")
            setattr(config, key, _coerce(key, raw, getattr(config, key)))
        return config

    def to_file(self, path) -> None:
        lines = [f"{f.name} = {getattr(self, f.name)}" for f in fields(self)]
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _coerce(key: str, raw: str, default):
    kind = type(default)
    try:
        if kind is bool:
            if raw.lower() in ("true", "1", "yes"):
                return True
            if raw.lower() in ("false", "0", "no"):
                return False
            raise ValueError(raw)
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        return raw
    except ValueError as err:
        raise ParameterError(f"config key {key!r}: cannot parse {raw!r}") from err
