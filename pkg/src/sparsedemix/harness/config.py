"""JSON experiment configuration with field-path validation errors."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any

from ..errors import InvalidInputError
from ..measurement import Convention
from ..solvers import METHODS, SolveOptions


class ConfigError(InvalidInputError):
    """Invalid configuration; ``path`` names the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass
class ExperimentConfig:
    profile: tuple[tuple[int, int], ...] = ((4, 32), (3, 24))
    sparsity: tuple[int, ...] = (2, 1)
    q_grid: tuple[int, ...] = (192,)
    frame_kind: str = "dft"
    convention: str = "complex"
    signal_kind: str = "rank1"
    methods: tuple[str, ...] = ("l12",)
    trials: int = 20
    seed: int = 0
    sigma: float = 0.0
    success_threshold: float = 1e-4
    certify: bool = False
    solver: SolveOptions = field(default_factory=SolveOptions)
    out: str = "results"
    # moments / deconvolution demo knobs
    moment_samples: int = 10 ** 6
    impulse: bool = False

    def __post_init__(self):
        try:
            self.profile = tuple((int(k), int(n)) for k, n in self.profile)
        except (TypeError, ValueError):
            raise ConfigError("profile", "expected a list of [k, n] pairs") from None
        for idx, (k, n) in enumerate(self.profile):
            if k < 1 or n < 1:
                raise ConfigError(f"profile[{idx}]", "dimensions must be positive")
        self.sparsity = tuple(int(s) for s in self.sparsity)
        if len(self.sparsity) != len(self.profile):
            raise ConfigError("sparsity", "needs one entry per profile block")
        for idx, (s, (_, n)) in enumerate(zip(self.sparsity, self.profile)):
            if not 0 <= s <= n:
                raise ConfigError(f"sparsity[{idx}]", f"must lie in [0, {n}]")
        self.q_grid = tuple(int(q) for q in self.q_grid)
        if not self.q_grid:
            raise ConfigError("q_grid", "must not be empty")
        for idx, q in enumerate(self.q_grid):
            if q < 1:
                raise ConfigError(f"q_grid[{idx}]", "must be positive")
            if idx and q <= self.q_grid[idx - 1]:
                raise ConfigError(f"q_grid[{idx}]", "grid must be strictly increasing")
        if self.frame_kind not in ("dft", "random"):
            raise ConfigError("frame_kind", f"unknown kind {self.frame_kind!r}")
        try:
            Convention(self.convention)
        except ValueError:
            raise ConfigError("convention", f"unknown convention {self.convention!r}") from None
        if self.signal_kind not in ("rank1", "gaussian"):
            raise ConfigError("signal_kind", f"unknown kind {self.signal_kind!r}")
        self.methods = tuple(self.methods)
        for idx, m in enumerate(self.methods):
            if m not in METHODS:
                raise ConfigError(f"methods[{idx}]", f"unknown method {m!r}")
        if int(self.trials) < 1:
            raise ConfigError("trials", "must be at least 1")
        self.trials = int(self.trials)
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ConfigError("seed", "must be an unsigned 64-bit integer")
        if not self.sigma >= 0:
            raise ConfigError("sigma", "must be nonnegative")
        if not self.success_threshold > 0:
            raise ConfigError("success_threshold", "must be positive")
        if isinstance(self.solver, dict):
            known = {f.name for f in fields(SolveOptions)}
            for key in self.solver:
                if key not in known:
                    raise ConfigError(f"solver.{key}", "unknown solver option")
            try:
                self.solver = SolveOptions(**self.solver)
            except InvalidInputError as exc:
                raise ConfigError("solver", str(exc)) from None
        if int(self.moment_samples) < 10 ** 4:
            raise ConfigError("moment_samples", "must be at least 10^4")

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError("<root>", "configuration must be a JSON object")
        known = {f.name for f in fields(cls)}
        data = dict(data)
        if "q" in data and "q_grid" not in data:
            data["q_grid"] = [data.pop("q")]
        for key in data:
            if key not in known:
                raise ConfigError(key, "unknown field")
        return cls(**data)

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        try:
            raw = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError("<root>", f"invalid JSON ({exc})") from None
        return cls.from_dict(raw)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["profile"] = [list(p) for p in self.profile]
        for key in ("sparsity", "q_grid", "methods"):
            d[key] = list(d[key])
        return d
