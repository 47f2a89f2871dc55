"""Run configuration and deterministic result files."""
from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .action import PrefactorConvention
from .grid import Constants, TimeGrid, bind_constants, make_grid, random_endpoints, sample_collocation_sets
from .kernel import KernelConfig

WORKERS_ENV = "TWOTIME_WORKERS"


@dataclass
class Scenario:
    T1: float = 2.0
    T2: float = 3.0
    epsilon: float = 0.25
    hbar: float = 1.0
    m1: float = 1.0
    m2: float = 2.0
    e1e2: float = 0.0
    sigma: float = 1e-2
    coupling_prefactor: float = 0.5
    convention: str = "eq29"
    p1: list = field(default_factory=lambda: [1.0, 0.0, 0.0])
    p2: list = field(default_factory=lambda: [2.0, 0.0, 0.0])
    tol: float = 1e-10
    max_iter: int = 50
    n_trajectories: int = 2
    n_endpoint_sets: int = 8
    amplitude: float = 0.5
    noise: float = 0.1
    validate_tol: float = 1e-10
    T_sequence: list = field(default_factory=lambda: [4.0, 8.0, 16.0, 32.0])
    n_energy_endpoints: int = 10
    seed: int = 42
    out: str = "results"

    @classmethod
    def from_dict(cls, data: dict) -> "Scenario":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown scenario keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def load(cls, path) -> "Scenario":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def grid(self) -> TimeGrid:
        return make_grid(self.T1, self.T2, self.epsilon)

    def constants(self, grid: TimeGrid | None = None) -> Constants:
        return bind_constants(grid or self.grid(), self.hbar, self.m1, self.m2, self.e1e2)

    def kernel(self) -> KernelConfig:
        return KernelConfig(self.sigma, self.coupling_prefactor, self.e1e2)

    def prefactor_convention(self) -> PrefactorConvention:
        return PrefactorConvention(self.convention)

    def collocation(self, grid: TimeGrid | None = None):
        grid = grid or self.grid()
        ends = random_endpoints(self.n_endpoint_sets, seed=self.seed)
        return sample_collocation_sets(grid, ends, self.n_trajectories, seed=self.seed,
                                       amplitude=self.amplitude, noise=self.noise)


def workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, np.generic):
        return _jsonable(obj.item())
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


class ResultWriter:
    """Writes payload files that depend only on the scenario.

    The wall-clock timestamp lives solely in ``metadata.json``.
    """

    def __init__(self, out_dir, scenario: Scenario):
        self.dir = Path(out_dir)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.scenario = scenario

    @property
    def header(self) -> str:
        return "scenario " + json.dumps(self.scenario.to_dict(), sort_keys=True)

    def path(self, name) -> Path:
        return self.dir / name

    def json(self, name, payload: dict) -> Path:
        doc = {"scenario": self.scenario.to_dict(), **_jsonable(payload)}
        p = self.path(name)
        p.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")
        return p

    def table(self, name, columns, rows) -> Path:
        p = self.path(name)
        np.savetxt(p, np.asarray(rows, dtype=float).reshape(-1, len(columns)), fmt="%.17g",
                   delimiter="\t", header=self.header + "\n" + "\t".join(columns))
        return p

    def metadata(self, command: str) -> Path:
        from . import __version__
        p = self.path("metadata.json")
        p.write_text(json.dumps({
            "command": command,
            "created": datetime.now(timezone.utc).isoformat(),
            "version": __version__,
        }, sort_keys=True, indent=2) + "\n")
        return p
