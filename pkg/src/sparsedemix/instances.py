"""Planted recovery instances and their JSON file format.

An instance file looks like::

    {"profile": [[k_i, n_i], ...], "q": 128,
     "frame": {"kind": "dft" | "random", "seed": ...},
     "sketch_seed": ..., "convention": "complex" | "real",
     "generator": "numpy.PCG64",
     "sparsity": [s_i, ...], "signal_kind": "rank1" | "gaussian", "signal_seed": ...,
     "sigma": 0.0, "noise_seed": ...}

Everything is regenerated from the seeds; ``"embedded"`` optionally carries the
frames, sketches, planted tuple and measurements as ``{"re": [...], "im": [...]}``
arrays for replay without the generator.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import InvalidInputError
from .measurement import (GENERATOR, Convention, FrameFamily, MeasurementEnsemble,
                          forward, make_frames, sample_ensemble)
from .solvers import NoiseModel
from .tuples import MatrixTuple, SupportPattern, from_json, to_json


def complex_to_json(v) -> dict:
    v = np.asarray(v)
    return {"re": v.real.ravel().tolist(), "im": v.imag.ravel().tolist()}


def complex_from_json(d: dict, shape=None) -> np.ndarray:
    out = np.asarray(d["re"], dtype=float) + 1j * np.asarray(d.get("im", np.zeros(len(d["re"]))), dtype=float)
    return out.reshape(shape) if shape is not None else out


@dataclass
class InstanceSpec:
    profile: tuple[tuple[int, int], ...]
    q: int
    sparsity: tuple[int, ...]
    frame_kind: str = "dft"
    frame_seed: int | None = None
    sketch_seed: int = 0
    signal_seed: int = 0
    convention: str = "complex"
    signal_kind: str = "rank1"
    sigma: float = 0.0
    noise_seed: int = 0
    generator: str = GENERATOR

    def __post_init__(self):
        self.profile = tuple((int(k), int(n)) for k, n in self.profile)
        self.sparsity = tuple(int(s) for s in self.sparsity)
        if len(self.sparsity) != len(self.profile):
            raise InvalidInputError("sparsity needs one entry per block")
        for s, (k, n) in zip(self.sparsity, self.profile):
            if not 0 <= s <= n or k < 1:
                raise InvalidInputError(f"sparsity {s} invalid for block {k}x{n}")
        if self.q < 1:
            raise InvalidInputError("q must be positive")
        if self.frame_kind not in ("dft", "random"):
            raise InvalidInputError(f"unknown frame kind {self.frame_kind!r}")
        if self.signal_kind not in ("rank1", "gaussian"):
            raise InvalidInputError(f"unknown signal kind {self.signal_kind!r}")
        Convention(self.convention)
        if self.sigma < 0:
            raise InvalidInputError("sigma must be nonnegative")

    def to_json(self) -> dict:
        return {"profile": [list(p) for p in self.profile], "q": self.q,
                "frame": {"kind": self.frame_kind, "seed": self.frame_seed},
                "sketch_seed": self.sketch_seed, "convention": self.convention,
                "generator": self.generator, "sparsity": list(self.sparsity),
                "signal_kind": self.signal_kind, "signal_seed": self.signal_seed,
                "sigma": self.sigma, "noise_seed": self.noise_seed}

    @classmethod
    def from_json(cls, d: dict) -> "InstanceSpec":
        try:
            frame = d.get("frame", {})
            return cls(profile=d["profile"], q=int(d["q"]),
                       sparsity=d.get("sparsity", [0] * len(d["profile"])),
                       frame_kind=frame.get("kind", "dft"), frame_seed=frame.get("seed"),
                       sketch_seed=int(d.get("sketch_seed", 0)), signal_seed=int(d.get("signal_seed", 0)),
                       convention=d.get("convention", "complex"), signal_kind=d.get("signal_kind", "rank1"),
                       sigma=float(d.get("sigma", 0.0)), noise_seed=int(d.get("noise_seed", 0)))
        except (KeyError, TypeError) as exc:
            raise InvalidInputError(f"malformed instance: missing or invalid field {exc}") from exc


@dataclass
class PlantedInstance:
    spec: InstanceSpec
    ensemble: MeasurementEnsemble
    support: SupportPattern
    Z0: MatrixTuple
    y: np.ndarray
    noise: np.ndarray = field(default=None)

    @property
    def clean(self) -> np.ndarray:
        return self.y - self.noise


def planted_signal(profile, sparsity, rng: np.random.Generator, kind: str = "rank1"):
    """Column-sparse tuple with random supports; ``rank1`` blocks are ``f g^T``."""
    blocks, sets = [], []
    for (k, n), s in zip(profile, sparsity):
        supp = np.sort(rng.choice(n, size=s, replace=False))
        b = np.zeros((k, n), dtype=np.complex128)
        if s:
            if kind == "rank1":
                f = (rng.standard_normal(k) + 1j * rng.standard_normal(k)) / np.sqrt(2)
                g = (rng.standard_normal(s) + 1j * rng.standard_normal(s)) / np.sqrt(2)
                b[:, supp] = np.outer(f, g)
            else:
                b[:, supp] = (rng.standard_normal((k, s)) + 1j * rng.standard_normal((k, s))) / np.sqrt(2)
        blocks.append(b)
        sets.append(supp)
    return MatrixTuple(blocks), SupportPattern(sets, profile)


def build_instance(spec: InstanceSpec) -> PlantedInstance:
    ks = [k for k, _ in spec.profile]
    frames = make_frames(spec.frame_kind, spec.q, ks, spec.frame_seed)
    E = sample_ensemble(spec.profile, frames, spec.convention, spec.sketch_seed)
    Z0, S = planted_signal(spec.profile, spec.sparsity, np.random.default_rng(spec.signal_seed),
                           spec.signal_kind)
    clean = forward(E, Z0)
    noise = NoiseModel(spec.sigma).sample(spec.q, np.random.default_rng(spec.noise_seed)) \
        if spec.sigma > 0 else np.zeros(spec.q, dtype=np.complex128)
    return PlantedInstance(spec, E, S, Z0, clean + noise, noise)


def instance_to_json(inst: PlantedInstance, embed: bool = False) -> dict:
    d = inst.spec.to_json()
    d["support"] = [list(s) for s in inst.support.sets]
    if embed:
        d["embedded"] = {
            "frames": [complex_to_json(b) for b in inst.ensemble.frames.vectors],
            "sketches": [complex_to_json(a) for a in inst.ensemble.sketches],
            "signal": to_json(inst.Z0, inst.support),
            "y": complex_to_json(inst.y),
            "noise": complex_to_json(inst.noise),
        }
    return d


def instance_from_json(d: dict) -> PlantedInstance:
    spec = InstanceSpec.from_json(d)
    emb = d.get("embedded")
    if emb is None:
        inst = build_instance(spec)
    else:
        q = spec.q
        frames = FrameFamily([complex_from_json(b, (q, k)) for b, (k, _) in zip(emb["frames"], spec.profile)],
                             kind=spec.frame_kind, seed=spec.frame_seed)
        E = MeasurementEnsemble(frames, tuple(complex_from_json(a, (q, n))
                                              for a, (_, n) in zip(emb["sketches"], spec.profile)),
                                spec.convention, spec.sketch_seed)
        Z0, S = from_json(emb["signal"])
        inst = PlantedInstance(spec, E, S, Z0, complex_from_json(emb["y"]), complex_from_json(emb["noise"]))
    if "support" in d:
        declared = SupportPattern(d["support"], spec.profile)
        if declared != inst.support:
            raise InvalidInputError("declared support does not match the regenerated signal")
    return inst


def save_instance(inst: PlantedInstance, path: str | Path, embed: bool = False):
    Path(path).write_text(json.dumps(instance_to_json(inst, embed), sort_keys=True, indent=1))


def load_instance(path: str | Path) -> PlantedInstance:
    inst = instance_from_json(json.loads(Path(path).read_text()))
    inst.ensemble.frames.validate()
    return inst


def relative_error(X: MatrixTuple, Z0: MatrixTuple) -> float:
    return (X - Z0).norm_fro() / max(Z0.norm_fro(), np.finfo(float).tiny)


def make_spec(profile: Sequence, q: int, sparsity: Sequence, seed: int, **kw) -> InstanceSpec:
    """Spec whose frame/sketch/signal/noise seeds are all derived from one seed."""
    from .seeding import child_seeds
    fs, ks, ss, ns = child_seeds(seed, 4)
    return InstanceSpec(profile=profile, q=q, sparsity=sparsity, frame_seed=fs, sketch_seed=ks,
                        signal_seed=ss, noise_seed=ns, **kw)
