"""Run configuration: one schema, loadable from TOML or JSON.

Angles may be written as numbers (radians) or strings like "pi/6".  Every
random decision is driven by the explicit ``seeds`` list; there is no
ambient randomness anywhere in a run.
"""
from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

from .errors import ConfigError
from .gripper import GripperSpec
from .samplers import SamplerSpec
from .se3 import DEFAULT_OMEGA
from .storage import canonical_json, sha256_hex

try:  # Python 3.11+
    import tomllib as _toml
except ModuleNotFoundError:  # pragma: no cover
    import tomli as _toml

DEFAULT_EPS = [0.05, 0.109, 0.2]
DEFAULT_GAMMA = [0.75]
DEFAULT_ROBUST_EPS = 0.109
DEFAULT_CHECKPOINTS = [100, 1000, 10_000, 100_000]

DEFAULT_SAMPLERS = [
    {"kind": "uniform"},
    {"kind": "line_com"},
    {"kind": "approach", "alpha": "0", "beta": "0"},
    {"kind": "approach", "alpha": "0", "beta": "pi"},
    {"kind": "approach", "alpha": "pi/2", "beta": "0"},
    {"kind": "approach", "alpha": "0", "beta": "pi/2"},
    {"kind": "antipodal", "alpha": "pi/6"},
    {"kind": "antipodal", "alpha": "pi/2"},
]


def parse_angle(v) -> float:
    """Radians from a number or a 'pi'-expression string like '2pi/3'."""
    if isinstance(v, (int, float)):
        return float(v)
    s = str(v).strip().replace(" ", "")
    if not s:
        raise ConfigError("empty angle")
    try:
        return float(s)
    except ValueError:
        pass
    num, _, den = s.partition("/")
    try:
        d = float(den) if den else 1.0
        if num == "pi":
            n = math.pi
        elif num.endswith("pi"):
            n = float(num[:-2] or 1.0) * math.pi
        else:
            raise ValueError
        return n / d
    except ValueError as exc:
        raise ConfigError(f"cannot parse angle {v!r}") from exc


@dataclass(frozen=True)
class ObjectSpec:
    path: str
    object_id: str
    scale: float = 1000.0


@dataclass
class RunConfig:
    objects: list[ObjectSpec]
    gripper: GripperSpec = field(default_factory=GripperSpec)
    translation_step: float = 10.0
    rotation_step: float = 30.0
    omega: float = DEFAULT_OMEGA
    mu: float = 1.0
    samplers: list[dict] = field(default_factory=lambda: [dict(s) for s in DEFAULT_SAMPLERS])
    eps: list[float] = field(default_factory=lambda: list(DEFAULT_EPS))
    gamma: list[float] = field(default_factory=lambda: list(DEFAULT_GAMMA))
    robust_eps: float = DEFAULT_ROBUST_EPS
    checkpoints: list[int] = field(default_factory=lambda: list(DEFAULT_CHECKPOINTS))
    seeds: list[int] = field(default_factory=lambda: [0, 1, 2])
    out_dir: str = "runs"
    max_enumerated: int = 50_000_000
    max_attempts: int | None = None
    precision_denominator: str = "valid"
    robust_neighborhood: str = "valid"  # or "enumerated"

    def sampler_specs(self, seed: int) -> list[SamplerSpec]:
        out = []
        for s in self.samplers:
            out.append(
                SamplerSpec(
                    kind=s["kind"],
                    alpha=parse_angle(s.get("alpha", 0.0)),
                    beta=parse_angle(s.get("beta", 0.0)),
                    s_min=float(s.get("s_min", 0.0)),
                    seed=seed,
                )
            )
        return out

    def n_valid(self) -> int:
        return max(self.checkpoints)

    def to_dict(self) -> dict:
        from dataclasses import asdict

        return {
            "objects": [asdict(o) for o in self.objects],
            "gripper": asdict(self.gripper),
            "translation_step": self.translation_step,
            "rotation_step": self.rotation_step,
            "omega": self.omega,
            "mu": self.mu,
            "samplers": [
                {
                    "kind": s["kind"],
                    "alpha": parse_angle(s.get("alpha", 0.0)),
                    "beta": parse_angle(s.get("beta", 0.0)),
                    "s_min": float(s.get("s_min", 0.0)),
                }
                for s in self.samplers
            ],
            "eps": self.eps,
            "gamma": self.gamma,
            "robust_eps": self.robust_eps,
            "checkpoints": self.checkpoints,
            "seeds": self.seeds,
            "max_enumerated": self.max_enumerated,
            "max_attempts": self.max_attempts,
            "precision_denominator": self.precision_denominator,
            "robust_neighborhood": self.robust_neighborhood,
        }

    def config_hash(self) -> str:
        return sha256_hex(canonical_json(self.to_dict()).encode("utf-8"))[:16]

    def reference_key(self, obj: ObjectSpec) -> str:
        """Hash of everything a reference file depends on."""
        from dataclasses import asdict

        from .oracle import ORACLE_VERSION

        payload = {
            "object": asdict(obj),
            "gripper": asdict(self.gripper),
            "translation_step": self.translation_step,
            "rotation_step": self.rotation_step,
            "mu": self.mu,
            "omega": self.omega,
            "robust_eps": self.robust_eps,
            "robust_neighborhood": self.robust_neighborhood,
            "oracle_version": ORACLE_VERSION,
        }
        return sha256_hex(canonical_json(payload).encode("utf-8"))[:16]


def _as_config(raw: dict, base_dir: str) -> RunConfig:
    if "objects" not in raw or not raw["objects"]:
        raise ConfigError("config needs a non-empty 'objects' list")
    objects = []
    for o in raw["objects"]:
        if isinstance(o, str):
            o = {"path": o}
        path = o["path"]
        if not os.path.isabs(path):
            path = os.path.normpath(os.path.join(base_dir, path))
        objects.append(
            ObjectSpec(
                path=path,
                object_id=o.get("id") or os.path.splitext(os.path.basename(path))[0],
                scale=float(o.get("scale", 1000.0)),
            )
        )
    gripper_kw = {
        k: tuple(v) if isinstance(v, list) else v for k, v in raw.get("gripper", {}).items()
    }
    cfg = RunConfig(objects=objects, gripper=GripperSpec(**gripper_kw))
    for key in (
        "translation_step", "rotation_step", "omega", "mu", "robust_eps",
        "max_enumerated", "precision_denominator", "robust_neighborhood",
    ):
        if key in raw:
            setattr(cfg, key, type(getattr(cfg, key))(raw[key]))
    if "max_attempts" in raw and raw["max_attempts"] is not None:
        cfg.max_attempts = int(raw["max_attempts"])
    if "samplers" in raw:
        cfg.samplers = [dict(s) for s in raw["samplers"]]
    for key in ("eps", "gamma"):
        if key in raw:
            setattr(cfg, key, [float(x) for x in raw[key]])
    if "checkpoints" in raw:
        cfg.checkpoints = sorted(int(x) for x in raw["checkpoints"])
    if "seeds" in raw:
        cfg.seeds = [int(x) for x in raw["seeds"]]
    if "out_dir" in raw:
        cfg.out_dir = str(raw["out_dir"])
    return cfg


def load_config(path: str | os.PathLike) -> RunConfig:
    path = os.fspath(path)
    if not os.path.isfile(path):
        raise ConfigError(f"config file not found: {path}")
    ext = os.path.splitext(path)[1].lower()
    if ext == ".toml":
        with open(path, "rb") as fh:
            raw = _toml.load(fh)
    elif ext == ".json":
        with open(path) as fh:
            raw = json.load(fh)
    else:
        raise ConfigError(f"config must be .toml or .json, got {ext!r}")
    cfg = _as_config(raw, base_dir=os.path.dirname(os.path.abspath(path)))
    validate_config(cfg)
    return cfg


def validate_config(cfg: RunConfig) -> None:
    for o in cfg.objects:
        if not os.path.isfile(o.path):
            raise ConfigError(f"mesh file does not exist: {o.path}")
    ids = [o.object_id for o in cfg.objects]
    if len(set(ids)) != len(ids):
        raise ConfigError("duplicate object ids")
    if not cfg.seeds:
        raise ConfigError("seeds must be a non-empty explicit list")
    if not cfg.checkpoints or any(c <= 0 for c in cfg.checkpoints):
        raise ConfigError("checkpoints must be positive")
    if sorted(cfg.checkpoints) != cfg.checkpoints or len(set(cfg.checkpoints)) != len(cfg.checkpoints):
        raise ConfigError("checkpoints must be strictly increasing")
    if not cfg.eps or any(e <= 0 for e in cfg.eps):
        raise ConfigError("eps values must be positive")
    if any(not 0.0 <= gv <= 1.0 for gv in cfg.gamma):
        raise ConfigError("gamma values must lie in [0, 1]")
    if cfg.robust_eps <= 0:
        raise ConfigError("robust_eps must be positive")
    if cfg.precision_denominator not in ("valid", "attempts"):
        raise ConfigError("precision_denominator must be 'valid' or 'attempts'")
    if cfg.robust_neighborhood not in ("valid", "enumerated"):
        raise ConfigError("robust_neighborhood must be 'valid' or 'enumerated'")
    for s in cfg.samplers:
        SamplerSpec(
            kind=s.get("kind", ""),
            alpha=parse_angle(s.get("alpha", 0.0)),
            beta=parse_angle(s.get("beta", 0.0)),
            s_min=float(s.get("s_min", 0.0)),
        )


def derive_seed(base_seed: int, *labels: str) -> list[int]:
    """Stable per-cell seed material, independent of list ordering."""
    h = sha256_hex(("|".join(labels)).encode("utf-8"))
    return [base_seed, int(h[:8], 16), int(h[8:16], 16)]
