"""Run configuration: a flat ``key = value`` text file.

Blank lines and ``#`` comments are ignored.  Recognized keys::

    proposals.n  proposals.sigma_trans  proposals.sigma_rot
    chain.iterations  chain.seed
    geometry.contact_eps  geometry.stable_angle_tol  geometry.sample_density
    noise.sigma_x  noise.sigma_y
    inference.mode  inference.cap  inference.sweeps  inference.burn_in  inference.hard_cap_weight
    thresholds.lo  thresholds.hi
    prior.mode
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

from .errors import ParseError, UsageError
from .geometry import GeometryParams
from .knowledge.inference import DEFAULT_BURN_IN, DEFAULT_HARD_CAP_WEIGHT, DEFAULT_SWEEPS, EXACT_ATOM_CAP
from .sampler import ProposalParams
from .sensing import NoiseParams


@dataclass(frozen=True)
class RunConfig:
    proposals: ProposalParams = field(default_factory=ProposalParams)
    iterations: int = 15
    seed: int = 0
    geometry: GeometryParams = field(default_factory=GeometryParams)
    noise: NoiseParams = field(default_factory=NoiseParams)
    inference_mode: str = "auto"
    cap: int = EXACT_ATOM_CAP
    sweeps: int = DEFAULT_SWEEPS
    burn_in: int = DEFAULT_BURN_IN
    hard_cap_weight: float = DEFAULT_HARD_CAP_WEIGHT
    lo: float = 0.4
    hi: float = 0.6
    prior_mode: str = "marginal"

    def __post_init__(self):
        if not self.lo < self.hi:
            raise UsageError("thresholds.lo must be below thresholds.hi")
        if self.inference_mode not in ("auto", "exact", "gibbs"):
            raise UsageError(f"inference.mode must be auto, exact or gibbs, got {self.inference_mode!r}")
        if self.prior_mode not in ("marginal", "map"):
            raise UsageError(f"prior.mode must be marginal or map, got {self.prior_mode!r}")
        if self.iterations < 0:
            raise UsageError("chain.iterations must be non-negative")


# key -> (group, attribute, type); group None addresses RunConfig itself
_KEYS = {
    "proposals.n": ("proposals", "n", int),
    "proposals.sigma_trans": ("proposals", "sigma_trans", float),
    "proposals.sigma_rot": ("proposals", "sigma_rot", float),
    "chain.iterations": (None, "iterations", int),
    "chain.seed": (None, "seed", int),
    "geometry.contact_eps": ("geometry", "contact_eps", float),
    "geometry.stable_angle_tol": ("geometry", "stable_angle_tol", float),
    "geometry.sample_density": ("geometry", "sample_density", float),
    "noise.sigma_x": ("noise", "sigma_x", float),
    "noise.sigma_y": ("noise", "sigma_y", float),
    "inference.mode": (None, "inference_mode", str),
    "inference.cap": (None, "cap", int),
    "inference.sweeps": (None, "sweeps", int),
    "inference.burn_in": (None, "burn_in", int),
    "inference.hard_cap_weight": (None, "hard_cap_weight", float),
    "thresholds.lo": (None, "lo", float),
    "thresholds.hi": (None, "hi", float),
    "prior.mode": (None, "prior_mode", str),
}


def parse_config(text: str, base: RunConfig | None = None, source=None) -> RunConfig:
    values: dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"expected key = value, got {line!r}", line=lineno, source=source)
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _KEYS:
            raise ParseError(f"unknown config key {key!r}", line=lineno, source=source)
        try:
            values[key] = _KEYS[key][2](value)
        except ValueError:
            raise ParseError(f"bad value {value!r} for {key}", line=lineno, source=source) from None
    try:
        return apply_overrides(base or RunConfig(), values)
    except ValueError as exc:
        raise UsageError(f"invalid configuration: {exc}") from None


def apply_overrides(cfg: RunConfig, values: dict) -> RunConfig:
    top, groups = {}, {}
    for key, value in values.items():
        group, attr, _ = _KEYS[key]
        if group is None:
            top[attr] = value
        else:
            groups.setdefault(group, {})[attr] = value
    for group, attrs in groups.items():
        top[group] = replace(getattr(cfg, group), **attrs)
    return replace(cfg, **top)


def load_config(path, base: RunConfig | None = None) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), base, source=str(path))


def config_to_text(cfg: RunConfig) -> str:
    lines = []
    for key, (group, attr, _) in _KEYS.items():
        holder = cfg if group is None else getattr(cfg, group)
        lines.append(f"{key} = {getattr(holder, attr)}")
    return "\n".join(lines) + "\n"


__all__ = ["RunConfig", "parse_config", "load_config", "apply_overrides", "config_to_text"]
