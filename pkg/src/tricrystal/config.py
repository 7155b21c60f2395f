"""Flat key = value run configuration.

Lines are ``key = value``; ``#`` starts a comment.  Unknown keys are
rejected and every validation error names the offending key.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional

from .graph import MIN_POINTS, YGraphSpec
from .profiles import antikink_threshold, kink_threshold

COMMANDS = ("profile", "spectrum", "evolve", "instability", "sweep")
FAMILIES = ("kink", "antikink", "free")
SEEDS = ("eigen", "pulse", "kernel", "none")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    command: str
    family: str
    lam: Optional[float]
    speeds: tuple[float, float, float] = (1.0, 1.0, 1.0)
    L: float = 40.0
    n: int = 4001
    k: int = 8
    kernel_tol: Optional[float] = None
    restricted: bool = False
    dt: Optional[float] = None
    t_end: Optional[float] = None
    record_every: int = 0
    snapshot_stride: int = 10
    eps: float = 1e-6
    seed: str = "eigen"
    pulse_amplitude: float = 0.05
    pulse_center: float = 10.0
    pulse_width: float = 1.0
    vertex: str = "weak"
    backend: Optional[str] = None
    lambdas: tuple[float, ...] = ()
    task: str = "spectrum"
    out: str = "out"
    plot: bool = False
    jobs: int = 1

    @property
    def spec(self) -> YGraphSpec:
        return YGraphSpec(self.speeds, self.lam)

    def lambda_values(self) -> tuple[float, ...]:
        return self.lambdas if self.command == "sweep" else (self.lam,)

    def echo(self) -> dict:
        """Plain-type dict of every field, in declaration order."""
        d = asdict(self)
        d["speeds"] = list(self.speeds)
        d["lambdas"] = list(self.lambdas)
        return d


def _float(key, s):
    try:
        v = float(s)
    except ValueError:
        raise ConfigError(f"{key} must be a real number, got {s!r}") from None
    if not math.isfinite(v):
        raise ConfigError(f"{key} must be finite, got {s!r}")
    return v


def _int(key, s):
    try:
        return int(s)
    except ValueError:
        raise ConfigError(f"{key} must be an integer, got {s!r}") from None


def _bool(key, s):
    t = s.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{key} must be true or false, got {s!r}")


def _floats(key, s):
    return tuple(_float(key, t) for t in s.split(",") if t.strip())


def _choice(options):
    def conv(key, s):
        if s not in options:
            raise ConfigError(f"{key} must be one of {', '.join(options)}; got {s!r}")
        return s
    return conv


def _str(key, s):
    return s


# key in the file -> (RunConfig field, converter)
KEYS = {
    "command": ("command", _choice(COMMANDS)),
    "family": ("family", _choice(FAMILIES)),
    "lambda": ("lam", _float),
    "c": ("speeds", _floats),
    "L": ("L", _float),
    "n": ("n", _int),
    "k": ("k", _int),
    "kernel_tol": ("kernel_tol", _float),
    "restricted": ("restricted", _bool),
    "dt": ("dt", _float),
    "t_end": ("t_end", _float),
    "record_every": ("record_every", _int),
    "snapshot_stride": ("snapshot_stride", _int),
    "eps": ("eps", _float),
    "seed": ("seed", _choice(SEEDS)),
    "pulse_amplitude": ("pulse_amplitude", _float),
    "pulse_center": ("pulse_center", _float),
    "pulse_width": ("pulse_width", _float),
    "vertex": ("vertex", _choice(("weak", "projection"))),
    "backend": ("backend", _choice(("numba", "numpy"))),
    "lambdas": ("lambdas", _floats),
    "task": ("task", _choice(("spectrum", "instability"))),
    "out": ("out", _str),
    "plot": ("plot", _bool),
    "jobs": ("jobs", _int),
}


def parse_pairs(text: str) -> dict:
    """Raw key -> string mapping; rejects malformed lines and unknown or repeated keys."""
    pairs = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value, got {raw.strip()!r}")
        key, val = (t.strip() for t in line.split("=", 1))
        if key not in KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}; valid keys: {', '.join(KEYS)}")
        if key in pairs:
            raise ConfigError(f"line {lineno}: key {key!r} given twice")
        pairs[key] = val
    return pairs


def required_keys(pairs: dict) -> list[str]:
    req = ["command", "family"]
    req.append("lambdas" if pairs.get("command") == "sweep" else "lambda")
    return req


def from_pairs(pairs: dict) -> RunConfig:
    missing = [k for k in required_keys(pairs) if k not in pairs]
    if missing:
        raise ConfigError(f"missing required keys: {', '.join(missing)}")
    kw = {}
    for key, val in pairs.items():
        name, conv = KEYS[key]
        kw[name] = conv(key, val)
    kw.setdefault("lam", None)
    if kw["command"] == "sweep" and kw.get("lam") is None:
        kw["lam"] = kw["lambdas"][0] if kw.get("lambdas") else None
    cfg = RunConfig(**kw)
    validate(cfg)
    return cfg


def parse_config(text: str) -> RunConfig:
    return from_pairs(parse_pairs(text))


def _check_lambda(cfg: RunConfig, lam: float, key: str):
    s = sum(cfg.speeds)
    if cfg.family == "kink" and not lam < -s:
        raise ConfigError(
            f"{key} must be < -(c1+c2+c3) for kink; got {lam:g}, valid range (-inf, {-s:g})"
        )
    if cfg.family == "free" and lam == 0.0:
        raise ConfigError(f"{key} must be nonzero for the free operator")


def validate(cfg: RunConfig):
    if len(cfg.speeds) != 3 or not all(x > 0 for x in cfg.speeds):
        raise ConfigError(f"c must be three positive speeds, got {cfg.speeds}")
    if not cfg.L > 0:
        raise ConfigError(f"L must be > 0, got {cfg.L:g}")
    if cfg.n < MIN_POINTS:
        raise ConfigError(f"n must be an integer >= {MIN_POINTS}, got {cfg.n}")
    if cfg.k < 1:
        raise ConfigError(f"k must be >= 1, got {cfg.k}")
    if cfg.kernel_tol is not None and not cfg.kernel_tol > 0:
        raise ConfigError(f"kernel_tol must be > 0, got {cfg.kernel_tol:g}")
    if cfg.restricted and len(set(cfg.speeds)) != 1:
        raise ConfigError("restricted must be false unless c1 = c2 = c3")
    if cfg.dt is not None and not cfg.dt > 0:
        raise ConfigError(f"dt must be > 0, got {cfg.dt:g}")
    if cfg.t_end is not None and not cfg.t_end > 0:
        raise ConfigError(f"t_end must be > 0, got {cfg.t_end:g}")
    if cfg.record_every < 0:
        raise ConfigError(f"record_every must be >= 0 (0 picks a default), got {cfg.record_every}")
    if cfg.snapshot_stride < 1:
        raise ConfigError(f"snapshot_stride must be >= 1, got {cfg.snapshot_stride}")
    if not 1e-7 <= cfg.eps <= 1e-4:
        raise ConfigError(f"eps must lie in [1e-7, 1e-4], got {cfg.eps:g}")
    if not cfg.pulse_width > 0:
        raise ConfigError(f"pulse_width must be > 0, got {cfg.pulse_width:g}")
    if cfg.jobs < 1:
        raise ConfigError(f"jobs must be >= 1, got {cfg.jobs}")
    if cfg.family == "free" and cfg.command in ("profile", "evolve", "instability"):
        raise ConfigError(f"family must be kink or antikink for command {cfg.command}")
    if cfg.command == "sweep":
        if not cfg.lambdas:
            raise ConfigError("lambdas must list at least one value for sweep")
        if cfg.family == "free" and cfg.task == "instability":
            raise ConfigError("task must be spectrum when family is free")
        for lam in cfg.lambdas:
            _check_lambda(cfg, lam, "lambdas")
    else:
        _check_lambda(cfg, cfg.lam, "lambda")
    if cfg.seed == "kernel":
        spec = cfg.spec
        thr = kink_threshold(spec) if cfg.family == "kink" else antikink_threshold(spec)
        if abs(cfg.lam - thr) > 1e-12:
            raise ConfigError(f"seed=kernel needs lambda at the threshold {thr:.17g}; got {cfg.lam:g}")
