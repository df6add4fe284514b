"""Flat key = value run configuration.

The format is deliberately minimal: one `key = value` per line, `#`
comments, no nesting.  Unknown keys are hard errors so typos never pass
silently.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import MissingKey, ParseError, UnknownKey


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("true", "1", "yes", "on"):
        return True
    if t in ("false", "0", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_vector(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.split(","))


def _parse_exprs(text: str) -> tuple[str, ...]:
    return tuple(part.strip() for part in text.split(";") if part.strip())


@dataclass(frozen=True)
class RunConfig:
    system: str
    alpha: float
    beta: float
    t_eval: float
    h: float = 1e-4
    n_steps: int = 7000
    seed: int = 1
    n_paths: int = 64
    q0: tuple[float, ...] = (1.0,)
    p0: tuple[float, ...] = (0.0,)
    out: str = "out"
    plot: bool = True
    eq15_literal: bool = False
    gamma: str = "cos"
    levels: int = 4
    t_end: float = 0.4
    mu: float = 0.1
    sigma: float = 0.0
    x0: float = 1.0
    rate: float = 0.0
    dim: int = 1
    hamiltonian_expr: str = ""
    metric_expr: str = ""
    gamma_expr: tuple[str, ...] = field(default_factory=tuple)

    def __post_init__(self):
        for name in ("alpha", "beta"):
            v = getattr(self, name)
            if not (0.0 < v <= 1.0):
                raise ParseError(f"{name}={v} outside (0, 1]")
        if self.t_eval <= 0.0:
            raise ParseError(f"t_eval={self.t_eval} must be positive")
        if self.h <= 0.0:
            raise ParseError(f"h={self.h} must be positive")
        if self.n_steps < 1:
            raise ParseError(f"n_steps={self.n_steps} must be >= 1")
        if self.n_paths < 1:
            raise ParseError(f"n_paths={self.n_paths} must be >= 1")
        if self.levels < 3:
            raise ParseError(f"levels={self.levels} must be >= 3")
        if self.sigma < 0.0:
            raise ParseError(f"sigma={self.sigma} must be nonnegative")
        if self.mu < 0.0:
            raise ParseError(f"mu={self.mu} must be nonnegative")
        if self.rate < 0.0:
            raise ParseError(f"rate={self.rate} must be nonnegative")
        if self.x0 <= 0.0:
            raise ParseError(f"x0={self.x0} must be positive")
        if self.gamma not in ("cos", "const"):
            raise ParseError(f"gamma={self.gamma!r} must be cos or const")


_CONVERTERS = {
    "system": str,
    "alpha": float,
    "beta": float,
    "t_eval": float,
    "h": float,
    "n_steps": int,
    "seed": int,
    "n_paths": int,
    "q0": _parse_vector,
    "p0": _parse_vector,
    "out": str,
    "plot": _parse_bool,
    "eq15_literal": _parse_bool,
    "gamma": str,
    "levels": int,
    "t_end": float,
    "mu": float,
    "sigma": float,
    "x0": float,
    "rate": float,
    "dim": int,
    "hamiltonian_expr": str,
    "metric_expr": str,
    "gamma_expr": _parse_exprs,
}

_REQUIRED = ("system", "alpha", "beta", "t_eval")


def parse_config(text: str) -> RunConfig:
    """Parse key = value lines into a validated RunConfig."""
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"line {lineno}: expected key = value, "
                             f"got {raw!r}")
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if key not in _CONVERTERS:
            raise UnknownKey(f"line {lineno}: unknown key {key!r}")
        try:
            values[key] = _CONVERTERS[key](val)
        except (ValueError, TypeError) as exc:
            raise ParseError(f"line {lineno}: bad value for {key!r}: {exc}")
    for key in _REQUIRED:
        if key not in values:
            raise MissingKey(f"missing required key {key!r}")
    return RunConfig(**values)


def config_lines(cfg: RunConfig, extra: dict | None = None) -> str:
    """Serialize a config (plus extra entries) back to key = value text."""
    parts = []
    for key in _CONVERTERS:
        v = getattr(cfg, key)
        if isinstance(v, bool):
            v = "true" if v else "false"
        elif isinstance(v, tuple):
            joiner = ";" if key == "gamma_expr" else ","
            v = joiner.join(str(x) for x in v)
        parts.append(f"{key} = {v}")
    for key, v in (extra or {}).items():
        parts.append(f"{key} = {v}")
    return "\n".join(parts) + "\n"
