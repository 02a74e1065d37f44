"""Plain-text configuration: ``section.key = value`` lines, ``#`` comments.

Grammar
-------
Every non-blank, non-comment line is ``section.key = value``.  Unknown
keys are rejected with their line number.  Values are numbers, words,
or comma-separated lists of either.

Sections and keys::

    kernel.form     = prony | powerlaw
    kernel.terms    = 0.5:1.0, 0.3:2.0    # prony amplitude:rate pairs
    kernel.delta    = 1.0                 # optional decay constant
    kernel.C        = 0.5                 # powerlaw amplitude
    kernel.alpha    = 0.5
    space.N         = 32
    space.M         = 65                  # optional, default 2N+1
    nonlinearity.type = powerlaw | sinegordon
    nonlinearity.a  = 1.0
    nonlinearity.p  = 2.0
    nonlinearity.b  = 1.0                 # sinegordon amplitude
    force.g0.profile  = e1                # or 0.5*e1 + 0.25*e3, or 0
    force.g0.waveform = sin(1*t)          # const A | A*sin(w*t+phi) | sums
    force.g1.profile  = e1
    force.g1.waveform = sin(1*t)
    force.rho       = 0.5
    force.epsilon   = 0.1
    time.dt         = 0.001
    time.horizon    = 10.0
    time.scheme     = central | semi_implicit
    time.record_every = 10
    init.u          = 0.5*e1
    init.v          = 0
    experiment.name = absorbing | attractor_size | aux_linear | averaging
    experiment.eps  = 0.2, 0.1, 0.05
    experiment.ensemble = 8
    experiment.horizon  = 80.0
    experiment.tail_window = 20.0
    experiment.margin   = auto            # or a number
    experiment.T        = 5.0             # averaging comparison span
    experiment.sigma    = 1.0             # aux-linear norm index
    experiment.seed     = 0
    experiment.bound_factor = 3.0
"""

from __future__ import annotations

import re
from pathlib import Path

import numpy as np

from .forcing import ForceTerm, Forcing, Waveform, parse_waveform
from .kernels import PowerLawExp, PronySum
from .spectral import ModalBasis, make_basis
from .state import PowerLaw, SineGordon

__all__ = [
    "ConfigError",
    "parse_config",
    "parse_config_text",
    "emit_config",
    "default_config",
    "kernel_from_config",
    "basis_from_config",
    "nonlinearity_from_config",
    "forcing_from_config",
    "parse_profile",
]


class ConfigError(ValueError):
    pass


_KNOWN_KEYS = {
    "kernel.form", "kernel.terms", "kernel.delta", "kernel.C", "kernel.alpha",
    "space.N", "space.M",
    "nonlinearity.type", "nonlinearity.a", "nonlinearity.p", "nonlinearity.b",
    "force.g0.profile", "force.g0.waveform", "force.g1.profile", "force.g1.waveform",
    "force.rho", "force.epsilon",
    "time.dt", "time.horizon", "time.scheme", "time.record_every",
    "init.u", "init.v",
    "experiment.name", "experiment.eps", "experiment.ensemble", "experiment.horizon",
    "experiment.tail_window", "experiment.margin", "experiment.T", "experiment.sigma",
    "experiment.seed", "experiment.bound_factor",
}


def parse_config_text(text: str, source: str = "<config>") -> dict[str, str]:
    """Parse config lines into a flat key -> raw-string map."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'section.key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _KNOWN_KEYS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in out:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def parse_config(path) -> dict[str, str]:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    return parse_config_text(path.read_text(encoding="utf-8"), source=str(path))


def emit_config(cfg: dict[str, str]) -> str:
    return "\n".join(f"{k} = {v}" for k, v in sorted(cfg.items())) + "\n"


def default_config() -> dict[str, str]:
    return {
        "kernel.form": "prony",
        "kernel.terms": "1.0:2.0",
        "space.N": "32",
        "nonlinearity.type": "powerlaw",
        "nonlinearity.a": "1.0",
        "nonlinearity.p": "2.0",
        "force.g0.profile": "e1",
        "force.g0.waveform": "sin(1*t)",
        "force.g1.profile": "e1",
        "force.g1.waveform": "sin(1*t)",
        "force.rho": "0.5",
        "force.epsilon": "0.1",
        "time.dt": "0.001",
        "time.horizon": "10.0",
        "time.scheme": "central",
        "time.record_every": "10",
        "init.u": "0.5*e1",
        "init.v": "0",
    }


def _get_float(cfg, key, default=None) -> float:
    if key not in cfg:
        if default is None:
            raise ConfigError(f"missing required key {key}")
        return default
    try:
        return float(cfg[key])
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {cfg[key]!r}") from None


def _get_int(cfg, key, default=None) -> int:
    v = _get_float(cfg, key, default)
    if v != int(v):
        raise ConfigError(f"{key}: expected an integer, got {v}")
    return int(v)


def kernel_from_config(cfg: dict[str, str]):
    form = cfg.get("kernel.form", "prony").lower()
    if form == "prony":
        raw = cfg.get("kernel.terms")
        if not raw:
            raise ConfigError("kernel.terms required for the prony form")
        terms = []
        for pair in raw.split(","):
            pair = pair.strip()
            m = re.match(r"^([\d.eE+-]+):([\d.eE+-]+)$", pair)
            if not m:
                raise ConfigError(f"kernel.terms: expected amplitude:rate, got {pair!r}")
            terms.append((float(m.group(1)), float(m.group(2))))
        delta = _get_float(cfg, "kernel.delta", -1.0)
        return PronySum(tuple(terms), delta=None if delta < 0 else delta)
    if form == "powerlaw":
        return PowerLawExp(
            amplitude=_get_float(cfg, "kernel.C"),
            alpha=_get_float(cfg, "kernel.alpha"),
            delta=_get_float(cfg, "kernel.delta", 1.0),
        )
    raise ConfigError(f"kernel.form: unknown form {form!r}")


def basis_from_config(cfg: dict[str, str]) -> ModalBasis:
    n = _get_int(cfg, "space.N", 32)
    m = _get_int(cfg, "space.M", -1)
    return make_basis(n, None if m < 0 else m)


def nonlinearity_from_config(cfg: dict[str, str]):
    kind = cfg.get("nonlinearity.type", "powerlaw").lower()
    if kind == "powerlaw":
        nl = PowerLaw(a=_get_float(cfg, "nonlinearity.a", 1.0),
                      p=_get_float(cfg, "nonlinearity.p", 2.0))
        if not 1 <= nl.p < 3:
            raise ConfigError(f"nonlinearity.p={nl.p} outside [1, 3)")
        return nl
    if kind == "sinegordon":
        return SineGordon(b=_get_float(cfg, "nonlinearity.b", 1.0))
    raise ConfigError(f"nonlinearity.type: unknown type {kind!r}")


_PROFILE_TERM = re.compile(
    r"^\s*(?:(?P<coef>[-+]?\d+(?:\.\d+)?(?:e[-+]?\d+)?)\s*\*\s*)?e(?P<mode>\d+)\s*$",
    re.IGNORECASE,
)


def parse_profile(text: str, basis: ModalBasis) -> np.ndarray:
    """Spatial profile grammar: ``0``, ``e1``, or sums like ``0.5*e1 + 0.25*e3``."""
    text = text.strip()
    out = basis.zeros()
    if text in ("0", "0.0", ""):
        return out
    for chunk in re.split(r"\+", text):
        m = _PROFILE_TERM.match(chunk)
        if not m:
            raise ConfigError(f"cannot parse profile term {chunk!r}")
        mode = int(m.group("mode"))
        if not 1 <= mode <= basis.n_modes:
            raise ConfigError(f"profile mode e{mode} outside basis 1..{basis.n_modes}")
        out[mode - 1] += float(m.group("coef") or 1.0)
    return out


def forcing_from_config(cfg: dict[str, str], basis: ModalBasis) -> Forcing:
    def term(prefix: str) -> ForceTerm:
        profile = parse_profile(cfg.get(f"{prefix}.profile", "0"), basis)
        wtext = cfg.get(f"{prefix}.waveform", "0")
        try:
            wave = parse_waveform(wtext) if wtext.strip() not in ("0", "") else Waveform.zero()
        except ValueError as exc:
            raise ConfigError(f"{prefix}.waveform: {exc}") from None
        return ForceTerm(profile, wave)

    return Forcing(
        g0=term("force.g0"),
        g1=term("force.g1"),
        rho=_get_float(cfg, "force.rho", 0.0),
        eps=_get_float(cfg, "force.epsilon", 0.0),
    )
