"""Oscillating external forces, translation-bounded norms, and
antiderivative bounds.

The force is g0(t) + eps**(-rho) * g1(t/eps): a slow part plus a fast
part whose amplitude blows up like eps**(-rho).  Each part is a spatial
profile times a scalar waveform built from constant / sine / cosine
atoms.  Keeping waveforms symbolic lets every time integral needed by
the windowed norms be evaluated in closed form, so the numeric sups are
limited only by the window-scan resolution, not by quadrature error.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize

__all__ = [
    "Waveform",
    "ForceTerm",
    "Forcing",
    "evaluate",
    "tb_norm",
    "tb_bound",
    "AntiderivativeBound",
    "antiderivative_bound",
    "smoothness_index",
    "parse_waveform",
]

_SCAN_FRACTION = 50  # window-scan steps per shortest waveform period


@dataclass(frozen=True)
class _Atom:
    kind: str          # "const" | "sin" | "cos"
    amplitude: float = 1.0
    frequency: float = 0.0
    phase: float = 0.0


@dataclass(frozen=True)
class Waveform:
    """Finite sum of constant, sine, and cosine atoms."""

    atoms: tuple[_Atom, ...] = ()

    @staticmethod
    def constant(value: float = 1.0) -> "Waveform":
        return Waveform((_Atom("const", value),))

    @staticmethod
    def sin(frequency: float, phase: float = 0.0, amplitude: float = 1.0) -> "Waveform":
        if frequency <= 0:
            raise ValueError("oscillatory atoms need frequency > 0")
        return Waveform((_Atom("sin", amplitude, frequency, phase),))

    @staticmethod
    def cos(frequency: float, phase: float = 0.0, amplitude: float = 1.0) -> "Waveform":
        if frequency <= 0:
            raise ValueError("oscillatory atoms need frequency > 0")
        return Waveform((_Atom("cos", amplitude, frequency, phase),))

    @staticmethod
    def zero() -> "Waveform":
        return Waveform(())

    def __add__(self, other: "Waveform") -> "Waveform":
        return Waveform(self.atoms + other.atoms)

    def scaled(self, factor: float) -> "Waveform":
        return Waveform(
            tuple(
                _Atom(a.kind, factor * a.amplitude, a.frequency, a.phase)
                for a in self.atoms
            )
        )

    def shifted(self, offset: float) -> "Waveform":
        """Time translate w(. + offset)."""
        out = []
        for a in self.atoms:
            if a.kind == "const":
                out.append(a)
            else:
                out.append(_Atom(a.kind, a.amplitude, a.frequency, a.phase + a.frequency * offset))
        return Waveform(tuple(out))

    def mean(self) -> float:
        return sum(a.amplitude for a in self.atoms if a.kind == "const")

    def shortest_period(self) -> float | None:
        freqs = [a.frequency for a in self.atoms if a.kind != "const"]
        return 2 * math.pi / max(freqs) if freqs else None

    def value(self, t):
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        for a in self.atoms:
            if a.kind == "const":
                out = out + a.amplitude
            elif a.kind == "sin":
                out = out + a.amplitude * np.sin(a.frequency * t + a.phase)
            else:
                out = out + a.amplitude * np.cos(a.frequency * t + a.phase)
        return out

    def value_scalar(self, t: float) -> float:
        out = 0.0
        for a in self.atoms:
            if a.kind == "const":
                out += a.amplitude
            elif a.kind == "sin":
                out += a.amplitude * math.sin(a.frequency * t + a.phase)
            else:
                out += a.amplitude * math.cos(a.frequency * t + a.phase)
        return out

    def antiderivative(self, t):
        """Integral from 0 to t, exact."""
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        for a in self.atoms:
            if a.kind == "const":
                out = out + a.amplitude * t
            elif a.kind == "sin":
                out = out - a.amplitude / a.frequency * (
                    np.cos(a.frequency * t + a.phase) - math.cos(a.phase)
                )
            else:
                out = out + a.amplitude / a.frequency * (
                    np.sin(a.frequency * t + a.phase) - math.sin(a.phase)
                )
        return out

    def _cos_form(self) -> list[tuple[float, float, float]]:
        """Atoms rewritten as A*cos(w t + psi), constants as w = 0."""
        out = []
        for a in self.atoms:
            if a.kind == "const":
                out.append((a.amplitude, 0.0, 0.0))
            elif a.kind == "cos":
                out.append((a.amplitude, a.frequency, a.phase))
            else:
                out.append((a.amplitude, a.frequency, a.phase - 0.5 * math.pi))
        return out

    def square_integral(self, a: float, b: float) -> float:
        """Exact integral of w(t)**2 over (a, b)."""
        atoms = self._cos_form()
        total = 0.0
        for amp1, w1, p1 in atoms:
            for amp2, w2, p2 in atoms:
                c = 0.5 * amp1 * amp2
                total += c * _cos_integral(w1 - w2, p1 - p2, a, b)
                total += c * _cos_integral(w1 + w2, p1 + p2, a, b)
        return total


def _cos_integral(w: float, psi: float, a: float, b: float) -> float:
    if abs(w) < 1e-14:
        return math.cos(psi) * (b - a)
    return (math.sin(w * b + psi) - math.sin(w * a + psi)) / w


@dataclass(frozen=True)
class ForceTerm:
    """Separable force: spatial profile (modal coefficients) times waveform."""

    profile: np.ndarray
    waveform: Waveform

    def value(self, t: float) -> np.ndarray:
        return self.profile * self.waveform.value_scalar(t)

    def shifted(self, offset: float) -> "ForceTerm":
        return ForceTerm(self.profile, self.waveform.shifted(offset))


@dataclass(frozen=True)
class Forcing:
    """g0(t) + eps**(-rho) * g1(t/eps); eps = 0 uses g0 alone."""

    g0: ForceTerm
    g1: ForceTerm
    rho: float = 0.0
    eps: float = 0.0

    def __post_init__(self):
        if not 0 <= self.rho <= 1:
            raise ValueError(f"rho={self.rho} outside [0, 1]")
        if not 0 <= self.eps <= 1:
            raise ValueError(f"eps={self.eps} outside [0, 1]")

    def shifted(self, offset: float) -> "Forcing":
        """Time translate of the combined force by ``offset``."""
        g1_shift = offset / self.eps if self.eps > 0 else 0.0
        return Forcing(self.g0.shifted(offset), self.g1.shifted(g1_shift), self.rho, self.eps)


def evaluate(forcing: Forcing, t: float) -> np.ndarray:
    """Modal coefficients of the combined force at time t."""
    out = forcing.g0.value(t)
    if forcing.eps > 0:
        out = out + forcing.eps ** (-forcing.rho) * forcing.g1.value(t / forcing.eps)
    return out


def tb_norm(term: ForceTerm, horizon: float = 50.0) -> float:
    """Squared translation-bounded norm: sup_t of the unit-window integral
    of ||g(y)||**2.

    Single sine/cosine atoms use the closed form; general waveforms scan
    window starts densely over the horizon and refine the best one.
    """
    psq = float(term.profile @ term.profile)
    atoms = term.waveform.atoms
    if not atoms:
        return 0.0
    if len(atoms) == 1 and atoms[0].kind == "const":
        return psq * atoms[0].amplitude ** 2
    if len(atoms) == 1:
        a = atoms[0]
        w = a.frequency
        # window integral is 1/2 - cos(w*(2t+1) + 2*psi) * sin(w) / (2w)
        return psq * a.amplitude**2 * (0.5 + abs(math.sin(w)) / (2 * w))
    return psq * _sup_window_square(term.waveform, horizon)


def _sup_window_square(wave: Waveform, horizon: float) -> float:
    period = wave.shortest_period()
    step = (period / _SCAN_FRACTION) if period else 0.1
    starts = np.arange(0.0, max(horizon - 1.0, step), step)

    def window(t: float) -> float:
        return wave.square_integral(t, t + 1.0)

    vals = np.array([window(t) for t in starts])
    best = int(np.argmax(vals))
    lo = starts[max(best - 1, 0)]
    hi = starts[min(best + 1, len(starts) - 1)]
    if hi > lo:
        res = optimize.minimize_scalar(lambda t: -window(t), bounds=(lo, hi), method="bounded")
        return max(float(vals[best]), float(-res.fun))
    return float(vals[best])


def tb_bound(m0: float, m1: float, rho: float, eps: float) -> float:
    """Bound on the squared tb norm of the combined force.

    2*M0 + 4*M1*eps**(-2*rho) for eps > 0; M0 for eps = 0.
    """
    if m0 < 0 or m1 < 0:
        raise ValueError("tb norms must be nonnegative")
    if eps == 0:
        return m0
    return 2.0 * m0 + 4.0 * m1 * eps ** (-2.0 * rho)


def tb_norm_forcing(forcing: Forcing, horizon: float = 50.0) -> float:
    """Numeric squared tb norm of the combined force g0 + eps^-rho g1(./eps)."""
    amp = forcing.eps ** (-forcing.rho) if forcing.eps > 0 else 0.0

    def sq_norm(t):
        g = forcing.g0.profile * forcing.g0.waveform.value(t)
        if forcing.eps > 0:
            g = g + amp * forcing.g1.profile * forcing.g1.waveform.value(t / forcing.eps)
        return np.sum(g * g, axis=-1)

    periods = [p for p in (forcing.g0.waveform.shortest_period(),) if p]
    if forcing.eps > 0 and forcing.g1.waveform.shortest_period():
        periods.append(forcing.g1.waveform.shortest_period() * forcing.eps)
    step = min(periods) / 400 if periods else 1e-3
    ts = np.arange(0.0, horizon, step)
    g = forcing.g0.profile[None, :] * forcing.g0.waveform.value(ts)[:, None]
    if forcing.eps > 0:
        g = g + amp * forcing.g1.profile[None, :] * forcing.g1.waveform.value(ts / forcing.eps)[:, None]
    sq = np.sum(g * g, axis=1)
    # cumulative trapezoid, then sliding unit windows
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (sq[1:] + sq[:-1]) * step)])
    span = int(round(1.0 / step))
    if span >= len(cum):
        raise ValueError("horizon shorter than one unit window")
    windows = cum[span:] - cum[: len(cum) - span]
    return float(windows.max())


@dataclass(frozen=True)
class AntiderivativeBound:
    """Result of the windowed sup over the force antiderivative."""

    finite: bool
    ell_sq: float
    linear_growth: float  # fitted growth per unit time of the windowed sup


def antiderivative_bound(
    term: ForceTerm,
    eigenvalues: np.ndarray,
    sigma: float,
    horizon: float = 60.0,
) -> AntiderivativeBound:
    """Numeric sup over t >= tau of ||K(t,tau)||_{sigma-1}^2 +
    unit-window integral of ||K(.,tau)||_sigma^2, K the antiderivative.

    Nonzero-mean waveforms make K grow linearly; that is reported via
    ``finite=False`` with the measured growth rate, not an exception.
    The scan covers a finite horizon, so for non-periodic waveforms the
    value is a lower estimate of the true sup.
    """
    lam = np.asarray(eigenvalues, dtype=float)
    p_lo = float(np.sum(lam ** (sigma - 1) * term.profile**2))
    p_hi = float(np.sum(lam**sigma * term.profile**2))
    wave = term.waveform
    period = wave.shortest_period()
    step = (period / _SCAN_FRACTION) if period else 0.25

    ts = np.arange(0.0, horizon - 1.0, step)
    w_t = wave.antiderivative(ts)
    s1 = np.array([_antider_integral(wave, t, t + 1.0) for t in ts])
    s2 = np.array([_antider_square_integral(wave, t, t + 1.0) for t in ts])

    sup_val = 0.0
    for i in range(len(ts)):
        d = w_t[i:] - w_t[i]
        vals = p_lo * d * d + p_hi * (s2[i:] - 2.0 * w_t[i] * s1[i:] + w_t[i] ** 2)
        sup_val = max(sup_val, float(vals.max()))

    # divergence probe: running sup of (W(t) - W(0))**2 over the scan
    run = np.maximum.accumulate((w_t - w_t[0]) ** 2)
    half = len(run) // 2
    a_half, b_half = float(run[half - 1]), float(run[-1])
    grow = (b_half - a_half) / max(ts[-1] - ts[half - 1], 1e-9)
    finite = not (b_half > 2.0 * a_half + 1e-9 and grow > 1e-6)
    return AntiderivativeBound(finite=finite, ell_sq=sup_val, linear_growth=max(grow, 0.0))


def _antider_integral(wave: Waveform, a: float, b: float) -> float:
    """Exact integral of the antiderivative W over (a, b)."""
    total = 0.0
    for at in wave.atoms:
        if at.kind == "const":
            total += 0.5 * at.amplitude * (b * b - a * a)
        elif at.kind == "sin":
            w, p, amp = at.frequency, at.phase, at.amplitude
            # W = -(cos(wt+p) - cos p)/w * amp
            total += amp / w * (
                math.cos(p) * (b - a)
                - (math.sin(w * b + p) - math.sin(w * a + p)) / w
            )
        else:
            w, p, amp = at.frequency, at.phase, at.amplitude
            # W = (sin(wt+p) - sin p)/w * amp
            total += amp / w * (
                -(math.cos(w * b + p) - math.cos(w * a + p)) / w
                - math.sin(p) * (b - a)
            )
    return total


def _antider_square_integral(wave: Waveform, a: float, b: float) -> float:
    """Exact integral of W**2 over (a, b) for zero-mean waveforms;
    falls back to fine Simpson quadrature when a constant atom makes W
    non-periodic."""
    if abs(wave.mean()) < 1e-14:
        atoms = []
        const = 0.0
        for at in wave.atoms:
            if at.kind == "const":
                continue
            w, p, amp = at.frequency, at.phase, at.amplitude
            if at.kind == "sin":
                # W-part: -amp/w * cos(wt+p), plus constant amp/w cos p
                atoms.append((-amp / w, w, p))
                const += amp / w * math.cos(p)
            else:
                # W-part: amp/w * sin(wt+p) = amp/w cos(wt+p-pi/2), minus const
                atoms.append((amp / w, w, p - 0.5 * math.pi))
                const -= amp / w * math.sin(p)
        atoms.append((const, 0.0, 0.0))
        total = 0.0
        for amp1, w1, p1 in atoms:
            for amp2, w2, p2 in atoms:
                c = 0.5 * amp1 * amp2
                total += c * _cos_integral(w1 - w2, p1 - p2, a, b)
                total += c * _cos_integral(w1 + w2, p1 + p2, a, b)
        return total
    xs = np.linspace(a, b, 513)
    ys = wave.antiderivative(xs) ** 2
    return float(integrate.simpson(ys, x=xs))


def smoothness_index(p: float) -> float:
    """Sobolev index the forcing antiderivative must carry: 1 for p <= 2,
    3(p-1)/(p+1) above."""
    if not 1 <= p < 3:
        raise ValueError(f"growth order p={p} outside [1, 3)")
    if p <= 2:
        return 1.0
    return 3.0 * (p - 1.0) / (p + 1.0)


_WAVE_TERM = re.compile(
    r"^\s*(?:(?P<coef>[-+]?\d+(?:\.\d+)?(?:e[-+]?\d+)?)\s*\*\s*)?"
    r"(?P<fn>sin|cos)\(\s*(?P<freq>\d+(?:\.\d+)?(?:e[-+]?\d+)?)\s*\*\s*t\s*"
    r"(?:(?P<sign>[-+])\s*(?P<phase>\d+(?:\.\d+)?(?:e[-+]?\d+)?)\s*)?\)\s*$",
    re.IGNORECASE,
)


def parse_waveform(text: str) -> Waveform:
    """Parse the config waveform grammar.

    Terms joined by + or - (the sign binds to the following term):
    a bare number is a constant; ``A*sin(w*t+phi)`` and ``A*cos(w*t-phi)``
    are oscillatory atoms (the ``A*`` factor optional); ``0`` is the zero
    waveform.
    """
    text = text.strip()
    if not text:
        raise ValueError("empty waveform")
    # split on top-level +/- signs (never inside parentheses or exponents)
    terms: list[tuple[float, str]] = []
    depth = 0
    sign, start = 1.0, 0
    i = 0
    while i < len(text):
        ch = text[i]
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        elif ch in "+-" and depth == 0 and i > start:
            prev = text[start:i].strip()
            if prev and prev[-1].lower() not in "e*":
                terms.append((sign, prev))
                sign = -1.0 if ch == "-" else 1.0
                start = i + 1
        elif ch == "-" and depth == 0 and i == start:
            sign = -sign
            start = i + 1
        i += 1
    last = text[start:].strip()
    if last:
        terms.append((sign, last))
    wave = Waveform.zero()
    for sgn, term in terms:
        m = _WAVE_TERM.match(term)
        if m:
            coef = sgn * float(m.group("coef") or 1.0)
            freq = float(m.group("freq"))
            phase = float(m.group("phase") or 0.0)
            if m.group("sign") == "-":
                phase = -phase
            maker = Waveform.sin if m.group("fn").lower() == "sin" else Waveform.cos
            wave = wave + maker(freq, phase, coef)
            continue
        try:
            value = sgn * float(term)
        except ValueError:
            raise ValueError(f"cannot parse waveform term {term!r}") from None
        if value != 0.0:
            wave = wave + Waveform.constant(value)
    return wave
