"""Named experiments mapping quantitative claims to runnable sweeps.

Each experiment produces a sweep table plus a verdict; the verdict is a
pure function of the table rows, so persisting the table as CSV makes
every verdict recomputable offline (see :func:`replay_verdict`).

Trajectory tails over an ensemble of initial data and forcing phase
shifts stand in for attractor sections: tails of absorbed trajectories
are the only desk-scale observable of the attracting set, so the
reported semidistances are one-sided evidence, not the set-level
statement itself.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import io
from .analysis import fit_decay, fit_rate
from .dynamics import Stepper, _acceleration, linear_response, simulate, step
from .forcing import (
    ForceTerm,
    Forcing,
    Waveform,
    antiderivative_bound,
    tb_bound,
    tb_norm,
)
from .kernels import MemoryKernel, PronySum, TailPolicy
from .spectral import make_basis
from .state import PowerLaw, state_distance

__all__ = [
    "ExperimentSpec",
    "ExperimentReport",
    "absorbing_experiment",
    "attractor_size_experiment",
    "aux_linear_experiment",
    "averaging_experiment",
    "run_experiment",
    "replay_verdict",
    "EXPERIMENTS",
]


@dataclass(frozen=True)
class ExperimentSpec:
    """Configuration of one named experiment.

    Not every field is used by every experiment; the runner validates
    what it needs.  ``margin`` = None lets the absorbing experiment
    calibrate its threshold from the observed tails.
    """

    name: str
    kernel: MemoryKernel
    forcing: Forcing
    nonlinearity: object = field(default_factory=PowerLaw)
    n_modes: int = 12
    dt: float = 2e-3
    horizon: float = 80.0
    tail_window: float = 20.0
    eps_list: tuple[float, ...] = ()
    ensemble: int = 8
    phi_span: tuple[float, float] = (0.1, 100.0)
    margin: float | None = None
    bound_factor: float = 3.0
    compare_T: float = 5.0
    sigma: float = 1.0
    seed: int = 0
    workers: int = 1
    sample_dt: float = 0.05
    out_dir: str | None = None

    def validate(self) -> None:
        if self.tail_window >= self.horizon:
            raise ValueError("tail window must be shorter than the horizon")
        if self.name in ("attractor_size", "aux_linear", "averaging") and not self.eps_list:
            raise ValueError(f"experiment {self.name!r} needs a nonempty eps list")


@dataclass
class ExperimentReport:
    name: str
    status: str                 # "pass" | "fail" | "not-applicable"
    details: dict
    table_header: tuple[str, ...]
    table_rows: list[tuple]
    files: dict[str, str] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.status == "pass"

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "status": self.status,
            "passed": self.passed,
            "details": self.details,
            "table_header": list(self.table_header),
            "files": self.files,
        }


def _map_jobs(fn, jobs, workers: int):
    if workers <= 1:
        return [fn(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))


def _guard_oscillation_dt(dt: float, forcing: Forcing, eps: float) -> None:
    period = forcing.g1.waveform.shortest_period()
    if period is None or eps <= 0:
        return
    limit = eps * period / 20.0
    if dt > limit + 1e-15:
        raise ValueError(
            f"dt={dt} under-resolves the eps={eps} oscillation; need dt <= {limit:.3g}"
        )


def scaled_datum(basis, nl, shape_u, shape_v, target_phi: float) -> tuple[np.ndarray, np.ndarray]:
    """Scale a fixed shape so the zero-history state has the target gauge."""
    p = nl.growth
    u1 = basis.norm_sigma(shape_u, 1.0)
    v0 = float(np.dot(shape_v, shape_v))
    lp = basis.lp_norm(shape_u, p + 1)

    def gauge(s: float) -> float:
        return 0.5 * (s * s * (u1 * u1 + v0)) + (s * lp) ** (p + 1)

    lo, hi = 0.0, 1.0
    while gauge(hi) < target_phi:
        hi *= 2
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if gauge(mid) < target_phi:
            lo = mid
        else:
            hi = mid
    s = 0.5 * (lo + hi)
    return s * shape_u, s * shape_v


# ---------------------------------------------------------------------------
# absorbing-set experiment

def _absorbing_job(args):
    spec, target_phi = args
    basis = make_basis(spec.n_modes)
    stepper = Stepper(basis, spec.kernel, spec.dt)
    shape_u = 0.8 * basis.mode(1) + 0.2 * basis.mode(3)
    shape_v = 0.5 * basis.mode(2)
    u0, v0 = scaled_datum(basis, spec.nonlinearity, shape_u, shape_v, target_phi)
    state = stepper.new_state(u0, v0)
    stride = max(1, int(round(spec.sample_dt / spec.dt)))
    rec = simulate(stepper, state, spec.nonlinearity, spec.forcing, spec.horizon,
                   record_every=stride)
    return rec.times, rec.phi


def absorbing_experiment(spec: ExperimentSpec) -> ExperimentReport:
    """Every trajectory must enter the gauge ball {Phi <= R} and stay.

    R is margin * (1 + Q_eps) when a margin is given, otherwise 1.25x
    the worst observed tail sup (threshold calibrated from the data,
    which keeps the entry/no-escape checks meaningful).
    """
    spec.validate()
    targets = np.geomspace(spec.phi_span[0], spec.phi_span[1], spec.ensemble)
    series = _map_jobs(_absorbing_job, [(spec, float(t)) for t in targets], spec.workers)

    tail_start = spec.horizon - spec.tail_window
    tail_sups = []
    for times, phi in series:
        tail_sups.append(float(phi[times >= times[0] + tail_start].max()))

    m0 = tb_norm(spec.forcing.g0)
    m1 = tb_norm(spec.forcing.g1)
    q_eps = tb_bound(m0, m1, spec.forcing.rho, spec.forcing.eps)
    if spec.margin is not None:
        radius = spec.margin * (1.0 + q_eps)
    else:
        radius = 1.25 * max(max(tail_sups), 1e-12)

    rows = []
    enter_times = []
    for (times, phi), tail_sup in zip(series, tail_sups):
        above = phi > radius
        below_idx = np.flatnonzero(~above)
        entered = below_idx.size > 0
        escaped = False
        t_enter = math.nan
        if entered:
            first_below = below_idx[0]
            escaped = bool(np.any(above[first_below:]))
            if escaped:
                last_above = int(np.flatnonzero(above).max())
                entered = last_above + 1 < len(times)
                t_enter = float(times[last_above + 1]) if entered else math.nan
            else:
                t_enter = float(times[first_below])
        rate, floor = fit_decay(times, phi)
        min_ratio = float(phi.min() / phi[0])
        rows.append((float(phi[0]), tail_sup, t_enter, int(entered), int(escaped),
                     min_ratio, rate))
        enter_times.append(t_enter)

    params = {
        "radius": radius, "q_eps": q_eps, "m0": m0, "m1": m1,
        "sample_dt": spec.sample_dt,
    }
    header = ("phi0", "tail_sup", "enter_time", "entered", "escaped", "min_ratio", "decay_rate")
    status, details = _absorbing_verdict(header, rows, params)
    return ExperimentReport("absorbing", status, {**details, **params}, header, rows)


def _absorbing_verdict(header, rows, params):
    idx = {name: i for i, name in enumerate(header)}
    entered = [bool(int(r[idx["entered"]])) for r in rows]
    escaped = [bool(int(r[idx["escaped"]])) for r in rows]
    phi0 = [float(r[idx["phi0"]]) for r in rows]
    t_e = [float(r[idx["enter_time"]]) for r in rows]

    order = np.argsort(phi0)
    tol = float(params["sample_dt"])
    pairs = ok_pairs = 0
    for a in range(len(rows)):
        for b in range(a + 1, len(rows)):
            i, j = order[a], order[b]
            if phi0[j] > phi0[i] * 1.0001:
                pairs += 1
                if t_e[j] >= t_e[i] - tol:
                    ok_pairs += 1
    ordering_ok = pairs == 0 or ok_pairs / pairs >= 0.9

    all_entered = all(entered)
    none_escaped = not any(escaped)
    details = {
        "all_entered": all_entered,
        "none_escaped": none_escaped,
        "entry_ordering_ok": ordering_ok,
        "entry_ordering_fraction": 1.0 if pairs == 0 else ok_pairs / pairs,
        "failure_mode": (
            "" if all_entered and none_escaped
            else ("escape-after-entry" if any(escaped) else "no-entry: horizon too short")
        ),
    }
    status = "pass" if (all_entered and none_escaped and ordering_ok) else "fail"
    return status, details


# ---------------------------------------------------------------------------
# attractor-size experiment

def _variant_forcing(spec: ExperimentSpec, variant: str, eps: float) -> Forcing:
    base = spec.forcing
    g1_wave = Waveform(tuple(a for a in base.g1.waveform.atoms if a.kind != "const"))
    if variant == "biased":
        g1_wave = Waveform.constant(1.0) + g1_wave
    return Forcing(base.g0, ForceTerm(base.g1.profile, g1_wave), base.rho, eps)


def _attractor_job(args):
    spec, variant, eps, member = args
    basis = make_basis(spec.n_modes)
    forcing = _variant_forcing(spec, variant, eps)
    _guard_oscillation_dt(spec.dt, forcing, eps)
    scale = np.geomspace(0.5, 2.0, spec.ensemble)[member]
    phase = 2.0 * math.pi * member / spec.ensemble
    forcing = forcing.shifted(phase)
    stepper = Stepper(basis, spec.kernel, spec.dt)
    state = stepper.new_state(scale * (0.3 * basis.mode(1) + 0.1 * basis.mode(2)),
                              basis.zeros())
    stride = max(1, int(round(spec.sample_dt / spec.dt)))
    rec = simulate(stepper, state, spec.nonlinearity, forcing, spec.horizon,
                   record_every=stride)
    tail = rec.times >= rec.times[0] + spec.horizon - spec.tail_window
    return float(rec.phi[tail].max())


def attractor_size_experiment(spec: ExperimentSpec) -> ExperimentReport:
    """Tail gauge sups under zero-mean vs biased fast forcing.

    Zero-mean fast oscillations must leave the tail sups within a
    bounded factor across the eps sweep; a bias in the fast force makes
    them grow as eps shrinks, tracking the amplitude budget.
    """
    spec.validate()
    jobs = [
        (spec, variant, eps, member)
        for variant in ("zero_mean", "biased")
        for eps in spec.eps_list
        for member in range(spec.ensemble)
    ]
    sups = _map_jobs(_attractor_job, jobs, spec.workers)

    rows = []
    per_point: dict[tuple[str, float], float] = {}
    for (_, variant, eps, member), sup in zip(jobs, sups):
        key = (variant, eps)
        per_point[key] = max(per_point.get(key, 0.0), sup)
    for (variant, eps), sup in sorted(per_point.items()):
        rows.append((variant, eps, sup))

    params = {"bound_factor": spec.bound_factor, "rho": spec.forcing.rho}
    header = ("variant", "eps", "tail_sup")
    status, details = _attractor_verdict(header, rows, params)
    return ExperimentReport("attractor_size", status, {**details, **params}, header, rows)


def _attractor_verdict(header, rows, params):
    zero = sorted((float(r[1]), float(r[2])) for r in rows if r[0] == "zero_mean")
    bias = sorted((float(r[1]), float(r[2])) for r in rows if r[0] == "biased")
    z_sups = [s for _, s in zero]
    factor = max(z_sups) / min(z_sups)
    bounded = factor < float(params["bound_factor"])

    # eps ascending; growth as eps decreases means nonincreasing in eps order
    b_sups = [s for _, s in bias]
    monotone = all(b_sups[i] >= b_sups[i + 1] * 0.99 for i in range(len(b_sups) - 1))
    b_fit = fit_rate(np.array([e for e, _ in bias]), np.array(b_sups))
    details = {
        "zero_mean_factor": factor,
        "zero_mean_bounded": bounded,
        "biased_monotone_growth": monotone,
        "biased_slope": b_fit.slope,
        "biased_slope_reference": -2.0 * float(params["rho"]),
    }
    status = "pass" if (bounded and monotone) else "fail"
    return status, details


# ---------------------------------------------------------------------------
# auxiliary linear response experiment

def _aux_job(args):
    spec, eps = args
    dt = min(spec.dt, eps / 40.0)
    _, norms = linear_response(
        spec.kernel, spec.forcing.g1, eps, spec.sigma, spec.horizon, dt,
        n_modes=spec.n_modes,
    )
    return float(norms.max()), dt


def aux_linear_experiment(spec: ExperimentSpec) -> ExperimentReport:
    """Response of the forced linear system scales linearly in eps.

    Applies only when the fast waveform has a bounded antiderivative; a
    nonzero-mean waveform is flagged not-applicable (its response does
    not shrink with eps).
    """
    spec.validate()
    basis = make_basis(spec.n_modes)
    bound = antiderivative_bound(spec.forcing.g1, basis.eigenvalues, spec.sigma)
    if not bound.finite:
        details = {
            "reason": "forcing antiderivative diverges (nonzero mean)",
            "linear_growth": bound.linear_growth,
        }
        return ExperimentReport("aux_linear", "not-applicable", details,
                                ("eps", "sup_norm", "dt"), [])

    results = _map_jobs(_aux_job, [(spec, eps) for eps in spec.eps_list], spec.workers)
    rows = [(eps, sup, dt) for eps, (sup, dt) in zip(spec.eps_list, results)]
    params = {"slope_band": (0.85, 1.15), "ell_sq": bound.ell_sq, "sigma": spec.sigma}
    header = ("eps", "sup_norm", "dt")
    status, details = _aux_verdict(header, rows, params)
    return ExperimentReport("aux_linear", status, {**details, **params}, header, rows)


def _aux_verdict(header, rows, params):
    eps = np.array([float(r[0]) for r in rows])
    sups = np.array([float(r[1]) for r in rows])
    fit = fit_rate(eps, sups)
    lo, hi = params["slope_band"]
    details = {"slope": fit.slope, "intercept": fit.intercept,
               "max_residual": fit.max_residual}
    status = "pass" if lo <= fit.slope <= hi else "fail"
    return status, details


# ---------------------------------------------------------------------------
# averaging / deviation-rate experiment

def _averaging_job(args):
    spec, eps = args
    basis = make_basis(spec.n_modes)
    period = spec.forcing.g1.waveform.shortest_period() or 2.0 * math.pi
    dt = min(spec.dt, eps * period / 40.0)
    forcing_eps = replace(spec.forcing, eps=eps)
    _guard_oscillation_dt(dt, forcing_eps, eps)
    forcing_avg = replace(spec.forcing, eps=0.0)
    nl = spec.nonlinearity

    stepper = Stepper(basis, spec.kernel, dt)
    state = stepper.new_state(0.3 * basis.mode(1), basis.zeros())
    simulate(stepper, state, nl, forcing_eps, spec.horizon, record_every=10**9)

    # twin runs from the shared warm datum
    sa = state
    sb = state.copy()
    kw = stepper.weights
    stride = max(1, int(round(spec.sample_dt / dt)))
    n_steps = int(round(spec.compare_T / dt))
    aa = _acceleration(stepper, sa, nl, forcing_eps, sa.t, None)
    ab = _acceleration(stepper, sb, nl, forcing_avg, sb.t, None)
    dev = 0.0
    for n in range(1, n_steps + 1):
        aa = step(sa, stepper, nl, forcing_eps, accel=aa)
        ab = step(sb, stepper, nl, forcing_avg, accel=ab)
        if n % stride == 0 or n == n_steps:
            dev = max(dev, state_distance(sa, sb, kw))

    # tail samples for the one-sided semidistance proxy
    n_proxy = 24
    proxy_T = spec.tail_window
    gap = max(1, int(round(proxy_T / dt)) // n_proxy)
    samples_a, samples_b = [], []
    for n in range(1, gap * n_proxy + 1):
        aa = step(sa, stepper, nl, forcing_eps, accel=aa)
        ab = step(sb, stepper, nl, forcing_avg, accel=ab)
        if n % gap == 0:
            samples_a.append(sa.copy())
            samples_b.append(sb.copy())
    proxy = max(
        min(state_distance(xa, xb, kw) for xb in samples_b) for xa in samples_a
    )
    return dev, proxy, dt


def averaging_experiment(spec: ExperimentSpec) -> ExperimentReport:
    """Deviation between the oscillating run and the averaged run from a
    shared warm datum scales like eps**(1-rho) over a fixed span."""
    spec.validate()
    results = _map_jobs(_averaging_job, [(spec, eps) for eps in spec.eps_list], spec.workers)
    rows = [(eps, dev, proxy, dt) for eps, (dev, proxy, dt) in zip(spec.eps_list, results)]
    params = {"rho": spec.forcing.rho, "compare_T": spec.compare_T,
              "slope_tolerance": 0.15}
    header = ("eps", "deviation_sup", "semidistance_proxy", "dt")
    status, details = _averaging_verdict(header, rows, params)
    return ExperimentReport("averaging", status, {**details, **params}, header, rows)


def _averaging_verdict(header, rows, params):
    eps = np.array([float(r[0]) for r in rows])
    dev = np.array([float(r[1]) for r in rows])
    proxy = [float(r[2]) for r in rows]
    fit = fit_rate(eps, dev)
    target = 1.0 - float(params["rho"])
    tol = float(params["slope_tolerance"])
    order = np.argsort(eps)[::-1]
    proxy_sorted = [proxy[i] for i in order]
    details = {
        "slope": fit.slope,
        "slope_target": target,
        "proxy_decreasing": all(
            proxy_sorted[i + 1] <= proxy_sorted[i] * 1.05 for i in range(len(proxy_sorted) - 1)
        ),
    }
    status = "pass" if target - tol <= fit.slope <= target + tol else "fail"
    return status, details


# ---------------------------------------------------------------------------

EXPERIMENTS = {
    "absorbing": (absorbing_experiment, _absorbing_verdict),
    "attractor_size": (attractor_size_experiment, _attractor_verdict),
    "aux_linear": (aux_linear_experiment, _aux_verdict),
    "averaging": (averaging_experiment, _averaging_verdict),
}


def run_experiment(spec: ExperimentSpec) -> ExperimentReport:
    """Run a named experiment and persist its table and report."""
    if spec.name not in EXPERIMENTS:
        raise ValueError(f"unknown experiment {spec.name!r}; know {sorted(EXPERIMENTS)}")
    runner, _ = EXPERIMENTS[spec.name]
    report = runner(spec)
    if spec.out_dir:
        out = Path(spec.out_dir)
        sweep = out / f"{spec.name}_sweep.csv"
        io.write_table(sweep, report.table_header, report.table_rows)
        report.files["sweep"] = sweep.name
        io.write_report(report.to_json(), out / f"{spec.name}_report.json")
    return report


def replay_verdict(report_path) -> tuple[str, str]:
    """Recompute a persisted verdict from its sweep CSV alone.

    Returns (stored status, recomputed status); equality is the
    replayability guarantee.
    """
    data = io.read_report(report_path)
    name = data["name"]
    _, verdict = EXPERIMENTS[name]
    if data["status"] == "not-applicable":
        return data["status"], data["status"]
    sweep = Path(report_path).parent / data["files"]["sweep"]
    header, raw_rows = io.read_table(sweep)
    status, _ = verdict(tuple(header), raw_rows, data["details"])
    return data["status"], status
