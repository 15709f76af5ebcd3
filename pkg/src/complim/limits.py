"""Experiments that realize the incompressible-limit theorems numerically.

An alpha sweep runs one incompressible reference and a family of
compressible solutions on a shared time grid, then measures

  * strong velocity errors in L2(0,T;H10) and Linf(0,T;L2),
  * pressure errors in Linf(0,T;L2) after aligning means,
  * weak-convergence probes |int ((u_a - u', v)) phi dt| against a fixed
    dictionary of solenoidal directions,
  * the terminal-energy functional

        X_a = rho0 |u_a(T) - u'(T)|^2 + (alpha/rho0) |p_a(T)|^2
              + 2 mu int |u_a - u'|^2_{H10} dt + 2 eta int |div(u_a - u')|^2 dt,

whose limit rho0 (|u0|^2 - |P_J u0|^2) decides whether the convergence is
strong.  Log-log slope fits of the error columns give the empirical rates.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .basis import (
    BasisSpec,
    PressureCoeffs,
    SampledField,
    VelocityCoeffs,
    build_basis,
    project_pressure,
    project_velocity,
)
from .compressible import (
    CompressibleParams,
    InvalidParams,
    Trajectory,
    default_dt,
    simulate_compressible,
)
from .incompressible import (
    IncompressibleTrajectory,
    initial_pressure,
    nullspace_basis,
    shift_pressure_mean,
    simulate_incompressible,
)
from .operators import OperatorSet, assemble, leray_project
from . import presets

__all__ = [
    "SWEEP_KINDS",
    "DEFAULT_ALPHAS",
    "ProbePair",
    "SweepConfig",
    "SweepRow",
    "SweepResult",
    "RateFit",
    "x_alpha",
    "weak_probe",
    "probe_dictionary",
    "sweep_alpha",
    "fit_rate",
]

SWEEP_KINDS = ("weak", "strong_velocity", "pressure_weak", "pressure_strong")
DEFAULT_ALPHAS = tuple(10.0**e for e in (-1.0, -1.5, -2.0, -2.5, -3.0, -3.5))
# time weight drawn for the probe dictionary.  Of the candidate weights
# {1, t, t^2, T-t}, only t^2 yields pairings that stay measurable across the
# sweep: the constant weight telescopes through the kernel-projected momentum
# balance (mu Z' int c dt = rho0 Z'M(c0 - c(T)), which vanishes for gradient
# data), and the weights with phi'(0) != 0 collapse onto the order
# dt^2 |((u0, v))| / 6 sampling floor of the shared grid within two rows.
PROBE_TIME_FACTORS = ("t^2",)
THREADS_ENV = "COMPLIM_THREADS"


def _require_shared_grid(traj_c: Trajectory, traj_i: IncompressibleTrajectory) -> None:
    if traj_c.times.shape != traj_i.times.shape or not np.allclose(
        traj_c.times, traj_i.times, rtol=0.0, atol=1e-12
    ):
        raise ValueError("compressible and incompressible trajectories use different grids")


def x_alpha(
    operator_set: OperatorSet,
    params: CompressibleParams,
    traj_c: Trajectory,
    traj_i: IncompressibleTrajectory,
) -> float:
    """Terminal-energy distance functional of one compressible run to the reference."""
    _require_shared_grid(traj_c, traj_i)
    d = traj_c.c - traj_i.c
    t = traj_c.times
    l2_terminal = d[-1] @ (operator_set.mass_diag * d[-1])
    p_terminal = float(traj_c.q[-1] @ traj_c.q[-1])
    h01_int = np.trapezoid(np.einsum("ni,ni->n", d, d), t)
    value = (
        params.rho0 * l2_terminal
        + params.alpha / params.rho0 * p_terminal
        + 2.0 * params.mu * h01_int
    )
    if params.eta > 0.0:
        div_int = np.trapezoid(
            np.einsum("ni,ij,nj->n", d, operator_set.div_gram, d, optimize=True), t
        )
        value += 2.0 * params.eta * div_int
    return float(value)


@dataclass(frozen=True)
class ProbePair:
    """One weak-convergence probe: a solenoidal direction and a time weight.

    ``phi_prime`` (the weight's derivative) enables the endpoint-corrected
    time quadrature in weak_probe; without it the plain trapezoidal value is
    reported.
    """

    v: np.ndarray  # (m_u,), in the kernel of B
    phi: Callable[[np.ndarray], np.ndarray]
    label: str
    phi_prime: Optional[Callable[[float], float]] = None


def probe_dictionary(
    operator_set: OperatorSet, k: int, T: float, seed: int
) -> list[ProbePair]:
    """Seeded dictionary of k orthonormal kernel directions with cycling time weights."""
    z = operator_set.kernel
    if z.shape[1] == 0:
        raise ValueError("cannot build probes: the solenoidal space is trivial")
    if k < 1:
        raise ValueError("need at least one probe")
    rng = np.random.default_rng(seed)
    raw = z @ rng.standard_normal((z.shape[1], k))
    q, _ = np.linalg.qr(raw)
    factories = {
        "1": (lambda t: np.ones_like(t), lambda t: 0.0),
        "t": (lambda t: t, lambda t: 1.0),
        "t^2": (lambda t: t**2, lambda t: 2.0 * t),
        "T-t": (lambda t: T - t, lambda t: -1.0),
    }
    pairs = []
    for j in range(k):
        name = PROBE_TIME_FACTORS[j % len(PROBE_TIME_FACTORS)]
        phi, phi_prime = factories[name]
        pairs.append(
            ProbePair(v=q[:, j].copy(), phi=phi, label=f"v{j}*{name}", phi_prime=phi_prime)
        )
    return pairs


def _check_probe_solenoidal(operator_set: OperatorSet, dictionary: Sequence[ProbePair]) -> None:
    b = operator_set.div_coupling[1:]
    for pair in dictionary:
        defect = np.linalg.norm(b @ pair.v)
        if defect > 1e-8 * max(1.0, np.linalg.norm(pair.v)):
            raise ValueError(f"probe {pair.label!r} is not solenoidal (|Bv| = {defect:.3e})")


def weak_probe(
    traj_c: Trajectory,
    traj_i: IncompressibleTrajectory,
    dictionary: Sequence[ProbePair],
    operator_set: Optional[OperatorSet] = None,
) -> np.ndarray:
    """|int_0^T ((u_a - u', v)) phi dt| for every probe pair.

    Time quadrature is trapezoidal with the endpoint correction
    -dt^2/12 [signal * phi']_0^T.  Without it the sweep-wide shared dt
    leaves an alpha-independent boundary-error floor that masks the decay of
    the fastest-vanishing pairings.  Probes must stay inside the discrete
    solenoidal space; pass the operator set to have that rejected here.
    """
    _require_shared_grid(traj_c, traj_i)
    if operator_set is not None:
        _check_probe_solenoidal(operator_set, dictionary)
    d = traj_c.c - traj_i.c
    t = traj_c.times
    dt = float(t[1] - t[0])
    deltas = np.empty(len(dictionary))
    for idx, pair in enumerate(dictionary):
        signal = d @ pair.v
        value = np.trapezoid(signal * pair.phi(t), t)
        if pair.phi_prime is not None:
            # only the smooth signal * phi' part belongs in the correction; the
            # oscillatory signal-derivative part is already summed exactly by
            # the trapezoidal rule (geometric summation of the sampled modes)
            value -= dt**2 / 12.0 * (
                signal[-1] * float(pair.phi_prime(t[-1]))
                - signal[0] * float(pair.phi_prime(t[0]))
            )
        deltas[idx] = abs(value)
    return deltas


@dataclass(frozen=True)
class RateFit:
    """Least-squares line on (log alpha, log err): slope is the empirical order."""

    slope: float
    intercept: float
    residual: float


def fit_rate(alphas: Sequence[float], errors: Sequence[float]) -> RateFit:
    """Fit the empirical convergence order from positive (alpha, error) pairs."""
    a = np.asarray(alphas, dtype=float)
    e = np.asarray(errors, dtype=float)
    if a.shape != e.shape or a.ndim != 1 or len(a) < 3:
        raise ValueError("need at least 3 (alpha, error) pairs of equal length")
    if np.any(a <= 0.0) or np.any(e <= 0.0):
        raise ValueError("rate fitting needs strictly positive entries")
    la, le = np.log(a), np.log(e)
    slope, intercept = np.polyfit(la, le, 1)
    residual = float(np.sqrt(np.mean((np.polyval([slope, intercept], la) - le) ** 2)))
    return RateFit(slope=float(slope), intercept=float(intercept), residual=residual)


@dataclass(frozen=True)
class SweepConfig:
    """Description of one alpha sweep.

    ``u0``/``p0`` accept sampled fields, coefficient vectors, or preset
    names (gradient_u0, solenoidal_u0, mixed_u0, compatible_p0, zero).  The
    time step is shared across the rows and defaults to the policy of the
    smallest alpha so that row differences are not stepping artifacts.
    """

    n_u: int = 8
    n_p: int = 8
    rho0: float = 1.0
    mu: float = 1.0
    eta: float = 0.0
    T: float = 1.0
    dt: Optional[float] = None
    f: Optional[SampledField] = None
    u0: Union[SampledField, VelocityCoeffs, str, None] = None
    p0: Union[SampledField, PressureCoeffs, str, None] = None
    alphas: Sequence[float] = DEFAULT_ALPHAS
    kind: str = "strong_velocity"
    probes: int = 8
    seed: int = 0

    def validate(self) -> None:
        if self.kind not in SWEEP_KINDS:
            raise InvalidParams(f"unknown sweep kind {self.kind!r}; expected one of {SWEEP_KINDS}")
        a = np.asarray(self.alphas, dtype=float)
        if len(a) < 3:
            raise InvalidParams("a sweep needs at least 3 alpha values for rate fitting")
        if np.any(a <= 0.0) or np.any(a >= 1.0):
            raise InvalidParams("alpha values must lie in (0, 1)")
        if np.any(np.diff(a) >= 0.0):
            raise InvalidParams("alpha values must be strictly decreasing")


@dataclass
class SweepRow:
    alpha: float
    err_vel_l2h1: float = np.nan
    err_vel_linf_l2: float = np.nan
    err_pres_linf_l2: float = np.nan
    x_alpha: float = np.nan
    probe_deltas: np.ndarray = field(default_factory=lambda: np.array([]))
    error: str = ""

    @property
    def failed(self) -> bool:
        return bool(self.error)

    @property
    def probe_max(self) -> float:
        return float(self.probe_deltas.max()) if self.probe_deltas.size else np.nan


@dataclass
class SweepResult:
    """Per-alpha error norms and fits of one sweep, ordered by decreasing alpha."""

    config: SweepConfig
    dt: float
    seed: int
    x_limit: float
    rows: list[SweepRow]
    probe_labels: list[str]
    fits: dict[str, RateFit]
    reference: IncompressibleTrajectory

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows])

    @property
    def alphas(self) -> np.ndarray:
        return self.column("alpha")


def _resolve_u0(u0, spec: BasisSpec, operator_set: OperatorSet) -> np.ndarray:
    if u0 is None:
        return np.zeros(spec.m_u)
    if isinstance(u0, str):
        return presets.velocity_preset(u0, spec, operator_set).values
    if isinstance(u0, VelocityCoeffs):
        return u0.values.copy()
    return project_velocity(spec, u0).values


def _resolve_p0(p0, spec: BasisSpec, operator_set: OperatorSet, config: SweepConfig) -> np.ndarray:
    if p0 is None:
        return np.zeros(spec.m_p)
    if isinstance(p0, str):
        return presets.pressure_preset(
            p0, spec, operator_set, f=config.f, rho0=config.rho0, mu=config.mu
        ).values
    if isinstance(p0, PressureCoeffs):
        return p0.values.copy()
    return project_pressure(spec, p0).values


def _scaled_field(fld: SampledField, factor: float) -> SampledField:
    return SampledField(
        spatial=lambda x, y: factor * np.asarray(fld.spatial(x, y)),
        vector=fld.vector,
        time_factor=fld.time_factor,
        label=f"{factor:g}*({fld.label})" if fld.label else "",
    )


def sweep_alpha(config: SweepConfig) -> SweepResult:
    """Run the sweep: one incompressible reference plus one compressible run per alpha.

    Rows run concurrently (capped by the COMPLIM_THREADS environment
    variable); a failed row is recorded with its message instead of
    aborting the sweep.  Results are assembled in alpha order, so the
    output does not depend on scheduling.
    """
    config.validate()
    spec = build_basis(config.n_u, config.n_p)
    operator_set = assemble(spec)
    solenoidal = nullspace_basis(operator_set)

    c0 = _resolve_u0(config.u0, spec, operator_set)
    if config.kind in ("pressure_weak", "pressure_strong"):
        defect = np.linalg.norm(operator_set.div_coupling[1:] @ c0)
        if defect > 1e-8 * max(1.0, np.linalg.norm(c0)):
            raise InvalidParams(
                f"pressure sweeps need a solenoidal u0 (|B u0| = {defect:.3e})"
            )
    if config.kind == "pressure_strong":
        q0 = initial_pressure(
            spec,
            operator_set,
            solenoidal,
            VelocityCoeffs(spec, c0),
            config.f,
            rho0=config.rho0,
            mu=config.mu,
        ).values
    else:
        q0 = _resolve_p0(config.p0, spec, operator_set, config)

    alphas = [float(a) for a in config.alphas]
    dt = config.dt if config.dt is not None else default_dt(min(alphas), config.n_u, config.T)

    base = dict(rho0=config.rho0, mu=config.mu, T=config.T, dt=dt, f=config.f)
    reference = simulate_incompressible(
        spec,
        operator_set,
        solenoidal,
        CompressibleParams(eta=0.0, alpha=alphas[0], u0=VelocityCoeffs(spec, c0), **base),
    )
    reference = shift_pressure_mean(reference, float(q0[0]))

    dictionary = probe_dictionary(operator_set, config.probes, config.T, config.seed)
    _check_probe_solenoidal(operator_set, dictionary)

    sol_part = leray_project(operator_set, VelocityCoeffs(spec, c0)).solenoidal.values
    u0_l2_sq = c0 @ (operator_set.mass_diag * c0)
    x_limit = config.rho0 * float(u0_l2_sq - sol_part @ (operator_set.mass_diag * sol_part))

    s_field = _scaled_field(config.f, config.rho0) if config.f is not None else None

    def run_row(alpha: float) -> SweepRow:
        row = SweepRow(alpha=alpha)
        try:
            params = CompressibleParams(
                eta=config.eta,
                alpha=alpha,
                sigma=None,
                s=s_field,
                u0=VelocityCoeffs(spec, c0.copy()),
                p0=PressureCoeffs(spec, q0.copy()),
                **base,
            )
            traj = simulate_compressible(spec, operator_set, params)
            d = traj.c - reference.c
            t = traj.times
            row.err_vel_l2h1 = float(
                np.sqrt(np.trapezoid(np.einsum("ni,ni->n", d, d), t))
            )
            row.err_vel_linf_l2 = float(
                np.sqrt(np.max(np.einsum("ni,i,ni->n", d, operator_set.mass_diag, d)))
            )
            dq = traj.q - reference.q
            row.err_pres_linf_l2 = float(np.max(np.linalg.norm(dq, axis=1)))
            row.x_alpha = x_alpha(operator_set, params, traj, reference)
            row.probe_deltas = weak_probe(traj, reference, dictionary)
        except Exception as exc:  # row failures are recorded, not fatal
            row.error = f"{type(exc).__name__}: {exc}"
        return row

    workers = int(os.environ.get(THREADS_ENV, len(alphas)) or 1)
    workers = max(1, min(workers, len(alphas)))
    if workers == 1:
        rows = [run_row(a) for a in alphas]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(run_row, alphas))

    fits: dict[str, RateFit] = {}
    ok = [r for r in rows if not r.failed]
    if len(ok) >= 3:
        for name in ("err_vel_l2h1", "err_vel_linf_l2", "err_pres_linf_l2"):
            vals = np.array([getattr(r, name) for r in ok])
            if np.all(vals > 0.0):
                fits[name] = fit_rate([r.alpha for r in ok], vals)
    return SweepResult(
        config=config,
        dt=dt,
        seed=config.seed,
        x_limit=x_limit,
        rows=rows,
        probe_labels=[p.label for p in dictionary],
        fits=fits,
        reference=reference,
    )
