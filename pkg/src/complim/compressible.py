"""Time integration of the linearized compressible system in coefficient space.

With c(t) the velocity coefficients and q(t) the pressure coefficients the
Galerkin equations read

    alpha dq/dt = sigma_vec(t) - rho0 B c,
    rho0 M dc/dt = B' q - mu c - eta E c + alpha G q + F(t),

where sigma_vec_k = (sigma, pressure mode k), F_i = <s, velocity mode i>
and G couples the pressure to the momentum through the body force f.  The
homogeneous problem is recovered by sigma = 0, s = rho0 f.

Stepping is trapezoidal (Crank-Nicolson): A-stable, so the acoustic block
with frequencies ~ 1/sqrt(alpha) imposes no stability restriction, second
order, and exactly dissipative on the unforced system.  The step matrix is
factored once; only the right side is reassembled for time-dependent
sources.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
import scipy.linalg

from .basis import (
    BasisSpec,
    PressureCoeffs,
    SampledField,
    VelocityCoeffs,
    pressure_load_vector,
    project_pressure,
    project_velocity,
    velocity_load_vector,
)
from .inequalities import MixedConstants, ScalarTrajectory, mixed_constants, verify_mixed
from .operators import OperatorSet, coupling_matrix

__all__ = [
    "CompressibleParams",
    "Trajectory",
    "EnergyLedger",
    "EstimateReport",
    "InvalidParams",
    "StepFailure",
    "default_dt",
    "simulate_compressible",
    "energy_ledger",
    "mass_series",
    "apriori_check",
]

STEP_RESIDUAL_RTOL = 1e-9


class InvalidParams(ValueError):
    """Physical parameters violate their constraints."""


class StepFailure(RuntimeError):
    """A time-step linear solve exceeded the residual tolerance."""


def default_dt(alpha: float, n_u: int, T: float) -> float:
    """Step size resolving the fastest retained acoustic mode: min(T/200, sqrt(alpha)/(4 pi n_u))."""
    return min(T / 200.0, np.sqrt(alpha) / (4.0 * np.pi * n_u))


@dataclass(frozen=True)
class CompressibleParams:
    """Physical constants and data of one compressible run.

    ``u0``/``p0`` may be sampled fields (projected on entry) or coefficient
    vectors (used as given).  ``sigma`` and ``s`` default to zero; ``f`` must
    not carry a time factor because it enters the step matrix through G.
    """

    rho0: float = 1.0
    mu: float = 1.0
    eta: float = 0.0
    alpha: float = 1e-2
    T: float = 1.0
    dt: Optional[float] = None  # None: default_dt policy
    f: Optional[SampledField] = None
    sigma: Optional[SampledField] = None
    s: Optional[SampledField] = None
    u0: Union[SampledField, VelocityCoeffs, None] = None
    p0: Union[SampledField, PressureCoeffs, None] = None

    def validate(self, n_u: int, static_f: bool = False) -> float:
        if not (self.rho0 > 0 and self.mu > 0 and self.alpha > 0 and self.T > 0):
            raise InvalidParams("rho0, mu, alpha and T must be positive")
        if self.eta < 0:
            raise InvalidParams("eta must be nonnegative")
        dt = self.dt if self.dt is not None else default_dt(self.alpha, n_u, self.T)
        if not 0 < dt <= self.T:
            raise InvalidParams(f"dt = {dt} must lie in (0, T]")
        if static_f and self.f is not None and self.f.time_dependent:
            raise InvalidParams(
                "a time-dependent body force f would change the step matrix every "
                "step; fold the time dependence into s instead"
            )
        return dt


def _initial_coefficients(spec: BasisSpec, params: CompressibleParams):
    u0, p0 = params.u0, params.p0
    if u0 is None:
        c0 = np.zeros(spec.m_u)
    elif isinstance(u0, VelocityCoeffs):
        c0 = u0.values.copy()
    else:
        c0 = project_velocity(spec, u0).values
    if p0 is None:
        q0 = np.zeros(spec.m_p)
    elif isinstance(p0, PressureCoeffs):
        q0 = p0.values.copy()
    else:
        q0 = project_pressure(spec, p0).values
    return c0, q0


@dataclass
class Trajectory:
    """Coefficient time series of one compressible run with per-node diagnostics.

    ``energy`` holds I(t) = (rho0 c'Mc + (alpha/rho0) q'q)/2, ``mass`` holds
    M(t) = rho0 + alpha q_0 (the domain has unit area), and the density
    field rho = rho0 + alpha p is available through :meth:`density`.
    """

    spec: BasisSpec
    params: CompressibleParams
    dt: float
    times: np.ndarray  # (N+1,)
    c: np.ndarray  # (N+1, m_u)
    q: np.ndarray  # (N+1, m_p)
    energy: np.ndarray  # (N+1,)
    h01: np.ndarray  # (N+1,)
    div: np.ndarray  # (N+1,)
    mass: np.ndarray  # (N+1,)

    @property
    def n_steps(self) -> int:
        return len(self.times) - 1

    def velocity_at(self, node: int) -> VelocityCoeffs:
        return VelocityCoeffs(self.spec, self.c[node].copy())

    def pressure_at(self, node: int) -> PressureCoeffs:
        return PressureCoeffs(self.spec, self.q[node].copy())

    def density(self, node: int, points) -> np.ndarray:
        from .basis import eval_field

        p = eval_field(self.spec, self.pressure_at(node), points)
        return self.params.rho0 + self.params.alpha * p


def _forcing_terms(spec: BasisSpec, params: CompressibleParams):
    """Static load vectors and time factors of s and sigma."""
    if params.s is not None:
        f_vec = velocity_load_vector(spec, params.s)
        f_fac = params.s.time_factor
    else:
        f_vec, f_fac = np.zeros(spec.m_u), None
    if params.sigma is not None:
        s_vec = pressure_load_vector(spec, params.sigma)
        s_fac = params.sigma.time_factor
    else:
        s_vec, s_fac = np.zeros(spec.m_p), None
    return f_vec, f_fac, s_vec, s_fac


def simulate_compressible(
    spec: BasisSpec, operator_set: OperatorSet, params: CompressibleParams
) -> Trajectory:
    """Integrate the compressible system over [0, T] with Crank-Nicolson steps.

    The requested dt is rounded to the nearest uniform grid hitting T
    exactly.  Raises StepFailure when the relative residual of a step solve
    exceeds 1e-9.
    """
    dt_req = params.validate(spec.n_u, static_f=True)
    n_steps = max(1, round(params.T / dt_req))
    dt = params.T / n_steps
    m_u, m_p = spec.m_u, spec.m_p
    m = m_u + m_p

    G = (
        coupling_matrix(spec, operator_set, params.f)
        if params.f is not None
        else np.zeros((m_u, m_p))
    )
    K = np.zeros((m, m))
    K[:m_u, :m_u] = -params.eta * operator_set.div_gram
    K[:m_u, :m_u] -= params.mu * np.eye(m_u)
    K[:m_u, m_u:] = operator_set.div_coupling.T + params.alpha * G
    K[m_u:, :m_u] = -params.rho0 * operator_set.div_coupling
    a_diag = np.concatenate(
        [params.rho0 * operator_set.mass_diag, np.full(m_p, params.alpha)]
    )
    lhs = np.diag(a_diag) - 0.5 * dt * K
    rhs_mat = np.diag(a_diag) + 0.5 * dt * K
    lu = scipy.linalg.lu_factor(lhs)

    f_vec, f_fac, s_vec, s_fac = _forcing_terms(spec, params)

    def load(t: float) -> np.ndarray:
        g = np.empty(m)
        g[:m_u] = f_vec if f_fac is None else f_vec * f_fac(t)
        g[m_u:] = s_vec if s_fac is None else s_vec * s_fac(t)
        return g

    c0, q0 = _initial_coefficients(spec, params)
    y = np.concatenate([c0, q0])
    states = np.empty((n_steps + 1, m))
    states[0] = y
    times = dt * np.arange(n_steps + 1)
    constant_load = f_fac is None and s_fac is None
    g_const = load(0.0)
    g_prev = g_const
    for n in range(n_steps):
        if constant_load:
            g_next = g_const
        else:
            g_next = load(times[n + 1])
        rhs = rhs_mat @ y + 0.5 * dt * (g_prev + g_next)
        y = scipy.linalg.lu_solve(lu, rhs)
        residual = np.linalg.norm(lhs @ y - rhs)
        scale = np.linalg.norm(rhs)
        if residual > STEP_RESIDUAL_RTOL * max(scale, 1e-300):
            raise StepFailure(
                f"step {n + 1} at t = {times[n + 1]:.6g}: relative residual "
                f"{residual / max(scale, 1e-300):.3e} exceeds {STEP_RESIDUAL_RTOL:.0e}"
            )
        states[n + 1] = y
        g_prev = g_next

    c = states[:, :m_u]
    q = states[:, m_u:]
    kinetic = np.einsum("ni,i,ni->n", c, operator_set.mass_diag, c)
    acoustic = np.einsum("nk,nk->n", q, q)
    return Trajectory(
        spec=spec,
        params=params,
        dt=dt,
        times=times,
        c=c,
        q=q,
        energy=0.5 * (params.rho0 * kinetic + params.alpha / params.rho0 * acoustic),
        h01=np.linalg.norm(c, axis=1),
        div=np.sqrt(np.maximum(np.einsum("ni,ij,nj->n", c, operator_set.div_gram, c, optimize=True), 0.0)),
        mass=params.rho0 + params.alpha * q[:, 0],
    )


@dataclass
class EnergyLedger:
    """Per-interval residuals of the discrete energy identity.

    residual_n = I(t_{n+1}) - I(t_n) + dissipation_n - work_n, where the
    time integrals use midpoint quadrature (averaged coefficient vectors,
    sources at mid-interval times).  Zero for Crank-Nicolson up to roundoff
    when the sources are time independent, O(dt^2) otherwise.
    """

    interval_midpoints: np.ndarray  # (N,)
    per_step: np.ndarray  # (N,)
    cumulative: np.ndarray  # (N,) running sums
    dissipation: np.ndarray  # (N,)
    work: np.ndarray  # (N,)

    @property
    def total(self) -> float:
        return float(self.cumulative[-1]) if len(self.cumulative) else 0.0


def energy_ledger(
    operator_set: OperatorSet, params: CompressibleParams, traj: Trajectory
) -> EnergyLedger:
    """Audit the energy identity of a compressible trajectory interval by interval."""
    spec = traj.spec
    if traj.c.shape[1] != spec.m_u or traj.q.shape[1] != spec.m_p:
        raise ValueError("trajectory does not match the operator set")
    dt = traj.dt
    c_mid = 0.5 * (traj.c[1:] + traj.c[:-1])
    q_mid = 0.5 * (traj.q[1:] + traj.q[:-1])
    t_mid = 0.5 * (traj.times[1:] + traj.times[:-1])

    delta_energy = np.diff(traj.energy)
    h01_sq = np.einsum("ni,ni->n", c_mid, c_mid)
    div_sq = np.einsum("ni,ij,nj->n", c_mid, operator_set.div_gram, c_mid, optimize=True)
    dissipation = dt * (params.mu * h01_sq + params.eta * div_sq)

    work = np.zeros(len(t_mid))
    if params.f is not None:
        G = coupling_matrix(spec, operator_set, params.f)
        work += params.alpha * np.einsum("nk,nk->n", c_mid @ G, q_mid)
    f_vec, f_fac, s_vec, s_fac = _forcing_terms(spec, params)
    if f_vec.any():
        factors = np.ones_like(t_mid) if f_fac is None else np.array([f_fac(t) for t in t_mid])
        work += (c_mid @ f_vec) * factors
    if s_vec.any():
        factors = np.ones_like(t_mid) if s_fac is None else np.array([s_fac(t) for t in t_mid])
        work += (q_mid @ s_vec) * factors / params.rho0
    work *= dt

    per_step = delta_energy + dissipation - work
    return EnergyLedger(
        interval_midpoints=t_mid,
        per_step=per_step,
        cumulative=np.cumsum(per_step),
        dissipation=dissipation,
        work=work,
    )


def mass_series(traj: Trajectory) -> np.ndarray:
    """Total mass M(t) = rho0 |D| + alpha * mean(p) at every node."""
    return traj.mass.copy()


@dataclass
class EstimateReport:
    """Evaluation of the a-priori bounds along one trajectory.

    All quantities use the discrete norms of the truncated spans (the dual
    norm of a momentum functional is the Euclidean norm of its pairing
    vector).  Violations set the ``ok`` flags, nothing is raised.
    """

    e_data: float
    a_const: float
    constants: MixedConstants
    certificate: object  # CertificateReport of the underlying differential inequality
    j_l2_bound: float
    i_inf_bound: float
    est1_lhs: float
    est1_constant: float
    est1_rhs: float
    est1_ok: bool
    est2_lhs: float
    est2_constant: float
    est2_rhs: float
    est2_ok: bool

    @property
    def ok(self) -> bool:
        return self.est1_ok and self.est2_ok and self.certificate.ok


def _sup_norm_on_grid(spec: BasisSpec, fld: Optional[SampledField]) -> float:
    if fld is None:
        return 0.0
    x, _ = spec.quad_rule()
    grid = np.linspace(0.0, 1.0, 4 * spec.quad_order + 1)
    vals = fld.spatial(grid[:, None], grid[None, :])
    if fld.vector:
        vals = np.broadcast_to(vals, (2, grid.size, grid.size))
        return float(np.sqrt((vals**2).sum(axis=0)).max())
    return float(np.abs(vals).max())


def apriori_check(
    operator_set: OperatorSet, params: CompressibleParams, traj: Trajectory
) -> EstimateReport:
    """Check the data-to-solution bounds with the explicit Gronwall-chain constants.

    The instrumented scalar series I(t), J(t) = sqrt(mu) |u|_{H10} together
    with a = 1 + sqrt(alpha) |f|_inf, b = |s|_{-1}/sqrt(mu) and
    c = |sigma|^2/(2 rho0 alpha) satisfy I' + J^2 <= aI + bJ + c; the bounds
    follow with C_a = 1 + A e^A, A = aT.
    """
    spec = traj.spec
    rho0, mu, eta, alpha, T = params.rho0, params.mu, params.eta, params.alpha, params.T
    times = traj.times

    f_vec, f_fac, s_vec, s_fac = _forcing_terms(spec, params)
    f_factors = (
        np.ones_like(times) if f_fac is None else np.array([f_fac(t) for t in times])
    )
    s_factors = (
        np.ones_like(times) if s_fac is None else np.array([s_fac(t) for t in times])
    )
    s_dual = np.linalg.norm(f_vec) * np.abs(f_factors)  # |<s(t), .>| in the dual norm
    sigma_l2 = np.linalg.norm(s_vec) * np.abs(s_factors)

    f_sup = _sup_norm_on_grid(spec, params.f)
    a_const = 1.0 + np.sqrt(alpha) * f_sup
    i_series = ScalarTrajectory(times, traj.energy, label="I")
    j_series = ScalarTrajectory(times, np.sqrt(mu) * traj.h01, label="J")
    a_series = ScalarTrajectory(times, np.full_like(times, a_const), label="a")
    b_series = ScalarTrajectory(times, s_dual / np.sqrt(mu), label="b")
    c_series = ScalarTrajectory(times, sigma_l2**2 / (2.0 * rho0 * alpha), label="c")
    certificate = verify_mixed(i_series, j_series, a_series, b_series, c_series)

    u0_l2 = np.sqrt(traj.c[0] @ (operator_set.mass_diag * traj.c[0]))
    p0_l2 = np.linalg.norm(traj.q[0])
    sigma_l2l2 = np.sqrt(np.trapezoid(sigma_l2**2, times))
    s_l2h = np.sqrt(np.trapezoid(s_dual**2, times))
    e_data = u0_l2 + np.sqrt(alpha) * p0_l2 + sigma_l2l2 / np.sqrt(alpha) + s_l2h

    constants = mixed_constants(a_const * T)
    i0 = traj.energy[0]
    c_l1 = np.trapezoid(c_series.values, times)
    b_l2 = np.sqrt(np.trapezoid(b_series.values**2, times))
    j_l2_bound = constants.c_a * (np.sqrt(i0) + np.sqrt(c_l1) + b_l2)
    i_inf_bound = constants.c_a_tilde * (i0 + c_l1 + b_l2**2)

    # (est1): |u|_{L2 H10} + |u|_{Linf L2} + sqrt(alpha) |p|_{Linf L2} <= C E
    u_l2h1 = np.sqrt(np.trapezoid(traj.h01**2, times))
    u_linf = np.sqrt(
        np.max(np.einsum("ni,i,ni->n", traj.c, operator_set.mass_diag, traj.c))
    )
    p_linf = np.max(np.linalg.norm(traj.q, axis=1))
    est1_lhs = u_l2h1 + u_linf + np.sqrt(alpha) * p_linf
    k1 = max(np.sqrt(rho0 / 2.0), np.sqrt(1.0 / (2.0 * rho0)), 1.0 / np.sqrt(mu))
    k2 = max(rho0 / 2.0, 1.0 / (2.0 * rho0), 1.0 / mu)
    est1_constant = constants.c_a * k1 / np.sqrt(mu) + (
        np.sqrt(2.0 / rho0) + np.sqrt(2.0 * rho0)
    ) * np.sqrt(constants.c_a_tilde * k2)
    est1_rhs = est1_constant * e_data
    est1_ok = bool(est1_lhs <= est1_rhs + 1e-12 * max(1.0, est1_rhs))

    # (est2): |u|_{L2 H10} + |du/dt|_{L2 H-1} <= (1/sqrt(alpha)) C~ E,
    # with M dc/dt read off the momentum equation at the nodes.
    G = (
        coupling_matrix(spec, operator_set, params.f)
        if params.f is not None
        else np.zeros((spec.m_u, spec.m_p))
    )
    momentum = (
        traj.q @ operator_set.div_coupling
        - mu * traj.c
        - eta * (traj.c @ operator_set.div_gram)
        + alpha * (traj.q @ G.T)
        + np.outer(f_factors, f_vec)
    ) / rho0
    ut_dual = np.linalg.norm(momentum, axis=1)
    est2_lhs = u_l2h1 + np.sqrt(np.trapezoid(ut_dual**2, times))
    b_norm = float(operator_set.b_s[0]) if operator_set.b_s.size else 0.0
    e_norm = float(np.linalg.norm(operator_set.div_gram, 2))
    g_norm = float(np.linalg.norm(G, 2)) if G.any() else 0.0
    bj = constants.c_a * k1  # bound on |J|_{L2} / E
    bi = constants.c_a_tilde * k2  # bound on |I|_{Linf} / E^2
    est2_constant = (
        (b_norm + alpha * g_norm) * np.sqrt(2.0 * rho0 * T * bi) / rho0
        + np.sqrt(alpha) * ((mu + eta * e_norm) * bj / np.sqrt(mu) + 1.0) / rho0
        + np.sqrt(alpha) * bj / np.sqrt(mu)
    )
    est2_rhs = est2_constant * e_data / np.sqrt(alpha)
    est2_ok = bool(est2_lhs <= est2_rhs + 1e-12 * max(1.0, est2_rhs))

    return EstimateReport(
        e_data=float(e_data),
        a_const=float(a_const),
        constants=constants,
        certificate=certificate,
        j_l2_bound=float(j_l2_bound),
        i_inf_bound=float(i_inf_bound),
        est1_lhs=float(est1_lhs),
        est1_constant=float(est1_constant),
        est1_rhs=float(est1_rhs),
        est1_ok=est1_ok,
        est2_lhs=float(est2_lhs),
        est2_constant=float(est2_constant),
        est2_rhs=float(est2_rhs),
        est2_ok=est2_ok,
    )
