"""Nonsteady Stokes flow in the discrete solenoidal subspace.

The state is reduced to coordinates y with c = Z y, where the columns of Z
span {c : B c = 0} and are M-orthonormal, so the evolution is simply

    rho0 dy/dt + mu (Z'Z) y = Z' F(t),      F_i = rho0 <f, velocity mode i>.

Solenoidality therefore holds exactly at every step.  The pressure is
recovered node by node from the momentum residual through the inverse of
the pressure gradient: with dc/dt read off the reduced equation (not from
finite differences, which would lose an order),

    q(t_n) = grad_inverse(F(t_n) - rho0 M dc/dt - mu c),

mean zero by construction and shiftable afterwards to any target mean.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Union

import numpy as np
import scipy.linalg

from .basis import (
    BasisSpec,
    PressureCoeffs,
    SampledField,
    VelocityCoeffs,
    project_velocity,
    velocity_load_vector,
)
from .compressible import STEP_RESIDUAL_RTOL, CompressibleParams, StepFailure
from .operators import OperatorSet, grad_inverse, leray_project

__all__ = [
    "SolenoidalBasis",
    "IncompressibleTrajectory",
    "EmptyKernel",
    "nullspace_basis",
    "simulate_incompressible",
    "initial_pressure",
    "shift_pressure_mean",
]


class EmptyKernel(RuntimeError):
    """The discrete solenoidal space is trivial for this truncation."""


@dataclass(frozen=True)
class SolenoidalBasis:
    """M-orthonormal basis Z of the discrete solenoidal space (B Z = 0, Z'MZ = I)."""

    spec: BasisSpec
    z: np.ndarray  # (m_u, m_V)

    @property
    def m_v(self) -> int:
        return self.z.shape[1]


def nullspace_basis(operator_set: OperatorSet) -> SolenoidalBasis:
    """Kernel basis of the divergence coupling, M-orthonormalized.

    Raises EmptyKernel when no discrete solenoidal field exists, which does
    happen at the smallest truncations (n_u = n_p = 1 leaves m_V = 0).
    """
    if operator_set.kernel.shape[1] == 0:
        raise EmptyKernel(
            f"no solenoidal modes for n_u={operator_set.spec.n_u}, n_p={operator_set.spec.n_p}"
        )
    return SolenoidalBasis(spec=operator_set.spec, z=operator_set.kernel)


@dataclass
class IncompressibleTrajectory:
    """Reduced coefficients, reconstructed velocity and recovered pressure per node."""

    spec: BasisSpec
    params: CompressibleParams
    dt: float
    times: np.ndarray  # (N+1,)
    y: np.ndarray  # (N+1, m_V)
    c: np.ndarray  # (N+1, m_u), c = Z y
    q: np.ndarray  # (N+1, m_p), mean zero before shifting
    energy: np.ndarray  # (N+1,), rho0 |u|^2 / 2
    h01: np.ndarray
    div: np.ndarray
    energy_residual: np.ndarray  # (N,), per-interval identity defect

    @property
    def n_steps(self) -> int:
        return len(self.times) - 1

    def velocity_at(self, node: int) -> VelocityCoeffs:
        return VelocityCoeffs(self.spec, self.c[node].copy())

    def pressure_at(self, node: int) -> PressureCoeffs:
        return PressureCoeffs(self.spec, self.q[node].copy())


def _z_matrix(basis: Union[SolenoidalBasis, np.ndarray]) -> np.ndarray:
    return basis.z if isinstance(basis, SolenoidalBasis) else np.asarray(basis)


def simulate_incompressible(
    spec: BasisSpec,
    operator_set: OperatorSet,
    solenoidal: Union[SolenoidalBasis, np.ndarray],
    params: CompressibleParams,
) -> IncompressibleTrajectory:
    """Integrate the Stokes system on the same grid policy as the compressible runs.

    The initial velocity is projected onto the span and then Leray-projected,
    so an initial condition with a gradient part starts from its solenoidal
    component.  ``params.alpha`` only enters through the default dt policy,
    keeping the grid aligned with a compressible companion run.
    """
    Z = _z_matrix(solenoidal)
    dt_req = params.validate(spec.n_u)
    n_steps = max(1, round(params.T / dt_req))
    dt = params.T / n_steps
    m_v = Z.shape[1]

    if params.u0 is None:
        c0 = np.zeros(spec.m_u)
    elif isinstance(params.u0, VelocityCoeffs):
        c0 = params.u0.values.copy()
    else:
        c0 = project_velocity(spec, params.u0).values
    c0 = leray_project(operator_set, VelocityCoeffs(spec, c0)).solenoidal.values
    y = Z.T @ (operator_set.mass_diag * c0)

    if params.f is not None:
        f_vec = params.rho0 * velocity_load_vector(spec, params.f)
        f_fac = params.f.time_factor
    else:
        f_vec, f_fac = np.zeros(spec.m_u), None

    def load_full(t: float) -> np.ndarray:
        return f_vec if f_fac is None else f_vec * f_fac(t)

    stiff = Z.T @ Z  # ((Zy, Zy')) in reduced coordinates
    lhs = params.rho0 * np.eye(m_v) + 0.5 * dt * params.mu * stiff
    rhs_mat = params.rho0 * np.eye(m_v) - 0.5 * dt * params.mu * stiff
    lu = scipy.linalg.lu_factor(lhs)

    times = dt * np.arange(n_steps + 1)
    ys = np.empty((n_steps + 1, m_v))
    ys[0] = y
    g_prev = Z.T @ load_full(0.0)
    for n in range(n_steps):
        g_next = g_prev if f_fac is None else Z.T @ load_full(times[n + 1])
        rhs = rhs_mat @ y + 0.5 * dt * (g_prev + g_next)
        y = scipy.linalg.lu_solve(lu, rhs)
        residual = np.linalg.norm(lhs @ y - rhs)
        if residual > STEP_RESIDUAL_RTOL * max(np.linalg.norm(rhs), 1e-300):
            raise StepFailure(
                f"step {n + 1} at t = {times[n + 1]:.6g}: reduced solve residual too large"
            )
        ys[n + 1] = y
        g_prev = g_next

    c = ys @ Z.T
    # node-wise pressure recovery from the momentum residual; the residual
    # annihilates the kernel by Galerkin orthogonality, so its (roundoff)
    # kernel component is removed before inverting the gradient
    loads = np.array([load_full(t) for t in times]) if f_fac is not None else None
    q = np.zeros((n_steps + 1, spec.m_p))
    for n in range(n_steps + 1):
        F_n = f_vec if loads is None else loads[n]
        ydot = (Z.T @ F_n - params.mu * (stiff @ ys[n])) / params.rho0
        terms = (F_n, params.rho0 * operator_set.mass_diag * (Z @ ydot), params.mu * c[n])
        g = terms[0] - terms[1] - terms[2]
        g -= operator_set.mass_diag * (Z @ (Z.T @ g))
        if np.linalg.norm(g) > 1e-13 * max(np.linalg.norm(t) for t in terms):
            q[n] = grad_inverse(operator_set, g).values

    # energy identity audit: rho0 d|u|^2/dt + 2 mu |u|^2_{H10} = 2 (rho0 f, u)
    y_mid = 0.5 * (ys[1:] + ys[:-1])
    t_mid = 0.5 * (times[1:] + times[:-1])
    diss = 2.0 * params.mu * dt * np.einsum("ni,ij,nj->n", y_mid, stiff, y_mid, optimize=True)
    if f_fac is None:
        work = 2.0 * dt * (y_mid @ (Z.T @ f_vec))
    else:
        factors = np.array([f_fac(t) for t in t_mid])
        work = 2.0 * dt * (y_mid @ (Z.T @ f_vec)) * factors
    l2_sq = np.einsum("ni,ni->n", ys, ys)
    residuals = params.rho0 * np.diff(l2_sq) + diss - work

    return IncompressibleTrajectory(
        spec=spec,
        params=params,
        dt=dt,
        times=times,
        y=ys,
        c=c,
        q=q,
        energy=0.5 * params.rho0 * l2_sq,
        h01=np.linalg.norm(c, axis=1),
        div=np.sqrt(
            np.maximum(np.einsum("ni,ij,nj->n", c, operator_set.div_gram, c, optimize=True), 0.0)
        ),
        energy_residual=residuals,
    )


def initial_pressure(
    spec: BasisSpec,
    operator_set: OperatorSet,
    solenoidal: Union[SolenoidalBasis, np.ndarray],
    u0_solenoidal: VelocityCoeffs,
    f_at_0: Optional[SampledField] = None,
    *,
    rho0: float = 1.0,
    mu: float = 1.0,
) -> PressureCoeffs:
    """Well-defined initial pressure of the Stokes problem.

    Forms the t = 0 momentum residual of the reduced evolution started from
    ``u0_solenoidal`` and inverts the pressure gradient on it; the result is
    mean zero and coincides with the node-0 recovery of a simulation run.
    """
    Z = _z_matrix(solenoidal)
    c0 = np.asarray(u0_solenoidal.values, dtype=float)
    kernel_defect = np.linalg.norm(operator_set.div_coupling[1:] @ c0)
    if kernel_defect > 1e-8 * max(1.0, np.linalg.norm(c0)):
        raise ValueError(
            f"u0 is not discretely solenoidal (|B u0| = {kernel_defect:.3e})"
        )
    if f_at_0 is not None:
        F0 = rho0 * velocity_load_vector(spec, f_at_0) * f_at_0.at_time(0.0)
    else:
        F0 = np.zeros(spec.m_u)
    y0 = Z.T @ (operator_set.mass_diag * c0)
    ydot = (Z.T @ F0 - mu * (Z.T @ Z) @ y0) / rho0
    terms = (F0, rho0 * operator_set.mass_diag * (Z @ ydot), mu * c0)
    g = terms[0] - terms[1] - terms[2]
    g -= operator_set.mass_diag * (Z @ (Z.T @ g))
    if np.linalg.norm(g) <= 1e-13 * max(np.linalg.norm(t) for t in terms):
        return PressureCoeffs(spec, np.zeros(spec.m_p))
    return grad_inverse(operator_set, g)


def shift_pressure_mean(traj: IncompressibleTrajectory, A: float) -> IncompressibleTrajectory:
    """Shift the recovered pressure so its mean equals A at every node.

    Only the constant-mode entry changes; the represented gradient B'q is
    untouched because the constant row of B vanishes.
    """
    q = traj.q.copy()
    q[:, 0] = A
    return replace(traj, q=q)
