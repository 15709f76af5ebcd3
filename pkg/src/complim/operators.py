"""Galerkin matrices and coefficient-space realizations of the flow operators.

Assembles, from closed-form 1-D integrals only:

    M  (m_u x m_u)  diagonal velocity mass matrix,
    E  (m_u x m_u)  div-div Gram matrix, E_ij = (div e_i, div e_j),
    B  (m_p x m_u)  divergence coupling, B_kj = (div e_j, pressure mode k).

The row of B belonging to the constant pressure mode vanishes identically
(fields with zero trace have mean-zero divergence).  On top of these the
module provides the Leray projector, the inverse of the pressure gradient,
and a minimum-norm right inverse of the divergence, all through one
rank-revealing SVD of B restricted to the mean-zero pressure modes.

At equal truncations (n_p == n_u) that restriction is rank deficient by
one; every solve here is therefore rank-aware with relative tolerance
RANK_RTOL instead of assuming full row rank.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import (
    BasisSpec,
    PressureCoeffs,
    SampledField,
    VelocityCoeffs,
    cos_cos_integral,
    pressure_normalization,
    sin_cos_integral,
    velocity_mass_diagonal,
)

__all__ = [
    "OperatorSet",
    "HelmholtzParts",
    "AnnihilationError",
    "MeanNotZero",
    "assemble",
    "coupling_matrix",
    "leray_project",
    "grad_inverse",
    "bogovskii",
    "operator_norm_estimates",
]

RANK_RTOL = 1e-11
ANNIHILATION_TOL = 1e-8


class AnnihilationError(ValueError):
    """Functional handed to grad_inverse does not vanish on the solenoidal space."""


class MeanNotZero(ValueError):
    """Pressure-side datum handed to bogovskii has a nonzero mean."""


@dataclass(frozen=True)
class OperatorSet:
    """Assembled matrices plus the cached factorization of the mean-zero block of B.

    The stiffness matrix is the identity by basis normalization and is kept
    implicit.  ``b_u, b_s, b_vt`` hold the thin SVD of B[1:] truncated at
    ``b_rank``; ``kernel`` spans null(B[1:]) and is M-orthonormal.
    """

    spec: BasisSpec
    mass_diag: np.ndarray  # (m_u,)
    div_gram: np.ndarray  # E, (m_u, m_u)
    div_coupling: np.ndarray  # B, (m_p, m_u)
    b_u: np.ndarray  # (m_p-1, r)
    b_s: np.ndarray  # (r,)
    b_vt: np.ndarray  # (r, m_u)
    b_rank: int
    kernel: np.ndarray  # Z, (m_u, m_V) with Z' M Z = I
    full_row_rank: bool

    @property
    def m_kernel(self) -> int:
        return self.kernel.shape[1]


def assemble(spec: BasisSpec) -> OperatorSet:
    """Assemble M, E, B for the given basis and factor the mean-zero block of B."""
    n = spec.n_u
    mass_diag = velocity_mass_diagonal(spec)

    # E: diagonal within each component block, sine/cosine cross terms between them.
    idx = np.arange(1, n + 1)
    norms = spec.vel_norms  # n_ij at [i-1, j-1]
    diag_1 = (norms * idx[:, None] * np.pi) ** 2 / 4.0  # d/dx of component 1
    diag_2 = (norms * idx[None, :] * np.pi) ** 2 / 4.0  # d/dy of component 2
    E = np.zeros((spec.m_u, spec.m_u))
    half = n * n
    E[np.arange(half), np.arange(half)] = diag_1.ravel()
    E[np.arange(half, 2 * half), np.arange(half, 2 * half)] = diag_2.ravel()
    s_tab = np.array([[sin_cos_integral(a, b) for b in range(n + 1)] for a in range(1, n + 1)])
    # cross block: (div e_(1,i,j), div e_(2,i',j')) = n_ij n_i'j' pi^2 i j' S(i',i) S(j,j')
    for i in range(1, n + 1):
        for j in range(1, n + 1):
            row = (i - 1) * n + (j - 1)
            for ip in range(1, n + 1):
                if (i + ip) % 2 == 0:
                    continue
                for jp in range(1, n + 1):
                    if (j + jp) % 2 == 0:
                        continue
                    col = half + (ip - 1) * n + (jp - 1)
                    val = (
                        norms[i - 1, j - 1]
                        * norms[ip - 1, jp - 1]
                        * np.pi**2
                        * i
                        * jp
                        * s_tab[ip - 1, i]
                        * s_tab[j - 1, jp]
                    )
                    E[row, col] = val
                    E[col, row] = val

    B = np.zeros((spec.m_p, spec.m_u))
    for k in range(spec.n_p + 1):
        for l in range(spec.n_p + 1):
            K = spec.pressure_index(k, l)
            c_kl = pressure_normalization(k, l)
            for i in range(1, n + 1):
                for j in range(1, n + 1):
                    n_ij = norms[i - 1, j - 1]
                    v1 = n_ij * c_kl * i * np.pi * cos_cos_integral(i, k) * sin_cos_integral(j, l)
                    v2 = n_ij * c_kl * j * np.pi * sin_cos_integral(i, k) * cos_cos_integral(j, l)
                    if v1 != 0.0:
                        B[K, spec.velocity_index(0, i, j)] = v1
                    if v2 != 0.0:
                        B[K, spec.velocity_index(1, i, j)] = v2

    u, s, vt = np.linalg.svd(B[1:], full_matrices=True)
    rank = int(np.sum(s > RANK_RTOL * (s[0] if s.size else 1.0)))
    null = vt[rank:].T  # Euclidean-orthonormal kernel of B[1:]
    if null.shape[1] > 0:
        gram = null.T @ (mass_diag[:, None] * null)
        kernel = null @ np.linalg.inv(np.linalg.cholesky(gram)).T
        # order by smoothness: diagonalize the H10 Gram on the kernel, so the
        # columns are discrete Stokes modes with ascending Rayleigh quotients
        # (M-orthonormality is preserved) and "first kernel vector" is the
        # fundamental solenoidal mode.
        _, vecs = np.linalg.eigh(kernel.T @ kernel)
        kernel = kernel @ vecs
        flips = np.sign(kernel[np.abs(kernel).argmax(axis=0), np.arange(kernel.shape[1])])
        kernel *= np.where(flips == 0.0, 1.0, flips)
    else:
        kernel = null
    return OperatorSet(
        spec=spec,
        mass_diag=mass_diag,
        div_gram=E,
        div_coupling=B,
        b_u=np.ascontiguousarray(u[:, :rank]),
        b_s=s[:rank],
        b_vt=np.ascontiguousarray(vt[:rank]),
        b_rank=rank,
        kernel=kernel,
        full_row_rank=rank == spec.m_p - 1,
    )


def coupling_matrix(spec: BasisSpec, operator_set: OperatorSet, f: SampledField) -> np.ndarray:
    """Force coupling G with G_ik = int_D (pressure mode k) (f . velocity mode i) dx."""
    if not f.vector:
        raise ValueError("coupling_matrix expects a 2-vector force field")
    x, w = spec.quad_rule()
    fvals = f(x[:, None], x[None, :])  # (2, Q, Q), spatial part
    sin_w = spec.velocity_sine_table(x) * w  # (N_u, Q)
    cos_t = spec.pressure_cosine_table(x)  # (N_p+1, Q)
    pres = np.einsum("ka,lb->klab", cos_t, cos_t).reshape(spec.m_p, x.size, x.size)
    pres *= spec.pres_norms.reshape(-1, 1, 1)
    G = np.empty((spec.m_u, spec.m_p))
    half = spec.n_u**2
    for comp in (0, 1):
        block = np.einsum("ia,Kab,jb->ijK", sin_w, pres * fvals[comp], sin_w, optimize=True)
        G[comp * half : (comp + 1) * half] = block.reshape(half, spec.m_p)
    G *= np.tile(spec.vel_norms.ravel(), 2)[:, None]
    return G


@dataclass
class HelmholtzParts:
    """L^2-orthogonal split of a velocity field into weakly solenoidal and gradient parts."""

    solenoidal: VelocityCoeffs
    gradient: VelocityCoeffs


def leray_project(operator_set: OperatorSet, c: VelocityCoeffs) -> HelmholtzParts:
    """Project onto the discrete solenoidal space {c : B c = 0}, minimizing L^2 distance.

    Equivalent to the saddle system M c~ + B' lambda = M c, B c~ = 0 with the
    constant pressure row dropped; solved through the M-orthonormal kernel
    basis, which stays well defined when B is rank deficient.
    """
    values = np.asarray(c.values, dtype=float)
    if values.shape != (operator_set.spec.m_u,):
        raise ValueError("coefficient length does not match the operator set")
    Z = operator_set.kernel
    sol = Z @ (Z.T @ (operator_set.mass_diag * values))
    spec = operator_set.spec
    return HelmholtzParts(
        solenoidal=VelocityCoeffs(spec, sol),
        gradient=VelocityCoeffs(spec, values - sol),
    )


def grad_inverse(operator_set: OperatorSet, g: np.ndarray) -> PressureCoeffs:
    """Recover the mean-zero pressure q with -B' q = g from a momentum functional.

    ``g`` holds the duality pairings of the functional with the velocity
    basis.  It must annihilate the discrete solenoidal space; otherwise no
    pressure gradient can represent it and AnnihilationError is raised.
    """
    g = np.asarray(g, dtype=float)
    spec = operator_set.spec
    if g.shape != (spec.m_u,):
        raise ValueError("functional vector length does not match the velocity span")
    norm_g = np.linalg.norm(g)
    if norm_g > 0.0:
        defect = np.linalg.norm(operator_set.kernel.T @ g)
        if defect > ANNIHILATION_TOL * norm_g:
            raise AnnihilationError(
                f"functional has a solenoidal component ({defect:.3e} > {ANNIHILATION_TOL:.0e} * |g|)"
            )
    # min-norm least squares for B[1:]' q = -g via the cached SVD
    q_reduced = operator_set.b_u @ ((operator_set.b_vt @ -g) / operator_set.b_s)
    q = np.zeros(spec.m_p)
    q[1:] = q_reduced
    return PressureCoeffs(spec, q)


def bogovskii(operator_set: OperatorSet, fq: PressureCoeffs) -> tuple[VelocityCoeffs, float]:
    """Minimum-H^1_0-norm velocity c with B c = fq, plus the attained residual |Bc - fq|.

    The datum must be mean zero, mirroring the domain of the continuous
    right inverse of the divergence.
    """
    values = np.asarray(fq.values, dtype=float)
    spec = operator_set.spec
    if values.shape != (spec.m_p,):
        raise ValueError("pressure coefficient length does not match the operator set")
    if abs(values[0]) > 1e-12:
        raise MeanNotZero(f"datum has mean {values[0]:.3e}, expected 0")
    rhs = values[1:]
    c = operator_set.b_vt.T @ ((operator_set.b_u.T @ rhs) / operator_set.b_s)
    residual = float(np.linalg.norm(operator_set.div_coupling[1:] @ c - rhs))
    return VelocityCoeffs(spec, c), residual


def operator_norm_estimates(operator_set: OperatorSet) -> dict:
    """Discrete operator norms realized by the factorization of B.

    Both the divergence right inverse (L^2 -> H^1_0) and the gradient
    inverse (dual norm -> L^2) attain 1/sigma_min over the effective range,
    where sigma_min is the smallest singular value above the rank cut.
    """
    s_min = float(operator_set.b_s[-1])
    return {
        "bogovskii_norm": 1.0 / s_min,
        "grad_inverse_norm": 1.0 / s_min,
        "b_min_singular_value": s_min,
        "b_rank": operator_set.b_rank,
        "full_row_rank": operator_set.full_row_rank,
    }
