"""Observer and feedback synthesis.

The design pipeline is:

1. pick base gain vectors ``k`` (plant side) and ``p`` (exosystem side)
   whose companion matrices are Hurwitz;
2. schedule them with a bandwidth ``omega_o``, which places the error
   poles at ``omega_o`` times the base roots;
3. solve the constrained Sylvester (regulator) system for the coupling
   matrix S and the disturbance read-out row Q;
4. assemble the combined state-plus-disturbance estimator, and optionally
   a scheduled state-feedback row for the closed loop.

The estimator's error dynamics are block-triangularizable by S, so the
closed-loop spectrum is exactly the union of the three designed spectra.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg
from .disturbance import Exosystem
from .errors import (
    DimensionMismatch,
    NonHurwitz,
    NonHurwitzBase,
    NotDiagonalizable,
    NotObservablePair,
    SingularSystem,
    SpectraOverlap,
)
from .plant import GeneralPlant, Plant, controllability_canonical_transform, observability_matrix

__all__ = [
    "GainBase",
    "ScheduledGains",
    "schedule_gains",
    "RegulatorSolution",
    "solve_regulator",
    "solve_regulator_spectral",
    "ObserverRealization",
    "assemble_edo",
    "assemble_known_dynamics_observer",
    "StabilizerGain",
    "stabilizer_gain",
    "closed_loop",
    "error_system",
]


@dataclass(frozen=True)
class GainBase:
    """Base gain vectors, validated to be Hurwitz at construction.

    ``k`` (length n) and ``p`` (length m+1) define companion matrices with
    characteristic polynomials ``l^n - k_n l^(n-1) - ... - k_1`` and
    ``l^(m+1) - p_m l^m - ... - p_0``; both must be Hurwitz, which in
    particular forces ``k_1 != 0`` and ``p_0 != 0``.
    """

    k: tuple
    p: tuple

    def __post_init__(self):
        object.__setattr__(self, "k", tuple(float(v) for v in self.k))
        object.__setattr__(self, "p", tuple(float(v) for v in self.p))
        if not self.k or not self.p:
            raise DimensionMismatch("gain base vectors must be non-empty")
        for name, vec in (("k", self.k), ("p", self.p)):
            if not linalg.is_hurwitz(linalg.companion_from_last_row(vec)):
                raise NonHurwitzBase(f"companion matrix of base {name}={vec} is not Hurwitz")


@dataclass(frozen=True, eq=False)
class ScheduledGains:
    """Bandwidth-scheduled injection gains."""

    omega_o: float
    K_omega: np.ndarray  # length n
    P_omega: np.ndarray  # length m+1


def schedule_gains(p: Plant, exo: Exosystem, base: GainBase, omega_o: float) -> ScheduledGains:
    """Materialize the scheduled gain vectors.

    ``K_omega[j] = k_j omega^(n-j) - a_j`` (1-based powers n..1) and
    ``P_omega = [p_0 omega^(m+1), p_1 omega^m - g_1, ..., p_m omega - g_m]``,
    so the scheduled companion matrices have spectra ``omega_o`` times the
    base spectra.
    """
    n, mp1 = p.n, exo.dim
    if len(base.k) != n or len(base.p) != mp1:
        raise DimensionMismatch(
            f"base sizes ({len(base.k)}, {len(base.p)}) do not fit plant order {n} "
            f"and exosystem dimension {mp1}"
        )
    if omega_o <= 0.0:
        raise ValueError("omega_o must be positive")
    w = float(omega_o)
    K = np.array([base.k[j] * w ** (n - j) - p.a[j] for j in range(n)])
    P = np.empty(mp1)
    P[0] = base.p[0] * w ** mp1
    for j in range(1, mp1):
        P[j] = base.p[j] * w ** (mp1 - j) - exo.g[j - 1]
    return ScheduledGains(omega_o=w, K_omega=K, P_omega=P)


@dataclass(frozen=True, eq=False)
class RegulatorSolution:
    """Solution (S, Q) of the constrained Sylvester system."""

    S: np.ndarray  # n x (m+1)
    Q: np.ndarray  # length m+1


def _solve_constrained_sylvester(A_inj, G, B, C, P_row):
    """Joint dense solve of ``A_inj S - S G = B Q`` with ``C S = P_row``.

    Q is itself an unknown, so the Sylvester part is vectorized
    (column-major) and the output constraint appended, giving one square
    linear system in the entries of S and Q.  The system is heavily graded
    at large bandwidths (entries spanning many orders of magnitude), so it
    goes through the LAPACK solver and singularity is decided from the
    residual rather than from a global pivot threshold.
    """
    n = A_inj.shape[0]
    d = G.shape[0]
    nS = n * d
    M = np.zeros((nS + d, nS + d))
    rhs = np.zeros(nS + d)
    M[:nS, :nS] = np.kron(np.eye(d), A_inj) - np.kron(G.T, np.eye(n))
    M[:nS, nS:] = -np.kron(np.eye(d), B.reshape(-1, 1))
    M[nS:, :nS] = np.kron(np.eye(d), C.reshape(1, -1))
    rhs[nS:] = P_row
    try:
        sol = np.linalg.solve(M, rhs)
        # two refinement sweeps with an extended-precision residual; the
        # system is graded enough that the raw forward error would
        # otherwise leak into the designed closed-loop spectrum
        M_ld = M.astype(np.longdouble)
        rhs_ld = rhs.astype(np.longdouble)
        for _ in range(2):
            resid = np.asarray(rhs_ld - M_ld @ sol.astype(np.longdouble), dtype=float)
            sol = sol + np.linalg.solve(M, resid)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(
            "regulator system is singular; an exosystem eigenvalue collided with the observer poles"
        ) from exc
    residual = np.abs(M @ sol - rhs).max()
    scale = np.abs(M).max() * max(np.abs(sol).max(), 1.0) + np.abs(rhs).max()
    if not np.all(np.isfinite(sol)) or residual > 1e-6 * scale:
        raise SingularSystem(
            "regulator system is numerically singular; spectra are not disjoint"
        )
    S = sol[:nS].reshape((d, n)).T
    Q = sol[nS:]
    return S, Q


def solve_regulator(p: Plant, exo: Exosystem, sg: ScheduledGains) -> RegulatorSolution:
    """Solve the regulator equations for the scheduled observer.

    Returns (S, Q) with ``(A + K_omega C) S - S G = B Q`` and
    ``C S = P_omega``.  Solvability only needs the scheduled observer
    spectrum to avoid the exosystem spectrum, which the Hurwitz base
    guarantees since the exosystem has no stable eigenvalues.
    """
    _check_dims(p, exo, sg)
    A_inj = p.A + np.outer(sg.K_omega, p.C)
    S, Q = _solve_constrained_sylvester(A_inj, exo.G, p.B, p.C, sg.P_omega)
    return RegulatorSolution(S=S, Q=Q)


def solve_regulator_spectral(p: Plant, exo: Exosystem, sg: ScheduledGains) -> RegulatorSolution:
    """Eigenvector-based regulator solve; cross-check path.

    Valid when the exosystem matrix is diagonalizable (distinct
    eigenvalues): along each eigenvector, Q is the scheduled output row
    divided by the observer transfer evaluated at that eigenvalue, and the
    matching S column follows from one resolvent solve.
    """
    _check_dims(p, exo, sg)
    G = exo.G
    lams, V = np.linalg.eig(G)
    d = G.shape[0]
    for i in range(d):
        for j in range(i + 1, d):
            if abs(lams[i] - lams[j]) <= 1e-9:
                raise NotDiagonalizable(f"repeated exosystem eigenvalue {lams[i]:.3g}")
    A_inj = p.A + np.outer(sg.K_omega, p.C)
    n = p.n
    S_cols = np.empty((n, d), dtype=complex)
    q = np.empty(d, dtype=complex)
    for j in range(d):
        M = A_inj - lams[j] * np.eye(n)
        try:
            x = np.linalg.solve(M, p.B.astype(complex))
        except np.linalg.LinAlgError as exc:
            raise SingularSystem(f"{lams[j]} is an observer pole") from exc
        gain = p.C @ x  # C (A + K_omega C - lam)^-1 B
        if abs(gain) < 1e-300:
            raise SingularSystem(f"transmission zero at exosystem eigenvalue {lams[j]}")
        q[j] = (sg.P_omega @ V[:, j]) / gain
        S_cols[:, j] = x * q[j]
    Vinv = np.linalg.inv(V)
    S = S_cols @ Vinv
    Q = q @ Vinv
    scale = max(1.0, np.abs(S).max(), np.abs(Q).max())
    if max(np.abs(S.imag).max(), np.abs(Q.imag).max()) > 1e-8 * scale:
        raise SingularSystem("spectral solve left a complex residue")
    return RegulatorSolution(S=S.real.copy(), Q=Q.real.copy())


def _check_dims(p: Plant, exo: Exosystem, sg: ScheduledGains):
    if sg.K_omega.shape != (p.n,) or sg.P_omega.shape != (exo.dim,):
        raise DimensionMismatch(
            f"scheduled gains sized ({sg.K_omega.shape[0]}, {sg.P_omega.shape[0]}) do not fit "
            f"plant order {p.n} and exosystem dimension {exo.dim}"
        )


@dataclass(frozen=True, eq=False)
class ObserverRealization:
    """State-space realization of a combined state/disturbance estimator.

    The state stacks the plant estimate (first ``n`` entries) over the
    disturbance-carrier estimate.  Integrating
    ``z' = A_hat z + L_y y + B_u u`` and reading ``d_hat = d_hat_row z``
    reproduces the designed estimator.
    """

    n: int
    A_hat: np.ndarray
    L_y: np.ndarray
    B_u: np.ndarray
    d_hat_row: np.ndarray

    @property
    def dim(self) -> int:
        return self.A_hat.shape[0]

    @property
    def v_dim(self) -> int:
        return self.dim - self.n

    @property
    def extract_x(self) -> np.ndarray:
        return np.hstack([np.eye(self.n), np.zeros((self.n, self.v_dim))])

    @property
    def extract_v(self) -> np.ndarray:
        return np.hstack([np.zeros((self.v_dim, self.n)), np.eye(self.v_dim)])


def assemble_edo(p: Plant, exo: Exosystem, sg: ScheduledGains, rs: RegulatorSolution) -> ObserverRealization:
    """Assemble the extended-dynamics observer realization.

    Blockwise: the state-estimate drift is ``A + (K_omega + S E) C`` with
    ``B Q`` coupling into the carrier estimate; the carrier drift is G
    with ``-E C`` coupling; the measurement enters through
    ``-(K_omega + S E)`` and ``E``.
    """
    _check_dims(p, exo, sg)
    if rs.S.shape != (p.n, exo.dim) or rs.Q.shape != (exo.dim,):
        raise DimensionMismatch(
            f"regulator solution sized {rs.S.shape} does not fit plant order {p.n} "
            f"and exosystem dimension {exo.dim}"
        )
    n, d = p.n, exo.dim
    KSE = sg.K_omega + rs.S @ exo.E
    A_hat = np.zeros((n + d, n + d))
    A_hat[:n, :n] = p.A + np.outer(KSE, p.C)
    A_hat[:n, n:] = np.outer(p.B, rs.Q)
    A_hat[n:, :n] = -np.outer(exo.E, p.C)
    A_hat[n:, n:] = exo.G
    L_y = np.concatenate([-KSE, exo.E])
    B_u = np.concatenate([p.B, np.zeros(d)])
    d_hat_row = np.concatenate([np.zeros(n), rs.Q])
    return ObserverRealization(n=n, A_hat=A_hat, L_y=L_y, B_u=B_u, d_hat_row=d_hat_row)


def assemble_known_dynamics_observer(
    p_general: GeneralPlant,
    G,
    P_row,
    F0,
    F2,
) -> ObserverRealization:
    """Luenberger observer for a disturbance with fully known dynamics.

    Scheme: with ``A + F0 C`` Hurwitz and disjoint from the spectrum of G,
    solve ``(A + F0 C) S - S G = B Q`` with ``C S = P_row``, then inject
    with ``F1 = F0 + S F2`` on the state block and ``F2`` on the carrier
    block.  The error matrix is similar to a block-triangular form with
    diagonal blocks ``A + F0 C`` and ``G + F2 P_row``.
    """
    G = np.atleast_2d(np.asarray(G, dtype=float))
    P_row = np.asarray(P_row, dtype=float).reshape(-1)
    F0 = np.asarray(F0, dtype=float).reshape(-1)
    F2 = np.asarray(F2, dtype=float).reshape(-1)
    n, m = p_general.n, G.shape[0]
    if G.shape != (m, m) or P_row.shape != (m,) or F0.shape != (n,) or F2.shape != (m,):
        raise DimensionMismatch("inconsistent observer design dimensions")
    A_F0 = p_general.A + np.outer(F0, p_general.C)
    eig_closed = linalg.eigenvalues(A_F0)
    eig_G = linalg.eigenvalues(G)
    if min(abs(a - b) for a in eig_closed for b in eig_G) < 1e-9:
        raise SpectraOverlap("spectrum of A + F0 C meets the disturbance dynamics spectrum")
    obs = observability_matrix(G, P_row)
    sv = np.linalg.svd(obs, compute_uv=False)
    if sv[0] == 0.0 or sv[-1] <= 1e-9 * sv[0]:
        raise NotObservablePair("(G, P_row) is not observable")
    if not linalg.is_hurwitz(A_F0):
        raise NonHurwitz("A + F0 C is not Hurwitz")
    if not linalg.is_hurwitz(G + np.outer(F2, P_row)):
        raise NonHurwitz("G + F2 P_row is not Hurwitz")
    S, Q = _solve_constrained_sylvester(A_F0, G, p_general.B, p_general.C, P_row)
    F1 = F0 + S @ F2
    A_hat = np.zeros((n + m, n + m))
    A_hat[:n, :n] = p_general.A + np.outer(F1, p_general.C)
    A_hat[:n, n:] = np.outer(p_general.B, Q)
    A_hat[n:, :n] = -np.outer(F2, p_general.C)
    A_hat[n:, n:] = G
    L_y = np.concatenate([-F1, F2])
    B_u = np.concatenate([p_general.B, np.zeros(m)])
    d_hat_row = np.concatenate([np.zeros(n), Q])
    return ObserverRealization(n=n, A_hat=A_hat, L_y=L_y, B_u=B_u, d_hat_row=d_hat_row)


@dataclass(frozen=True, eq=False)
class StabilizerGain:
    """Scheduled state-feedback row and the transform that produced it."""

    omega_c: float
    F: np.ndarray
    U: np.ndarray


def stabilizer_gain(p: Plant, k_ctrl, omega_c: float) -> StabilizerGain:
    """High-gain state feedback placing the closed poles at scaled base roots.

    The scheduled row ``K_c = [k_1 w^n - a_1, ..., k_n w - a_n]`` stabilizes
    the controllability-form twin of the plant; pulling it back through the
    canonical transform U gives ``F = K_c U`` with
    ``spectrum(A + B F) = omega_c * roots(base)``.
    """
    k_ctrl = tuple(float(v) for v in k_ctrl)
    if len(k_ctrl) != p.n:
        raise DimensionMismatch(f"control base length {len(k_ctrl)} does not match order {p.n}")
    if not linalg.is_hurwitz(linalg.companion_from_last_row(k_ctrl)):
        raise NonHurwitzBase(f"companion matrix of control base {k_ctrl} is not Hurwitz")
    if omega_c <= 0.0:
        raise ValueError("omega_c must be positive")
    U = controllability_canonical_transform(p)
    w = float(omega_c)
    n = p.n
    K_c = np.array([k_ctrl[j] * w ** (n - j) - p.a[j] for j in range(n)])
    F = K_c @ U
    return StabilizerGain(omega_c=w, F=F, U=U)


def closed_loop(p: Plant, obs: ObserverRealization, fb: StabilizerGain, rs: RegulatorSolution):
    """Drift matrix and disturbance column of the full closed loop.

    State ordering is (plant state, observer state); the control is
    ``u = F x_hat - Q v_hat`` and the measurement feeds the observer
    noise- and ramp-free.  The spectrum is the union of the stabilized
    plant, scheduled observer, and scheduled exosystem spectra.
    """
    n = p.n
    if obs.n != n or fb.F.shape != (n,) or rs.Q.shape != (obs.v_dim,):
        raise DimensionMismatch("plant, observer, feedback, and regulator sizes disagree")
    F_aug = np.concatenate([fb.F, -rs.Q])
    dim = n + obs.dim
    M = np.zeros((dim, dim))
    M[:n, :n] = p.A
    M[:n, n:] = np.outer(p.B, F_aug)
    M[n:, n:] = obs.A_hat + np.outer(obs.B_u, F_aug)
    M[n:, :n] = np.outer(obs.L_y, p.C)
    dist_col = np.concatenate([p.B, np.zeros(obs.dim)])
    return M, dist_col


def error_system(p: Plant, exo: Exosystem, sg: ScheduledGains, rs: RegulatorSolution):
    """Estimation-error dynamics (A_err, B_err) driven by the residual slope.

    ``A_err`` couples the state error to the carrier error exactly as the
    observer does; the forcing column is the zero eigenvector of G scaled
    by ``1 / (Q B_d)``.
    """
    _check_dims(p, exo, sg)
    n, d = p.n, exo.dim
    if rs.S.shape != (n, d) or rs.Q.shape != (d,):
        raise DimensionMismatch("regulator solution does not fit the plant/exosystem pair")
    KSE = sg.K_omega + rs.S @ exo.E
    A_err = np.zeros((n + d, n + d))
    A_err[:n, :n] = p.A + np.outer(KSE, p.C)
    A_err[:n, n:] = np.outer(p.B, rs.Q)
    A_err[n:, :n] = -np.outer(exo.E, p.C)
    A_err[n:, n:] = exo.G
    B_err = np.concatenate([np.zeros(n), exo.B_d]) / float(rs.Q @ exo.B_d)
    return A_err, B_err
