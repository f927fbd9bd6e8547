"""Per-AP covariance state under rank-one coordinate updates.

For every AP the state keeps ``Qinv[m] = Q_m^{-1}`` and ``logdet[m] = log|Q_m|``
where ``Q_m = sum_k gamma_k beta_mk s_k s_k^H + sigma2 I``. A coordinate step
``gamma_k += delta`` adds ``c = delta * beta_mk`` times ``s_k s_k^H`` to every
``Q_m``; Sherman-Morrison keeps the inverse current and the matrix determinant
lemma keeps the log-determinant current, both in ``O(L^2)`` per AP.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class StateCorruptionError(ArithmeticError):
    """A rank-one update would make some ``Q_m`` singular or indefinite."""


DENOM_FLOOR = 1e-12


class CovState:
    """Inverses and log-determinants of the per-AP model covariances."""

    def __init__(self, M: int, L: int, sigma2: float):
        self.sigma2 = float(sigma2)
        self.Qinv = np.tile(np.eye(L, dtype=complex) / self.sigma2, (M, 1, 1))
        self.logdet = np.full(M, L * np.log(self.sigma2))

    @property
    def M(self) -> int:
        return self.Qinv.shape[0]

    @property
    def L(self) -> int:
        return self.Qinv.shape[1]

    def copy(self) -> "CovState":
        new = CovState.__new__(CovState)
        new.sigma2 = self.sigma2
        new.Qinv = self.Qinv.copy()
        new.logdet = self.logdet.copy()
        return new

    def rank1_update(self, m: int, s: np.ndarray, c: float) -> None:
        """``Q_m <- Q_m + c s s^H`` for a single AP."""
        if c == 0.0:
            return
        v = self.Qinv[m] @ s
        q = float(np.real(np.vdot(s, v)))
        denom = 1.0 + c * q
        if denom <= DENOM_FLOOR:
            raise StateCorruptionError(f"AP {m}: update denominator {denom:.3e} is not positive")
        self.Qinv[m] -= (c / denom) * np.outer(v, v.conj())
        self.logdet[m] += np.log(denom)

    def update_all(self, s: np.ndarray, c: np.ndarray, V: np.ndarray | None = None,
                   q: np.ndarray | None = None) -> None:
        """``Q_m <- Q_m + c[m] s s^H`` for every AP at once.

        ``V`` (rows ``Qinv[m] s``) and ``q`` (``s^H Qinv[m] s``) may be passed
        in when the caller already holds them for the current state.
        """
        if V is None:
            V = self.Qinv @ s
            q = np.real(V @ s.conj())
        denom = 1.0 + c * q
        if np.any(denom <= DENOM_FLOOR):
            m = int(np.argmin(denom))
            raise StateCorruptionError(f"AP {m}: update denominator {denom[m]:.3e} is not positive")
        w = (c / denom)[:, None] * V
        self.Qinv -= w[:, :, None] * V.conj()[:, None, :]
        self.logdet += np.log(denom)

    def symmetrize(self) -> None:
        self.Qinv = 0.5 * (self.Qinv + np.conj(np.swapaxes(self.Qinv, 1, 2)))

    def quad_forms(self, m: int, s: np.ndarray, beta_mk: float, QY_m: np.ndarray):
        return quad_forms(self, m, s, beta_mk, QY_m)

    def cost(self, sample_cov: np.ndarray) -> float:
        return ml_cost(self, sample_cov)


def quad_forms(state: CovState, m: int, s: np.ndarray, beta_mk: float, QY_m: np.ndarray):
    """``a = beta s^H Qinv s`` and ``b = beta s^H Qinv Q_Y Qinv s`` at AP ``m``."""
    v = state.Qinv[m] @ s
    a = beta_mk * np.vdot(s, v)
    b = beta_mk * np.vdot(v, QY_m @ v)
    return float(a.real), float(b.real)


def ml_cost(state: CovState, sample_cov: np.ndarray) -> float:
    """``sum_m log|Q_m| + tr(Q_m^{-1} Q_Y,m)`` from the tracked state."""
    # tr(A B) = sum_ij A_ij B_ji
    tr = np.einsum("mij,mji->m", state.Qinv, sample_cov).real
    return float(np.sum(state.logdet + tr))


def dominant_step(a: float, b: float, gamma_k: float) -> float:
    """Minimiser of the single-AP coordinate cost, clamped to keep ``gamma_k >= 0``."""
    return max((b - a) / (a * a), -gamma_k)


# -------------------------------------------------- from-scratch reference


def assemble_covariances(gamma, beta, S, sigma2) -> np.ndarray:
    """``Q_m = S diag(gamma * beta_m) S^H + sigma2 I`` for every AP, shape ``(M, L, L)``."""
    gamma = np.asarray(gamma, dtype=float)
    weights = beta * gamma[None, :]  # (M, K)
    Q = np.einsum("lk,mk,jk->mlj", S, weights, S.conj())
    Q += sigma2 * np.eye(S.shape[0])[None]
    return Q


def cost_from_scratch(gamma, beta, S, sigma2, sample_cov) -> float:
    """ML cost via Cholesky factorisation of freshly assembled covariances."""
    Q = assemble_covariances(gamma, beta, S, sigma2)
    total = 0.0
    for Qm, QYm in zip(Q, sample_cov):
        C = np.linalg.cholesky(Qm)
        total += 2.0 * np.sum(np.log(np.real(np.diag(C))))
        X = np.linalg.solve(C, QYm)
        X = np.linalg.solve(C.conj().T, X)
        total += float(np.real(np.trace(X)))
    return total


@dataclass
class GammaEstimate:
    """Detector output.

    ``cost_trace`` holds ``f(gamma^0), f(gamma^1), ...``; every entry is below
    its predecessor except possibly the last, which is the rejected sweep that
    triggered the stop.
    """

    gamma: np.ndarray
    cost_trace: list[float] = field(default_factory=list)
    iterations_run: int = 0
    audit_trace: list[float] = field(default_factory=list)
    nonzero_trace: list[int] = field(default_factory=list)

    @property
    def final_cost(self) -> float:
        # the accepted iterate is the last entry unless the final sweep was rejected
        trace = self.cost_trace
        if len(trace) >= 2 and trace[-1] >= trace[-2]:
            return trace[-2]
        return trace[-1]
