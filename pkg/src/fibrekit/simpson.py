"""Plain and twisted Simpson transforms between flat and Higgs data.

Plain transforms act on m x n coefficient arrays (chart coefficients of
almost-connections, ∂̄-operators and Higgs fields at one point).

Twisted transforms act on complexified vertical vectors written in a real
basis of the fiber tangent space: a length-2m complex vector, or a 2m x n
array with one column per base direction.  All complex structures, metrics
and twisting maps are real 2m x 2m matrices in that same basis.  Forms use
ω_J(X, Y) = g(JX, Y).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from .bundle import AdaptedChart
from .errors import DegenerateTwist, DimensionMismatch, SingularMetric
from .linalg import SECOND_STEP, ChartFunction, as_point, posdef_check, wirtinger_hessian

Coefficients = Union[np.ndarray, ChartFunction]
ConjugationRule = Callable[[np.ndarray, tuple], np.ndarray]

DEGENERACY_TOL = 1e-8
FRAME_TOL = 1e-9


def _at(value: Coefficients, point) -> np.ndarray:
    if isinstance(value, ChartFunction):
        return value(*as_point(point))
    return np.asarray(value, dtype=complex)


# --- relatively Kähler connections -----------------------------------------

@dataclass(frozen=True)
class FiberMetricSpec:
    """Fiber metric g_{αβ̄}, mixed terms g_{iβ̄}, or a potential φ with ω = i∂∂̄φ.

    Either ``g`` and ``mixed`` are given directly (shapes m x m and n x m),
    or both are derived from ``potential`` (a scalar chart function).
    """

    chart: AdaptedChart
    g: Optional[ChartFunction] = None
    mixed: Optional[ChartFunction] = None
    potential: Optional[ChartFunction] = None
    rel_step: float = SECOND_STEP
    inner_step: Optional[float] = None

    def __post_init__(self):
        if self.potential is None and self.g is None:
            raise ValueError("need either a fiber metric or a potential")
        if self.g is not None and self.g.shape != (self.chart.m, self.chart.m):
            raise DimensionMismatch(f"fiber metric must be {self.chart.m} x {self.chart.m}")
        if self.mixed is not None and self.mixed.shape != (self.chart.n, self.chart.m):
            raise DimensionMismatch(f"mixed terms must be {self.chart.n} x {self.chart.m}")

    def fiber_metric(self, point) -> np.ndarray:
        """G[α, β] = g_{αβ̄}."""
        if self.g is not None:
            return self.g(*as_point(point))
        # hessian axes: (inner β̄, outer α); FD noise breaks exact Hermitian symmetry
        G = wirtinger_hessian(self.potential, point, ("fiber", "hol"), ("fiber", "antihol"),
                              self.rel_step, self.inner_step).T
        return 0.5 * (G + G.conj().T)

    def mixed_terms(self, point) -> np.ndarray:
        """M[i, β] = g_{iβ̄}."""
        if self.mixed is not None:
            return self.mixed(*as_point(point))
        if self.potential is None:
            return np.zeros((self.chart.n, self.chart.m), dtype=complex)
        return wirtinger_hessian(self.potential, point, ("base", "hol"), ("fiber", "antihol"),
                              self.rel_step, self.inner_step).T


def connection_from_relative_kahler(metric: FiberMetricSpec, point) -> np.ndarray:
    """Γ_i^α = -g^{β̄α} g_{iβ̄}, returned as an m x n array."""
    G = metric.fiber_metric(point)
    ok, lam = posdef_check(G)
    if not ok:
        raise SingularMetric(f"fiber metric not positive definite (min eigenvalue {lam:.3e})")
    M = metric.mixed_terms(point)
    # g^{β̄α} is G⁻¹ read with β as the row index, so Γ = -G⁻ᵀ m_i
    return -np.linalg.solve(G.T, M.T)


# --- plain mechanism -------------------------------------------------------

def entrywise_conjugate(theta: np.ndarray, point=None) -> np.ndarray:
    """Conjugation rule for trivially real families: θ̄_{j̄}^α = conj(θ_j^α)."""
    return np.conj(theta)


def simpson_flat_to_higgs(partial_flat: Coefficients, partial_chern: Coefficients,
                          theta_conj_rule: ConjugationRule, dbar_flat: Coefficients,
                          point) -> tuple[np.ndarray, np.ndarray]:
    """θ = ½(∂_∇ - ∂^Ch),  ∂̄ = ∂̄_∇ - θ̄."""
    a, c, d = _at(partial_flat, point), _at(partial_chern, point), _at(dbar_flat, point)
    if not (a.shape == c.shape == d.shape):
        raise DimensionMismatch(f"coefficient shapes differ: {a.shape}, {c.shape}, {d.shape}")
    theta = 0.5 * (a - c)
    return theta, d - theta_conj_rule(theta, point)


def simpson_higgs_to_flat(dbar_higgs: Coefficients, theta: Coefficients, partial_chern: Coefficients,
                          theta_conj_rule: ConjugationRule, point) -> tuple[np.ndarray, np.ndarray]:
    """∂̄_∇ = ∂̄_f + θ̄,  ∂_∇ = ∂^Ch + 2θ."""
    d, t, c = _at(dbar_higgs, point), _at(theta, point), _at(partial_chern, point)
    if not (d.shape == t.shape == c.shape):
        raise DimensionMismatch(f"coefficient shapes differ: {d.shape}, {t.shape}, {c.shape}")
    return d + theta_conj_rule(t, point), c + 2.0 * t


# --- twisted mechanism -----------------------------------------------------

@dataclass(frozen=True)
class ComplexStructurePair:
    """Real operators J_A, J_B, J_C = J_A J_B and a metric g compatible with all three."""

    J_A: np.ndarray
    J_B: np.ndarray
    J_C: np.ndarray
    g: np.ndarray
    validate: bool = True

    def __post_init__(self):
        mats = [np.array(x, dtype=float) for x in (self.J_A, self.J_B, self.J_C, self.g)]
        dim = mats[0].shape[0]
        for M in mats:
            if M.shape != (dim, dim):
                raise DimensionMismatch("all frame operators must be square of one size")
            M.setflags(write=False)
        for name, M in zip(("J_A", "J_B", "J_C", "g"), mats):
            object.__setattr__(self, name, M)
        if self.validate:
            worst = max(self.defects().values())
            scale = max(1.0, float(np.linalg.norm(self.g)) * float(np.linalg.norm(np.linalg.inv(self.g))))
            if worst > FRAME_TOL * scale:
                raise ValueError(f"frame invariants violated (defect {worst:.3e})")

    @property
    def dim(self) -> int:
        return self.J_A.shape[0]

    def defects(self) -> dict[str, float]:
        I = np.eye(self.dim)
        out = {}
        for name in ("J_A", "J_B", "J_C"):
            J = getattr(self, name)
            out[f"{name}^2"] = float(np.max(np.abs(J @ J + I)))
            out[f"g-{name}"] = float(np.max(np.abs(J.T @ self.g @ J - self.g)))
        out["J_A J_B - J_C"] = float(np.max(np.abs(self.J_A @ self.J_B - self.J_C)))
        return out

    def kahler_form(self, which: str) -> np.ndarray:
        """Matrix W with ω_J(X, Y) = Xᵀ W Y."""
        J = getattr(self, f"J_{which}")
        return J.T @ self.g


@dataclass(frozen=True)
class TwistingMap:
    """Real isomorphism β with β J_A = J_B β."""

    beta: np.ndarray
    frames: Optional[ComplexStructurePair] = None

    def __post_init__(self):
        beta = np.array(self.beta, dtype=float)
        if beta.ndim != 2 or beta.shape[0] != beta.shape[1]:
            raise DimensionMismatch("twisting map must be square")
        if abs(np.linalg.det(beta)) < 1e-12:
            raise ValueError("twisting map is not invertible")
        beta.setflags(write=False)
        object.__setattr__(self, "beta", beta)
        if self.frames is not None:
            d = self.intertwining_defect(self.frames)
            if d > FRAME_TOL * max(1.0, float(np.linalg.norm(beta)) ** 2):
                raise ValueError(f"β J_A ≠ J_B β (defect {d:.3e})")

    @property
    def inverse(self) -> np.ndarray:
        return np.linalg.inv(self.beta)

    def intertwining_defect(self, frames: ComplexStructurePair) -> float:
        return float(np.max(np.abs(self.beta @ frames.J_A - frames.J_B @ self.beta)))

    def isometry_defect(self, frames: ComplexStructurePair) -> float:
        return float(np.max(np.abs(self.beta.T @ frames.g @ self.beta - frames.g)))


def twist_norm(frames: ComplexStructurePair) -> float:
    """|J_A - J_B|_g = sqrt(tr(D* D) / dim), D* the g-adjoint of D = J_A - J_B."""
    D = frames.J_A - frames.J_B
    adj = np.linalg.solve(frames.g, D.T @ frames.g)
    return math.sqrt(max(float(np.trace(adj @ D)), 0.0) / frames.dim)


def _checked_norm(frames: ComplexStructurePair) -> float:
    nrm = twist_norm(frames)
    if nrm < DEGENERACY_TOL:
        raise DegenerateTwist(f"|J_A - J_B| = {nrm:.3e}")
    return nrm


def project_10(frames: ComplexStructurePair, v: np.ndarray) -> np.ndarray:
    """J_B-(1,0) part ½(v - i J_B v)."""
    return 0.5 * (v - 1j * (frames.J_B @ v))


def theta_bar_J(theta: np.ndarray, frames: ComplexStructurePair) -> np.ndarray:
    """θ̄_J(v̄) = pr_{(1,0)}(i J_A conj(θ(v))) for a J_B-(1,0) value θ(v)."""
    theta = np.asarray(theta, dtype=complex)
    return project_10(frames, 1j * (frames.J_A @ np.conj(theta)))


def twisted_higgs_to_connection(dbar_B, dbar_B0, dbar_A0, theta, frames: ComplexStructurePair,
                                beta: TwistingMap, chern_A) -> tuple[np.ndarray, np.ndarray]:
    """∂̄_A = β⁻¹(∂̄_B - ∂̄_{B,0} + θ̄_J) + ∂̄_{A,0},  ∂_A = ∂_{ω^A} + 2|J_A - J_B| β⁻¹(θ)."""
    nrm = _checked_norm(frames)
    binv = beta.inverse
    theta = np.asarray(theta, dtype=complex)
    dbar_A = binv @ (np.asarray(dbar_B) - np.asarray(dbar_B0) + theta_bar_J(theta, frames)) + np.asarray(dbar_A0)
    partial_A = np.asarray(chern_A) + 2.0 * nrm * (binv @ theta)
    return dbar_A, partial_A


def twisted_connection_to_higgs(dbar_A, dbar_A0, dbar_B0, partial_A, frames: ComplexStructurePair,
                                beta: TwistingMap, chern_A) -> tuple[np.ndarray, np.ndarray]:
    """θ = β(∂_A - ∂_{ω^A}) / (2|J_A - J_B|),  ∂̄_B = β(∂̄_A - ∂̄_{A,0}) + ∂̄_{B,0} - θ̄_J."""
    nrm = _checked_norm(frames)
    b = beta.beta
    theta = (b @ (np.asarray(partial_A) - np.asarray(chern_A))) / (2.0 * nrm)
    dbar_B = b @ (np.asarray(dbar_A) - np.asarray(dbar_A0)) + np.asarray(dbar_B0) - theta_bar_J(theta, frames)
    return theta, dbar_B


def twist_parametrization(frames: ComplexStructurePair, angle: float) -> TwistingMap:
    """β = (cos a (id + J_C) + sin a (J_A + J_B)) / √2."""
    I = np.eye(frames.dim)
    beta = (math.cos(angle) * (I + frames.J_C) + math.sin(angle) * (frames.J_A + frames.J_B)) / math.sqrt(2.0)
    return TwistingMap(beta, frames)


def hypercomplex_conjugate_check(frames: ComplexStructurePair, v, df_v) -> float:
    """Compare i J_A(v̄) with the ω_B-Hamiltonian field of -½ conj(f_v).

    ``df_v`` is the differential of f_v as a complex covector in the real basis.
    """
    v = np.asarray(v, dtype=complex)
    df_v = np.asarray(df_v, dtype=complex)
    direct = 1j * (frames.J_A @ np.conj(v))
    # ι_X ω_B = (g J_B X)ᵀ
    hamiltonian = np.linalg.solve(frames.g @ frames.J_B, -0.5 * np.conj(df_v))
    return float(np.max(np.abs(direct - hamiltonian), initial=0.0))
