"""Built-in families with closed-form oracles.

Abelian family conventions
--------------------------
Base coordinates ``s`` are indexed by pairs ``(i, j)``, ``1 <= i <= j <= k``,
in row-major order, with ``Π = Σ s_ij V_ij``.  Moving along ``∂/∂s_ij``
therefore changes Π by exactly ``V_ij``, where
``(V_ij)_{μν} = δ_{iμ}δ_{jν} + δ_{jμ}δ_{iν}``; so ``s_ii = Π_ii / 2``.

Fiber coordinates are ``z = (q, p) ∈ ℂ^{2k}``.  Real vertical vectors use
the basis order ``(q_x, q_y, p_x, p_y)``, each block of size k.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional

import numpy as np

from .bundle import AdaptedChart, Connection10Spec, DbarSpec, HiggsSpec
from .errors import DimensionMismatch, IndexOutOfRange, SingularMetric, UnknownFamily
from .linalg import (ChartFunction, SiegelPoint, as_point, directional_derivative,
                     posdef_check, siegel_sample, wirtinger_hessian, wirtinger_jacobian)
from .simpson import ComplexStructurePair, FiberMetricSpec, TwistingMap, connection_from_relative_kahler
from .transport import BasePath

SQRT_HALF = math.sqrt(0.5)


# --- Siegel-space coordinates ----------------------------------------------

def base_pairs(k: int) -> list[tuple[int, int]]:
    return [(i, j) for i in range(1, k + 1) for j in range(i, k + 1)]


def base_dimension(k: int) -> int:
    return k * (k + 1) // 2


def variation_matrix(k: int, i: int, j: int) -> np.ndarray:
    """V_ij, 1-based, i <= j."""
    if not (1 <= i <= j <= k):
        raise IndexOutOfRange(f"need 1 <= i <= j <= {k}, got ({i}, {j})")
    V = np.zeros((k, k))
    V[i - 1, j - 1] += 1.0
    V[j - 1, i - 1] += 1.0
    return V


def siegel_from_coordinates(s, k: int) -> np.ndarray:
    s = np.asarray(s, dtype=complex)
    if s.shape != (base_dimension(k),):
        raise DimensionMismatch(f"expected {base_dimension(k)} base coordinates, got {s.shape}")
    Pi = np.zeros((k, k), dtype=complex)
    for c, (i, j) in zip(s, base_pairs(k)):
        Pi = Pi + c * variation_matrix(k, i, j)
    return Pi


def siegel_coordinates(Pi) -> np.ndarray:
    Pi = np.asarray(Pi.Pi if isinstance(Pi, SiegelPoint) else Pi, dtype=complex)
    return np.array([Pi[i - 1, j - 1] / (2.0 if i == j else 1.0) for i, j in base_pairs(Pi.shape[0])])


def _k_from_fiber(z) -> int:
    if len(z) % 2:
        raise DimensionMismatch("abelian fiber coordinates come in (q, p) pairs")
    return len(z) // 2


@dataclass(frozen=True)
class AbelianFamilyPoint:
    Pi: SiegelPoint
    q: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        q = np.atleast_1d(np.asarray(self.q, dtype=complex))
        p = np.atleast_1d(np.asarray(self.p, dtype=complex))
        if q.shape != (self.Pi.k,) or p.shape != (self.Pi.k,):
            raise DimensionMismatch("q and p must have k components")
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(p))):
            raise ValueError("coordinates must be finite")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "p", p)

    @property
    def k(self) -> int:
        return self.Pi.k

    @classmethod
    def from_chart(cls, s, z) -> "AbelianFamilyPoint":
        s, z = as_point((s, z))
        k = _k_from_fiber(z)
        return cls(SiegelPoint(siegel_from_coordinates(s, k)), z[:k], z[k:])

    def chart_point(self) -> tuple[np.ndarray, np.ndarray]:
        return siegel_coordinates(self.Pi), np.concatenate([self.q, self.p])

    @classmethod
    def random(cls, rng: np.random.Generator, k: int, radius: float = 2.0) -> "AbelianFamilyPoint":
        Pi = siegel_sample(k, int(rng.integers(2**31)))
        q = rng.uniform(-radius, radius, k) + 1j * rng.uniform(-radius, radius, k)
        p = rng.uniform(-radius, radius, k) + 1j * rng.uniform(-radius, radius, k)
        return cls(Pi, q, p)


# --- vertical vectors ------------------------------------------------------

@dataclass(frozen=True)
class VerticalField:
    """a·∂_q + b·∂_p + c·∂_q̄ + d·∂_p̄ at one point."""

    q: np.ndarray
    p: np.ndarray
    qbar: np.ndarray
    pbar: np.ndarray

    @classmethod
    def make(cls, k: int, q=None, p=None, qbar=None, pbar=None) -> "VerticalField":
        zero = np.zeros(k, dtype=complex)
        parts = [zero if x is None else np.asarray(x, dtype=complex) for x in (q, p, qbar, pbar)]
        return cls(*parts)

    def to_real(self) -> np.ndarray:
        """Coefficients on (∂_{q_x}, ∂_{q_y}, ∂_{p_x}, ∂_{p_y})."""
        return np.concatenate([0.5 * (self.q + self.qbar), 0.5j * (self.qbar - self.q),
                               0.5 * (self.p + self.pbar), 0.5j * (self.pbar - self.p)])

    @classmethod
    def from_real(cls, v) -> "VerticalField":
        v = np.asarray(v, dtype=complex)
        k = len(v) // 4
        qx, qy, px, py = v[:k], v[k:2 * k], v[2 * k:3 * k], v[3 * k:]
        return cls(qx + 1j * qy, px + 1j * py, qx - 1j * qy, px - 1j * py)

    def __add__(self, other: "VerticalField") -> "VerticalField":
        return VerticalField(self.q + other.q, self.p + other.p, self.qbar + other.qbar, self.pbar + other.pbar)

    def __neg__(self) -> "VerticalField":
        return VerticalField(-self.q, -self.p, -self.qbar, -self.pbar)

    def __sub__(self, other: "VerticalField") -> "VerticalField":
        return self + (-other)

    def __mul__(self, c) -> "VerticalField":
        return VerticalField(c * self.q, c * self.p, c * self.qbar, c * self.pbar)

    __rmul__ = __mul__

    def max_abs(self) -> float:
        return float(max(np.max(np.abs(x), initial=0.0) for x in (self.q, self.p, self.qbar, self.pbar)))


# --- hyperkähler structure -------------------------------------------------

@dataclass(frozen=True)
class HyperkahlerFrame(ComplexStructurePair):
    Pi: Optional[np.ndarray] = None

    def kahler_forms(self) -> dict[str, np.ndarray]:
        """The three Kähler forms assembled block by block (W[a, b] = ω(∂_a, ∂_b))."""
        Y = np.asarray(self.Pi).imag
        Yi = np.linalg.inv(Y)
        I = np.eye(Y.shape[0])
        qx, qy, px, py = range(4)
        forms = {}
        W = _blocks(Y.shape[0], {(qx, qy): Yi, (qy, qx): -Yi.T, (px, py): Y, (py, px): -Y.T})
        forms["B"] = W
        forms["A"] = _blocks(Y.shape[0], {(px, qy): I, (qy, px): -I, (qx, py): -I, (py, qx): I})
        forms["C"] = _blocks(Y.shape[0], {(px, qx): I, (qx, px): -I, (py, qy): -I, (qy, py): I})
        return forms


def _blocks(k: int, entries: Mapping[tuple[int, int], np.ndarray]) -> np.ndarray:
    M = np.zeros((4 * k, 4 * k))
    for (r, c), block in entries.items():
        M[r * k:(r + 1) * k, c * k:(c + 1) * k] = block
    return M


def hyperkahler_frame(Pi: SiegelPoint) -> HyperkahlerFrame:
    """g, J_A, J_B, J_C on the real basis (q_x, q_y, p_x, p_y).

    ``J(∂_a) = M ∂_b`` is stored as block (row b, column a) = M.
    """
    Y = Pi.Pi_y
    try:
        Yi = np.linalg.inv(Y)
    except np.linalg.LinAlgError as exc:
        raise SingularMetric("Im Π is singular") from exc
    Yi = 0.5 * (Yi + Yi.T)
    k = Pi.k
    I = np.eye(k)
    qx, qy, px, py = range(4)
    J_B = _blocks(k, {(qy, qx): I, (qx, qy): -I, (py, px): I, (px, py): -I})
    J_A = _blocks(k, {(py, qx): -Yi, (px, qy): -Yi, (qy, px): Y, (qx, py): Y})
    J_C = _blocks(k, {(px, qx): -Yi, (py, qy): Yi, (qx, px): Y, (qy, py): -Y})
    g = _blocks(k, {(qx, qx): Yi, (qy, qy): Yi, (px, px): Y, (py, py): Y})
    return HyperkahlerFrame(J_A, J_B, J_C, g, True, Pi.Pi)


# --- flat coordinates ------------------------------------------------------

def flat_coordinates(point: AbelianFamilyPoint) -> tuple[np.ndarray, np.ndarray]:
    """ξ = Π_y⁻¹ q_y - i p_x,  η = q_x - Π_x Π_y⁻¹ q_y + i(Π_x p_x - Π_y p_y)."""
    X, Y = point.Pi.Pi_x, point.Pi.Pi_y
    w = np.linalg.solve(Y, point.q.imag)
    xi = w - 1j * point.p.real
    eta = point.q.real - X @ w + 1j * (X @ point.p.real - Y @ point.p.imag)
    return xi, eta


def flat_to_qp(Pi: SiegelPoint, xi, eta) -> tuple[np.ndarray, np.ndarray]:
    """Inverse of :func:`flat_coordinates`."""
    xi, eta = np.asarray(xi, dtype=complex), np.asarray(eta, dtype=complex)
    q = eta.real + Pi.Pi @ xi.real
    p = -1j * np.linalg.solve(Pi.Pi_y, eta.imag + Pi.Pi.conj() @ xi.imag)
    return q, p


def _flat_from_chart(x: np.ndarray, k: int) -> np.ndarray:
    n = base_dimension(k)
    Pi = siegel_from_coordinates(x[:n], k)
    X, Y = Pi.real, Pi.imag
    q, p = x[n:n + k], x[n + k:]
    w = np.linalg.solve(Y, q.imag)
    return np.concatenate([w - 1j * p.real, q.real - X @ w + 1j * (X @ p.real - Y @ p.imag)])


# --- the vertical fields of the family ---------------------------------------

def _pieces(point: AbelianFamilyPoint, i: int, j: int):
    V = variation_matrix(point.k, i, j)
    Yi = np.linalg.inv(point.Pi.Pi_y)
    return V, Yi


def gauss_manin_lift(point: AbelianFamilyPoint, i: int, j: int, pbar_sign: float = 1.0) -> VerticalField:
    """Vertical part of the Gauss–Manin lift of ∂_ij.

    ∂_ij ↦ ∂_ij + V Π_y⁻¹ q_y·∂_q + (i/2) Π_y⁻¹ V p·∂_p - (i/2) Π_y⁻¹ V p·∂_p̄.

    ``pbar_sign=-1`` flips the last term; it exists only as a negative control.
    """
    V, Yi = _pieces(point, i, j)
    p = point.p
    return VerticalField.make(point.k, q=V @ Yi @ point.q.imag, p=0.5j * Yi @ V @ p,
                              pbar=-0.5j * pbar_sign * Yi @ V @ p)


def kodaira_spencer_higgs(point: AbelianFamilyPoint, i: int, j: int) -> VerticalField:
    """θ(∂_ij) = -(i/2) V p·∂_q."""
    V, _ = _pieces(point, i, j)
    return VerticalField.make(point.k, q=-0.5j * V @ point.p)


def hamiltonian(point: AbelianFamilyPoint, i: int, j: int) -> complex:
    """H_ij = (i/4) pᵀ V p."""
    V, _ = _pieces(point, i, j)
    return complex(0.25j * point.p @ V @ point.p)


def hamiltonian_differential(point: AbelianFamilyPoint, i: int, j: int) -> np.ndarray:
    """dH_ij = (i/2)(V p)·dp as a covector on (q_x, q_y, p_x, p_y)."""
    V, _ = _pieces(point, i, j)
    w = 0.5j * V @ point.p
    zero = np.zeros(point.k, dtype=complex)
    return np.concatenate([zero, zero, w, 1j * w])


def hamiltonian_check(point: AbelianFamilyPoint, i: int, j: int) -> float:
    """max |ι_θ(dp∧dq) - dH| with dp∧dq = ω_C + i ω_A from the displayed forms."""
    forms = hyperkahler_frame(point.Pi).kahler_forms()
    omega = forms["C"] + 1j * forms["A"]
    theta = kodaira_spencer_higgs(point, i, j).to_real()
    return float(np.max(np.abs(theta @ omega - hamiltonian_differential(point, i, j))))


def symplectic_connection_abelian(point: AbelianFamilyPoint, i: int, j: int) -> VerticalField:
    """Vertical part 𝒱 = i V p·∂_q + i Π_y⁻¹ V p·∂_p̄ of the symplectic connection."""
    V, Yi = _pieces(point, i, j)
    return VerticalField.make(point.k, q=1j * V @ point.p, pbar=1j * Yi @ V @ point.p)


def _flat_to_vertical(point: AbelianFamilyPoint, g_xi: np.ndarray, g_eta: np.ndarray) -> VerticalField:
    """Push a (1,0) vector Γ^ξ ∂_ξ + Γ^η ∂_η forward to the (q, p) coordinates."""
    Pi = point.Pi.Pi
    Yi = np.linalg.inv(point.Pi.Pi_y)
    # q = (η + η̄)/2 + Π(ξ + ξ̄)/2,  p = -Π_y⁻¹((η - η̄) + Π̄(ξ - ξ̄))/2
    return VerticalField(q=0.5 * g_eta + 0.5 * Pi @ g_xi,
                         p=-0.5 * Yi @ (g_eta + Pi.conj() @ g_xi),
                         qbar=0.5 * g_eta + 0.5 * Pi.conj() @ g_xi,
                         pbar=0.5 * Yi @ (g_eta + Pi @ g_xi))


def symplectic_connection_potential(point: AbelianFamilyPoint, i: int, j: int) -> VerticalField:
    """𝒱 rebuilt from the closed-form fiber metric inverse and mixed terms of φ = p†Π_y p."""
    V, Yi = _pieces(point, i, j)
    X, p = point.Pi.Pi_x, point.p
    G_inv = 2.0 * np.block([[Yi, -Yi @ X], [-X @ Yi, point.Pi.Pi_y + X @ Yi @ X]])
    mixed = np.concatenate([0.5j * (1j * V @ p - X @ Yi @ V @ p), -0.5j * Yi @ V @ p])
    gamma = -G_inv @ mixed
    return _flat_to_vertical(point, gamma[:point.k], gamma[point.k:])


def symplectic_metric_blocks(Pi: SiegelPoint) -> np.ndarray:
    """Fiber metric of φ in the (ξ, η) coordinates, closed form."""
    X, Y = Pi.Pi_x, Pi.Pi_y
    Yi = np.linalg.inv(Y)
    return 0.5 * np.block([[Y + X.T @ Yi @ X, X.T @ Yi], [Yi @ X, Yi]])


def abelian_potential(k: int) -> ChartFunction:
    """φ = p†Π_y p on the chart (s, (ξ, η)), with p recovered from the flat coordinates."""
    def phi(s, w):
        Pi = siegel_from_coordinates(s, k)
        Y = Pi.imag
        # p from the inverse flat-coordinate relation
        p = -1j * np.linalg.solve(Y, w[k:].imag + Pi.conj() @ w[:k].imag)
        return (p.conj() @ Y @ p).real
    return ChartFunction(phi, ())


def symplectic_connection_hessian_columns(point: AbelianFamilyPoint) -> dict[tuple[int, int], VerticalField]:
    """𝒱 for every base direction, from finite-difference second derivatives of φ = p†Π_y p."""
    k = point.k
    chart = AdaptedChart(base_dimension(k), 2 * k)
    # φ is quadratic in the fiber, so the inner fiber stencil can be wide (no truncation
    # error) and the outer base step small without amplifying rounding
    metric = FiberMetricSpec(chart, potential=abelian_potential(k), rel_step=1e-4, inner_step=0.1)
    xi, eta = flat_coordinates(point)
    s = siegel_coordinates(point.Pi)
    gamma = connection_from_relative_kahler(metric, (s, np.concatenate([xi, eta])))
    return {pair: _flat_to_vertical(point, gamma[:k, col], gamma[k:, col])
            for col, pair in enumerate(base_pairs(k))}


def symplectic_connection_hessian(point: AbelianFamilyPoint, i: int, j: int) -> VerticalField:
    variation_matrix(point.k, i, j)
    return symplectic_connection_hessian_columns(point)[(i, j)]


def dbar_offset_abelian(point: AbelianFamilyPoint, i: int, j: int) -> VerticalField:
    """∂̄_{B,0} - ∂̄_B on ∂_{ij̄}: (i/2) Π_y⁻¹ V p̄·∂_p."""
    V, Yi = _pieces(point, i, j)
    return VerticalField.make(point.k, p=0.5j * Yi @ V @ point.p.conj())


def canonical_twist(Pi: SiegelPoint) -> TwistingMap:
    """β with β⁻¹ = √½ (id - J_C)."""
    frame = hyperkahler_frame(Pi)
    beta_inv = SQRT_HALF * (np.eye(frame.dim) - frame.J_C)
    return TwistingMap(np.linalg.inv(beta_inv), frame)


def twist_uniqueness_coefficients(points, pairs=None) -> np.ndarray:
    """Least-squares (a0, a1, a2, a3) with β⁻¹ = a0 id + a1 J_A + a2 J_B + a3 J_C
    reproducing the symplectic connection through 2√2 β⁻¹(θ)."""
    rows, rhs = [], []
    for point in points:
        frame = hyperkahler_frame(point.Pi)
        ops = (np.eye(frame.dim), frame.J_A, frame.J_B, frame.J_C)
        for i, j in (pairs or base_pairs(point.k)):
            theta = kodaira_spencer_higgs(point, i, j).to_real()
            target = -symplectic_connection_abelian(point, i, j).to_real()
            cols = np.stack([2.0 * math.sqrt(2.0) * (M @ theta) for M in ops], axis=1)
            rows.extend([cols.real, cols.imag])
            rhs.extend([target.real, target.imag])
    coeffs, *_ = np.linalg.lstsq(np.vstack(rows), np.concatenate(rhs), rcond=None)
    return coeffs


# --- chart-level specs of the abelian family -------------------------------

def _abelian_domain(k: int):
    def inside(s, z):
        return posdef_check(siegel_from_coordinates(s, k).imag)[0]
    return inside


def abelian_chart(k: int) -> AdaptedChart:
    return AdaptedChart(base_dimension(k), 2 * k, _abelian_domain(k))


def _columns(k: int, fn: Callable) -> ChartFunction:
    n = base_dimension(k)

    def evaluate(s, z):
        point = AbelianFamilyPoint.from_chart(s, z)
        return np.stack([fn(point, i, j) for i, j in base_pairs(k)], axis=1)

    return ChartFunction(evaluate, (2 * k, n))


def gauss_manin_connection(k: int, pbar_sign: float = 1.0) -> Connection10Spec:
    hol = _columns(k, lambda pt, i, j: (lambda v: np.concatenate([v.q, v.p]))(gauss_manin_lift(pt, i, j, pbar_sign)))
    anti = _columns(k, lambda pt, i, j: (lambda v: np.concatenate([v.qbar, v.pbar]))(gauss_manin_lift(pt, i, j, pbar_sign)))
    return Connection10Spec(abelian_chart(k), hol, anti)


def kodaira_spencer_higgs_spec(k: int) -> HiggsSpec:
    return HiggsSpec(abelian_chart(k), _columns(k, lambda pt, i, j: np.concatenate(
        [kodaira_spencer_higgs(pt, i, j).q, kodaira_spencer_higgs(pt, i, j).p])))


def dbar_offset_spec(k: int) -> DbarSpec:
    return DbarSpec(abelian_chart(k), _columns(k, lambda pt, i, j: np.concatenate(
        [dbar_offset_abelian(pt, i, j).q, dbar_offset_abelian(pt, i, j).p])))


def gauss_manin_flatness_defect(point: AbelianFamilyPoint, i: int, j: int, pbar_sign: float = 1.0) -> float:
    """Rate of change of (ξ, η) along the real lift of Re ∂_ij; zero for a flat lift."""
    k = point.k
    s, z = point.chart_point()
    conn = gauss_manin_connection(k, pbar_sign)
    col = base_pairs(k).index((i, j))
    ds = np.zeros(len(s), dtype=complex)
    ds[col] = 1.0
    dz = conn.gamma_hol(s, z) @ ds + np.conj(conn.gamma_antihol(s, z)) @ np.conj(ds)
    x = np.concatenate([s, z])
    rate = directional_derivative(lambda y: _flat_from_chart(y, k), x, np.concatenate([ds, dz]))
    return float(np.max(np.abs(rate)))


def gauss_manin_trajectory_defect(k: int, path: BasePath, z0, pbar_sign: float = 1.0,
                                  step: float = 1e-3) -> float:
    """Largest drift of (ξ, η) along the transported trajectory, endpoint included."""
    from .transport import horizontal_lift

    res = horizontal_lift(gauss_manin_connection(k, pbar_sign), path, z0, step=step, refine=False)
    if not res.completed:
        return math.inf
    start = np.concatenate(flat_coordinates(AbelianFamilyPoint.from_chart(path(0.0), res.states[0])))
    drift = 0.0
    for t, z in zip(res.times, res.states):
        here = np.concatenate(flat_coordinates(AbelianFamilyPoint.from_chart(path(float(t)), z)))
        drift = max(drift, float(np.max(np.abs(here - start))))
    return drift


def siegel_loop(rng: np.random.Generator, k: int, radius: float = 0.05,
                center: Optional[SiegelPoint] = None) -> BasePath:
    """A small smooth closed loop in the base coordinates around a random Siegel point."""
    Pi = center or siegel_sample(k, int(rng.integers(2**31)))
    s0 = siegel_coordinates(Pi)
    n = len(s0)
    a = rng.normal(size=n) + 1j * rng.normal(size=n)
    b = rng.normal(size=n) + 1j * rng.normal(size=n)
    # keep the whole loop well inside the Siegel domain
    r = min(radius, posdef_check(Pi.Pi_y)[1] / (8.0 * n))
    a *= r / np.max(np.abs(a))
    b *= r / np.max(np.abs(b))
    w = 2 * math.pi
    return BasePath(lambda t: s0 + a * (math.cos(w * t) - 1.0) + b * math.sin(w * t),
                    lambda t: w * (-a * math.sin(w * t) + b * math.cos(w * t)))


# --- Hermitian vector bundles ----------------------------------------------

@dataclass(frozen=True)
class HermitianBundleSpec:
    """h(s) with H[α, β] = h_{αβ̄}; ``dh(s)`` optionally returns ∂_i H stacked as (m, m, n)."""

    h: Callable[[np.ndarray], np.ndarray]
    n: int
    m: int
    dh: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def metric(self, s) -> np.ndarray:
        H = np.asarray(self.h(np.atleast_1d(np.asarray(s, dtype=complex))), dtype=complex)
        if H.shape != (self.m, self.m):
            raise DimensionMismatch(f"metric must be {self.m} x {self.m}")
        return H

    def metric_derivative(self, s) -> np.ndarray:
        s = np.atleast_1d(np.asarray(s, dtype=complex))
        if self.dh is not None:
            return np.asarray(self.dh(s), dtype=complex)
        fn = ChartFunction(lambda s_, z_: self.metric(s_), (self.m, self.m))
        return wirtinger_jacobian(fn, (s, np.zeros(1)), "base", "hol", rel_step=1e-3)


def chern_connection_hermitian(spec: HermitianBundleSpec, s, z) -> np.ndarray:
    """Γ_i^α = -h^{β̄α} z^γ ∂_i h_{γβ̄}, as an m x n array."""
    s, z = as_point((s, z))
    H = spec.metric(s)
    ok, _ = posdef_check(H)
    if not ok:
        raise SingularMetric("Hermitian metric is not positive definite")
    dH = spec.metric_derivative(s)
    # column i: -H⁻ᵀ (∂_i H)ᵀ z
    rhs = np.einsum("gbi,g->bi", dH, z)
    return -np.linalg.solve(H.T, rhs)


def chern_connection(spec: HermitianBundleSpec) -> Connection10Spec:
    chart = AdaptedChart(spec.n, spec.m)
    return Connection10Spec(chart, ChartFunction(lambda s, z: chern_connection_hermitian(spec, s, z),
                                                 (spec.m, spec.n)))


def hermitian_potential(spec: HermitianBundleSpec) -> ChartFunction:
    return ChartFunction(lambda s, z: (z @ spec.metric(s) @ z.conj()).real, ())


def chern_identity_defect(spec: HermitianBundleSpec, point) -> float:
    """max over (i, j) of |(ω - ω_∇)_{ij̄} - (-i⟨F_h z, z⟩_h)_{ij̄}|.

    The left side uses second derivatives of φ = zᵀ H z̄; the right side uses
    the curvature of the Chern connection, F_h z = -F^{1,1}.
    """
    from .bundle import curvature_F11_pure

    s, z = as_point(point)
    H = spec.metric(s)
    conn = chern_connection(spec)
    hess = wirtinger_hessian(hermitian_potential(spec), (s, z), ("base", "hol"), ("base", "antihol"))  # [j, i]
    G = conn.gamma_hol(s, z)
    omega_conn = G.T @ H @ G.conj()                                      # [i, j]
    lhs = 1j * (hess.T - omega_conn)
    F = curvature_F11_pure(conn, (s, z)).values                          # [α, i, j]
    rhs = 1j * np.einsum("aij,ab,b->ij", F, H, z.conj())
    return float(np.max(np.abs(lhs - rhs)))


def random_hermitian_bundle(rng: np.random.Generator, n: int = 1, m: int = 2) -> HermitianBundleSpec:
    """h(s) = I + M(s) M(s)†, M affine in (s, s̄); positive definite everywhere."""
    coeff = 0.5 * (rng.normal(size=(1 + 2 * n, m, m)) + 1j * rng.normal(size=(1 + 2 * n, m, m)))

    def h(s):
        M = np.einsum("kab,k->ab", coeff, np.concatenate([[1.0], s, s.conj()]))
        return np.eye(m) + M @ M.conj().T

    return HermitianBundleSpec(h, n, m)


def gaussian_line_bundle() -> HermitianBundleSpec:
    """h(s) = exp(-|s|²) on a line bundle over ℂ."""
    def h(s):
        return np.array([[np.exp(-abs(s[0]) ** 2)]])

    def dh(s):
        return np.array([[[-np.conj(s[0]) * np.exp(-abs(s[0]) ** 2)]]])

    return HermitianBundleSpec(h, 1, 1, dh)


def gaussian_principal_connection():
    """The Chern connection of :func:`gaussian_line_bundle` as a principal connection, A_s = -s̄."""
    from .bundle import PrincipalConnectionSpec

    return PrincipalConnectionSpec(1, 1, lambda s: np.array([[[-np.conj(s[0])]]]))


def random_principal_connection(rng: np.random.Generator, n: int = 2, rank: int = 2, scale: float = 0.5):
    """A_i, B_j̄ polynomial of degree ≤ 2 in (s, s̄) with random complex matrix coefficients."""
    from .bundle import PrincipalConnectionSpec

    def draw():
        return scale * (rng.normal(size=(n, 1 + 2 * n + 3 * n, rank, rank))
                        + 1j * rng.normal(size=(n, 1 + 2 * n + 3 * n, rank, rank)))

    def monomials(s):
        sb = s.conj()
        return np.concatenate([[1.0], s, sb, s * s, s * sb, sb * sb])

    ca, cb = draw(), draw()
    return PrincipalConnectionSpec(n, rank, lambda s: np.einsum("imab,m->iab", ca, monomials(s)),
                                   lambda s: np.einsum("imab,m->iab", cb, monomials(s)))


def random_polynomial_connection(rng: np.random.Generator, holomorphic: bool = True,
                                 scale: float = 0.5) -> Connection10Spec:
    """Γ_s^z = a(s) + b(s) z + c(s) z², plus d·z̄ when ``holomorphic`` is False.

    a, b, c are affine in (s, s̄); d is bounded away from zero.
    """
    coeff = scale * (rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3)))
    coeff[2] *= 0.2
    d = 0.0
    if not holomorphic:
        d = (0.5 + rng.uniform()) * np.exp(2j * math.pi * rng.uniform())

    def gamma(s, z):
        basis = np.array([1.0, s[0], np.conj(s[0])])
        a, b, c = coeff @ basis
        return np.array([[a + b * z[0] + c * z[0] ** 2 + d * np.conj(z[0])]])

    return Connection10Spec(AdaptedChart(1, 1), ChartFunction(gamma, (1, 1)))


# --- small examples --------------------------------------------------------

def _monomial(c: Callable, dz: Callable, dzbar: Callable, n: int = 1, m: int = 1) -> ChartFunction:
    zeros = lambda s, z: np.zeros((m, n, n), dtype=complex)
    fn = ChartFunction(lambda s, z: np.array([[c(s, z)]]), (m, n))
    fn = fn.with_derivative("fiber", "hol", lambda s, z: np.array([[[dz(s, z)]]]))
    fn = fn.with_derivative("fiber", "antihol", lambda s, z: np.array([[[dzbar(s, z)]]]))
    fn = fn.with_derivative("base", "hol", zeros)
    return fn.with_derivative("base", "antihol", zeros)


def incomplete_connection() -> Connection10Spec:
    """Γ_s^z = z² over ℂ: transport along s = t is z0 / (1 - t z0)."""
    fn = _monomial(lambda s, z: z[0] ** 2, lambda s, z: 2 * z[0], lambda s, z: 0.0)
    return Connection10Spec(AdaptedChart(1, 1), fn)


def incomplete_transport(z0: complex, t: float = 1.0) -> complex:
    return z0 / (1 - t * z0)


def disk_potential() -> ChartFunction:
    """φ = |z|² + 2|s|² + ½(s̄ z² + s z̄²)."""
    def phi(s, z):
        a, w = s[0], z[0]
        return (abs(w) ** 2 + 2 * abs(a) ** 2 + 0.5 * (np.conj(a) * w * w + a * np.conj(w) ** 2)).real
    return ChartFunction(phi, ())


def nonholomorphic_connection() -> Connection10Spec:
    """Γ_s^z = -z̄, the connection of the Kähler potential :func:`disk_potential`."""
    fn = _monomial(lambda s, z: -np.conj(z[0]), lambda s, z: 0.0, lambda s, z: -1.0)
    return Connection10Spec(AdaptedChart(1, 1), fn)


def nonholomorphic_transport(z0: complex, t: float) -> complex:
    return math.exp(-t) * z0.real + 1j * math.exp(t) * z0.imag


def flat_quotient_connection(lam: complex) -> Connection10Spec:
    """Γ_s^z = -(log λ / 2πi) z / s on ℂ*; once around the origin maps z to z / λ."""
    c = np.log(complex(lam)) / (2j * math.pi)
    fn = ChartFunction(lambda s, z: np.array([[-c * z[0] / s[0]]]), (1, 1))
    fn = fn.with_derivative("fiber", "hol", lambda s, z: np.array([[[-c / s[0]]]]))
    fn = fn.with_derivative("fiber", "antihol", lambda s, z: np.zeros((1, 1, 1), dtype=complex))
    fn = fn.with_derivative("base", "hol", lambda s, z: np.array([[[c * z[0] / s[0] ** 2]]]))
    fn = fn.with_derivative("base", "antihol", lambda s, z: np.zeros((1, 1, 1), dtype=complex))
    return Connection10Spec(AdaptedChart(1, 1, lambda s, z: abs(s[0]) > 0), fn)


def _wobbly_loop() -> BasePath:
    w = 2 * math.pi

    def s(t):
        return np.array([(1.0 + 0.05 * math.sin(w * t)) * np.exp(1j * w * t)])

    def ds(t):
        r = 1.0 + 0.05 * math.sin(w * t)
        return np.array([(0.05 * w * math.cos(w * t) + 1j * w * r) * np.exp(1j * w * t)])

    return BasePath(s, ds)


# --- catalog ---------------------------------------------------------------

@dataclass(frozen=True)
class Family:
    id: str
    connection: Connection10Spec
    dbar: DbarSpec
    paths: Mapping[str, BasePath] = field(default_factory=dict)
    higgs: Optional[HiggsSpec] = None
    metric: Optional[FiberMetricSpec] = None
    hermitian: Optional[HermitianBundleSpec] = None
    parameters: Mapping[str, float] = field(default_factory=dict)
    default_point: Optional[tuple] = None

    @property
    def kind(self) -> str:
        return self.id.split(":", 1)[0]


def _abelian_family(family_id: str, k: int) -> Family:
    point = AbelianFamilyPoint(siegel_sample(k, 0), np.full(k, 0.3 + 0.2j), np.full(k, 0.5 - 0.1j))
    rng = np.random.default_rng(0)
    return Family(family_id, gauss_manin_connection(k), DbarSpec.canonical(abelian_chart(k)),
                  {"loop": siegel_loop(rng, k, center=point.Pi)},
                  higgs=kodaira_spencer_higgs_spec(k), parameters={"k": k},
                  default_point=point.chart_point())


def load_family(family_id: str) -> Family:
    """Resolve a catalog id such as ``abelian:k=2`` or ``flat-quotient:lambda=2``."""
    fid = family_id.strip()
    m = re.fullmatch(r"abelian:k=(\d+)", fid)
    if m and int(m.group(1)) >= 1:
        return _abelian_family(fid, int(m.group(1)))
    if fid == "hermitian:line-gaussian":
        spec = gaussian_line_bundle()
        conn = chern_connection(spec)
        metric = FiberMetricSpec(conn.chart, potential=hermitian_potential(spec))
        return Family(fid, conn, DbarSpec.canonical(conn.chart),
                      {"segment": BasePath.segment([0.0], [1.0])}, metric=metric, hermitian=spec,
                      default_point=(np.array([0j]), np.array([1 + 0j])))
    if fid == "incomplete":
        conn = incomplete_connection()
        return Family(fid, conn, DbarSpec.canonical(conn.chart), {"segment": BasePath.segment([0.0], [1.0])},
                      default_point=(np.array([0j]), np.array([0.5 + 0j])))
    if fid == "disk-nonholomorphic":
        conn = nonholomorphic_connection()
        return Family(fid, conn, DbarSpec.canonical(conn.chart), {"segment": BasePath.segment([0.0], [1.0])},
                      metric=FiberMetricSpec(conn.chart, potential=disk_potential()),
                      default_point=(np.array([0j]), np.array([0.3 + 0.4j])))
    m = re.fullmatch(r"flat-quotient:lambda=([-+0-9.eEj]+)", fid)
    if m:
        try:
            lam = complex(m.group(1))
        except ValueError:
            raise UnknownFamily(family_id) from None
        if lam == 0:
            raise UnknownFamily(family_id)
        conn = flat_quotient_connection(lam)
        paths = {"loop": BasePath.circle(0.0, 1.0), "loop-twice": BasePath.circle(0.0, 1.0, turns=2),
                 "contractible": BasePath.circle(2.0, 0.5), "loop-perturbed": _wobbly_loop(),
                 "segment": BasePath.segment([1.0], [2.0])}
        return Family(fid, conn, DbarSpec.canonical(conn.chart), paths, parameters={"lambda": lam},
                      default_point=(np.array([1 + 0j]), np.array([1 + 0j])))
    raise UnknownFamily(family_id)


FAMILY_EXAMPLES = ("abelian:k=2", "hermitian:line-gaussian", "incomplete", "disk-nonholomorphic",
                   "flat-quotient:lambda=2")


def incomplete_example() -> Family:
    return load_family("incomplete")


def nonholomorphic_kahler_example() -> Family:
    return load_family("disk-nonholomorphic")


def flat_quotient_example(lam: complex = 2.0) -> Family:
    return load_family(f"flat-quotient:lambda={complex(lam).real if complex(lam).imag == 0 else complex(lam)}")
