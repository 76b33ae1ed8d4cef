"""Connections, ∂̄-operators and Higgs fields in one adapted chart, and their tensors.

Coefficient arrays are ``m x n``: row ``α`` is the fiber direction ``∂_α``,
column ``i`` is the base direction ``∂_i`` (or ``∂_{ī}``).  Tensor values
are indexed fiber first, then base indices, e.g. ``F[α, i, j]`` is the
coefficient of ``ds^i ∧ ds̄^j ⊗ ∂_α``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import DimensionMismatch, NotRelativelyHolomorphic, SingularFiberJacobian
from .linalg import ChartFunction, as_point, wirtinger_hessian, wirtinger_jacobian

DEFAULT_HOLOMORPHY_TOL = 1e-6

FIBER_HOL = "alpha"
FIBER_ANTIHOL = "beta_bar"
BASE_HOL = "i"
BASE_ANTIHOL = "j_bar"
_ROLES = {FIBER_HOL, FIBER_ANTIHOL, BASE_HOL, BASE_ANTIHOL}


@dataclass(frozen=True)
class AdaptedChart:
    n: int
    m: int
    domain: Optional[Callable[[np.ndarray, np.ndarray], bool]] = None

    def __post_init__(self):
        if self.n < 1 or self.m < 1:
            raise DimensionMismatch(f"chart dimensions must be positive, got n={self.n}, m={self.m}")

    def contains(self, point) -> bool:
        return True if self.domain is None else bool(self.domain(*as_point(point)))


def _check_coeff(chart: AdaptedChart, fn: Optional[ChartFunction], what: str):
    if fn is not None and fn.shape != (chart.m, chart.n):
        raise DimensionMismatch(f"{what} must have shape {(chart.m, chart.n)}, got {fn.shape}")


@dataclass(frozen=True)
class Connection10Spec:
    """H_i = ∂_i + Γ_i^α ∂_α + Γ_i^{β̄} ∂_{β̄}."""

    chart: AdaptedChart
    gamma_hol: ChartFunction
    gamma_antihol: Optional[ChartFunction] = None

    def __post_init__(self):
        _check_coeff(self.chart, self.gamma_hol, "gamma_hol")
        _check_coeff(self.chart, self.gamma_antihol, "gamma_antihol")


@dataclass(frozen=True)
class DbarSpec:
    """∂̄(∂_{j̄}) = ∂_{j̄} + Γ_{j̄}^γ ∂_γ, optionally with the conjugate lift Γ_{j̄}^{β̄}."""

    chart: AdaptedChart
    gamma_bar: Optional[ChartFunction] = None
    gamma_bar_lift: Optional[ChartFunction] = None

    def __post_init__(self):
        _check_coeff(self.chart, self.gamma_bar, "gamma_bar")
        _check_coeff(self.chart, self.gamma_bar_lift, "gamma_bar_lift")

    @classmethod
    def canonical(cls, chart: AdaptedChart) -> "DbarSpec":
        return cls(chart)


@dataclass(frozen=True)
class HiggsSpec:
    """θ = θ_i^α ds^i ⊗ ∂_α."""

    chart: AdaptedChart
    theta: ChartFunction

    def __post_init__(self):
        _check_coeff(self.chart, self.theta, "theta")


@dataclass(frozen=True)
class MixedTensor:
    values: np.ndarray
    signature: tuple[str, ...]
    point: Optional[tuple[np.ndarray, np.ndarray]] = None
    antisymmetric: Optional[tuple[int, int]] = None

    def __post_init__(self):
        values = np.array(self.values, dtype=complex)
        if values.ndim != len(self.signature):
            raise DimensionMismatch(f"{values.ndim}-index array for signature {self.signature}")
        unknown = set(self.signature) - _ROLES
        if unknown:
            raise ValueError(f"unknown index roles {sorted(unknown)}")
        if self.antisymmetric is not None:
            a, b = self.antisymmetric
            skew = values + np.swapaxes(values, a, b)
            if np.max(np.abs(skew), initial=0.0) > 1e-12 * max(1.0, np.max(np.abs(values), initial=0.0)):
                raise ValueError("declared antisymmetry violated")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values), initial=0.0))


@dataclass(frozen=True)
class TransitionMap:
    """Chart change s' = σ(s), z' = τ(s, z) with τ holomorphic in the fiber."""

    chart: AdaptedChart
    tau: ChartFunction
    sigma: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        if self.tau.shape != (self.chart.m,):
            raise DimensionMismatch(f"fiber map must have shape {(self.chart.m,)}, got {self.tau.shape}")

    def jacobians(self, point):
        """(B, C) = (∂z'/∂z, ∂z'/∂s) at the point."""
        return (wirtinger_jacobian(self.tau, point, "fiber", "hol"),
                wirtinger_jacobian(self.tau, point, "base", "hol"))


@dataclass(frozen=True)
class PrincipalConnectionSpec:
    """A = A_i(s) ds^i + B_{j̄}(s) ds̄^j acting linearly on the fiber, τ₀(ξ)(z) = -ξ z.

    ``A_coeffs(s)`` and ``B_coeffs(s)`` return arrays of shape ``(n, r, r)``.
    """

    n: int
    rank: int
    A_coeffs: Callable[[np.ndarray], np.ndarray]
    B_coeffs: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        if self.n < 1 or self.rank < 1:
            raise DimensionMismatch("principal connection needs n >= 1 and rank >= 1")

    def _matrices(self, fn, s) -> np.ndarray:
        shape = (self.n, self.rank, self.rank)
        if fn is None:
            return np.zeros(shape, dtype=complex)
        out = np.asarray(fn(np.asarray(s, dtype=complex)), dtype=complex)
        if out.shape != shape:
            raise DimensionMismatch(f"coefficient matrices must have shape {shape}, got {out.shape}")
        return out

    def A(self, s) -> np.ndarray:
        return self._matrices(self.A_coeffs, s)

    def B(self, s) -> np.ndarray:
        return self._matrices(self.B_coeffs, s)

    @property
    def chart(self) -> AdaptedChart:
        return AdaptedChart(self.n, self.rank)


def tau0(xi: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Fundamental vector field of the linear action: τ₀(ξ)(z) = -ξ z."""
    return -(np.asarray(xi) @ np.asarray(z))


# --- evaluation helpers ----------------------------------------------------

def _value(fn: Optional[ChartFunction], chart: AdaptedChart, point) -> np.ndarray:
    if fn is None:
        return np.zeros((chart.m, chart.n), dtype=complex)
    return fn(*point)


def _jac(fn: Optional[ChartFunction], chart: AdaptedChart, point, side, kind) -> np.ndarray:
    dim = chart.n if side == "base" else chart.m
    if fn is None:
        return np.zeros((chart.m, chart.n, dim), dtype=complex)
    return wirtinger_jacobian(fn, point, side, kind)


def _gate(defect: float, tol: float):
    if defect > tol:
        raise NotRelativelyHolomorphic(defect, tol)


# --- operations ------------------------------------------------------------

def relative_holomorphy_defect(conn: Connection10Spec, point) -> float:
    """max |∂_{β̄} Γ_i^α| at the point."""
    point = as_point(point)
    return float(np.max(np.abs(_jac(conn.gamma_hol, conn.chart, point, "fiber", "antihol"))))


def mixed_relative_holomorphy_defect(dbar: DbarSpec, point) -> float:
    """max |∂_{β̄} Γ_{j̄}^γ| at the point (lifting condition)."""
    point = as_point(point)
    return float(np.max(np.abs(_jac(dbar.gamma_bar, dbar.chart, point, "fiber", "antihol")), initial=0.0))


def ks_tensor(conn: Connection10Spec, point) -> MixedTensor:
    """Kodaira–Spencer coefficients ∂_{β̄} Γ_i^α, indexed [α, i, β̄]."""
    point = as_point(point)
    d = _jac(conn.gamma_hol, conn.chart, point, "fiber", "antihol")
    return MixedTensor(d, (FIBER_HOL, BASE_HOL, FIBER_ANTIHOL), point)


def curvature_F11(conn: Connection10Spec, dbar: DbarSpec, point,
                  tol: float = DEFAULT_HOLOMORPHY_TOL) -> MixedTensor:
    """(1,1) curvature, all five terms.

    F_{ij̄}^α = ∂_iΓ_{j̄}^α - ∂_{j̄}Γ_i^α + Γ_i^β ∂_βΓ_{j̄}^α - Γ_{j̄}^γ ∂_γΓ_i^α + Γ_i^{β̄} ∂_{β̄}Γ_{j̄}^α
    """
    point = as_point(point)
    chart = conn.chart
    _gate(relative_holomorphy_defect(conn, point), tol)
    G = _value(conn.gamma_hol, chart, point)
    Ga = _value(conn.gamma_antihol, chart, point)
    Gb = _value(dbar.gamma_bar, chart, point)
    d_base_hol_Gb = _jac(dbar.gamma_bar, chart, point, "base", "hol")          # [α, j, i]
    d_base_anti_G = _jac(conn.gamma_hol, chart, point, "base", "antihol")      # [α, i, j]
    d_fib_hol_Gb = _jac(dbar.gamma_bar, chart, point, "fiber", "hol")          # [α, j, β]
    d_fib_hol_G = _jac(conn.gamma_hol, chart, point, "fiber", "hol")           # [α, i, γ]
    d_fib_anti_Gb = _jac(dbar.gamma_bar, chart, point, "fiber", "antihol")     # [α, j, β]
    F = (np.transpose(d_base_hol_Gb, (0, 2, 1))
         - d_base_anti_G
         + np.einsum("ajb,bi->aij", d_fib_hol_Gb, G)
         - np.einsum("aig,gj->aij", d_fib_hol_G, Gb)
         + np.einsum("ajb,bi->aij", d_fib_anti_Gb, Ga))
    return MixedTensor(F, (FIBER_HOL, BASE_HOL, BASE_ANTIHOL), point)


def curvature_F11_pure(conn: Connection10Spec, point, tol: float = DEFAULT_HOLOMORPHY_TOL) -> MixedTensor:
    """F_{ij̄}^α = -∂_{j̄}Γ_i^α for the canonical ∂̄ of a holomorphic fibration."""
    point = as_point(point)
    _gate(relative_holomorphy_defect(conn, point), tol)
    F = -_jac(conn.gamma_hol, conn.chart, point, "base", "antihol")
    return MixedTensor(F, (FIBER_HOL, BASE_HOL, BASE_ANTIHOL), point)


def _bracket_form(coeff: ChartFunction, chart: AdaptedChart, point) -> np.ndarray:
    """X[β, i, j] = ∂_i c_j^β + c_i^α ∂_α c_j^β, whose antisymmetrization is the curvature."""
    c = _value(coeff, chart, point)
    d_base = _jac(coeff, chart, point, "base", "hol")    # [β, j, i]
    d_fib = _jac(coeff, chart, point, "fiber", "hol")    # [β, j, α]
    return np.transpose(d_base, (0, 2, 1)) + np.einsum("ai,bja->bij", c, d_fib)


def curvature_F20(conn: Connection10Spec, point) -> MixedTensor:
    """R_{ij}^β = ∂_iΓ_j^β - ∂_jΓ_i^β + Γ_i^α∂_αΓ_j^β - Γ_j^α∂_αΓ_i^β."""
    point = as_point(point)
    X = _bracket_form(conn.gamma_hol, conn.chart, point)
    return MixedTensor(X - np.swapaxes(X, 1, 2), (FIBER_HOL, BASE_HOL, BASE_HOL), point, (1, 2))


def pseudo_curvature_G11(higgs: HiggsSpec, dbar: DbarSpec, point,
                         tol: float = DEFAULT_HOLOMORPHY_TOL) -> MixedTensor:
    """G_{ij̄}^α = -∂_{j̄}θ_i^α + θ_i^γ ∂_γΓ_{j̄}^α - Γ_{j̄}^γ ∂_γθ_i^α."""
    point = as_point(point)
    chart = higgs.chart
    _gate(float(np.max(np.abs(_jac(higgs.theta, chart, point, "fiber", "antihol")))), tol)
    theta = _value(higgs.theta, chart, point)
    Gb = _value(dbar.gamma_bar, chart, point)
    G = (-_jac(higgs.theta, chart, point, "base", "antihol")
         + np.einsum("ajg,gi->aij", _jac(dbar.gamma_bar, chart, point, "fiber", "hol"), theta)
         - np.einsum("aig,gj->aij", _jac(higgs.theta, chart, point, "fiber", "hol"), Gb))
    return MixedTensor(G, (FIBER_HOL, BASE_HOL, BASE_ANTIHOL), point)


def pseudo_curvature_G20(higgs: HiggsSpec, point) -> MixedTensor:
    """[θ, θ]_{ij}^β = θ_i^α∂_αθ_j^β - θ_j^α∂_αθ_i^β."""
    point = as_point(point)
    theta = _value(higgs.theta, higgs.chart, point)
    X = np.einsum("ai,bja->bij", theta, _jac(higgs.theta, higgs.chart, point, "fiber", "hol"))
    return MixedTensor(X - np.swapaxes(X, 1, 2), (FIBER_HOL, BASE_HOL, BASE_HOL), point, (1, 2))


def dbar_decomposition_RA1(conn10: Connection10Spec, conn01: DbarSpec, point) -> MixedTensor:
    """𝓡_{A1} coefficients ∂_{j̄}Γ_i^α + (∂_{β̄}Γ_i^α) Γ_{j̄}^{β̄}, indexed [α, i, j̄]."""
    point = as_point(point)
    chart = conn10.chart
    lift = _value(conn01.gamma_bar_lift, chart, point)                           # [β, j]
    R = (_jac(conn10.gamma_hol, chart, point, "base", "antihol")
         + np.einsum("aib,bj->aij", _jac(conn10.gamma_hol, chart, point, "fiber", "antihol"), lift))
    return MixedTensor(R, (FIBER_HOL, BASE_HOL, BASE_ANTIHOL), point)


def dolbeault_closedness_defect(conn: Connection10Spec, point) -> float:
    """Largest violation of ∂_{k̄}∂_{j̄}Γ = ∂_{j̄}∂_{k̄}Γ and ∂_{β̄}∂_{j̄}Γ = ∂_{j̄}∂_{β̄}Γ."""
    point = as_point(point)
    G = conn.gamma_hol
    bb = wirtinger_hessian(G, point, ("base", "antihol"), ("base", "antihol"))     # [α, i, j, k]
    base_sym = np.max(np.abs(bb - np.swapaxes(bb, -1, -2)))
    fb = wirtinger_hessian(G, point, ("fiber", "antihol"), ("base", "antihol"))    # [α, i, j, β]
    bf = wirtinger_hessian(G, point, ("base", "antihol"), ("fiber", "antihol"))    # [α, i, β, j]
    mixed = np.max(np.abs(fb - np.swapaxes(bf, -1, -2)))
    return float(max(base_sym, mixed))


def cech_cocycle(t: TransitionMap, point) -> MixedTensor:
    """c = B⁻¹ C, indexed [α, i]."""
    point = as_point(point)
    B, C = t.jacobians(point)
    if not np.all(np.isfinite(B)) or np.linalg.cond(B) > 1e12:
        raise SingularFiberJacobian(f"∂z'/∂z is singular at {point}")
    return MixedTensor(np.linalg.solve(B, C), (FIBER_HOL, BASE_HOL), point)


def induced_connection_from_principal(p: PrincipalConnectionSpec) -> tuple[Connection10Spec, DbarSpec]:
    """Associated-bundle connection of a principal connection under the linear action.

    Γ_i = τ₀(A_i) z,  Γ_i^{β̄} = conj(τ₀(B_ī) z),  Γ_{j̄} = τ₀(B_{j̄}) z,  Γ_{j̄}^{β̄} = conj(τ₀(A_j) z).
    """
    chart = p.chart
    shape = (chart.m, chart.n)

    def act(mats, z):
        # column i is τ₀(M_i) z
        return -np.einsum("iab,b->ai", mats, z)

    def check_fiber(z):
        if len(z) != p.rank:
            raise DimensionMismatch(f"fiber point has dimension {len(z)}, representation has {p.rank}")
        return z

    gamma = ChartFunction(lambda s, z: act(p.A(s), check_fiber(z)), shape)
    gamma_anti = ChartFunction(lambda s, z: np.conj(act(p.B(s), check_fiber(z))), shape)
    gamma_bar = ChartFunction(lambda s, z: act(p.B(s), check_fiber(z)), shape)
    lift = ChartFunction(lambda s, z: np.conj(act(p.A(s), check_fiber(z))), shape)
    has_b = p.B_coeffs is not None
    return (Connection10Spec(chart, gamma, gamma_anti if has_b else None),
            DbarSpec(chart, gamma_bar if has_b else None, lift))


def principal_curvature(p: PrincipalConnectionSpec, s) -> np.ndarray:
    """F_A^{1,1}[i, j] = ∂_iB_{j̄} - ∂_{j̄}A_i + [A_i, B_{j̄}], shape (n, n, r, r)."""
    s = np.atleast_1d(np.asarray(s, dtype=complex))
    r = p.rank
    A_fn = ChartFunction(lambda s_, z_: p.A(s_), (p.n, r, r))
    B_fn = ChartFunction(lambda s_, z_: p.B(s_), (p.n, r, r))
    dummy = np.zeros(1, dtype=complex)
    dB = wirtinger_jacobian(B_fn, (s, dummy), "base", "hol")        # [j, a, b, i]
    dA = wirtinger_jacobian(A_fn, (s, dummy), "base", "antihol")    # [i, a, b, j]
    A, B = p.A(s), p.B(s)
    F = np.empty((p.n, p.n, r, r), dtype=complex)
    for i in range(p.n):
        for j in range(p.n):
            F[i, j] = dB[j, :, :, i] - dA[i, :, :, j] + A[i] @ B[j] - B[j] @ A[i]
    return F


def curvature_correspondence_check(p: PrincipalConnectionSpec, point) -> float:
    """max |F^{1,1}(induced) - τ₀(F_A^{1,1}) z| at the point."""
    s, z = as_point(point)
    conn, dbar = induced_connection_from_principal(p)
    lhs = curvature_F11(conn, dbar, (s, z)).values
    FA = principal_curvature(p, s)
    rhs = np.empty_like(lhs)
    for i in range(p.n):
        for j in range(p.n):
            rhs[:, i, j] = tau0(FA[i, j], z)
    return float(np.max(np.abs(lhs - rhs)))
