"""Wirtinger calculus by finite differences, plus small complex linear algebra helpers.

A chart point is a pair ``(s, z)`` of complex vectors: ``s`` are base
coordinates, ``z`` are fiber coordinates.  Derivatives are taken with respect
to one complex coordinate at a time, either holomorphically

    d/dw    = (d/dx - i d/dy) / 2

or antiholomorphically

    d/dw̄    = (d/dx + i d/dy) / 2

where ``w = x + i y``.  The real directional derivatives use a 4th-order
central stencil.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Callable, Literal, Mapping

import numpy as np

from .errors import DimensionMismatch, NonFiniteEvaluation

Side = Literal["base", "fiber"]
Kind = Literal["hol", "antihol"]
Point = tuple[np.ndarray, np.ndarray]

FIRST_STEP = 1e-4
SECOND_STEP = 1e-3
HERMITIAN_TOL = 1e-10

# f'(x) h ~ sum(w * f(x + k h))
_STENCIL = ((-2, 1.0 / 12.0), (-1, -8.0 / 12.0), (1, 8.0 / 12.0), (2, -1.0 / 12.0))


def as_point(point) -> Point:
    s, z = point
    s = np.atleast_1d(np.asarray(s, dtype=complex)).ravel()
    z = np.atleast_1d(np.asarray(z, dtype=complex)).ravel()
    return s, z


@dataclass(frozen=True)
class ChartFunction:
    """A smooth map ``(s, z) -> complex array`` of a declared shape.

    ``derivatives`` maps ``(side, kind)`` to a callable returning the full
    Wirtinger Jacobian with the differentiated variable as the last axis,
    i.e. shape ``shape + (dim,)``.  Registered derivatives take precedence
    over finite differences.
    """

    evaluator: Callable[[np.ndarray, np.ndarray], object]
    shape: tuple[int, ...]
    derivatives: Mapping[tuple[str, str], Callable] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "shape", tuple(int(d) for d in self.shape))
        object.__setattr__(self, "derivatives", MappingProxyType(dict(self.derivatives)))

    def __call__(self, s, z) -> np.ndarray:
        out = np.asarray(self.evaluator(s, z), dtype=complex)
        if out.shape != self.shape:
            if out.size == int(np.prod(self.shape)):
                out = out.reshape(self.shape)
            else:
                raise DimensionMismatch(f"evaluator returned shape {out.shape}, declared {self.shape}")
        if not np.all(np.isfinite(out)):
            raise NonFiniteEvaluation(f"non-finite value at s={s}, z={z}")
        return out

    def with_derivative(self, side: Side, kind: Kind, fn: Callable) -> "ChartFunction":
        derivs = dict(self.derivatives)
        derivs[(side, kind)] = fn
        return ChartFunction(self.evaluator, self.shape, derivs)

    @classmethod
    def constant(cls, value) -> "ChartFunction":
        value = np.asarray(value, dtype=complex)
        frozen = value.copy()
        fn = cls(lambda s, z: frozen, value.shape)
        zero = lambda dim: (lambda s, z: np.zeros(frozen.shape + (len(s if dim == "base" else z),), complex))
        for side in ("base", "fiber"):
            for kind in ("hol", "antihol"):
                fn = fn.with_derivative(side, kind, zero(side))
        return fn


def _partials(f: ChartFunction, s, z, side: Side, index: int, rel_step: float):
    """Real x- and y-derivatives of f along one complex coordinate."""
    coords = s if side == "base" else z
    c = coords[index]
    h = rel_step * max(1.0, abs(c))
    dx = np.zeros(f.shape, dtype=complex)
    dy = np.zeros(f.shape, dtype=complex)
    for direction, acc in ((1.0, dx), (1j, dy)):
        for k, w in _STENCIL:
            shifted = coords.copy()
            shifted[index] = c + k * h * direction
            val = f(shifted, z) if side == "base" else f(s, shifted)
            acc += w * val
    return dx / h, dy / h


def _combine(dx, dy, kind: Kind):
    if kind == "hol":
        return 0.5 * (dx - 1j * dy)
    if kind == "antihol":
        return 0.5 * (dx + 1j * dy)
    raise ValueError(f"kind must be 'hol' or 'antihol', got {kind!r}")


def wirtinger_derivative(f: ChartFunction, point, target: tuple[Side, int], kind: Kind,
                         rel_step: float = FIRST_STEP) -> np.ndarray:
    """Derivative of ``f`` at ``point`` with respect to one coordinate.

    ``target`` is ``(side, index)``.  The step is ``rel_step * max(1, |coordinate|)``.
    """
    s, z = as_point(point)
    side, index = target
    if side not in ("base", "fiber"):
        raise ValueError(f"side must be 'base' or 'fiber', got {side!r}")
    analytic = f.derivatives.get((side, kind))
    if analytic is not None:
        return np.asarray(analytic(s, z), dtype=complex)[..., index]
    dx, dy = _partials(f, s, z, side, index, rel_step)
    return _combine(dx, dy, kind)


def wirtinger_jacobian(f: ChartFunction, point, side: Side, kind: Kind,
                       rel_step: float = FIRST_STEP) -> np.ndarray:
    """All derivatives over one side; the differentiated index is the last axis."""
    s, z = as_point(point)
    analytic = f.derivatives.get((side, kind))
    if analytic is not None:
        dim = len(s) if side == "base" else len(z)
        out = np.asarray(analytic(s, z), dtype=complex)
        if out.shape != f.shape + (dim,):
            raise DimensionMismatch(f"registered derivative has shape {out.shape}")
        return out
    dim = len(s) if side == "base" else len(z)
    out = np.empty(f.shape + (dim,), dtype=complex)
    for idx in range(dim):
        dx, dy = _partials(f, s, z, side, idx, rel_step)
        out[..., idx] = _combine(dx, dy, kind)
    return out


def derivative_function(f: ChartFunction, side: Side, kind: Kind, dim: int,
                        rel_step: float = SECOND_STEP) -> ChartFunction:
    """The Jacobian of ``f`` as a chart function of shape ``f.shape + (dim,)``."""
    return ChartFunction(lambda s, z: wirtinger_jacobian(f, (s, z), side, kind, rel_step),
                         f.shape + (dim,))


def wirtinger_hessian(f: ChartFunction, point, outer: tuple[Side, Kind], inner: tuple[Side, Kind],
                      rel_step: float = SECOND_STEP, inner_step: float | None = None) -> np.ndarray:
    """Nested second derivative ``outer(inner(f))``.

    Axes: ``f.shape + (inner index, outer index)``.  A registered first
    derivative is used for the inner level when available.  ``inner_step``
    defaults to ``rel_step``; a wide inner stencil is exact when f is a
    polynomial of degree ≤ 4 in the inner variable.
    """
    s, z = as_point(point)
    inner_dim = len(s) if inner[0] == "base" else len(z)
    g = derivative_function(f, inner[0], inner[1], inner_dim, rel_step if inner_step is None else inner_step)
    return wirtinger_jacobian(g, (s, z), outer[0], outer[1], rel_step)


def directional_derivative(fn: Callable[[np.ndarray], np.ndarray], x: np.ndarray, v: np.ndarray,
                           rel_step: float = FIRST_STEP) -> np.ndarray:
    """d/dt fn(x + t v) at t = 0 for a real parameter t."""
    x = np.asarray(x)
    h = rel_step * max(1.0, float(np.max(np.abs(x))) if x.size else 1.0)
    acc = 0
    for k, w in _STENCIL:
        acc = acc + w * np.asarray(fn(x + k * h * v))
    return acc / h


@dataclass(frozen=True)
class SiegelPoint:
    """Symmetric complex matrix with positive definite imaginary part."""

    Pi: np.ndarray

    def __post_init__(self):
        Pi = np.array(self.Pi, dtype=complex)
        if Pi.ndim != 2 or Pi.shape[0] != Pi.shape[1]:
            raise DimensionMismatch(f"Siegel point must be square, got shape {Pi.shape}")
        scale = max(1.0, np.linalg.norm(Pi))
        if np.linalg.norm(Pi - Pi.T) > 1e-12 * scale:
            raise ValueError("Siegel point is not symmetric")
        ok, lam = posdef_check(Pi.imag)
        if not ok:
            raise ValueError(f"imaginary part not positive definite (min eigenvalue {lam:.3e})")
        Pi.setflags(write=False)
        object.__setattr__(self, "Pi", Pi)

    @property
    def k(self) -> int:
        return self.Pi.shape[0]

    @property
    def Pi_x(self) -> np.ndarray:
        return self.Pi.real

    @property
    def Pi_y(self) -> np.ndarray:
        return self.Pi.imag


def siegel_sample(k: int, seed: int) -> SiegelPoint:
    """Random Siegel point: symmetric real part in [-1, 1], imaginary part A Aᵀ + 0.1 I."""
    if k < 1:
        raise ValueError("k must be positive")
    rng = np.random.default_rng(seed)
    X = rng.uniform(-1.0, 1.0, size=(k, k))
    X = np.triu(X) + np.triu(X, 1).T
    A = rng.uniform(-1.0, 1.0, size=(k, k))
    Y = A @ A.T + 0.1 * np.eye(k)
    Y = 0.5 * (Y + Y.T)
    return SiegelPoint(X + 1j * Y)


def posdef_check(M) -> tuple[bool, float]:
    """(is Hermitian positive definite, smallest eigenvalue of the Hermitian part)."""
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {M.shape}")
    scale = max(1.0, float(np.max(np.abs(M))) if M.size else 1.0)
    hermitian = np.max(np.abs(M - M.conj().T), initial=0.0) <= HERMITIAN_TOL * scale
    lam = float(np.linalg.eigvalsh(0.5 * (M + M.conj().T))[0])
    return bool(hermitian and lam > 0), lam
