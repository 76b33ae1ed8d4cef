"""Horizontal lifts of base paths, completeness probing and monodromy.

The lift solves

    dz^α/dt = Γ_i^α(s, z) ds^i/dt + conj(Γ_i^{ᾱ}(s, z)) ds̄^i/dt

in real coordinates with classical RK4.  Each step is compared against two
half steps (Richardson); with ``refine=True`` a step whose estimate exceeds
the local tolerance is split, which lets the integrator follow solutions
towards a finite-time blow-up.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .bundle import Connection10Spec
from .errors import IncompleteTransport, NonFiniteEvaluation
from .linalg import ChartFunction, wirtinger_jacobian

DEFAULT_STEP = 1e-3
BLOWUP_THRESHOLD = 1e8
LOCAL_TOL = 1e-10
MIN_SUBSTEP = 1e-14


class Status(enum.Enum):
    COMPLETED = "Completed"
    BLEW_UP = "BlewUp"
    STEP_LIMIT = "StepLimitReached"


@dataclass(frozen=True)
class BasePath:
    """A path t ∈ [0, 1] ↦ s(t) ∈ ℂⁿ.

    ``breakpoints`` lists interior parameters where the velocity may jump;
    the integrator never steps across them.
    """

    s: Callable[[float], np.ndarray]
    ds: Optional[Callable[[float], np.ndarray]] = None
    breakpoints: tuple[float, ...] = ()

    @property
    def piecewise(self) -> bool:
        return bool(self.breakpoints)

    def __call__(self, t: float) -> np.ndarray:
        return np.atleast_1d(np.asarray(self.s(t), dtype=complex))

    def velocity(self, t: float) -> np.ndarray:
        if self.ds is not None:
            return np.atleast_1d(np.asarray(self.ds(t), dtype=complex))
        h = 1e-5
        return (-self(t + 2 * h) + 8 * self(t + h) - 8 * self(t - h) + self(t - 2 * h)) / (12 * h)

    @property
    def n(self) -> int:
        return len(self(0.0))

    @classmethod
    def segment(cls, a, b) -> "BasePath":
        a = np.atleast_1d(np.asarray(a, dtype=complex))
        b = np.atleast_1d(np.asarray(b, dtype=complex))
        return cls(lambda t: a + t * (b - a), lambda t: b - a)

    @classmethod
    def polyline(cls, points: Sequence) -> "BasePath":
        pts = [np.atleast_1d(np.asarray(p, dtype=complex)) for p in points]
        if len(pts) < 2:
            raise ValueError("a polyline needs at least two points")
        k = len(pts) - 1

        def piece(t):
            idx = min(int(t * k), k - 1) if t >= 0 else 0
            return idx, t * k - idx

        def s(t):
            idx, u = piece(t)
            return pts[idx] + u * (pts[idx + 1] - pts[idx])

        def ds(t):
            idx, _ = piece(t)
            return k * (pts[idx + 1] - pts[idx])

        return cls(s, ds, tuple(j / k for j in range(1, k)))

    @classmethod
    def circle(cls, center=0.0, radius: float = 1.0, turns: int = 1) -> "BasePath":
        """Loop c + r·exp(2πi·turns·t) in a one-dimensional base."""
        c = complex(center)
        w = 2j * math.pi * turns
        return cls(lambda t: np.array([c + radius * np.exp(w * t)]),
                   lambda t: np.array([radius * w * np.exp(w * t)]))

    def then(self, other: "BasePath") -> "BasePath":
        """Concatenation: traverse self on [0, ½], then other on [½, 1]."""
        first, second = self, other

        def s(t):
            return first(2 * t) if t <= 0.5 else second(2 * t - 1)

        def ds(t):
            return 2 * first.velocity(2 * t) if t < 0.5 else 2 * second.velocity(2 * t - 1)

        bps = tuple(b / 2 for b in first.breakpoints) + (0.5,) + tuple(0.5 + b / 2 for b in second.breakpoints)
        return BasePath(s, ds, bps)

    def reparametrized(self, phi: Callable[[float], float], dphi: Callable[[float], float]) -> "BasePath":
        """t ↦ s(φ(t)) for an increasing φ with φ(0) = 0, φ(1) = 1."""
        return BasePath(lambda t: self(phi(t)), lambda t: self.velocity(phi(t)) * dphi(t))


@dataclass(frozen=True)
class TransportResult:
    endpoint: np.ndarray
    times: np.ndarray
    states: np.ndarray
    status: Status
    blowup_time: Optional[float] = None
    error_estimate: float = 0.0

    @property
    def completed(self) -> bool:
        return self.status is Status.COMPLETED


class _BlowUp(Exception):
    pass


@dataclass
class _Integrator:
    conn: Connection10Spec
    path: BasePath
    threshold: float
    refine: bool
    local_tol: float
    max_steps: int
    m: int = field(init=False)
    steps: int = 0
    error: float = 0.0

    def __post_init__(self):
        self.m = self.conn.chart.m

    def rhs(self, t: float, y: np.ndarray) -> np.ndarray:
        z = y[: self.m] + 1j * y[self.m:]
        s = self.path(t)
        v = self.path.velocity(t)
        dz = self.conn.gamma_hol(s, z) @ v
        if self.conn.gamma_antihol is not None:
            dz = dz + np.conj(self.conn.gamma_antihol(s, z)) @ np.conj(v)
        return np.concatenate([dz.real, dz.imag])

    def too_big(self, y: np.ndarray) -> bool:
        # one reduction; NaN fails the comparison and so counts as too big
        sq = y[: self.m] ** 2 + y[self.m:] ** 2
        return not float(sq.max()) <= self.threshold ** 2

    def rk4(self, t: float, y: np.ndarray, h: float) -> np.ndarray:
        # stage states past the threshold mean the step straddles a blow-up
        k1 = self.rhs(t, y)
        y2 = y + 0.5 * h * k1
        if self.too_big(y2):
            raise _BlowUp
        k2 = self.rhs(t + 0.5 * h, y2)
        y3 = y + 0.5 * h * k2
        if self.too_big(y3):
            raise _BlowUp
        k3 = self.rhs(t + 0.5 * h, y3)
        y4 = y + h * k3
        if self.too_big(y4):
            raise _BlowUp
        k4 = self.rhs(t + h, y4)
        return y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)

    def safe_rk4(self, t, y, h):
        try:
            with np.errstate(over="ignore", invalid="ignore"):
                return self.rk4(t, y, h)
        except (_BlowUp, OverflowError):
            return None
        except NonFiniteEvaluation:
            if _modulus(y, self.m) > math.sqrt(self.threshold):
                return None
            raise

    def advance(self, t: float, y: np.ndarray, h: float, out: list) -> None:
        """Integrate [t, t+h], appending accepted (t, y) pairs to ``out``."""
        if self.steps >= self.max_steps:
            raise _StepLimit(t, y)
        full = self.safe_rk4(t, y, h)
        if not self.refine:
            self.steps += 1
            if full is None or self.too_big(full):
                raise _Crossed(t, y, h)
            out.append((t + h, full))
            return
        mid = self.safe_rk4(t, y, 0.5 * h)
        half = None if mid is None or self.too_big(mid) else self.safe_rk4(t + 0.5 * h, mid, 0.5 * h)
        if full is not None and half is not None:
            est = float(np.max(np.abs(full - half))) / 15.0
            scale = 1.0 + float(np.max(np.abs(half)))
        else:
            est, scale = math.inf, 1.0
        if est <= self.local_tol * scale or h <= MIN_SUBSTEP:
            self.steps += 1
            if half is None or self.too_big(half):
                raise _Crossed(t, y, h)
            self.error += est if math.isfinite(est) else 0.0
            out.append((t + h, half))
            return
        self.advance(t, y, 0.5 * h, out)
        t2, y2 = out[-1]
        self.advance(t2, y2, 0.5 * h, out)

    def crossing_time(self, t: float, y: np.ndarray, h: float) -> float:
        """Bisect on a single RK4 step of length τ for |z| reaching the threshold."""
        lo, hi = 0.0, h
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            y_mid = self.safe_rk4(t, y, mid)
            if y_mid is None or self.too_big(y_mid):
                hi = mid
            else:
                lo = mid
            if hi - lo <= 1e-16 * max(1.0, t):
                break
        return t + hi


class _Crossed(Exception):
    def __init__(self, t, y, h):
        self.t, self.y, self.h = t, y, h


class _StepLimit(Exception):
    def __init__(self, t, y):
        self.t, self.y = t, y


def _modulus(y: np.ndarray, m: int) -> float:
    return float(np.max(np.hypot(y[:m], y[m:])))


def _to_real(z: np.ndarray) -> np.ndarray:
    return np.concatenate([z.real, z.imag])


def _to_complex(y: np.ndarray, m: int) -> np.ndarray:
    return y[:m] + 1j * y[m:]


def horizontal_lift(conn: Connection10Spec, path: BasePath, z0, step: float = DEFAULT_STEP,
                    threshold: float = BLOWUP_THRESHOLD, refine: bool = True,
                    local_tol: float = LOCAL_TOL, max_steps: int = 10_000_000) -> TransportResult:
    """Parallel transport of ``z0`` along ``path``.

    Blow-up and step exhaustion are reported through ``status``; evaluator
    failures at moderate |z| propagate as :class:`NonFiniteEvaluation`.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    m = conn.chart.m
    z0 = np.atleast_1d(np.asarray(z0, dtype=complex))
    if z0.shape != (m,):
        raise ValueError(f"z0 must have {m} components")
    if not np.all(np.isfinite(z0)):
        raise ValueError("z0 must be finite")
    integ = _Integrator(conn, path, threshold, refine, local_tol, max_steps)
    y = _to_real(z0)
    accepted: list = [(0.0, y)]
    knots = [0.0, *sorted(b for b in path.breakpoints if 0.0 < b < 1.0), 1.0]
    status, t_star = Status.COMPLETED, None
    try:
        for a, b in zip(knots[:-1], knots[1:]):
            count = max(1, math.ceil((b - a) / step - 1e-9))
            h = (b - a) / count
            for k in range(count):
                t = a + k * h
                y = accepted[-1][1]
                integ.advance(t, y, (a + (k + 1) * h) - t, accepted)
    except _Crossed as exc:
        status = Status.BLEW_UP
        t_star = integ.crossing_time(exc.t, exc.y, exc.h)
    except _StepLimit:
        status = Status.STEP_LIMIT
    times = np.array([t for t, _ in accepted])
    states = np.array([_to_complex(y, m) for _, y in accepted])
    return TransportResult(states[-1], times, states, status, t_star, integ.error)


def completeness_probe(conn: Connection10Spec, path: BasePath, z0, threshold: float = BLOWUP_THRESHOLD,
                       step: float = DEFAULT_STEP) -> tuple[Status, Optional[float]]:
    """Status of the lift of ``path`` through ``z0`` and the blow-up time, if any."""
    res = horizontal_lift(conn, path, z0, step=step, threshold=threshold, refine=True)
    return res.status, res.blowup_time


def _endpoint(conn, path, z0, step, refine=False):
    res = horizontal_lift(conn, path, z0, step=step, refine=refine)
    if not res.completed:
        raise IncompleteTransport(f"transport from {z0} ended with {res.status.value}")
    return res.endpoint


def transport_jacobian(conn: Connection10Spec, path: BasePath, z0, step: float = DEFAULT_STEP,
                       fd_step: float = 1e-4) -> tuple[np.ndarray, np.ndarray]:
    """(∂z(1)/∂z0, ∂z(1)/∂z̄0), each m x m, by central differences of the endpoint map.

    Uses fixed-step RK4 so the discrete endpoint map is smooth in ``z0``;
    completeness is first confirmed with the refining integrator, since a
    fixed step can jump over a pole.
    """
    m = conn.chart.m
    z0 = np.atleast_1d(np.asarray(z0, dtype=complex))
    endpoint = ChartFunction(lambda s, z: _endpoint(conn, path, z, step), (m,))
    point = (np.zeros(1, dtype=complex), z0)
    _endpoint(conn, path, z0, step, refine=True)
    hol = wirtinger_jacobian(endpoint, point, "fiber", "hol", fd_step)
    anti = wirtinger_jacobian(endpoint, point, "fiber", "antihol", fd_step)
    return hol, anti


def path_independence_check(conn: Connection10Spec, path_a: BasePath, path_b: BasePath, z0,
                            step: float = DEFAULT_STEP) -> float:
    """|τ(path_a)(z0) - τ(path_b)(z0)|; homotopy of the paths is the caller's business."""
    za = _endpoint(conn, path_a, z0, step, refine=True)
    zb = _endpoint(conn, path_b, z0, step, refine=True)
    return float(np.max(np.abs(za - zb)))


def monodromy(conn: Connection10Spec, loop: BasePath, fiber_samples, step: float = DEFAULT_STEP,
              loops: int = 1) -> np.ndarray:
    """Endpoint map of ``loop`` (traversed ``loops`` times) on each sample, one row per sample."""
    if np.max(np.abs(loop(0.0) - loop(1.0))) > 1e-9:
        raise ValueError("monodromy needs a closed loop")
    out = []
    for z0 in fiber_samples:
        z = np.atleast_1d(np.asarray(z0, dtype=complex))
        for _ in range(loops):
            z = _endpoint(conn, loop, z, step, refine=True)
        out.append(z)
    return np.array(out)
