"""Randomized verification suites over the built-in families.

Every check draws its own generator from ``(seed, crc32(check_id))`` so the
result of one check never depends on which other checks ran, or in which
order the thread pool finished them.
"""

from __future__ import annotations

import json
import math
import platform
import sys
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Callable, Iterator, Mapping, Optional

import numpy as np

from . import families as fam
from .bundle import (DbarSpec, curvature_correspondence_check, curvature_F11_pure, curvature_F20,
                     mixed_relative_holomorphy_defect, pseudo_curvature_G11, pseudo_curvature_G20,
                     relative_holomorphy_defect)
from .errors import UnknownFamily
from .linalg import siegel_sample
from .simpson import connection_from_relative_kahler, theta_bar_J
from .transport import BasePath, Status, completeness_probe, horizontal_lift, monodromy, transport_jacobian

SCHEMA_VERSION = "1.0"

TOLERANCE_TIERS = MappingProxyType({
    "algebraic": 1e-10,
    "first_fd": 1e-6,
    "second_fd": 1e-5,
    "ode": 1e-6,
})


@dataclass(frozen=True)
class SuiteConfig:
    family: str
    samples: int = 20
    seed: int = 0
    tolerances: Mapping[str, float] = TOLERANCE_TIERS
    base_radius: float = 1.0
    fiber_radius: float = 2.0
    workers: Optional[int] = None

    def __post_init__(self):
        if self.samples < 1:
            raise ValueError("samples must be at least 1")
        tol = dict(TOLERANCE_TIERS)
        tol.update(self.tolerances)
        if any(not (v > 0) for v in tol.values()):
            raise ValueError("tolerances must be positive")
        if not (self.base_radius > 0 and self.fiber_radius > 0):
            raise ValueError("sampling radii must be positive")
        object.__setattr__(self, "tolerances", MappingProxyType(tol))


@dataclass(frozen=True)
class CheckRecord:
    check_id: str
    anchor: str
    samples: int
    max_defect: float
    tolerance: float
    passed: bool
    expect: str = "pass"
    error: Optional[str] = None

    @property
    def as_expected(self) -> bool:
        return self.passed == (self.expect == "pass")


@dataclass(frozen=True)
class VerificationReport:
    family: str
    seed: int
    samples: int
    records: tuple[CheckRecord, ...]
    environment: Mapping[str, str] = field(default_factory=dict)
    schema_version: str = SCHEMA_VERSION

    @property
    def ok(self) -> bool:
        return all(r.as_expected for r in self.records)

    def record(self, check_id: str) -> CheckRecord:
        for r in self.records:
            if r.check_id == check_id:
                return r
        raise KeyError(check_id)


# --- sampling --------------------------------------------------------------

class _Context:
    def __init__(self, config: SuiteConfig, rng: np.random.Generator):
        self.config = config
        self.rng = rng
        self.samples = config.samples

    def tol(self, tier: str) -> float:
        return self.config.tolerances[tier]

    def base(self, n: int) -> np.ndarray:
        r = self.config.base_radius
        return self.rng.uniform(-r, r, n) + 1j * self.rng.uniform(-r, r, n)

    def fiber(self, m: int) -> np.ndarray:
        r = self.config.fiber_radius * np.sqrt(self.rng.uniform(size=m))
        return r * np.exp(2j * math.pi * self.rng.uniform(size=m))

    def abelian_points(self, k: int, count: Optional[int] = None) -> Iterator[fam.AbelianFamilyPoint]:
        for _ in range(count or self.samples):
            Pi = siegel_sample(k, int(self.rng.integers(2**31)))
            yield fam.AbelianFamilyPoint(Pi, self.fiber(k), self.fiber(k))


@dataclass(frozen=True)
class _Check:
    check_id: str
    anchor: str
    tier: str
    run: Callable[[_Context], tuple[float, int]]
    expect: str = "pass"
    tolerance: Optional[float] = None  # overrides the tier


def _worst(values) -> tuple[float, int]:
    values = [float(v) for v in values]
    if any(math.isnan(v) for v in values):
        return math.nan, len(values)
    return max(values, default=0.0), len(values)


# --- check catalog ---------------------------------------------------------

def _negative_control() -> _Check:
    def run(ctx):
        return _worst(fam.gauss_manin_flatness_defect(pt, i, j, pbar_sign=-1.0)
                      for pt in ctx.abelian_points(1, min(ctx.samples, 10)) for i, j in fam.base_pairs(1))
    return _Check("negative-control.gauss-manin-sign-flip",
                  "Gauss-Manin lift with the conjugate p-term sign reversed must not preserve flat coordinates",
                  "first_fd", run, expect="fail")


def _abelian_checks(k: int) -> list[_Check]:
    pairs = fam.base_pairs(k)

    def frame(ctx):
        out = []
        for pt in ctx.abelian_points(k):
            fr = fam.hyperkahler_frame(pt.Pi)
            out.append(max(fr.defects().values()))
            for name, W in fr.kahler_forms().items():
                out.append(np.max(np.abs(W + W.T)))
                out.append(np.max(np.abs(W - fr.kahler_form(name))))
        return _worst(out)

    def round_trip(ctx):
        out = []
        for pt in ctx.abelian_points(k):
            q, p = fam.flat_to_qp(pt.Pi, *fam.flat_coordinates(pt))
            out.append(max(np.max(np.abs(q - pt.q)), np.max(np.abs(p - pt.p))))
        return _worst(out)

    def theta_bar(ctx):
        out = []
        for pt in ctx.abelian_points(k):
            fr = fam.hyperkahler_frame(pt.Pi)
            for i, j in pairs:
                lhs = theta_bar_J(fam.kodaira_spencer_higgs(pt, i, j).to_real(), fr)
                out.append(np.max(np.abs(lhs - fam.dbar_offset_abelian(pt, i, j).to_real())))
        return _worst(out)

    def hamiltonian(ctx):
        return _worst(fam.hamiltonian_check(pt, i, j) for pt in ctx.abelian_points(k) for i, j in pairs)

    def _twist_defect(pt, i, j, vertical):
        tw = fam.canonical_twist(pt.Pi)
        theta = fam.kodaira_spencer_higgs(pt, i, j).to_real()
        return np.max(np.abs(-vertical.to_real() - 2.0 * math.sqrt(2.0) * (tw.inverse @ theta)))

    def symplectic_exact(ctx):
        return _worst(_twist_defect(pt, i, j, fam.symplectic_connection_abelian(pt, i, j))
                      for pt in ctx.abelian_points(k) for i, j in pairs)

    def symplectic_closed_potential(ctx):
        return _worst(_twist_defect(pt, i, j, fam.symplectic_connection_potential(pt, i, j))
                      for pt in ctx.abelian_points(k) for i, j in pairs)

    def symplectic_hessian(ctx):
        out = []
        for pt in ctx.abelian_points(k, min(ctx.samples, 20)):
            cols = fam.symplectic_connection_hessian_columns(pt)
            out.extend(_twist_defect(pt, i, j, cols[(i, j)]) for i, j in pairs)
        return _worst(out)

    def metric_inverse(ctx):
        out = []
        for pt in ctx.abelian_points(k):
            G = fam.symplectic_metric_blocks(pt.Pi)
            X, Y = pt.Pi.Pi_x, pt.Pi.Pi_y
            Yi = np.linalg.inv(Y)
            G_inv = 2.0 * np.block([[Yi, -Yi @ X], [-X @ Yi, Y + X @ Yi @ X]])
            out.append(np.max(np.abs(G @ G_inv - np.eye(2 * k))))
        return _worst(out)

    def twist(ctx):
        out = []
        for pt in ctx.abelian_points(k):
            fr = fam.hyperkahler_frame(pt.Pi)
            tw = fam.canonical_twist(pt.Pi)
            out.append(tw.intertwining_defect(fr))
            out.append(np.max(np.abs(tw.inverse @ tw.beta - np.eye(fr.dim))))
        return _worst(out)

    def uniqueness(ctx):
        coeffs = fam.twist_uniqueness_coefficients(list(ctx.abelian_points(k, min(ctx.samples, 10))))
        target = np.array([math.sqrt(0.5), 0.0, 0.0, -math.sqrt(0.5)])
        return float(np.max(np.abs(coeffs - target))), 1

    def flat_pointwise(ctx):
        return _worst(fam.gauss_manin_flatness_defect(pt, i, j)
                      for pt in ctx.abelian_points(k, min(ctx.samples, 20)) for i, j in pairs)

    def loops(sign):
        def run(ctx):
            out = []
            for _ in range(min(ctx.samples, 2)):
                loop = fam.siegel_loop(ctx.rng, k)
                z0 = np.concatenate([ctx.fiber(k), ctx.fiber(k)])
                out.append(fam.gauss_manin_trajectory_defect(k, loop, z0, pbar_sign=sign, step=5e-3))
            return _worst(out)
        return run

    def pseudo_curvature(ctx):
        higgs = fam.kodaira_spencer_higgs_spec(k)
        dbar = DbarSpec.canonical(fam.abelian_chart(k))
        out = []
        for pt in ctx.abelian_points(k, min(ctx.samples, 20)):
            P = pt.chart_point()
            out.append(pseudo_curvature_G11(higgs, dbar, P).max_abs())
            out.append(pseudo_curvature_G20(higgs, P).max_abs())
        return _worst(out)

    def canonical_lifting(ctx):
        dbar = DbarSpec.canonical(fam.abelian_chart(k))
        return _worst(mixed_relative_holomorphy_defect(dbar, pt.chart_point())
                      for pt in ctx.abelian_points(k, min(ctx.samples, 20)))

    return [
        _Check("abelian.hyperkahler-frame", "quaternion relations, metric compatibility and Kähler forms",
               "algebraic", frame),
        _Check("abelian.flat-coordinates-round-trip", "(q, p) -> (ξ, η) -> (q, p)", "algebraic", round_trip),
        _Check("abelian.theta-bar-J", "θ̄_J equals the ∂̄ offset between the two holomorphic structures",
               "algebraic", theta_bar),
        _Check("abelian.hamiltonian", "Kodaira-Spencer field is Hamiltonian for (i/4) pᵀVp",
               "algebraic", hamiltonian),
        _Check("abelian.symplectic-connection-exact", "symplectic connection minus Chern part is 2√2 β⁻¹(θ)",
               "algebraic", symplectic_exact),
        _Check("abelian.symplectic-connection-potential", "same identity with the closed-form metric inverse",
               "algebraic", symplectic_closed_potential),
        _Check("abelian.symplectic-connection-hessian", "same identity from FD second derivatives of p†Π_y p",
               "first_fd", symplectic_hessian),
        _Check("abelian.fiber-metric-inverse", "closed-form fiber metric times its closed-form inverse",
               "algebraic", metric_inverse),
        _Check("abelian.canonical-twist", "β J_A = J_B β and β⁻¹β = id", "algebraic", twist),
        _Check("abelian.twist-uniqueness", "least-squares coefficients of β⁻¹ in the quaternion span",
               "algebraic", uniqueness),
        _Check("abelian.gauss-manin-pointwise", "flat coordinates are constant along the lift", "first_fd",
               flat_pointwise),
        _Check("abelian.gauss-manin-loops", "flat coordinates constant along transported closed loops", "ode",
               loops(1.0)),
        _Check("abelian.gauss-manin-loops-sign-flip", "sign-reversed lift drifts along closed loops", "ode",
               loops(-1.0), expect="fail"),
        _Check("abelian.pseudo-curvature", "G^{1,1} and G^{2,0} of the Kodaira-Spencer Higgs field vanish",
               "first_fd", pseudo_curvature, tolerance=1e-8),
        _Check("abelian.canonical-dbar-lifting", "canonical ∂̄ satisfies the lifting condition", "algebraic",
               canonical_lifting),
    ]


def _hermitian_checks() -> list[_Check]:
    spec = fam.gaussian_line_bundle()
    conn = fam.chern_connection(spec)

    def closed_form(ctx):
        out = []
        for _ in range(ctx.samples):
            s, z = ctx.base(1), ctx.fiber(1)
            out.append(abs(fam.chern_connection_hermitian(spec, s, z)[0, 0] - np.conj(s[0]) * z[0]))
        return _worst(out)

    def identity(bundle_factory):
        def run(ctx):
            out = []
            for _ in range(ctx.samples):
                b = bundle_factory(ctx)
                out.append(fam.chern_identity_defect(b, (ctx.base(b.n), ctx.fiber(b.m))))
            return _worst(out)
        return run

    def kahler_route(ctx):
        metric = fam.FiberMetricSpec(conn.chart, potential=fam.hermitian_potential(spec))
        out = []
        for _ in range(min(ctx.samples, 20)):
            s, z = ctx.base(1), ctx.fiber(1)
            out.append(np.max(np.abs(connection_from_relative_kahler(metric, (s, z)) - conn.gamma_hol(s, z))))
        return _worst(out)

    def correspondence_gaussian(ctx):
        p = fam.gaussian_principal_connection()
        return _worst(curvature_correspondence_check(p, (ctx.base(1), ctx.fiber(1))) for _ in range(ctx.samples))

    def correspondence_random(ctx):
        out = []
        for _ in range(ctx.samples):
            p = fam.random_principal_connection(ctx.rng)
            out.append(curvature_correspondence_check(p, (ctx.base(p.n), ctx.fiber(p.rank))))
        return _worst(out)

    def gaussian_curvature(ctx):
        # F^{1,1} z = -z for h = e^{-|s|²}
        out = []
        for _ in range(ctx.samples):
            s, z = ctx.base(1), ctx.fiber(1)
            out.append(abs(curvature_F11_pure(conn, (s, z)).values[0, 0, 0] + z[0]))
        return _worst(out)

    return [
        _Check("hermitian.chern-closed-form", "Chern connection of e^{-|s|²} is s̄z", "algebraic", closed_form),
        _Check("hermitian.chern-curvature", "F^{1,1} of the Gaussian line bundle is -z", "first_fd",
               gaussian_curvature),
        _Check("hermitian.chern-identity-gaussian", "ω - ω_∇ = -i⟨F_h z, z⟩_h on the Gaussian line bundle",
               "first_fd", identity(lambda ctx: spec)),
        _Check("hermitian.chern-identity-rank2", "ω - ω_∇ = -i⟨F_h z, z⟩_h on random rank-2 metrics",
               "first_fd", identity(lambda ctx: fam.random_hermitian_bundle(ctx.rng))),
        _Check("hermitian.relative-kahler-route", "connection from the potential zᵀHz̄ matches Chern",
               "second_fd", kahler_route),
        _Check("hermitian.curvature-correspondence-gaussian", "F^{1,1} of the associated bundle is τ₀(F_A)",
               "first_fd", correspondence_gaussian),
        _Check("hermitian.curvature-correspondence-rank2", "same on random rank-2 polynomial connections",
               "first_fd", correspondence_random),
    ]


def _incomplete_checks() -> list[_Check]:
    conn = fam.incomplete_connection()
    seg = BasePath.segment([0.0], [1.0])
    grid = [0.5, 0.25, -0.5, 0.1 + 0.3j, -0.2 - 0.4j, 0.75]

    def closed_form(ctx):
        return _worst(abs(horizontal_lift(conn, seg, z0).endpoint[0] - fam.incomplete_transport(z0))
                      for z0 in grid[:max(2, min(ctx.samples, len(grid)))])

    def blowup(ctx):
        status, t_star = completeness_probe(conn, seg, 1.0)
        if status is not Status.BLEW_UP or t_star is None:
            return math.inf, 1
        return max(0.0, 0.99 - t_star, t_star - 1.0), 1

    def jacobian(ctx):
        hol, anti = transport_jacobian(conn, seg, 0.5, step=1e-2)
        return max(abs(hol[0, 0] - 4.0), abs(anti[0, 0])), 1

    def order(ctx):
        steps = (1e-2, 5e-3, 2.5e-3)
        errs = [abs(horizontal_lift(conn, seg, 0.9, step=h, refine=False).endpoint[0]
                    - fam.incomplete_transport(0.9)) for h in steps]
        slope = np.polyfit(np.log(steps), np.log(errs), 1)[0]
        return abs(slope - 4.0), len(steps)

    def holomorphy(ctx):
        return _worst(relative_holomorphy_defect(conn, (ctx.base(1), ctx.fiber(1))) for _ in range(ctx.samples))

    return [
        _Check("incomplete.transport-closed-form", "transport along s = t is z0 / (1 - z0)", "ode", closed_form),
        _Check("incomplete.blow-up", "z0 = 1 blows up with t* in [0.99, 1]", "ode", blowup),
        _Check("incomplete.transport-jacobian", "holomorphic Jacobian 1/(1-z0)², antiholomorphic 0",
               "first_fd", jacobian),
        _Check("incomplete.rk4-order", "fitted convergence order within 0.3 of 4", "ode", order, tolerance=0.3),
        _Check("incomplete.relative-holomorphy", "Γ = z² has no z̄ dependence", "algebraic", holomorphy),
    ]


def _disk_checks() -> list[_Check]:
    conn = fam.nonholomorphic_connection()
    potential = fam.FiberMetricSpec(conn.chart, potential=fam.disk_potential())

    def closed_form(ctx):
        out = []
        for t in (0.25, 0.5, 1.0):
            for _ in range(max(1, min(ctx.samples, 5))):
                z0 = complex(ctx.fiber(1)[0])
                res = horizontal_lift(conn, BasePath.segment([0.0], [t]), z0)
                out.append(abs(res.endpoint[0] - fam.nonholomorphic_transport(z0, t)))
        return _worst(out)

    def jacobian(ctx):
        hol, anti = transport_jacobian(conn, BasePath.segment([0.0], [1.0]), 0.3 + 0.4j, step=1e-2)
        return max(abs(hol[0, 0] - math.cosh(1.0)), abs(anti[0, 0] + math.sinh(1.0))), 1

    def kahler_route(ctx):
        out = []
        for _ in range(min(ctx.samples, 20)):
            s, z = ctx.base(1), ctx.fiber(1)
            out.append(np.max(np.abs(connection_from_relative_kahler(potential, (s, z)) - conn.gamma_hol(s, z))))
        return _worst(out)

    def holomorphy(ctx):
        return _worst(relative_holomorphy_defect(conn, (ctx.base(1), ctx.fiber(1))) for _ in range(ctx.samples))

    return [
        _Check("disk.transport-closed-form", "τ_t(x + iy) = e^{-t}x + i e^{t}y for t in {0.25, 0.5, 1}", "ode",
               closed_form),
        _Check("disk.transport-jacobian", "∂τ/∂z0 = cosh 1 and ∂τ/∂z̄0 = -sinh 1", "first_fd", jacobian,
               tolerance=1e-4),
        _Check("disk.relative-kahler-route", "connection of the potential is -z̄", "second_fd", kahler_route),
        _Check("disk.relative-holomorphy", "Γ = -z̄ is not relatively holomorphic", "algebraic", holomorphy,
               expect="fail"),
    ]


def _flat_quotient_checks(family: fam.Family) -> list[_Check]:
    conn = family.connection
    lam = family.parameters["lambda"]

    def samples(ctx):
        return [z for z in (ctx.fiber(1) for _ in range(min(ctx.samples, 5)))]

    def generator(ctx):
        zs = samples(ctx)
        out = monodromy(conn, family.paths["loop"], zs)
        return _worst(abs(o[0] - z[0] / lam) for o, z in zip(out, zs))

    def twice(ctx):
        zs = samples(ctx)
        out = monodromy(conn, family.paths["loop"], zs, loops=2)
        return _worst(abs(o[0] - z[0] / lam ** 2) for o, z in zip(out, zs))

    def contractible(ctx):
        zs = samples(ctx)
        out = monodromy(conn, family.paths["contractible"], zs)
        return _worst(abs(o[0] - z[0]) for o, z in zip(out, zs))

    def homotopy(ctx):
        zs = samples(ctx)
        a = monodromy(conn, family.paths["loop"], zs)
        b = monodromy(conn, family.paths["loop-perturbed"], zs)
        return _worst(np.abs(a - b).ravel())

    def flatness(ctx):
        out = []
        for _ in range(ctx.samples):
            s = ctx.base(1)
            if abs(s[0]) < 0.1:
                s = s + 0.5
            P = (s, ctx.fiber(1))
            out.append(curvature_F11_pure(conn, P).max_abs())
            out.append(curvature_F20(conn, P).max_abs())
        return _worst(out)

    return [
        _Check("flat-quotient.monodromy-generator", "once around the origin is z -> z/λ", "ode", generator),
        _Check("flat-quotient.monodromy-twice", "twice around the origin is z -> z/λ²", "ode", twice),
        _Check("flat-quotient.contractible-loop", "a loop not enclosing the origin acts trivially", "ode",
               contractible),
        _Check("flat-quotient.homotopy-invariance", "perturbed loop gives the same monodromy", "ode", homotopy),
        _Check("flat-quotient.flatness", "F^{1,1} and F^{2,0} vanish", "first_fd", flatness),
    ]


def _checks_for(family_id: str) -> list[_Check]:
    family = fam.load_family(family_id)
    kind = family.kind
    if kind == "abelian":
        checks = _abelian_checks(int(family.parameters["k"]))
    elif kind == "hermitian":
        checks = _hermitian_checks()
    elif kind == "incomplete":
        checks = _incomplete_checks()
    elif kind == "disk-nonholomorphic":
        checks = _disk_checks()
    elif kind == "flat-quotient":
        checks = _flat_quotient_checks(family)
    else:  # pragma: no cover - load_family already rejected it
        raise UnknownFamily(family_id)
    return checks + [_negative_control()]


# --- running ---------------------------------------------------------------

def _check_rng(seed: int, check_id: str) -> np.random.Generator:
    return np.random.default_rng([int(seed) & 0xFFFFFFFF, zlib.crc32(check_id.encode())])


def _run_one(check: _Check, config: SuiteConfig) -> CheckRecord:
    tol = config.tolerances[check.tier] if check.tolerance is None else check.tolerance
    ctx = _Context(config, _check_rng(config.seed, check.check_id))
    error = None
    try:
        defect, n = check.run(ctx)
    except Exception as exc:  # a crashing check is a failed check, not a crashed suite
        defect, n, error = math.inf, 0, f"{type(exc).__name__}: {exc}"
    passed = bool(defect <= tol)
    return CheckRecord(check.check_id, check.anchor, int(n), float(defect), float(tol), passed,
                       check.expect, error)


def environment_metadata() -> dict[str, str]:
    return {"python": platform.python_version(), "numpy": np.__version__,
            "platform": platform.platform(terse=True), "implementation": sys.implementation.name}


def run_suite(config: SuiteConfig) -> VerificationReport:
    """Run every check registered for ``config.family``; failures are recorded, never raised."""
    checks = _checks_for(config.family)
    with ThreadPoolExecutor(max_workers=config.workers) as pool:
        records = list(pool.map(lambda c: _run_one(c, config), checks))
    records.sort(key=lambda r: r.check_id)
    return VerificationReport(config.family, config.seed, config.samples, tuple(records),
                              environment_metadata())


# --- serialization ---------------------------------------------------------

def _fmt(x: float) -> str:
    return format(float(x), ".16e")


def report_to_dict(report: VerificationReport) -> dict:
    return {
        "schema_version": report.schema_version,
        "family": report.family,
        "seed": report.seed,
        "samples": report.samples,
        "ok": report.ok,
        "environment": dict(sorted(report.environment.items())),
        "records": [
            {
                "check_id": r.check_id,
                "anchor": r.anchor,
                "samples": r.samples,
                "max_defect": _fmt(r.max_defect),
                "tolerance": _fmt(r.tolerance),
                "passed": r.passed,
                "expect": r.expect,
                "error": r.error,
            }
            for r in report.records
        ],
    }


def report_serialize(report: VerificationReport) -> str:
    return json.dumps(report_to_dict(report), indent=2, ensure_ascii=False)


def report_parse(text: str) -> VerificationReport:
    data = json.loads(text)
    if data.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"unsupported report schema {data.get('schema_version')!r}")
    records = tuple(
        CheckRecord(r["check_id"], r["anchor"], int(r["samples"]), float(r["max_defect"]),
                    float(r["tolerance"]), bool(r["passed"]), r["expect"], r["error"])
        for r in data["records"]
    )
    return VerificationReport(data["family"], int(data["seed"]), int(data["samples"]), records,
                              dict(data["environment"]), data["schema_version"])
