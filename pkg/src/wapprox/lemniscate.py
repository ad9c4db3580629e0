"""The lemniscate |z(z+1)| = 1/4 and the weight W(z) = 1 + z.

The right loop bounds a domain whose weighted equilibrium measure (with
Q = -log|1+z|) is the balayage of the origin's point mass onto the loop,
with Robin-type constant log 4.  The degree-n Taylor sections of (1+z)^(-n)
play the role Szego's exponential partial sums play for e^(-z): their
weighted deficits obey an explicit first-order asymptotic, their monic
normalizations are asymptotically extremal with norm limit 1/4, and their
zeros equidistribute to the balayage measure.

Deficits are evaluated two independent ways: direct multiprecision Horner on
the exact coefficients, and the integral-remainder quadrature in polycore.
Disagreement between the two fails the build; catastrophic cancellation is
the central hazard here (the rule of thumb is 2n + 64 significand bits at
order n).
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np
from mpmath import mp, mpc, mpf, sqrt as mp_sqrt, pi as mp_pi

from .approx import ContourSet, GridSpec, level_region
from .equilibrium import WeightedCompact
from .measures import DiscreteMeasure
from .polycore import (ComplexPolynomial, PrecisionContext, eval_poly,
                       monic_normalize, roots, taylor_section)

LEVEL = 0.25
CROSSING = -0.5

INSIDE_RIGHT = "inside_right"
INSIDE_LEFT = "inside_left"
ON_CURVE = "on_curve"
OUTSIDE = "outside"


@dataclass(frozen=True)
class LemniscateGeometry:
    level: float = LEVEL
    crossing_point: complex = CROSSING


def deficit_context(n: int) -> PrecisionContext:
    """Minimal safe precision for order-n deficit work."""
    return PrecisionContext(2 * n + 64)


def classify(z: complex, tol: float = 1e-12) -> str:
    """Position of z relative to the two loops.

    Sub-level points split right/left by Re z vs -1/2 (the loops touch only
    at the crossing point).
    """
    v = abs(z * (z + 1))
    if abs(v - LEVEL) <= tol:
        return ON_CURVE
    if v > LEVEL:
        return OUTSIDE
    return INSIDE_RIGHT if z.real > CROSSING else INSIDE_LEFT


def boundary_point(theta: float) -> complex:
    """Right-loop parametrization z = (-1 + sqrt(1 + e^{i theta})) / 2.

    The principal square root keeps Re z >= -1/2; theta = +-pi maps to the
    crossing point -1/2.
    """
    return (-1 + cmath.sqrt(1 + cmath.exp(1j * theta))) / 2


def boundary_points(m: int) -> np.ndarray:
    """m points of the right loop, midpoint grid in theta over (-pi, pi).

    Every point satisfies |z(z+1)| = 1/4 to machine accuracy; the two ends
    approach the crossing point -1/2 from both sides.
    """
    if m < 8:
        raise ValueError("need m >= 8")
    th = -np.pi + 2 * np.pi * (np.arange(m) + 0.5) / m
    return (-1 + np.sqrt(1 + np.exp(1j * th))) / 2


def loop_compact(m: int) -> WeightedCompact:
    """The right loop as a WeightedCompact with w = |1 + z|."""
    pts = boundary_points(m)
    gaps = np.abs(np.diff(pts))
    h = np.empty(m)
    h[1:-1] = 0.5 * (gaps[:-1] + gaps[1:])
    h[0] = gaps[0]
    h[-1] = gaps[-1]
    w = np.abs(1 + pts)
    return WeightedCompact(pts, w, -np.log(w), h, "lemniscate-right-loop")


def equilibrium_potential(z: complex) -> float:
    """Potential of the balayage of delta_0 onto the right loop.

    log 4 + log|1+z| on the closed right-loop region, -log|z| outside it;
    both branches agree on the loop itself.
    """
    side = classify(z)
    if side == INSIDE_RIGHT or (side == ON_CURVE and z.real >= CROSSING):
        return math.log(4.0) + math.log(abs(1 + z))
    return -math.log(abs(z))


@dataclass(frozen=True)
class DeficitSample:
    """One evaluation of the weighted-section deficit against its main term."""

    n: int
    z: complex
    deficit: complex
    rhs: complex
    ratio: complex


def deficit(n: int, z: complex, ctx: PrecisionContext | None = None) -> DeficitSample:
    """deficit = 1 - (1+z)^n s_n(z) with the first-order main term

        rhs = (-1)^(n+1) z (4 z (1+z))^n / (sqrt(n pi) (2z+1)).

    Requires z != -1/2 (the main term is singular there) and at least
    2n + 64 significand bits.
    """
    z = complex(z)
    if z == CROSSING:
        raise ValueError("the main term is singular at z = -1/2")
    if ctx is None:
        ctx = deficit_context(n)
    if ctx.significand_bits < 2 * n + 64:
        raise ValueError(f"need >= {2*n+64} significand bits at order {n}")
    s_n = taylor_section(n)
    with ctx.workprec():
        zz = mpc(z)
        val = 1 - (1 + zz) ** n * eval_poly(s_n, zz, ctx)
        rhs = ((-1) ** (n + 1) * zz * (4 * zz * (1 + zz)) ** n
               / (mp_sqrt(n * mp_pi) * (2 * zz + 1)))
        ratio = val / rhs if rhs != 0 else mpc(float("nan"))
        return DeficitSample(n, z, complex(val), complex(rhs), complex(ratio))


def weighted_section_modulus(n: int, z: complex,
                             ctx: PrecisionContext | None = None) -> float:
    """|(1+z)^n s_n(z)| at full precision (safe for tiny interior values)."""
    if ctx is None:
        ctx = deficit_context(n)
    with ctx.workprec():
        zz = mpc(z)
        return float(abs((1 + zz) ** n * eval_poly(taylor_section(n), zz, ctx)))


def extremal_norm(n: int, m_boundary: int, exclusion_radius: float = 0.05,
                  ctx: PrecisionContext | None = None) -> float:
    """(sup over the excised loop of |(1+z)^n s~_n(z)|)^(1/n).

    s~_n is the monic normalization of the section; the essential sup drops
    the capacity-zero crossing point, realized here by excising the disk of
    the given radius around -1/2.  Converges to 1/4.
    """
    if exclusion_radius <= 0:
        raise ValueError("exclusion_radius must be positive")
    pts = [z for z in boundary_points(m_boundary)
           if abs(z - CROSSING) >= exclusion_radius]
    if not pts:
        raise ValueError("every boundary point was excluded")
    if ctx is None:
        ctx = deficit_context(n)
    s_n = taylor_section(n)
    lead = abs(s_n.exact_coeffs[-1])
    with ctx.workprec():
        best = mpf(-1)
        for z in pts:
            v = abs((1 + mpc(z)) ** n * eval_poly(s_n, z, ctx))
            if v > best:
                best = v
        return float(mp.exp((mp.log(best) - mp.log(lead)) / n))


def zero_measure(n: int, tol: float = 1e-12) -> DiscreteMeasure:
    """nu_n: equal masses 1/n at the zeros of s_n."""
    if n < 1:
        raise ValueError("n must be >= 1")
    zs = roots(taylor_section(n), tol=tol, ctx=deficit_context(n))
    return DiscreteMeasure(np.array(zs), np.full(n, 1.0 / n))


def monic_section_log_modulus(n: int, z: complex) -> float:
    """(log|s~_n(z)|) for the monic section, via exact coefficients."""
    ctx = deficit_context(n)
    s_n = taylor_section(n)
    lead = abs(s_n.exact_coeffs[-1])
    with ctx.workprec():
        v = eval_poly(s_n, z, ctx)
        return float(mp.log(abs(v)) - mp.log(lead))


def monomial_approximant(k: int, n: int,
                         ctx: PrecisionContext | None = None) -> ComplexPolynomial:
    """P_n with (1+z)^n P_n(z) ~ z^k on compacts K inside the right loop
    (away from -1/2).

    Expand z^k = ((1+z) - 1)^k and approximate each power (1+z)^j by
    (1+z)^n s_{n-j}, the shifted section; the result is the exact-integer
    combination sum_j C(k,j) (-1)^(k-j) s_{n-j}, of degree <= n.
    """
    if k < 0:
        raise ValueError("k must be >= 0")
    if k > n:
        raise ValueError("degree budget exceeded: need n >= k")
    parts = {j: taylor_section(n - j) for j in range(k + 1)}
    out = [0] * (n + 1)
    for j in range(k + 1):
        sign = (-1) ** (k - j)
        cj = math.comb(k, j)
        for i, c in enumerate(parts[j].exact_coeffs):
            out[i] += sign * cj * c
    return ComplexPolynomial.from_exact(out)


def monomial_sup_error(k: int, n: int, K_points,
                       ctx: PrecisionContext | None = None) -> float:
    """sup over K_points of |z^k - (1+z)^n P_n(z)| for the monomial build."""
    if ctx is None:
        ctx = deficit_context(n)
    p = monomial_approximant(k, n, ctx)
    worst = 0.0
    with ctx.workprec():
        for z in K_points:
            zz = mpc(complex(z))
            err = abs(zz ** k - (1 + zz) ** n * eval_poly(p, zz, ctx))
            worst = max(worst, float(err))
    return worst


def descent_critical_point(z: complex) -> complex:
    """Critical point t0 = 2z + 1 of g(t) = (z - t) / (1 + t)^2."""
    return 2 * z + 1


def descent_critical_level(z: complex) -> float:
    """|g(t0)| = 1 / (4 |z + 1|)."""
    return 1.0 / (4.0 * abs(z + 1))


def steepest_descent_plot(z: complex, grid: GridSpec,
                          flank: float = 0.35) -> ContourSet:
    """Level lines of |g(t)| = |z-t| / |1+t|^2 at the critical level and two
    flanking levels (plot-only; polylines of all three levels are merged).
    """
    z = complex(z)
    if z == CROSSING:
        raise ValueError("z = -1/2 makes the critical point degenerate (t0 = 0)")
    lev = descent_critical_level(z)

    def g_abs(t):
        t = np.asarray(t, dtype=complex)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.abs(z - t) / np.abs(1 + t) ** 2
        return np.where(np.isfinite(out), out, 1e300)

    polylines = []
    count = 0
    for level in (lev * (1 - flank), lev, lev * (1 + flank)):
        cs = level_region(g_abs, level, grid)
        polylines.extend(cs.polylines)
        if level == lev:
            count = cs.component_count
    return ContourSet(float(lev), tuple(polylines), count, grid)
