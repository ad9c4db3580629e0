"""Exact and multiprecision complex polynomial arithmetic.

Coefficients of the Taylor sections of (1+z)^(-n) grow like 4^n while the
weighted combinations they enter cancel down to O(1); every routine here that
touches them therefore keeps an exact integer/rational view alongside the
float view and evaluates through mpmath at a caller-chosen precision.

All functions are pure; nothing here mutates shared state beyond mpmath's
thread-local working precision (entered/restored via ``mp.workprec``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np
from mpmath import mp, mpc, mpf


class RootsNonConvergence(RuntimeError):
    """Root iteration stalled; ``best`` carries the last iterate."""

    def __init__(self, message: str, best: list[complex]):
        super().__init__(message)
        self.best = best


class PrecisionError(ValueError):
    """Requested operation needs more significand bits than provided."""


@dataclass(frozen=True)
class PrecisionContext:
    """Binary working precision for multiprecision evaluation.

    ``significand_bits`` must be at least 53 (IEEE double).  Taylor-section
    deficit work at order n needs 2n + 64 bits: the sections carry ~2n bits
    of coefficient growth that cancel, plus guard bits.
    """

    significand_bits: int = 53

    def __post_init__(self):
        if self.significand_bits < 53:
            raise PrecisionError("significand_bits must be >= 53")

    def workprec(self):
        return mp.workprec(self.significand_bits)


DOUBLE = PrecisionContext(53)


def _is_exact_zero(c) -> bool:
    return c == 0


@dataclass(frozen=True)
class ComplexPolynomial:
    """Dense polynomial in ascending coefficient order.

    ``coeffs`` is the float view (python complex); ``exact_coeffs``, when
    present, holds int/Fraction values the float view was rounded from.
    The leading coefficient is nonzero unless the polynomial is identically
    zero (represented by the single coefficient 0).
    """

    coeffs: tuple = ()
    exact_coeffs: tuple | None = None

    def __post_init__(self):
        coeffs = tuple(complex(c) for c in self.coeffs) or (0j,)
        exact = self.exact_coeffs
        if exact is not None:
            exact = tuple(exact)
            if len(exact) != len(coeffs):
                raise ValueError("exact_coeffs length mismatch")
            # trim by the exact view so float underflow cannot drop terms
            while len(exact) > 1 and _is_exact_zero(exact[-1]):
                exact = exact[:-1]
                coeffs = coeffs[:-1]
        else:
            while len(coeffs) > 1 and coeffs[-1] == 0:
                coeffs = coeffs[:-1]
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "exact_coeffs", exact)

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def is_zero(self) -> bool:
        if self.exact_coeffs is not None:
            return all(_is_exact_zero(c) for c in self.exact_coeffs)
        return all(c == 0 for c in self.coeffs)

    @classmethod
    def from_exact(cls, exact: Sequence) -> "ComplexPolynomial":
        return cls(tuple(complex(float(Fraction(c))) for c in exact), tuple(exact))

    @classmethod
    def from_roots(cls, roots: Sequence[complex]) -> "ComplexPolynomial":
        c = np.array([1.0 + 0j])
        for r in roots:
            c = np.convolve(c, np.array([-complex(r), 1.0 + 0j]))
        return cls(tuple(c))

    def __call__(self, z):
        """Horner evaluation in float64 (vectorized over numpy arrays)."""
        z = np.asarray(z, dtype=complex)
        acc = np.zeros_like(z)
        for c in reversed(self.coeffs):
            acc = acc * z + c
        return acc if acc.shape else complex(acc)

    def _mp_coeffs(self):
        if self.exact_coeffs is not None:
            out = []
            for c in self.exact_coeffs:
                if isinstance(c, Fraction):
                    out.append(mpf(c.numerator) / c.denominator)
                else:
                    out.append(mpf(c))
            return out
        return [mpc(c) for c in self.coeffs]


def eval_poly(p: ComplexPolynomial, z, ctx: PrecisionContext = DOUBLE) -> mpc:
    """Evaluate p(z) by Horner's rule at ctx precision.

    Uses the exact coefficient view when available, so the relative error is
    bounded by ~2^(1-bits) * (deg+1) regardless of coefficient growth.
    """
    with ctx.workprec():
        cs = p._mp_coeffs()
        zz = mpc(z)
        acc = mpc(0)
        for c in reversed(cs):
            acc = acc * zz + c
        return +acc


def taylor_section(n: int) -> ComplexPolynomial:
    """Degree-n Taylor polynomial about 0 of (1+z)^(-n), exact integers.

    Coefficients are c_k = (-1)^k * C(n+k-1, k); c_0 = 1 and the leading
    magnitude is C(2n-1, n) = (1/2)(2n)!/(n!)^2.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    c = [1]
    for k in range(1, n + 1):
        c.append(-c[-1] * (n + k - 1) // k)
    return ComplexPolynomial.from_exact(c)


def monic_normalize(p: ComplexPolynomial) -> tuple[ComplexPolynomial, complex]:
    """Return (p / lead, lead); exact coefficients stay exact (Fractions)."""
    if p.is_zero:
        raise ValueError("cannot normalize the zero polynomial")
    if p.exact_coeffs is not None:
        lead = Fraction(p.exact_coeffs[-1])
        exact = tuple(Fraction(c) / lead for c in p.exact_coeffs)
        return ComplexPolynomial.from_exact(exact), complex(float(lead))
    lead = p.coeffs[-1]
    return ComplexPolynomial(tuple(c / lead for c in p.coeffs)), lead


def _bini_initial(coeffs: Sequence[complex]) -> np.ndarray:
    """Starting points from the upper convex hull of (k, log|c_k|).

    Each hull edge of slope -log r contributes its length worth of points on
    the circle of radius r; this respects the Newton-polygon root moduli and
    avoids the collisions a single Cauchy-bound circle produces for
    polynomials with widely varying coefficient scales.
    """
    pts = []
    for k, c in enumerate(coeffs):
        a = abs(c)
        pts.append((k, math.log(a) if a > 0 else -1e30))
    hull = []
    for k, y in pts:
        while len(hull) >= 2:
            (x1, y1), (x2, y2) = hull[-2], hull[-1]
            if (y2 - y1) * (k - x1) <= (y - y1) * (x2 - x1):
                hull.pop()
            else:
                break
        hull.append((k, y))
    out = []
    for seg, (lo, hi) in enumerate(zip(hull[:-1], hull[1:])):
        (k1, y1), (k2, y2) = lo, hi
        r = math.exp((y1 - y2) / (k2 - k1))
        cnt = k2 - k1
        for j in range(cnt):
            th = 2 * math.pi * (j + 0.5) / cnt + 0.4001 * seg + 0.2711
            out.append(complex(r * math.cos(th), r * math.sin(th)))
    return np.array(out, dtype=complex)


def _aberth_sweeps_f64(mon: np.ndarray, z: np.ndarray, sweeps: int = 400) -> np.ndarray:
    """Vectorized float64 Aberth-Ehrlich warm start on a monic polynomial."""
    n = len(mon) - 1
    best = z
    for _ in range(sweeps):
        p = np.zeros_like(z)
        d = np.zeros_like(z)
        for k in range(n, -1, -1):
            d = d * z + p
            p = p * z + mon[k]
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            nw = p / d
            diff = z[:, None] - z[None, :]
            np.fill_diagonal(diff, np.inf)
            s = (1.0 / diff).sum(axis=1)
            step = nw / (1.0 - nw * s)
        step = np.where(np.isfinite(step), step, 0.1 * (1 + np.abs(z)))
        z = z - step
        best = z
        if np.max(np.abs(step) / (1 + np.abs(z))) < 1e-10:
            break
    return best


def roots(p: ComplexPolynomial, tol: float = 1e-12,
          ctx: PrecisionContext | None = None, max_sweeps: int = 120) -> list[complex]:
    """All roots (with multiplicity) by Aberth-Ehrlich simultaneous iteration.

    Two stages: a vectorized double-precision pass from Newton-polygon
    starting points, then refinement sweeps at full precision.  The result is
    accepted when every root satisfies the scaled residual

        |p(root)| / (max_k |c_k| * max(1, |root|)^deg) <= tol

    or the residual is at the Horner roundoff floor for the working
    precision.  Non-convergence raises RootsNonConvergence carrying the best
    iterate.
    """
    deg = p.degree
    if deg < 1:
        raise ValueError("degree must be >= 1")
    if tol <= 0:
        raise ValueError("tol must be positive")
    if ctx is None:
        ctx = PrecisionContext(max(120, 2 * deg + 64))

    floats = np.array(p.coeffs, dtype=complex)
    mon = floats / floats[-1]
    z0 = _aberth_sweeps_f64(mon, _bini_initial(p.coeffs))

    with ctx.workprec():
        cs = p._mp_coeffs()
        zs = [mpc(z) for z in z0]
        cmax = max(abs(c) for c in cs)
        abs_cs = [abs(c) for c in cs]
        eps = mpf(2) ** (-ctx.significand_bits)
        step_floor = mpf(2) ** (-(ctx.significand_bits - 12))
        stalled = 0
        prev_max = mpf("inf")
        for _ in range(max_sweeps):
            max_step = mpf(0)
            for i in range(deg):
                z = zs[i]
                pv = cs[deg]
                dv = mpc(0)
                for k in range(deg - 1, -1, -1):
                    dv = dv * z + pv
                    pv = pv * z + cs[k]
                if dv == 0:
                    zs[i] = z + mpf("1e-6") * (1 + abs(z))
                    continue
                nw = pv / dv
                ssum = mpc(0)
                for j in range(deg):
                    if j != i:
                        ssum += 1 / (z - zs[j])
                den = 1 - nw * ssum
                step = nw / den if den != 0 else nw
                zs[i] = z - step
                rel = abs(step) / (1 + abs(zs[i]))
                if rel > max_step:
                    max_step = rel
            if max_step < step_floor:
                break
            stalled = stalled + 1 if max_step >= prev_max else 0
            prev_max = max_step
            if stalled >= 4:
                break

        out = []
        for z in zs:
            pv = mpc(0)
            bnd = mpf(0)
            az = abs(z)
            for c, ac in zip(reversed(cs), reversed(abs_cs)):
                pv = pv * z + c
                bnd = bnd * az + ac
            scaled = abs(pv) / (cmax * max(mpf(1), az) ** deg)
            roundoff_ok = abs(pv) <= 64 * eps * bnd * (deg + 1)
            if scaled > tol and not roundoff_ok:
                raise RootsNonConvergence(
                    f"root residual {float(scaled):.3e} above tol {tol:.1e}",
                    best=[complex(w) for w in zs])
            out.append(complex(z))
    return out


@lru_cache(maxsize=32)
def gauss_legendre_nodes(m: int, bits: int) -> tuple:
    """Gauss-Legendre nodes/weights on [-1, 1] at `bits` precision.

    float64 seeds from numpy, then Newton steps on P_m at working precision.
    """
    x0, _ = np.polynomial.legendre.leggauss(m)
    with mp.workprec(bits + 24):
        xs, ws = [], []
        for xi in x0:
            x = mpf(float(xi))
            for _ in range(4):
                p0, p1 = mpf(1), x
                for k in range(2, m + 1):
                    p0, p1 = p1, ((2 * k - 1) * x * p1 - (k - 1) * p0) / k
                dp = m * (x * p1 - p0) / (x * x - 1)
                x = x - p1 / dp
            p0, p1 = mpf(1), x
            for k in range(2, m + 1):
                p0, p1 = p1, ((2 * k - 1) * x * p1 - (k - 1) * p0) / k
            dp = m * (x * p1 - p0) / (x * x - 1)
            xs.append(x)
            ws.append(2 / ((1 - x * x) * dp * dp))
    return tuple(xs), tuple(ws)


def remainder_integral(n: int, z: complex, quad_nodes: int | None = None,
                       ctx: PrecisionContext | None = None) -> mpc:
    """Taylor remainder (1+z)^(-n) - s_n(z) by quadrature along [0, z].

    Evaluates (-1)^(n+1) * n * C(2n,n) * integral_0^z (z-t)^n / (1+t)^(2n+1) dt
    with Gauss-Legendre on the straight segment (t = s z), which avoids the
    pole at -1 for every z off the cut (-inf, -1].  The integer prefactor is
    carried exactly.  Independent of eval_poly; serves as its oracle.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    z = complex(z)
    if z.imag == 0 and z.real <= -1:
        raise ValueError("z on the cut (-inf, -1]: segment [0, z] meets the pole")
    if quad_nodes is None:
        quad_nodes = max(16, 4 * n)
    if quad_nodes < 16:
        raise ValueError("quad_nodes must be >= 16")
    if ctx is None:
        ctx = PrecisionContext(max(120, 2 * n + 64))
    if z == 0 or n == 0:
        return mpc(0)

    xs, ws = gauss_legendre_nodes(quad_nodes, ctx.significand_bits)
    with ctx.workprec():
        zz = mpc(z)
        acc = mpc(0)
        for x, w in zip(xs, ws):
            s = (x + 1) / 2
            acc += w * (1 - s) ** n / (1 + s * zz) ** (2 * n + 1)
        acc = acc / 2
        pref = (-1) ** (n + 1) * n * math.comb(2 * n, n)
        out = pref * zz ** (n + 1) * acc
        if not mp.isfinite(out):
            raise ArithmeticError("quadrature estimate is non-finite")
        return +out
