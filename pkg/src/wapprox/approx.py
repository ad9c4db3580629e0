"""Weighted interpolation, rate estimation, and level regions K_R / E_R.

Interpolants P_n of f/W^n are built in Newton form with divided differences
in Leja order; sup errors of f - W^n P_n over the node set are the reported
approximation degrees-of-freedom.  Level sets are extracted by marching
squares with linear edge interpolation; component counts come from flood
fill of the super-level region, which is robust to window clipping.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from mpmath import mp, mpc

from .equilibrium import FeketeSequence, WeightedCompact, solve_equilibrium
from .polycore import DOUBLE, ComplexPolynomial, PrecisionContext


class ExactRepresentationError(ValueError):
    """A reported error is exactly zero: f is exactly representable."""


# ---------------------------------------------------------------------------
# interpolation
# ---------------------------------------------------------------------------


def _divided_differences_f64(t: np.ndarray, y: np.ndarray) -> np.ndarray:
    a = y.astype(complex).copy()
    n = len(t) - 1
    for k in range(1, n + 1):
        for i in range(n, k - 1, -1):
            a[i] = (a[i] - a[i - 1]) / (t[i] - t[i - k])
    return a


def weighted_interpolant(f, W, seq: FeketeSequence, n: int,
                         ctx: PrecisionContext = DOUBLE) -> ComplexPolynomial:
    """P_n of degree <= n with P_n(t_j) = f(t_j) / W(t_j)^n at the first
    n+1 sequence points (Newton form, points kept in Leja order).

    With ctx above 53 bits the divided-difference chain runs in mpmath; pass
    a higher precision when the returned coefficients feed cancellation-heavy
    evaluations (the chain loses roughly deg * log2(spread) bits).
    """
    if n + 1 > len(seq.points):
        raise ValueError("sequence too short for requested degree")
    t = seq.points[: n + 1]
    wv = np.array([complex(W(p)) for p in t])
    if np.any(wv == 0):
        raise ZeroDivisionError("W vanishes at an interpolation node")
    if ctx.significand_bits <= 53:
        y = np.array([complex(f(p)) for p in t]) / wv ** n
        a = _divided_differences_f64(t, y)
        if not np.all(np.isfinite(a)):
            raise OverflowError(
                "divided differences overflowed; increase PrecisionContext bits")
        # Newton -> monomial: c <- c * (x - t_k) + a_k, k = n-1 .. 0
        coeffs = np.array([a[n]], dtype=complex)
        for k in range(n - 1, -1, -1):
            new = np.zeros(len(coeffs) + 1, dtype=complex)
            new[1:] = coeffs
            new[:-1] -= t[k] * coeffs
            new[0] += a[k]
            coeffs = new
        return ComplexPolynomial(tuple(coeffs))
    with ctx.workprec():
        tt = [mpc(p) for p in t]
        a = [mpc(complex(f(p))) / mpc(complex(W(p))) ** n for p in t]
        for k in range(1, n + 1):
            for i in range(n, k - 1, -1):
                a[i] = (a[i] - a[i - 1]) / (tt[i] - tt[i - k])
        coeffs = [mpc(0)] * (n + 1)
        for k in range(n, -1, -1):
            # coeffs <- coeffs * (x - t_k) + a_k
            new = [mpc(0)] * (n + 1)
            for j in range(n):
                new[j + 1] += coeffs[j]
                new[j] -= tt[k] * coeffs[j]
            new[0] += a[k]
            coeffs = new
        return ComplexPolynomial(tuple(complex(c) for c in coeffs))


@dataclass(frozen=True)
class ApproxReport:
    """Degrees, sup-error upper bounds d_n^W over the node set, and the
    geometric rate fitted from the tail."""

    degrees: np.ndarray
    errors: np.ndarray
    rate_estimate: float

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["degree", "error"])
        for d, e in zip(self.degrees, self.errors):
            w.writerow([int(d), repr(float(e))])
        return buf.getvalue()


def rate_estimate(errors, degrees=None) -> float:
    """exp(slope) of the least-squares line of log(error) vs degree over the
    tail half of the sequence.  Raises ExactRepresentationError on any zero
    error (f exactly representable); needs at least 5 positive values."""
    e = np.asarray(errors, dtype=float)
    if len(e) < 5:
        raise ValueError("need at least 5 error values")
    if np.any(e == 0):
        raise ExactRepresentationError("zero approximation error")
    if np.any(e < 0):
        raise ValueError("errors must be positive")
    d = np.arange(len(e)) if degrees is None else np.asarray(degrees, dtype=float)
    tail = len(e) // 2
    slope = np.polyfit(d[tail:], np.log(e[tail:]), 1)[0]
    return float(math.exp(slope))


def interpolation_errors(f, W, seq: FeketeSequence, degrees, eval_points,
                         ctx: PrecisionContext = DOUBLE) -> ApproxReport:
    """Sup of |f - W^n P_n| over eval_points for each degree, with the
    interpolant evaluated in Newton form (no monomial conversion)."""
    degrees = np.asarray(degrees, dtype=int)
    ev = np.asarray(eval_points, dtype=complex)
    errs = []
    if ctx.significand_bits <= 53:
        for n in degrees:
            t = seq.points[: n + 1]
            wv = np.array([complex(W(p)) for p in t])
            y = np.array([complex(f(p)) for p in t]) / wv ** n
            a = _divided_differences_f64(t, y)
            v = np.full(ev.shape, a[n], dtype=complex)
            for k in range(n - 1, -1, -1):
                v = v * (ev - t[k]) + a[k]
            fe = np.array([complex(f(p)) for p in ev])
            we = np.array([complex(W(p)) for p in ev])
            errs.append(float(np.max(np.abs(fe - we ** n * v))))
    else:
        with ctx.workprec():
            evm = [mpc(p) for p in ev]
            fev = [mpc(complex(f(p))) for p in ev]
            wev = [mpc(complex(W(p))) for p in ev]
            for n in degrees:
                t = [mpc(p) for p in seq.points[: n + 1]]
                a = [mpc(complex(f(p))) / mpc(complex(W(p))) ** int(n)
                     for p in seq.points[: n + 1]]
                for k in range(1, int(n) + 1):
                    for i in range(int(n), k - 1, -1):
                        a[i] = (a[i] - a[i - 1]) / (t[i] - t[i - k])
                worst = mp.mpf(0)
                for z, fz, wz in zip(evm, fev, wev):
                    v = a[int(n)]
                    for k in range(int(n) - 1, -1, -1):
                        v = v * (z - t[k]) + a[k]
                    err = abs(fz - wz ** int(n) * v)
                    if err > worst:
                        worst = err
                errs.append(float(worst))
    errs = np.array(errs)
    rate = rate_estimate(errs, degrees) if np.all(errs > 0) and len(errs) >= 5 else float("nan")
    return ApproxReport(degrees, errs, rate)


# ---------------------------------------------------------------------------
# level regions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GridSpec:
    """Rectangular evaluation window: bounds (xmin, xmax, ymin, ymax) and
    points per axis."""

    bounds: tuple
    resolution: int

    def __post_init__(self):
        if self.resolution < 32:
            raise ValueError("resolution must be >= 32 per axis")
        x0, x1, y0, y1 = self.bounds
        if not (x1 > x0 and y1 > y0):
            raise ValueError("bounds must be increasing")

    def axes(self):
        x0, x1, y0, y1 = self.bounds
        return (np.linspace(x0, x1, self.resolution),
                np.linspace(y0, y1, self.resolution))

    def mesh(self):
        xs, ys = self.axes()
        X, Y = np.meshgrid(xs, ys)
        return X + 1j * Y


@dataclass(frozen=True)
class ContourSet:
    """Polyline components of a level set on a rectangular grid.

    component_count counts connected components of the super-level region
    {value > level} (flood fill), which survives polylines clipped by the
    window.  Closed polylines are oriented counterclockwise.
    """

    level: float
    polylines: tuple
    component_count: int
    grid: GridSpec

    @property
    def empty(self) -> bool:
        return len(self.polylines) == 0

    def polylines_complex(self):
        return [p[:, 0] + 1j * p[:, 1] for p in self.polylines]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["component", "re", "im"])
        for ci, poly in enumerate(self.polylines):
            for x, y in poly:
                w.writerow([ci, repr(float(x)), repr(float(y))])
        return buf.getvalue()


def _evaluate_on_grid(value_fn, grid: GridSpec) -> np.ndarray:
    Z = grid.mesh()
    try:
        V = np.asarray(value_fn(Z), dtype=float)
        if V.shape != Z.shape:
            raise TypeError
    except TypeError:
        V = np.vectorize(lambda z: float(value_fn(z)))(Z)
    V = np.where(np.isnan(V), -1e300, V)
    V = np.clip(V, -1e300, 1e300)
    return V


def _marching_squares(xs, ys, V, R):
    """Segments of {V = R} per cell, stitched into polylines.

    Corner state is V > R; saddle cells (codes 5/10) are disambiguated by
    the cell-center average.  Crossing points are computed once per grid
    edge, so shared endpoints match exactly and stitching is a dict walk.
    """
    ny, nx = V.shape
    B = V > R
    cross_h = B[:, :-1] != B[:, 1:]
    cross_v = B[:-1, :] != B[1:, :]
    pts = {}
    for i, j in zip(*np.nonzero(cross_h)):
        v1, v2 = V[i, j], V[i, j + 1]
        t = min(max((R - v1) / (v2 - v1), 0.0), 1.0)
        pts[("h", i, j)] = (xs[j] + t * (xs[j + 1] - xs[j]), ys[i])
    for i, j in zip(*np.nonzero(cross_v)):
        v1, v2 = V[i, j], V[i + 1, j]
        t = min(max((R - v1) / (v2 - v1), 0.0), 1.0)
        pts[("v", i, j)] = (xs[j], ys[i] + t * (ys[i + 1] - ys[i]))

    cells = set()
    for kind, i, j in pts:
        if kind == "h":
            if i > 0:
                cells.add((i - 1, j))
            if i < ny - 1:
                cells.add((i, j))
        else:
            if j > 0:
                cells.add((i, j - 1))
            if j < nx - 1:
                cells.add((i, j))

    LUT = {1: [("b", "l")], 2: [("b", "r")], 3: [("l", "r")], 4: [("r", "t")],
           6: [("b", "t")], 7: [("l", "t")], 8: [("t", "l")], 9: [("b", "t")],
           11: [("r", "t")], 12: [("l", "r")], 13: [("b", "r")], 14: [("b", "l")]}
    nbr = {}
    for i, j in cells:
        code = (int(B[i, j]) | (int(B[i, j + 1]) << 1)
                | (int(B[i + 1, j + 1]) << 2) | (int(B[i + 1, j]) << 3))
        if code in (0, 15):
            continue
        edge = {"b": ("h", i, j), "r": ("v", i, j + 1),
                "t": ("h", i + 1, j), "l": ("v", i, j)}
        if code in (5, 10):
            vc = 0.25 * (V[i, j] + V[i, j + 1] + V[i + 1, j + 1] + V[i + 1, j])
            if code == 5:
                pairs = [("b", "r"), ("t", "l")] if vc > R else [("b", "l"), ("r", "t")]
            else:
                pairs = [("b", "l"), ("r", "t")] if vc > R else [("b", "r"), ("t", "l")]
        else:
            pairs = LUT[code]
        for a, b in pairs:
            ka, kb = edge[a], edge[b]
            nbr.setdefault(ka, []).append(kb)
            nbr.setdefault(kb, []).append(ka)

    seen = set()
    polylines = []
    order = [k for k in nbr if len(nbr[k]) == 1] + list(nbr.keys())
    for start in order:
        if start in seen or start not in nbr:
            continue
        chain = [start]
        seen.add(start)
        cur = start
        while True:
            nxt = next((c for c in nbr[cur] if c not in seen), None)
            if nxt is None:
                if len(chain) > 2 and chain[0] in nbr[cur]:
                    chain.append(chain[0])
                break
            chain.append(nxt)
            seen.add(nxt)
            cur = nxt
        if len(chain) >= 2:
            poly = np.array([pts[k] for k in chain])
            if np.allclose(poly[0], poly[-1]):
                area = np.sum(poly[:-1, 0] * poly[1:, 1] - poly[1:, 0] * poly[:-1, 1])
                if area < 0:
                    poly = poly[::-1]
            polylines.append(poly)
    return polylines


def level_region(value_fn, R: float, grid: GridSpec,
                 _values: np.ndarray | None = None) -> ContourSet:
    """Extract {value_fn = R} and count components of {value_fn > R}."""
    xs, ys = grid.axes()
    V = _evaluate_on_grid(value_fn, grid) if _values is None else _values
    polylines = _marching_squares(xs, ys, V, R)
    _, ncomp = ndimage.label(V > R)
    return ContourSet(float(R), tuple(polylines), int(ncomp), grid)


def find_merge_level(value_fn, R_lo: float, R_hi: float, grid: GridSpec,
                     tol: float = 1e-4) -> float:
    """Bisect the level at which the super-level component count changes.

    Requires different counts at R_lo and R_hi; returns the interval midpoint
    once |R_hi - R_lo| <= tol.  The grid is evaluated once and reused.
    """
    V = _evaluate_on_grid(value_fn, grid)

    def count(R):
        _, n = ndimage.label(V > R)
        return n

    c_lo, c_hi = count(R_lo), count(R_hi)
    if c_lo == c_hi:
        raise ValueError("component counts agree at both endpoints")
    lo, hi = float(R_lo), float(R_hi)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if count(mid) == c_hi:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def contour_integral(polyline_complex: np.ndarray, g) -> complex:
    """Trapezoid quadrature of g along a (closed) polyline of vertices."""
    xi = np.asarray(polyline_complex, dtype=complex)
    gv = g(xi)
    return complex(np.sum(0.5 * (gv[:-1] + gv[1:]) * np.diff(xi)))


# ---------------------------------------------------------------------------
# Pritsker disk diagnostic for W(z) = z
# ---------------------------------------------------------------------------


def disk_compact(center: complex, radius: float, M_boundary: int,
                 pitch: float, weight, label: str = "disk"):
    """Boundary circle + interior cartesian grid discretization of a closed
    disk.  Returns (compact, interior_mask)."""
    th = 2 * np.pi * (np.arange(M_boundary) + 0.5) / M_boundary
    bd = center + radius * np.exp(1j * th)
    hb = np.full(M_boundary, 2 * radius * math.sin(math.pi / M_boundary))
    g = np.arange(-radius, radius + pitch / 2, pitch)
    X, Y = np.meshgrid(g, g)
    zi = (X + 1j * Y).ravel()
    zi = zi[np.abs(zi) <= radius - 0.7 * pitch] + center
    pts = np.concatenate([bd, zi])
    h = np.concatenate([hb, np.full(len(zi), pitch)])
    w = np.abs(np.asarray([weight(p) for p in pts], dtype=complex))
    with np.errstate(divide="ignore"):
        q = -np.log(w)
    interior = np.zeros(len(pts), dtype=bool)
    interior[M_boundary:] = True
    return WeightedCompact(pts, w, q, h, label), interior


@dataclass(frozen=True)
class PritskerDiagnostic:
    interior_mass: float
    constancy_residual: float
    F_const: float
    converged: bool


def pritsker_disk_diagnostic(a: float, r: float, M: int = 1000,
                             gap_tol: float = 1e-5,
                             max_iters: int = 150_000) -> PritskerDiagnostic:
    """Solve the weighted equilibrium of the closed disk D(a, r), Q = -log|z|.

    Reports the fraction of mass at interior nodes and the max deviation of
    U + Q from F over all nodes; the approximation property for W(z) = z on
    the disk holds exactly when r < a/3, where both quantities vanish.
    """
    if not (0 < r < a):
        raise ValueError("need 0 < r < a so the disk avoids the origin")
    M_boundary = max(64, int(0.55 * M))
    target_interior = max(16, M - M_boundary)
    pitch = 2 * r / math.sqrt(target_interior * 4 / math.pi)
    K, interior = disk_compact(a, r, M_boundary, pitch, weight=lambda z: z)
    sol = solve_equilibrium(K, gap_tol=gap_tol, max_iters=max_iters)
    pot = sol.node_potentials + sol.node_Q
    resid = float(np.max(np.abs(pot - sol.F_const)))
    inmass = float(sol.masses_on_nodes[interior].sum())
    return PritskerDiagnostic(inmass, resid, sol.F_const, sol.converged)
