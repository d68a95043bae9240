"""Equilibrium computation: residuals, solvers, corner tests, enumeration.

A composition is an equilibrium when no small mass of either group gains
from switching sectors. Interior points must zero the residual system;
clamped coordinates must instead pass a tail-versus-minority-penalty
comparison (verify_corner). This module provides a closed form for unit
tail exponent, a guaranteed monotone iteration, damped Newton from seeds,
full enumeration over the square, and Jacobian-based stability labels.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .model import (
    Composition,
    ModelParams,
    gammas,
    g_interior,
    _quantile_scalar,
)

__all__ = [
    "Residual",
    "EquilibriumPoint",
    "ClosedFormResult",
    "ConvergenceError",
    "ConsistencyError",
    "residual",
    "residual_arrays",
    "efficient_composition",
    "solve_closed_form_beta1",
    "solve_monotone_iteration",
    "solve_from_seed",
    "verify_corner",
    "enumerate_equilibria",
    "classify_stability",
]

INTERIOR = "interior"
EDGE_W0 = "edge-w0"
EDGE_W1 = "edge-w1"
EDGE_M0 = "edge-m0"
EDGE_M1 = "edge-m1"
VERTEX = "vertex"

STABLE = "stable"
SADDLE = "saddle"
UNSTABLE = "unstable"
BOUNDARY_STABLE = "boundary-stable"
DEGENERATE = "degenerate"

#: real parts closer to zero than this are treated as inconclusive
_EIG_ZERO_TOL = 1e-8


class ConvergenceError(RuntimeError):
    """An iterative solver ran out of iterations; carries the last iterate."""

    def __init__(self, message: str, last: tuple[float, float]):
        super().__init__(message)
        self.last = last


class ConsistencyError(RuntimeError):
    """The analytic and numeric corner tests contradict each other."""


@dataclass(frozen=True)
class Residual:
    """Gap between the marginal advantage and the net composition gain."""

    e_w: float
    e_m: float

    @property
    def norm(self) -> float:
        return max(abs(self.e_w), abs(self.e_m))


@dataclass(frozen=True)
class EquilibriumPoint:
    """An equilibrium composition with its location class and stability label.

    eigenvalues holds the two flow-Jacobian eigenvalues for interior points,
    the single tangential derivative for edge points, and None for vertices
    (the transverse linearization diverges at clamped coordinates).
    """

    comp: Composition
    kind: str
    stability: str
    eigenvalues: tuple[complex, ...] | None
    residual_norm: float

    def to_json_dict(self) -> dict:
        eigs = []
        if self.eigenvalues is not None:
            eigs = [{"re": ev.real, "im": ev.imag} for ev in self.eigenvalues]
        return {
            "r_w": self.comp.r_w,
            "r_m": self.comp.r_m,
            "kind": self.kind,
            "stability": self.stability,
            "eigenvalues": eigs,
            "residual_norm": self.residual_norm,
        }


def residual_arrays(params: ModelParams, x, y):
    """Residual components on interior points; vectorized over x, y arrays.

    The marginal member of each group is indifferent when the advantage
    quantile at the current participation equals the composition penalty gap:
    e_w zeroes C_w * (re_w - x) / (x(1-x))**beta against the W penalty term,
    and e_m does the same for the M group at fraction y.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    e_w = _component_w(params, x, y)
    e_m = _component_m(params, y, x)
    return e_w, e_m


def _component_w(params: ModelParams, x, y):
    """W residual; x must be interior, the partner fraction y may sit at 0 or 1."""
    z_w = params.mu_m / params.mu_w
    q_w = params.adv_w.C * (params.adv_w.r_e - x) / (x * (1.0 - x)) ** params.adv_w.beta
    return q_w - params.sigma * g_interior(params.pref_w.c, z_w, x, y)


def _component_m(params: ModelParams, y, x):
    """M residual; y must be interior, the partner fraction x may sit at 0 or 1."""
    z_m = params.mu_w / params.mu_m
    q_m = params.adv_m.C * (params.adv_m.r_e - y) / (y * (1.0 - y)) ** params.adv_m.beta
    return q_m - params.sigma * g_interior(params.pref_m.c, z_m, y, x)


def residual(params: ModelParams, comp: Composition) -> Residual:
    """Residual of the interior equilibrium system at a composition.

    Zero in both components exactly when the composition solves the interior
    consistency conditions. Boundary compositions are rejected; their
    equilibrium status is decided by verify_corner instead.
    """
    if not comp.interior:
        raise ValueError(
            f"residual is defined on the open square; got ({comp.r_w}, {comp.r_m})"
        )
    e_w, e_m = residual_arrays(params, comp.r_w, comp.r_m)
    return Residual(float(e_w), float(e_m))


def efficient_composition(params: ModelParams) -> Composition:
    """Composition under pure income sorting: the fraction with a positive draw."""
    return Composition(params.adv_w.r_e, params.adv_m.r_e)


# ---------------------------------------------------------------------------
# closed form for unit tail exponent
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ClosedFormResult:
    """Closed-form equilibrium plus which parameter region selected it."""

    point: EquilibriumPoint
    case: int
    on_boundary: bool


def solve_closed_form_beta1(params: ModelParams) -> ClosedFormResult:
    """Closed-form unique equilibrium for unit tail exponent.

    With beta = 1 the interior system is linear in the composition, which
    yields four parameter regions: an interior solution, two one-sided
    corner regions, and full segregation of both groups. Regions are tested
    in that order with the printed weak/strict inequalities; landing exactly
    on a region boundary sets on_boundary rather than being resolved
    silently.
    """
    if params.adv_w.beta != 1.0 or params.adv_m.beta != 1.0:
        raise ValueError("closed form requires tail exponent beta = 1")
    re_w, re_m = params.adv_w.r_e, params.adv_m.r_e
    if not (0.0 < re_w < re_m < 1.0):
        raise ValueError(
            f"closed form requires 0 < re_w < re_m < 1, got ({re_w}, {re_m})"
        )
    g_w, g_m = gammas(params)
    g_w *= params.sigma
    g_m *= params.sigma
    if not g_w + g_m < 1.0:
        raise ValueError(
            f"closed form requires gamma_w + gamma_m < 1, got {g_w + g_m}"
        )

    spread = re_m - re_w
    cond_a = g_w * re_m / re_w + g_m          # pushes group W out of sector 1
    cond_b = g_w + g_m * (1.0 - re_w) / (1.0 - re_m)  # pushes group M out of sector 2
    boundary_values = []

    if max(cond_a, cond_b) < 1.0:
        r_w = re_w - g_w / (1.0 - g_w - g_m) * spread
        r_m = re_m + g_m / (1.0 - g_w - g_m) * spread
        comp, kind, case = Composition(r_w, r_m), INTERIOR, 1
    elif cond_a >= 1.0 and g_m < 1.0 - re_m:
        boundary_values = [cond_a - 1.0]
        comp, kind, case = Composition(0.0, re_m / (1.0 - g_m)), EDGE_W0, 2
    elif g_w < re_w and cond_b >= 1.0:
        boundary_values = [cond_b - 1.0]
        comp, kind, case = Composition((re_w - g_w) / (1.0 - g_w), 1.0), EDGE_M1, 3
    elif g_w >= re_w and g_m >= 1.0 - re_m:
        boundary_values = [g_w - re_w, g_m - (1.0 - re_m)]
        comp, kind, case = Composition(0.0, 1.0), VERTEX, 4
    else:
        raise ConsistencyError(
            f"no closed-form region matched (gamma=({g_w}, {g_m}), re=({re_w}, {re_m}))"
        )

    stability, eigs = classify_stability(params, comp, kind)
    rn = _residual_norm_for(params, comp, kind)
    point = EquilibriumPoint(comp, kind, stability, eigs, rn)
    return ClosedFormResult(point, case, any(v == 0.0 for v in boundary_values))


def _residual_norm_for(params: ModelParams, comp: Composition, kind: str) -> float:
    """Residual norm over the free coordinates only (zero for vertices)."""
    if kind == INTERIOR:
        return residual(params, comp).norm
    if kind in (EDGE_W0, EDGE_W1):
        return abs(_edge_residual(params, "m", comp.r_m, clamped_other=comp.r_w))
    if kind in (EDGE_M0, EDGE_M1):
        return abs(_edge_residual(params, "w", comp.r_w, clamped_other=comp.r_m))
    return 0.0


# ---------------------------------------------------------------------------
# monotone iteration
# ---------------------------------------------------------------------------


def solve_monotone_iteration(
    params: ModelParams, tol: float = 1e-10, max_iter: int = 10_000
) -> EquilibriumPoint:
    """Monotone fixed-point construction of an amplified equilibrium.

    Starting from the efficient composition, each sweep re-solves the two
    scalar equations against the partner's previous value: the W fraction
    only falls and the M fraction only rises, so the limit straddles the
    efficient compositions. When a scalar equation loses its interior root
    the coordinate slides to its clamp (0 for W, 1 for M) and the iteration
    continues along the edge.
    """
    re_w, re_m = params.adv_w.r_e, params.adv_m.r_e
    if re_w > re_m:
        raise ValueError(f"monotone iteration requires re_w <= re_m, got ({re_w}, {re_m})")
    if params.sigma == 0.0:
        comp = efficient_composition(params)
        stability, eigs = classify_stability(params, comp, INTERIOR)
        return EquilibriumPoint(comp, INTERIOR, stability, eigs, residual(params, comp).norm)

    r_w, r_m = re_w, re_m
    for _ in range(max_iter):
        try:
            new_w = _scalar_solve_w(params, r_m, upper=r_w)
            new_m = _scalar_solve_m(params, r_w, lower=r_m)
        except ConvergenceError as exc:
            raise ConvergenceError(str(exc), (r_w, r_m)) from None
        step = max(abs(new_w - r_w), abs(new_m - r_m))
        r_w, r_m = new_w, new_m
        if step < tol:
            return _finish_monotone(params, r_w, r_m, tol)
    raise ConvergenceError(
        f"monotone iteration did not converge in {max_iter} sweeps", (r_w, r_m)
    )


def _finish_monotone(params: ModelParams, r_w: float, r_m: float, tol: float) -> EquilibriumPoint:
    w_clamped = r_w <= 0.0
    m_clamped = r_m >= 1.0
    if w_clamped and m_clamped:
        comp, kind = Composition(0.0, 1.0), VERTEX
    elif w_clamped:
        comp, kind = Composition(0.0, r_m), EDGE_W0
    elif m_clamped:
        comp, kind = Composition(r_w, 1.0), EDGE_M1
    else:
        comp, kind = Composition(r_w, r_m), INTERIOR
    if kind != INTERIOR and not verify_corner(params, comp):
        raise ConsistencyError(
            f"monotone iteration slid to {comp} but the corner test rejects it"
        )
    stability, eigs = classify_stability(params, comp, kind)
    return EquilibriumPoint(comp, kind, stability, eigs, _residual_norm_for(params, comp, kind))


def _phi_w(params: ModelParams, x: float, y: float) -> float:
    """Scalar residual of the W equation at own fraction x, partner fraction y."""
    z = params.mu_m / params.mu_w
    q = _quantile_scalar(params.adv_w.C, params.adv_w.r_e, params.adv_w.beta, 1.0 - x)
    return q - params.sigma * params.pref_w.c * z * (y - x) / (x * (1.0 - x))


def _phi_m(params: ModelParams, y: float, x: float) -> float:
    """Scalar residual of the M equation at own fraction y, partner fraction x."""
    z = params.mu_w / params.mu_m
    q = _quantile_scalar(params.adv_m.C, params.adv_m.r_e, params.adv_m.beta, 1.0 - y)
    return q - params.sigma * params.pref_m.c * z * (x - y) / (y * (1.0 - y))


_SCAN_FLOOR = 1e-15


def _descending_grid(upper: float) -> np.ndarray:
    parts = [np.linspace(upper, upper * 1e-3, 800)]
    if upper * 1e-3 > _SCAN_FLOOR:
        parts.append(np.geomspace(upper * 1e-3, _SCAN_FLOOR, 300))
    return np.concatenate(parts)


def _scalar_solve_w(params: ModelParams, y: float, upper: float) -> float:
    """Largest root of the W equation at or below `upper`; 0.0 after a slide.

    When no interior root survives above the scan floor, the coordinate
    slides to its clamp only if the corner test approves of full exclusion;
    otherwise a root exists closer to the wall than floats resolve and a
    ConvergenceError reports the impasse.
    """
    if upper <= 0.0:
        return 0.0
    if _phi_w(params, upper, y) == 0.0:
        return upper
    if upper > _SCAN_FLOOR:
        # residual is <= 0 at the previous iterate; search downward
        grid = np.clip(_descending_grid(upper), _SCAN_FLOOR, None)
        vals = _component_w(params, grid, y)
        pos = np.nonzero(vals > 0.0)[0]
        if pos.size:
            i = pos[0]
            lo, hi = float(grid[i]), float(grid[i - 1]) if i > 0 else upper
            return _bisect(lambda x: _phi_w(params, x, y), lo, hi, want_sign_low=+1.0)
    if _corner_analytic(params, "w", False, y):
        return 0.0
    raise ConvergenceError(
        "W equation root lies closer to 0 than the scan resolves", (upper, y)
    )


def _scalar_solve_m(params: ModelParams, x: float, lower: float) -> float:
    """Smallest root of the M equation at or above `lower`; 1.0 after a slide."""
    if lower >= 1.0:
        return 1.0
    if _phi_m(params, lower, x) == 0.0:
        return lower
    if 1.0 - lower > _SCAN_FLOOR:
        grid = np.clip(1.0 - _descending_grid(1.0 - lower), None, 1.0 - _SCAN_FLOOR)
        vals = _component_m(params, grid, x)
        neg = np.nonzero(vals < 0.0)[0]
        if neg.size:
            i = neg[0]
            lo = float(grid[i - 1]) if i > 0 else lower
            hi = float(grid[i])
            return _bisect(lambda yv: _phi_m(params, yv, x), lo, hi, want_sign_low=+1.0)
    if _corner_analytic(params, "m", True, x):
        return 1.0
    raise ConvergenceError(
        "M equation root lies closer to 1 than the scan resolves", (x, lower)
    )


def _bisect(f, lo: float, hi: float, want_sign_low: float, iters: int = 90) -> float:
    f_lo = f(lo)
    if f_lo * want_sign_low < 0.0:
        lo, hi = hi, lo
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if f(mid) * want_sign_low >= 0.0:
            lo = mid
        else:
            hi = mid
        if abs(hi - lo) < 1e-15:
            break
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# Newton from a seed
# ---------------------------------------------------------------------------

_OPEN_EPS = 1e-12


def _newton_batch(params: ModelParams, x0, y0, tol: float, max_iter: int = 80):
    """Damped Newton with finite-difference Jacobian on a batch of seeds.

    Returns (x, y, ok): seeds whose iterates left the open square or stalled
    have ok = False. Runs all seeds in lockstep with numpy; converged points
    are polished to machine level so duplicates from different seeds agree
    far below the merge radius.
    """
    x = np.array(x0, dtype=float).ravel().copy()
    y = np.array(y0, dtype=float).ravel().copy()
    alive = (x > _OPEN_EPS) & (x < 1 - _OPEN_EPS) & (y > _OPEN_EPS) & (y < 1 - _OPEN_EPS)
    h = 1e-7
    # residual floor below which a point is frozen as converged; well under
    # tol so duplicates from different seeds coincide to ~1e-13 in position
    floor = min(1e-13, tol * 1e-2)

    def norm2(a, b):
        return a * a + b * b

    for _ in range(max_iter):
        if not np.any(alive):
            break
        ew, em = residual_arrays(params, np.clip(x, _OPEN_EPS, 1 - _OPEN_EPS),
                                 np.clip(y, _OPEN_EPS, 1 - _OPEN_EPS))
        alive &= np.maximum(np.abs(ew), np.abs(em)) > floor
        hx = np.minimum(h, np.minimum(x, 1 - x) / 4)
        hy = np.minimum(h, np.minimum(y, 1 - y) / 4)
        ew_xp, em_xp = residual_arrays(params, x + hx, y)
        ew_xm, em_xm = residual_arrays(params, x - hx, y)
        ew_yp, em_yp = residual_arrays(params, x, y + hy)
        ew_ym, em_ym = residual_arrays(params, x, y - hy)
        j11 = (ew_xp - ew_xm) / (2 * hx)
        j21 = (em_xp - em_xm) / (2 * hx)
        j12 = (ew_yp - ew_ym) / (2 * hy)
        j22 = (em_yp - em_ym) / (2 * hy)
        det = j11 * j22 - j12 * j21
        bad = (np.abs(det) < 1e-300) | ~np.isfinite(det)
        det = np.where(bad, 1.0, det)
        dx = (-ew * j22 + em * j12) / det
        dy = (-em * j11 + ew * j21) / det
        alive &= ~bad & np.isfinite(dx) & np.isfinite(dy)

        base = norm2(ew, em)
        lam = np.ones_like(x)
        accepted = np.zeros_like(alive)
        for _ in range(25):
            trial_x = x + lam * dx
            trial_y = y + lam * dy
            inside = (
                (trial_x > _OPEN_EPS) & (trial_x < 1 - _OPEN_EPS)
                & (trial_y > _OPEN_EPS) & (trial_y < 1 - _OPEN_EPS)
            )
            tew, tem = residual_arrays(
                params,
                np.clip(trial_x, _OPEN_EPS, 1 - _OPEN_EPS),
                np.clip(trial_y, _OPEN_EPS, 1 - _OPEN_EPS),
            )
            improved = inside & (norm2(tew, tem) <= base * (1 - 1e-4 * lam))
            take = alive & ~accepted & improved
            x = np.where(take, trial_x, x)
            y = np.where(take, trial_y, y)
            accepted |= take
            if np.all(accepted | ~alive):
                break
            lam = np.where(accepted, lam, lam * 0.5)
        # full steps that left the square with no acceptable damped fallback
        stalled = alive & ~accepted & (lam < 1e-6)
        alive &= ~stalled

    ew, em = residual_arrays(params, np.clip(x, _OPEN_EPS, 1 - _OPEN_EPS),
                             np.clip(y, _OPEN_EPS, 1 - _OPEN_EPS))
    ok = (
        (np.maximum(np.abs(ew), np.abs(em)) < tol)
        & (x > _OPEN_EPS) & (x < 1 - _OPEN_EPS)
        & (y > _OPEN_EPS) & (y < 1 - _OPEN_EPS)
    )
    return x, y, ok


def solve_from_seed(
    params: ModelParams, seed: Composition, tol: float = 1e-10
) -> EquilibriumPoint | None:
    """Find an interior equilibrium by damped Newton from one seed.

    Returns None when iterates leave the open square or stall; on a stall a
    coordinate-wise bisection sweep (re-solving each scalar equation against
    the other coordinate) is attempted before giving up.
    """
    if not seed.interior:
        raise ValueError("seed must be interior")
    x, y, ok = _newton_batch(params, [seed.r_w], [seed.r_m], tol)
    if ok[0]:
        comp = Composition(float(x[0]), float(y[0]))
        stability, eigs = classify_stability(params, comp, INTERIOR)
        return EquilibriumPoint(comp, INTERIOR, stability, eigs, residual(params, comp).norm)

    # Gauss-Seidel fallback on the two scalar equations
    r_w, r_m = seed.r_w, seed.r_m
    for _ in range(200):
        new_w = _nearest_scalar_root_w(params, r_m, r_w)
        if new_w is None:
            return None
        new_m = _nearest_scalar_root_m(params, new_w, r_m)
        if new_m is None:
            return None
        step = max(abs(new_w - r_w), abs(new_m - r_m))
        r_w, r_m = new_w, new_m
        if step < 1e-14:
            break
    if not (0 < r_w < 1 and 0 < r_m < 1):
        return None
    comp = Composition(r_w, r_m)
    if residual(params, comp).norm >= tol:
        return None
    stability, eigs = classify_stability(params, comp, INTERIOR)
    return EquilibriumPoint(comp, INTERIOR, stability, eigs, residual(params, comp).norm)


def _nearest_scalar_root_w(params: ModelParams, y: float, near: float) -> float | None:
    grid = np.linspace(1e-9, 1 - 1e-9, 2001)
    vals = np.asarray(_component_w(params, grid, y))
    sign_flips = np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0]
    if sign_flips.size == 0:
        return None
    roots = [
        _bisect(lambda x: _phi_w(params, x, y), float(grid[i]), float(grid[i + 1]),
                want_sign_low=math.copysign(1.0, vals[i]))
        for i in sign_flips
    ]
    return min(roots, key=lambda r: abs(r - near))


def _nearest_scalar_root_m(params: ModelParams, x: float, near: float) -> float | None:
    grid = np.linspace(1e-9, 1 - 1e-9, 2001)
    vals = np.asarray(_component_m(params, grid, x))
    sign_flips = np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0]
    if sign_flips.size == 0:
        return None
    roots = [
        _bisect(lambda yv: _phi_m(params, yv, x), float(grid[i]), float(grid[i + 1]),
                want_sign_low=math.copysign(1.0, vals[i]))
        for i in sign_flips
    ]
    return min(roots, key=lambda r: abs(r - near))


# ---------------------------------------------------------------------------
# corner verification
# ---------------------------------------------------------------------------


def _corner_coefficients(params: ModelParams, side: str, at_one: bool, other: float):
    """Leading tail coefficients for one clamped coordinate.

    Returns (quantile_coef, quantile_order, g_coef): near the clamp the
    marginal advantage grows like quantile_coef * d ** -beta while the
    composition penalty grows like g_coef * d ** -1.
    """
    if side == "w":
        adv, pref, z = params.adv_w, params.pref_w, params.mu_m / params.mu_w
    else:
        adv, pref, z = params.adv_m, params.pref_m, params.mu_w / params.mu_m
    if at_one:
        q_coef = adv.C * (1.0 - adv.r_e)
        g_coef = params.sigma * pref.c * z * (1.0 - other)
    else:
        q_coef = adv.C * adv.r_e
        g_coef = params.sigma * pref.c * z * other
    return q_coef, adv.beta, g_coef


def _corner_margin(params: ModelParams, side: str, at_one: bool, other: float, d: float):
    """Exact inequality margin at distance d from the clamp (>= 0 means held)."""
    if side == "w":
        adv, pref, z = params.adv_w, params.pref_w, params.mu_m / params.mu_w
    else:
        adv, pref, z = params.adv_m, params.pref_m, params.mu_w / params.mu_m
    if at_one:
        # a mass d stepping down from full participation must not gain
        q = _quantile_scalar(adv.C, adv.r_e, adv.beta, d)
        g = params.sigma * pref.c * z * (other - (1.0 - d)) / ((1.0 - d) * d)
        return q - g
    q = _quantile_scalar(adv.C, adv.r_e, adv.beta, 1.0 - d)
    g = params.sigma * pref.c * z * (other - d) / (d * (1.0 - d))
    return g - q


def _corner_analytic(params: ModelParams, side: str, at_one: bool, other: float) -> bool:
    q_coef, beta, g_coef = _corner_coefficients(params, side, at_one, other)
    if g_coef <= 0.0:
        return False
    if beta < 1.0:
        return True
    if beta > 1.0:
        return False
    return q_coef <= g_coef


def _corner_numeric_consistent(
    params: ModelParams, side: str, at_one: bool, other: float, analytic: bool
) -> bool:
    """Check the clamp inequality on d = 1e-2 .. 1e-8 against the analytic verdict.

    The comparison is on the trend of the penalty-to-advantage ratio, which
    is scale invariant: a slowly diverging tail may not dominate within the
    tested window even though it does asymptotically, but its direction of
    travel is already visible.
    """
    q_coef, beta, g_coef = _corner_coefficients(params, side, at_one, other)
    if g_coef <= 0.0:
        # penalty does not diverge: the exact margin at small d settles it
        return analytic == (_corner_margin(params, side, at_one, other, 1e-8) >= 0.0)
    deltas = 10.0 ** -np.arange(2, 9)
    ratios = []
    for d in deltas:
        if side == "w":
            adv, pref, z = params.adv_w, params.pref_w, params.mu_m / params.mu_w
        else:
            adv, pref, z = params.adv_m, params.pref_m, params.mu_w / params.mu_m
        if at_one:
            q = _quantile_scalar(adv.C, adv.r_e, adv.beta, d)
            g = params.sigma * pref.c * z * (other - (1.0 - d)) / ((1.0 - d) * d)
        else:
            q = _quantile_scalar(adv.C, adv.r_e, adv.beta, 1.0 - d)
            g = params.sigma * pref.c * z * (other - d) / (d * (1.0 - d))
        ratios.append(g / q if q != 0.0 else math.inf)
    first, last = ratios[0], ratios[-1]
    if beta != 1.0:
        trend_up = last > first * (1.0 + 1e-9)
        return trend_up == analytic
    # unit exponent: the ratio converges to g_coef / q_coef
    level_ok = last >= 1.0 - 1e-6
    return level_ok == analytic


def verify_corner(params: ModelParams, candidate: Composition) -> bool:
    """Decide whether the clamped coordinates of a candidate pass the corner test.

    For each coordinate sitting at 0 or 1, the advantage tail (order
    d ** -beta) is compared with the minority penalty (order d ** -1): the
    clamp survives when the penalty dominates for all small deviating masses.
    The analytic exponent/coefficient comparison is authoritative away from
    beta = 1; the exact inequality is also evaluated on d = 1e-2 .. 1e-8 and
    a contradictory trend raises ConsistencyError.
    """
    clamps = []
    if candidate.r_w == 0.0:
        clamps.append(("w", False, candidate.r_m))
    elif candidate.r_w == 1.0:
        clamps.append(("w", True, candidate.r_m))
    if candidate.r_m == 0.0:
        clamps.append(("m", False, candidate.r_w))
    elif candidate.r_m == 1.0:
        clamps.append(("m", True, candidate.r_w))
    if not clamps:
        raise ValueError("verify_corner needs at least one coordinate at 0 or 1")
    for side, at_one, other in clamps:
        analytic = _corner_analytic(params, side, at_one, other)
        if not _corner_numeric_consistent(params, side, at_one, other, analytic):
            raise ConsistencyError(
                f"corner tests disagree for {side} clamp at "
                f"{'1' if at_one else '0'} with partner at {other}"
            )
        if not analytic:
            return False
    return True


# ---------------------------------------------------------------------------
# stability
# ---------------------------------------------------------------------------


def _flow_jacobian(params: ModelParams, x: float, y: float, step: float = 1e-6):
    hx = min(step, x / 2, (1.0 - x) / 2)
    hy = min(step, y / 2, (1.0 - y) / 2)
    ew_xp, em_xp = residual_arrays(params, x + hx, y)
    ew_xm, em_xm = residual_arrays(params, x - hx, y)
    ew_yp, em_yp = residual_arrays(params, x, y + hy)
    ew_ym, em_ym = residual_arrays(params, x, y - hy)
    return np.array(
        [
            [(ew_xp - ew_xm) / (2 * hx), (ew_yp - ew_ym) / (2 * hy)],
            [(em_xp - em_xm) / (2 * hx), (em_yp - em_ym) / (2 * hy)],
        ],
        dtype=float,
    )


def _eig2(j: np.ndarray) -> tuple[complex, complex]:
    tr = j[0, 0] + j[1, 1]
    det = j[0, 0] * j[1, 1] - j[0, 1] * j[1, 0]
    disc = tr * tr - 4.0 * det
    root = math.sqrt(disc) if disc >= 0.0 else complex(0.0, math.sqrt(-disc))
    return (complex(tr + root) / 2.0, complex(tr - root) / 2.0)


def _edge_residual(params: ModelParams, free_side: str, v: float, clamped_other: float) -> float:
    """Residual of the free coordinate's equation along an edge."""
    if free_side == "w":
        return _phi_w(params, v, clamped_other)
    return _phi_m(params, v, clamped_other)


def _edge_info(kind: str):
    """(free side, clamped coordinate value) for an edge kind."""
    return {
        EDGE_W0: ("m", 0.0),
        EDGE_W1: ("m", 1.0),
        EDGE_M0: ("w", 0.0),
        EDGE_M1: ("w", 1.0),
    }[kind]


def classify_stability(
    params: ModelParams, comp: Composition, kind: str
) -> tuple[str, tuple[complex, ...] | None]:
    """Stability label and eigenvalues of one rest point.

    Interior points use the two eigenvalues of the finite-difference flow
    Jacobian: both real parts negative is stable, opposite signs a saddle,
    both positive unstable, and a real part within 1e-8 of zero is reported
    as degenerate rather than guessed. Edge points combine the derivative
    along the free coordinate with the corner test on the clamped one;
    vertices require inflow along both adjacent edges.
    """
    if kind == INTERIOR:
        j = _flow_jacobian(params, comp.r_w, comp.r_m)
        eigs = _eig2(j)
        reals = [ev.real for ev in eigs]
        if any(abs(r) < _EIG_ZERO_TOL for r in reals):
            return DEGENERATE, eigs
        if all(r < 0 for r in reals):
            return STABLE, eigs
        if all(r > 0 for r in reals):
            return UNSTABLE, eigs
        return SADDLE, eigs

    if kind in (EDGE_W0, EDGE_W1, EDGE_M0, EDGE_M1):
        free_side, clamp_val = _edge_info(kind)
        v = comp.r_m if free_side == "m" else comp.r_w
        h = min(1e-6, v / 2, (1.0 - v) / 2)
        d = (
            _edge_residual(params, free_side, v + h, clamp_val)
            - _edge_residual(params, free_side, v - h, clamp_val)
        ) / (2 * h)
        eigs = (complex(d),)
        if abs(d) < _EIG_ZERO_TOL:
            return DEGENERATE, eigs
        corner_holds = verify_corner(params, comp)
        if d < 0 and corner_holds:
            return BOUNDARY_STABLE, eigs
        return SADDLE, eigs

    if kind == VERTEX:
        eps = 1e-6
        x0 = eps if comp.r_w == 0.0 else 1.0 - eps
        y0 = eps if comp.r_m == 0.0 else 1.0 - eps
        # flow of the free coordinate along each adjacent edge, just inside
        e_m_near = _edge_residual(params, "m", y0, comp.r_w)
        e_w_near = _edge_residual(params, "w", x0, comp.r_m)
        m_attracts = e_m_near < 0 if comp.r_m == 0.0 else e_m_near > 0
        w_attracts = e_w_near < 0 if comp.r_w == 0.0 else e_w_near > 0
        if m_attracts and w_attracts:
            return BOUNDARY_STABLE, None
        return SADDLE, None

    raise ValueError(f"unknown equilibrium kind {kind!r}")


# ---------------------------------------------------------------------------
# enumeration
# ---------------------------------------------------------------------------


def enumerate_equilibria(
    params: ModelParams, grid_n: int = 64, tol: float = 1e-10
) -> list[EquilibriumPoint]:
    """All equilibria found on the closed square, sorted lexicographically.

    Interior points come from batched Newton launched at every cell of a
    grid_n x grid_n lattice plus the centers of cells where both residual
    components change sign. Edge candidates are the roots of the free
    coordinate's scalar equation along each edge, kept when the clamped
    coordinate passes the corner test; a candidate whose corner tests
    contradict each other is dropped with a warning. Vertices are kept when
    both clamps pass. Duplicates merge at L-infinity distance 10 * tol.
    """
    if grid_n < 16:
        raise ValueError(f"grid_n must be at least 16, got {grid_n}")

    centers = (np.arange(grid_n) + 0.5) / grid_n
    gx, gy = np.meshgrid(centers, centers, indexing="ij")
    seeds_x = [gx.ravel()]
    seeds_y = [gy.ravel()]

    lat = np.linspace(1e-6, 1.0 - 1e-6, grid_n + 1)
    lx, ly = np.meshgrid(lat, lat, indexing="ij")
    ew, em = residual_arrays(params, lx, ly)
    sw, sm = np.sign(ew), np.sign(em)

    def _flips(s):
        return (
            (s[:-1, :-1] * s[1:, :-1] < 0)
            | (s[:-1, :-1] * s[:-1, 1:] < 0)
            | (s[:-1, :-1] * s[1:, 1:] < 0)
        )

    both = _flips(sw) & _flips(sm)
    ii, jj = np.nonzero(both)
    if ii.size:
        seeds_x.append((lat[ii] + lat[ii + 1]) / 2.0)
        seeds_y.append((lat[jj] + lat[jj + 1]) / 2.0)

    x, y, ok = _newton_batch(params, np.concatenate(seeds_x), np.concatenate(seeds_y), tol)
    interior_pts = np.column_stack([x[ok], y[ok]])

    merge_r = 10.0 * tol
    found: list[tuple[float, float, str]] = []

    def _push(px: float, py: float, kind: str):
        for qx, qy, qkind in found:
            if max(abs(px - qx), abs(py - qy)) < merge_r:
                return
        found.append((px, py, kind))

    # boundary candidates take precedence over interior Newton output that
    # drifted numerically close to a wall
    for edge_kind in (EDGE_W0, EDGE_W1, EDGE_M0, EDGE_M1):
        if edge_kind in (EDGE_W0, EDGE_W1):
            clamped_w = 0.0 if edge_kind == EDGE_W0 else 1.0
            for root in _edge_roots(params, "m", clamped_w):
                cand = Composition(clamped_w, root)
                if _corner_filter(params, cand):
                    _push(clamped_w, root, edge_kind)
        else:
            clamped_m = 0.0 if edge_kind == EDGE_M0 else 1.0
            for root in _edge_roots(params, "w", clamped_m):
                cand = Composition(root, clamped_m)
                if _corner_filter(params, cand):
                    _push(root, clamped_m, edge_kind)

    for vx in (0.0, 1.0):
        for vy in (0.0, 1.0):
            cand = Composition(vx, vy)
            if _corner_filter(params, cand):
                _push(vx, vy, VERTEX)

    for px, py in interior_pts:
        _push(float(px), float(py), INTERIOR)

    points = []
    for px, py, kind in found:
        comp = Composition(px, py)
        stability, eigs = classify_stability(params, comp, kind)
        points.append(
            EquilibriumPoint(comp, kind, stability, eigs, _residual_norm_for(params, comp, kind))
        )
    points.sort(key=lambda p: (p.comp.r_w, p.comp.r_m))
    return points


def _corner_filter(params: ModelParams, cand: Composition) -> bool:
    try:
        return verify_corner(params, cand)
    except ConsistencyError as exc:
        warnings.warn(f"dropping boundary candidate {cand}: {exc}", stacklevel=2)
        return False


def _edge_roots(params: ModelParams, free_side: str, clamped_other: float) -> list[float]:
    """All interior roots of the free coordinate's equation along one edge."""
    t = np.linspace(1e-9, 1.0 - 1e-9, 4001)
    if free_side == "w":
        vals = _component_w(params, t, clamped_other)
    else:
        vals = _component_m(params, t, clamped_other)
    vals = np.asarray(vals)
    flips = np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0]
    roots = []
    for i in flips:
        r = _bisect(
            lambda v: _edge_residual(params, free_side, v, clamped_other),
            float(t[i]),
            float(t[i + 1]),
            want_sign_low=math.copysign(1.0, vals[i]),
        )
        roots.append(r)
    exact = np.nonzero(vals == 0.0)[0]
    roots.extend(float(t[i]) for i in exact)
    return sorted(roots)
