"""Best-response dynamics on the unit square of compositions.

The state moves in the direction of the equilibrium residual: a group's
sector-1 fraction rises while the marginal member still gains from
switching in and falls otherwise. The square is forward invariant: at a
clamped face the outward component is switched off exactly when the corner
test says the minority penalty dominates the advantage tail, which matches
the rest-point semantics of the boundary equilibria.

Integration uses fixed-step RK4 on a time-rescaled copy of the field: the
raw velocity is multiplied by 1 / (1 + (speed + stiffness) / V_CAP), where
stiffness bounds the local Jacobian scale of the residual. Multiplying a
field by a smooth positive scalar reparametrizes time along each orbit
without changing orbits, rest points, stability, or basins, and it keeps
fixed-step RK4 inside its stability region near strongly attracting rest
points (fat-tailed advantage laws produce Jacobian norms in the hundreds,
far beyond what an unscaled step of 0.01 tolerates).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .equilibrium import (
    EquilibriumPoint,
    _component_m,
    _component_w,
    enumerate_equilibria,
)
from .model import Composition, ModelParams

__all__ = [
    "Trajectory",
    "PhasePortrait",
    "BasinMap",
    "NudgeResult",
    "IntegrationError",
    "flow",
    "integrate",
    "phase_portrait",
    "basins",
    "nudge_and_settle",
    "SNAP_RADIUS",
]

#: terminal states within this distance of an enumerated equilibrium snap to it
SNAP_RADIUS = 1e-4

#: speed limit of the integrated field; orbit-preserving reparametrization
V_CAP = 50.0

#: offset used to evaluate the inflow rate at a face where the clamp fails
_FACE_OFFSET = 1e-6

_STOP_SPEED = 1e-10
_STOP_RUNS = 10


class IntegrationError(RuntimeError):
    """A step produced a non-finite state; carries the last finite state."""

    def __init__(self, message: str, last: tuple[float, float]):
        super().__init__(message)
        self.last = last


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # shape (k, 2)
    terminal: Composition
    converged: bool
    converged_to: EquilibriumPoint | None = None


@dataclass
class PhasePortrait:
    axis: np.ndarray                 # n grid coordinates, shared by both axes
    velocity: np.ndarray             # (n, n, 2); [i, j] is the flow at (axis[i], axis[j])
    nullcline_w: list[np.ndarray] = field(default_factory=list)
    nullcline_m: list[np.ndarray] = field(default_factory=list)
    equilibria: list[EquilibriumPoint] = field(default_factory=list)


@dataclass
class BasinMap:
    resolution: int
    labels: np.ndarray               # (n, n) indices into equilibria; -1 unresolved
    equilibria: list[EquilibriumPoint]

    def cell_centers(self) -> np.ndarray:
        c = (np.arange(self.resolution) + 0.5) / self.resolution
        return c


@dataclass
class NudgeResult:
    post_nudge: Composition
    settled: EquilibriumPoint
    tipped: bool


def _face_hold_w(params: ModelParams, at_one: bool, other):
    """Vectorized corner predicate for the W clamp against partner fractions."""
    other = np.asarray(other, dtype=float)
    presence = (1.0 - other) if at_one else other
    coef_g = params.sigma * params.pref_w.c * (params.mu_m / params.mu_w) * presence
    beta = params.adv_w.beta
    if beta < 1.0:
        return coef_g > 0.0
    if beta > 1.0:
        return np.zeros_like(other, dtype=bool)
    q_coef = params.adv_w.C * ((1.0 - params.adv_w.r_e) if at_one else params.adv_w.r_e)
    return q_coef <= coef_g


def _face_hold_m(params: ModelParams, at_one: bool, other):
    other = np.asarray(other, dtype=float)
    presence = (1.0 - other) if at_one else other
    coef_g = params.sigma * params.pref_m.c * (params.mu_w / params.mu_m) * presence
    beta = params.adv_m.beta
    if beta < 1.0:
        return coef_g > 0.0
    if beta > 1.0:
        return np.zeros_like(other, dtype=bool)
    q_coef = params.adv_m.C * ((1.0 - params.adv_m.r_e) if at_one else params.adv_m.r_e)
    return q_coef <= coef_g


def _field(params: ModelParams, x, y):
    """Raw flow on the closed square, vectorized.

    Interior coordinates move at the residual rate. A coordinate sitting on
    its face is frozen when the corner test holds there and otherwise moves
    inward at the rate found a small offset inside the wall.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    x_in = np.clip(x, _FACE_OFFSET, 1.0 - _FACE_OFFSET)
    y_in = np.clip(y, _FACE_OFFSET, 1.0 - _FACE_OFFSET)
    vx = np.asarray(_component_w(params, x_in, y))
    vy = np.asarray(_component_m(params, y_in, x))

    w0 = x == 0.0
    if np.any(w0):
        hold = _face_hold_w(params, False, y)
        vx = np.where(w0 & hold, 0.0, np.where(w0, np.maximum(vx, 0.0), vx))
    w1 = x == 1.0
    if np.any(w1):
        hold = _face_hold_w(params, True, y)
        vx = np.where(w1 & hold, 0.0, np.where(w1, np.minimum(vx, 0.0), vx))
    m0 = y == 0.0
    if np.any(m0):
        hold = _face_hold_m(params, False, x)
        vy = np.where(m0 & hold, 0.0, np.where(m0, np.maximum(vy, 0.0), vy))
    m1 = y == 1.0
    if np.any(m1):
        hold = _face_hold_m(params, True, x)
        vy = np.where(m1 & hold, 0.0, np.where(m1, np.minimum(vy, 0.0), vy))
    return vx, vy


def _stiffness(params: ModelParams, x, y):
    """Upper scale of the flow Jacobian, clipped away from the walls.

    Entries of the Jacobian grow like C / (u(1-u))**(beta+1) from the
    advantage quantile and like sigma*c*z / (u(1-u)) from the penalty term.
    Inputs are clipped to [0.01, 0.99], and a coordinate sitting exactly on
    its face contributes nothing: its dynamics are frozen there, so only the
    free coordinate's scale should throttle the step.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    xc = np.clip(x, 0.01, 0.99)
    yc = np.clip(y, 0.01, 0.99)
    ux = xc * (1.0 - xc)
    uy = yc * (1.0 - yc)
    z_w = params.mu_m / params.mu_w
    z_m = params.mu_w / params.mu_m
    s_x = (
        params.adv_w.C * ux ** -(params.adv_w.beta + 1.0)
        + params.sigma * params.pref_w.c * z_w / ux
    )
    s_y = (
        params.adv_m.C * uy ** -(params.adv_m.beta + 1.0)
        + params.sigma * params.pref_m.c * z_m / uy
    )
    on_face_x = (x == 0.0) | (x == 1.0)
    on_face_y = (y == 0.0) | (y == 1.0)
    return np.where(on_face_x, 0.0, s_x) + np.where(on_face_y, 0.0, s_y)


def _field_capped(params: ModelParams, x, y):
    vx, vy = _field(params, x, y)
    speed = np.hypot(vx, vy)
    scale = 1.0 / (1.0 + (speed + _stiffness(params, x, y)) / V_CAP)
    return vx * scale, vy * scale


def flow(params: ModelParams, comp: Composition) -> np.ndarray:
    """Raw velocity of the best-response dynamics at one composition."""
    vx, vy = _field(params, comp.r_w, comp.r_m)
    return np.array([float(vx), float(vy)])


def _snap(terminal: Composition, equilibria, radius=SNAP_RADIUS):
    best, best_d = None, radius
    for eq in equilibria or []:
        d = max(abs(terminal.r_w - eq.comp.r_w), abs(terminal.r_m - eq.comp.r_m))
        if d <= best_d:
            best, best_d = eq, d
    return best


def integrate(
    params: ModelParams,
    init: Composition,
    t_end: float = 500.0,
    dt: float = 0.01,
    equilibria: list[EquilibriumPoint] | None = None,
) -> Trajectory:
    """Fixed-step RK4 trajectory from an initial composition.

    Every step is projected back onto the unit square. Integration stops
    early once the raw speed stays below 1e-10 for ten consecutive steps;
    the terminal snaps to a supplied equilibrium within SNAP_RADIUS.
    """
    if dt > t_end:
        raise ValueError("dt must not exceed t_end")
    n_steps = int(round(t_end / dt))
    xs = [init.r_w]
    ys = [init.r_m]
    ts = [0.0]
    x, y = init.r_w, init.r_m
    quiet = 0

    for k in range(n_steps):
        k1 = _field_capped(params, x, y)
        x2, y2 = np.clip(x + 0.5 * dt * k1[0], 0.0, 1.0), np.clip(y + 0.5 * dt * k1[1], 0.0, 1.0)
        k2 = _field_capped(params, x2, y2)
        x3, y3 = np.clip(x + 0.5 * dt * k2[0], 0.0, 1.0), np.clip(y + 0.5 * dt * k2[1], 0.0, 1.0)
        k3 = _field_capped(params, x3, y3)
        x4, y4 = np.clip(x + dt * k3[0], 0.0, 1.0), np.clip(y + dt * k3[1], 0.0, 1.0)
        k4 = _field_capped(params, x4, y4)
        x = x + dt / 6.0 * float(k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        y = y + dt / 6.0 * float(k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        if not (np.isfinite(x) and np.isfinite(y)):
            raise IntegrationError(
                f"non-finite state after step {k + 1}", (xs[-1], ys[-1])
            )
        x = min(max(x, 0.0), 1.0)
        y = min(max(y, 0.0), 1.0)
        xs.append(x)
        ys.append(y)
        ts.append((k + 1) * dt)
        vx, vy = _field(params, x, y)
        if max(abs(float(vx)), abs(float(vy))) < _STOP_SPEED:
            quiet += 1
            if quiet >= _STOP_RUNS:
                break
        else:
            quiet = 0

    terminal = Composition(x, y)
    hit = _snap(terminal, equilibria)
    return Trajectory(
        times=np.array(ts),
        states=np.column_stack([xs, ys]),
        terminal=terminal,
        converged=quiet >= _STOP_RUNS,
        converged_to=hit,
    )


def _integrate_batch(params: ModelParams, x0, y0, t_end: float, dt: float):
    """Terminal states of many trajectories, advanced in lockstep."""
    x = np.array(x0, dtype=float).ravel().copy()
    y = np.array(y0, dtype=float).ravel().copy()
    active = np.ones(x.shape, dtype=bool)
    quiet = np.zeros(x.shape, dtype=int)
    n_steps = int(round(t_end / dt))

    for _ in range(n_steps):
        if not np.any(active):
            break
        ax, ay = x[active], y[active]
        k1x, k1y = _field_capped(params, ax, ay)
        k2x, k2y = _field_capped(
            params,
            np.clip(ax + 0.5 * dt * k1x, 0.0, 1.0),
            np.clip(ay + 0.5 * dt * k1y, 0.0, 1.0),
        )
        k3x, k3y = _field_capped(
            params,
            np.clip(ax + 0.5 * dt * k2x, 0.0, 1.0),
            np.clip(ay + 0.5 * dt * k2y, 0.0, 1.0),
        )
        k4x, k4y = _field_capped(
            params,
            np.clip(ax + dt * k3x, 0.0, 1.0),
            np.clip(ay + dt * k3y, 0.0, 1.0),
        )
        nx = np.clip(ax + dt / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x), 0.0, 1.0)
        ny = np.clip(ay + dt / 6.0 * (k1y + 2 * k2y + 2 * k3y + k4y), 0.0, 1.0)
        bad = ~(np.isfinite(nx) & np.isfinite(ny))
        nx = np.where(bad, ax, nx)
        ny = np.where(bad, ay, ny)
        x[active] = nx
        y[active] = ny
        vx, vy = _field(params, nx, ny)
        slow = np.maximum(np.abs(vx), np.abs(vy)) < _STOP_SPEED
        q = quiet[active]
        q = np.where(slow, q + 1, 0)
        quiet[active] = q
        still = active.copy()
        still[active] = (q < _STOP_RUNS) & ~bad
        active = still
    return x, y, quiet >= _STOP_RUNS


# ---------------------------------------------------------------------------
# phase portraits and nullclines
# ---------------------------------------------------------------------------


_NULL_EPS = 1e-9
_NULL_REFINE_TOL = 1e-8


def _refine_on_segment(f, p0, p1, v0):
    """Bisect f along the straight segment p0-p1 until |f| < 1e-8."""
    a, b = np.array(p0, dtype=float), np.array(p1, dtype=float)
    sign0 = 1.0 if v0 > 0 else -1.0
    for _ in range(80):
        mid = 0.5 * (a + b)
        vm = f(mid)
        if abs(vm) < _NULL_REFINE_TOL:
            return mid
        if (1.0 if vm > 0 else -1.0) == sign0:
            a = mid
        else:
            b = mid
    return 0.5 * (a + b)


def _nullcline_polylines(params: ModelParams, which: str, n: int) -> list[np.ndarray]:
    """Zero contour of one residual component by marching squares.

    Cell-edge crossings are located by sign change, refined by bisection
    along the grid edge, and chained into polylines.
    """
    axis = np.linspace(_NULL_EPS, 1.0 - _NULL_EPS, n)
    gx, gy = np.meshgrid(axis, axis, indexing="ij")
    if which == "w":
        vals = np.asarray(_component_w(params, gx, gy))

        def f(p):
            return float(_component_w(params, min(max(p[0], _NULL_EPS), 1 - _NULL_EPS), p[1]))

    else:
        vals = np.asarray(_component_m(params, gy, gx))

        def f(p):
            return float(_component_m(params, min(max(p[1], _NULL_EPS), 1 - _NULL_EPS), p[0]))

    segments = []

    def edge_point(i0, j0, i1, j1):
        v0, v1 = vals[i0, j0], vals[i1, j1]
        p0 = (axis[i0], axis[j0])
        p1 = (axis[i1], axis[j1])
        t = v0 / (v0 - v1)
        guess = (p0[0] + t * (p1[0] - p0[0]), p0[1] + t * (p1[1] - p0[1]))
        refined = _refine_on_segment(f, p0, p1, v0)
        return tuple(refined) if np.isfinite(refined).all() else guess

    for i in range(n - 1):
        for j in range(n - 1):
            corners = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)]
            cross = []
            for a in range(4):
                (i0, j0), (i1, j1) = corners[a], corners[(a + 1) % 4]
                v0, v1 = vals[i0, j0], vals[i1, j1]
                if not (np.isfinite(v0) and np.isfinite(v1)):
                    continue
                if v0 == 0.0:
                    cross.append((axis[i0], axis[j0]))
                elif v0 * v1 < 0.0:
                    cross.append(edge_point(i0, j0, i1, j1))
            if len(cross) == 2:
                segments.append((cross[0], cross[1]))
            elif len(cross) == 4:
                # saddle cell: pair crossings by the sign at the center
                segments.append((cross[0], cross[1]))
                segments.append((cross[2], cross[3]))

    return _chain_segments(segments)


def _chain_segments(segments) -> list[np.ndarray]:
    def key(p):
        return (round(p[0], 7), round(p[1], 7))

    unused = list(range(len(segments)))
    by_end: dict = {}
    for idx, (a, b) in enumerate(segments):
        by_end.setdefault(key(a), []).append(idx)
        by_end.setdefault(key(b), []).append(idx)

    used = set()
    polylines = []
    for start in range(len(segments)):
        if start in used:
            continue
        used.add(start)
        a, b = segments[start]
        chain = [a, b]
        # extend forward from b, then backward from a
        for endpoint, append in ((b, True), (a, False)):
            cur = endpoint
            while True:
                candidates = [i for i in by_end.get(key(cur), []) if i not in used]
                if not candidates:
                    break
                nxt = candidates[0]
                used.add(nxt)
                p, q = segments[nxt]
                step = q if key(p) == key(cur) else p
                if append:
                    chain.append(step)
                else:
                    chain.insert(0, step)
                cur = step
        polylines.append(np.array(chain))
    return polylines


def phase_portrait(
    params: ModelParams,
    n: int,
    grid_n: int | None = None,
    equilibria: list[EquilibriumPoint] | None = None,
) -> PhasePortrait:
    """Vector field on an n x n grid, nullclines, and the equilibrium set."""
    if n < 16:
        raise ValueError(f"portrait resolution must be at least 16, got {n}")
    axis = np.linspace(0.0, 1.0, n)
    gx, gy = np.meshgrid(axis, axis, indexing="ij")
    vx, vy = _field(params, gx, gy)
    vel = np.stack([vx, vy], axis=-1)
    if equilibria is None:
        equilibria = enumerate_equilibria(params, grid_n=grid_n or max(n, 64))
    return PhasePortrait(
        axis=axis,
        velocity=vel,
        nullcline_w=_nullcline_polylines(params, "w", max(n, 64)),
        nullcline_m=_nullcline_polylines(params, "m", max(n, 64)),
        equilibria=equilibria,
    )


def basins(
    params: ModelParams,
    n: int,
    t_end: float = 500.0,
    dt: float = 0.01,
    equilibria: list[EquilibriumPoint] | None = None,
    grid_n: int | None = None,
    threads: int = 1,
) -> BasinMap:
    """Attraction basins on an n x n lattice of cell centers.

    Cells integrate independently; threads > 1 splits the lattice into
    contiguous chunks mapped over a thread pool, with results written back
    by index, so the output never depends on scheduling.
    """
    if n < 16:
        raise ValueError(f"basin resolution must be at least 16, got {n}")
    if equilibria is None:
        equilibria = enumerate_equilibria(params, grid_n=grid_n or max(n, 64))
    centers = (np.arange(n) + 0.5) / n
    gx, gy = np.meshgrid(centers, centers, indexing="ij")
    x0, y0 = gx.ravel(), gy.ravel()
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        chunks = np.array_split(np.arange(x0.size), threads)
        tx = np.empty_like(x0)
        ty = np.empty_like(y0)
        done = np.zeros(x0.size, dtype=bool)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = [
                (idx, pool.submit(_integrate_batch, params, x0[idx], y0[idx], t_end, dt))
                for idx in chunks
                if idx.size
            ]
            for idx, fut in futures:
                cx, cy, cdone = fut.result()
                tx[idx], ty[idx], done[idx] = cx, cy, cdone
    else:
        tx, ty, done = _integrate_batch(params, x0, y0, t_end, dt)
    labels = np.full(tx.shape, -1, dtype=int)
    pts = np.array([[e.comp.r_w, e.comp.r_m] for e in equilibria])
    for k in range(tx.size):
        d = np.max(np.abs(pts - [tx[k], ty[k]]), axis=1)
        j = int(np.argmin(d))
        if d[j] <= SNAP_RADIUS:
            labels[k] = j
    return BasinMap(resolution=n, labels=labels.reshape(n, n), equilibria=equilibria)


def nudge_and_settle(
    params: ModelParams,
    start: Composition,
    floor,
    equilibria: list[EquilibriumPoint] | None = None,
    t_end: float = 500.0,
    dt: float = 0.01,
) -> NudgeResult:
    """Clamp both fractions into [floor, 1 - floor], then let dynamics settle.

    floor may be a scalar or a (floor_w, floor_m) pair; values in [0, 0.5).
    The tipping flag compares the settled point with the equilibrium nearest
    to the starting composition.
    """
    if np.isscalar(floor):
        f_w = f_m = float(floor)
    else:
        f_w, f_m = map(float, floor)
    for f in (f_w, f_m):
        if not (0.0 <= f < 0.5):
            raise ValueError(f"floor must lie in [0, 0.5), got {f}")
    if equilibria is None:
        equilibria = enumerate_equilibria(params)
    post = Composition(
        min(max(start.r_w, f_w), 1.0 - f_w),
        min(max(start.r_m, f_m), 1.0 - f_m),
    )
    traj = integrate(params, post, t_end=t_end, dt=dt, equilibria=equilibria)
    if traj.converged_to is None:
        raise IntegrationError(
            "dynamics did not settle onto an enumerated equilibrium",
            (traj.terminal.r_w, traj.terminal.r_m),
        )
    origin = _snap(start, equilibria, radius=np.inf)
    tipped = (
        max(
            abs(traj.converged_to.comp.r_w - origin.comp.r_w),
            abs(traj.converged_to.comp.r_m - origin.comp.r_m),
        )
        > SNAP_RADIUS
    )
    return NudgeResult(post_nudge=post, settled=traj.converged_to, tipped=tipped)
