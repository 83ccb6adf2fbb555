"""Euler-Maruyama simulation of Bessel processes and of the coupled triple
``(X, phi, W)`` driven by one Brownian path.

Every path ``p`` of an ensemble draws from its own counter-based stream
``(seed, stream_id + p)``, so results do not depend on how paths are batched
or how many worker threads run them.

The time grid is refined deterministically before any path is drawn: the
noise-free skeleton fixes sub-steps with ``|drift| * h <= eta / 2`` (and, when
coupled, ``|M|_inf * h <= 0.05``). Individual paths that still violate
``|drift| * h <= eta`` or leave the open chamber re-run the offending step on a
Brownian-bridge refinement of the same increment, down to ``h * 2**-max_halvings``.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ChamberError, IntegrationError, SingularityError, UsageError
from .model import Kind, Multiplicity, RootSystem, _frozen_args, chamber_contains, check_singularity
from .model import drift_batch, frozen_field, frozen_jacobian_batch
from .numerics import RngStream, bridge_split

COLLISION_POLICIES = ("reject-and-halve", "error")
W_SUBSTEP_BOUND = 0.1


@dataclass(frozen=True)
class SimScheme:
    dt: float = 1e-3
    eta: float = 0.1
    collision: str = "reject-and-halve"
    max_halvings: int = 20
    chunk: int = 250

    def __post_init__(self):
        if not self.dt > 0:
            raise UsageError("dt must be positive")
        if not 0 < self.eta < 1:
            raise UsageError("eta must lie in (0, 1)")
        if self.collision not in COLLISION_POLICIES:
            raise UsageError(f"collision policy must be one of {COLLISION_POLICIES}")
        if self.chunk < 1:
            raise UsageError("chunk must be positive")

    def as_dict(self):
        return {"scheme": "euler-maruyama", "dt": self.dt, "eta": self.eta,
                "collision": self.collision, "max_halvings": self.max_halvings}


def interior_mask(kind: Kind, x: np.ndarray) -> np.ndarray:
    """Batched strict chamber test over the last axis."""
    if x.shape[-1] == 1:
        ok = np.ones(x.shape[:-1], dtype=bool)
    elif kind is Kind.D:
        ok = np.all(x[..., :-2] > x[..., 1:-1], axis=-1) & (x[..., -2] > np.abs(x[..., -1]))
        return ok
    else:
        ok = np.all(x[..., :-1] > x[..., 1:], axis=-1)
    if kind is Kind.B:
        ok &= x[..., -1] > 0
    return ok


def fold_to_B(path) -> np.ndarray:
    """Absolute value of the last coordinate: maps a D-chamber path into the B-chamber."""
    out = np.array(path, dtype=float, copy=True)
    out[..., -1] = np.abs(out[..., -1])
    return out


# -- dynamics ------------------------------------------------------------------


class _Dynamics:
    """One Euler step of ``X`` (and optionally the skeleton ``S`` and ``W``)."""

    def __init__(self, m: Multiplicity, lam: float, coupled: bool, eta: float):
        self.m = m
        self.eta_bound = eta
        self.kind = m.kind
        self.lam = lam
        self.coupled = coupled
        self.nu = m.nu if m.kind is Kind.B else None

    def drift(self, x):
        b = drift_batch(self.m, x)
        if self.lam:
            b = b - self.lam * x
        return b

    def skeleton_field(self, s):
        h = frozen_field(self.kind, s, self.nu)
        if self.lam:
            h = h - self.lam * s
        return h

    def matrix(self, s):
        j = frozen_jacobian_batch(self.kind, s, self.nu)
        if self.lam:
            j = j - self.lam * np.eye(s.shape[-1])
        return j

    def step(self, state, h, db):
        """Return (new_state, ok_mask, drift_ok_mask)."""
        x = state[0]
        b = self.drift(x)
        x_new = x + h * b + db
        drift_ok = np.linalg.norm(b, axis=-1) * h <= self.eta_bound
        ok = interior_mask(self.kind, x_new) & np.all(np.isfinite(x_new), axis=-1)
        if not self.coupled:
            return (x_new,), ok, drift_ok
        s, w = state[1], state[2]
        s_new = s + h * self.skeleton_field(s)
        w_new = w + h * np.einsum("...ij,...j->...i", self.matrix(s), w) + db
        return (x_new, s_new, w_new), ok, drift_ok


def _fine_schedule(dyn: _Dynamics, x0, s0, t_grid, scheme: SimScheme):
    """Deterministic fine time steps; returns (steps, output_index)."""
    steps = []
    out_idx = [0]
    x = np.array(x0, dtype=float)
    s = None if s0 is None else np.array(s0, dtype=float)
    for t0, t1 in zip(t_grid[:-1], t_grid[1:]):
        t = t0
        while t1 - t > 1e-12 * max(1.0, t1):
            h = min(scheme.dt, t1 - t)
            bn = np.linalg.norm(dyn.drift(x))
            if bn > 0:
                h = min(h, 0.5 * scheme.eta / bn)
            if s is not None:
                mn = np.abs(dyn.matrix(s)).sum(axis=-1).max()
                if mn > 0:
                    h = min(h, 0.5 * W_SUBSTEP_BOUND / mn)
            if t1 - t - h < 1e-3 * h:
                h = t1 - t
            x = x + h * dyn.drift(x)
            if s is not None:
                s = s + h * dyn.skeleton_field(s)
            steps.append(h)
            t = t1 if h == t1 - t else t + h
        out_idx.append(len(steps))
    return np.array(steps), np.array(out_idx)


def _refine(dyn, state, h, db, gen, depth, scheme, t):
    """Re-run one step of a single path (arrays shaped (1, N)) on bridge halves."""
    new, ok, drift_ok = dyn.step(state, h, db)
    if ok[0] and drift_ok[0]:
        return new
    if not ok[0] and scheme.collision == "error":
        raise SingularityError(f"proposal left the open chamber at t={t!r}")
    if depth >= scheme.max_halvings:
        raise IntegrationError(
            f"step-size floor reached at t={t!r} (h={h!r}); refine dt", last_time=t
        )
    halves = bridge_split(db, 2, h, gen)
    mid = _refine(dyn, state, 0.5 * h, halves[0], gen, depth + 1, scheme, t)
    return _refine(dyn, mid, 0.5 * h, halves[1], gen, depth + 1, scheme, t + 0.5 * h)


def _run_chunk(dyn, init_state, steps, out_idx, streams, scheme, record):
    p = len(streams)
    n = init_state[0].shape[-1]
    sqrt_h = np.sqrt(steps)[:, None]
    incr = np.stack([s.generator().standard_normal((steps.size, n)) * sqrt_h for s in streams])
    state = tuple(np.repeat(a[None], p, axis=0) for a in init_state)
    n_out = out_idx.size
    outs = [np.empty((p, n_out, n)) for _ in state]
    for a, o in zip(state, outs):
        o[:, 0] = a
    coarse = np.empty((p, n_out - 1, n)) if record else None
    nxt = 1
    t_start = np.concatenate([[0.0], np.cumsum(steps)])
    for i, h in enumerate(steps):
        db = incr[:, i]
        new, ok, drift_ok = dyn.step(state, h, db)
        bad = np.flatnonzero(~(ok & drift_ok))
        if bad.size:
            new = tuple(np.array(a) for a in new)
            for q in bad:
                sub = tuple(a[q:q + 1] for a in state)
                if not ok[q] and scheme.collision == "error":
                    raise SingularityError(f"path {streams[q].stream_id} left the open chamber")
                gen = streams[q].generator(1, i)
                fixed = _refine(dyn, sub, h, db[q:q + 1], gen, 0, scheme, float(t_start[i]))
                for a, f in zip(new, fixed):
                    a[q] = f[0]
        state = new
        if i + 1 == out_idx[nxt]:
            for a, o in zip(state, outs):
                o[:, nxt] = a
            if record:
                coarse[:, nxt - 1] = incr[:, out_idx[nxt - 1]:out_idx[nxt]].sum(axis=1)
            nxt += 1
    return outs, coarse


def _ensemble(dyn, init_state, t_grid, scheme, rng, n_paths, workers, record):
    steps, out_idx = _fine_schedule(
        dyn, init_state[0], init_state[1] if dyn.coupled else None, t_grid, scheme
    )
    count = 1 if n_paths is None else int(n_paths)
    if count < 1:
        raise UsageError("n_paths must be at least 1")
    streams = [rng.substream(rng.stream_id + p) for p in range(count)]
    chunks = [streams[i:i + scheme.chunk] for i in range(0, count, scheme.chunk)]

    def work(chunk):
        return _run_chunk(dyn, init_state, steps, out_idx, chunk, scheme, record)

    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(work, chunks))
    else:
        results = [work(c) for c in chunks]
    outs = [np.concatenate([r[0][j] for r in results]) for j in range(len(init_state))]
    coarse = np.concatenate([r[1] for r in results]) if record else None
    if n_paths is None:
        outs = [o[0] for o in outs]
        coarse = None if coarse is None else coarse[0]
    return outs, coarse, steps


def _prepare_grid(t_grid):
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or t_grid.size < 2 or t_grid[0] != 0 or np.any(np.diff(t_grid) <= 0):
        raise UsageError("t_grid must be increasing, start at 0 and have at least two points")
    return t_grid


def _check_sim_start(rs: RootSystem, m: Multiplicity, x):
    if m.kind is not rs.kind:
        raise UsageError(f"multiplicity of type {m.kind.value} used with root system {rs}")
    if m.degenerate:
        raise UsageError("simulate the (0, k) type-B process as type D and fold it with fold_to_B")
    x = np.array(x, dtype=float)
    if x.shape != (rs.n,):
        raise UsageError(f"start must have length {rs.n}")
    if not chamber_contains(rs, x, strict=True):
        raise ChamberError(f"start {x} is not in the open {rs.kind.value}-chamber")
    check_singularity(rs, x, zero_is_singular=rs.kind is Kind.B)
    return x


@dataclass(frozen=True)
class BesselPaths:
    """Simulated paths on ``t_grid``; ``paths`` is ``(T, N)`` or ``(P, T, N)``."""

    t_grid: np.ndarray
    paths: np.ndarray
    increments: np.ndarray | None
    seed: int
    scheme: SimScheme
    fine_steps: int


def simulate_bessel(rs: RootSystem, m: Multiplicity, x_start, t_grid, scheme: SimScheme | None = None,
                    rng: RngStream | None = None, n_paths=None, lam: float = 0.0, workers: int = 1,
                    record_increments: bool = False) -> BesselPaths:
    """Euler-Maruyama paths of ``dX = dB + (b(X) - lam X) dt`` from ``x_start``.

    ``record_increments`` returns the Brownian increments over each ``t_grid``
    interval so that other processes can be driven by the same noise.
    """
    scheme = scheme or SimScheme()
    rng = rng or RngStream(0)
    x = _check_sim_start(rs, m, x_start)
    t_grid = _prepare_grid(t_grid)
    dyn = _Dynamics(m, lam, coupled=False, eta=scheme.eta)
    outs, coarse, steps = _ensemble(dyn, (x,), t_grid, scheme, rng, n_paths, workers, record_increments)
    return BesselPaths(t_grid, outs[0], coarse, rng.seed, scheme, steps.size)


def simulate_ou(lam: float, k: float, x_start, t_grid, scheme: SimScheme | None = None,
                rng: RngStream | None = None, n_paths=None, workers: int = 1,
                record_increments: bool = False) -> BesselPaths:
    """Type-A Bessel process with the extra drift ``-lam Y``."""
    x = np.asarray(x_start, dtype=float)
    rs = RootSystem(Kind.A, x.size)
    return simulate_bessel(rs, Multiplicity.type_a(k), x, t_grid, scheme, rng, n_paths, lam=lam,
                           workers=workers, record_increments=record_increments)


@dataclass(frozen=True)
class CoupledPath:
    """Bessel path, skeleton flow and fluctuation path on one Brownian path.

    ``phi`` is the Euler skeleton of the frozen flow on the same fine grid, so
    discretization error cancels in ``residual = sqrt(k) |X - sqrt(k) phi - W|``.
    """

    k: float
    x: np.ndarray
    y_offset: np.ndarray
    t_grid: np.ndarray
    X: np.ndarray
    phi: np.ndarray
    W: np.ndarray
    residual: np.ndarray
    seed: int
    scheme: SimScheme

    @property
    def sup_residual(self):
        return self.residual.max(axis=-1)

    @property
    def clt_error(self):
        """``|sqrt(k)(X/sqrt(k) - phi) - W|`` per time, i.e. ``residual / sqrt(k)``."""
        return self.residual / np.sqrt(self.k)


def simulate_coupled(rs: RootSystem, m: Multiplicity, x, y_offset, t_grid, scheme: SimScheme | None = None,
                     rng: RngStream | None = None, n_paths=None, lam: float = 0.0,
                     workers: int = 1) -> CoupledPath:
    """Simulate ``X`` from ``sqrt(k) x + y`` together with ``W`` along ``phi(., x)``."""
    scheme = scheme or SimScheme()
    rng = rng or RngStream(0)
    if m.kind is not rs.kind:
        raise UsageError(f"multiplicity of type {m.kind.value} used with root system {rs}")
    nu = m.nu if rs.kind is Kind.B else None
    x = _frozen_args(rs, nu, x)
    if not chamber_contains(rs, x, strict=True):
        raise ChamberError(f"x={x} must be in the open chamber")
    y = np.zeros(rs.n) if y_offset is None else np.asarray(y_offset, dtype=float)
    if y.shape != (rs.n,):
        raise UsageError(f"y_offset must have length {rs.n}")
    root_k = np.sqrt(m.k)
    x_start = _check_sim_start(rs, m, root_k * x + y)
    t_grid = _prepare_grid(t_grid)
    dyn = _Dynamics(m, lam, coupled=True, eta=scheme.eta)
    init = (x_start, x.copy(), np.zeros(rs.n))
    (X, S, W), _, _ = _ensemble(dyn, init, t_grid, scheme, rng, n_paths, workers, False)
    residual = root_k * np.linalg.norm(X - root_k * S - W, axis=-1)
    return CoupledPath(m.k, x, y, t_grid, X, S, W, residual, rng.seed, scheme)
