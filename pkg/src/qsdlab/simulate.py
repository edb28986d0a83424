"""Direct simulation of the absorbed chain, conditioned by rejection.

Paths are drawn from the kernel itself (random-map draw for the window and
Gaussian families, inverse-CDF draw for finite chains) and every path that
leaves the domain before the horizon is discarded; surviving paths estimate
the conditioned law and conditioned time averages with no bias beyond the
finite horizon.

Randomness is counter-based: a Philox generator keyed by (seed, chunk index)
with a fixed chunk size, so a trajectory's draws are a pure function of the
seed and its global index.  Results are bit-identical for a given seed no
matter how the chunks would be scheduled, and per-chunk partial sums are
reduced in chunk order.
"""

import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import ndtri

from .errors import NotApplicable, TooFewSurvivors
from .kernels import _map_centers

CHUNK_SIZE = 1 << 20  # fixed: changing it changes the stream layout

#: Sentinel returned by sample_step when the move leaves the domain.
ABSORBED = type("_Absorbed", (), {"__repr__": lambda self: "ABSORBED"})()


def _chunk_generator(seed, chunk_index):
    key = np.array([seed, chunk_index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _noise_to_moves(spec, x, u):
    """Map uniform draws u in [0,1) to proposed next states from x."""
    p = spec.params
    if spec.family in ("affine_uniform", "cubic_uniform"):
        w = float(p["noise_halfwidth"])
        return _map_centers(spec, x) + w * (2.0 * u - 1.0)
    if spec.family == "gaussian_shift":
        sigma = float(p.get("sigma", 1.0))
        return x + sigma * ndtri(u)
    raise NotApplicable(f"cannot simulate family {spec.family!r}")


def sample_step(spec, x, u):
    """One transition from x driven by the uniform variate u.

    Random-map families move by ``f_omega(x)`` with omega the inverse-CDF
    image of u and absorb when the image leaves the domain.  Explicit chains
    use inverse-CDF sampling over the row with CDF layout
    ``[cumsum(row)..., 1.0]``, the final bucket being absorption.
    Returns the new state, or the ABSORBED sentinel.
    """
    if spec.is_explicit:
        q = np.asarray(spec.params["matrix"], dtype=float)
        cdf = np.cumsum(q[int(x)])
        j = int(np.searchsorted(cdf, u, side="right"))
        return ABSORBED if j >= len(cdf) or u >= cdf[-1] else j
    lo, hi = spec.domain
    y = float(_noise_to_moves(spec, np.asarray([x]), np.asarray([u]))[0])
    return y if lo <= y <= hi else ABSORBED


@dataclass(frozen=True)
class TrajectoryBatch:
    """Sufficient statistics of a rejection-sampled batch of paths.

    ``tau_histogram[k]`` counts paths absorbed at step k (1-based);
    ``survivor_count`` counts paths with tau > n_steps.  Terminal states and
    running test-function sums are kept for survivors only.
    """

    seed: int
    n_steps: int
    start: float
    n_paths: int
    survivor_count: int
    terminal_states: np.ndarray
    running_sums: Optional[np.ndarray]
    tau_histogram: np.ndarray


@dataclass(frozen=True)
class ConditionedEstimate:
    kind: str               # "yaglom_histogram" | "birkhoff_average"
    value: object           # histogram array or scalar
    stderr: float
    effective_samples: int


def simulate_batch(spec, x0, n, n_paths, seed=0, h=None):
    """Run n_paths rejection trajectories of length n from x0.

    ``h`` is an optional test function (vectorized over states / points)
    whose running sum over steps 0..n-1 is accumulated per path.
    """
    if n < 0 or n_paths < 1:
        raise ValueError("need n >= 0 and n_paths >= 1")
    explicit = spec.is_explicit
    if explicit:
        q = np.asarray(spec.params["matrix"], dtype=float)
        cdf = np.cumsum(q, axis=1)
        nstates = q.shape[0]
    else:
        lo, hi = spec.domain

    terminals = []
    sums = [] if h is not None else None
    tau_hist = np.zeros(n + 1, dtype=np.int64)
    survivors = 0

    n_chunks = (n_paths + CHUNK_SIZE - 1) // CHUNK_SIZE
    for c in range(n_chunks):
        k = min(CHUNK_SIZE, n_paths - c * CHUNK_SIZE)
        gen = _chunk_generator(seed, c)
        if explicit:
            state = np.full(k, int(x0), dtype=np.int64)
        else:
            state = np.full(k, float(x0))
        acc = np.zeros(k) if h is not None else None
        alive = np.ones(k, dtype=bool)
        for step in range(n):
            idx = np.flatnonzero(alive)
            if idx.size == 0:
                break
            if h is not None:
                acc[idx] += h(state[idx])
            u = gen.random(idx.size)
            if explicit:
                rows = cdf[state[idx]]
                nxt = (u[:, None] >= rows).sum(axis=1)
                dead = nxt >= nstates
                state[idx[~dead]] = nxt[~dead]
            else:
                y = _noise_to_moves(spec, state[idx], u)
                dead = (y < lo) | (y > hi)
                state[idx[~dead]] = y[~dead]
            alive[idx[dead]] = False
            tau_hist[step + 1] += int(dead.sum())
        survivors += int(alive.sum())
        terminals.append(state[alive].copy())
        if h is not None:
            sums.append(acc[alive].copy())

    return TrajectoryBatch(
        seed=seed, n_steps=n, start=x0, n_paths=n_paths,
        survivor_count=survivors,
        terminal_states=np.concatenate(terminals) if terminals else np.empty(0),
        running_sums=np.concatenate(sums) if sums is not None else None,
        tau_histogram=tau_hist,
    )


def _check_budget(spec, n, n_paths, lam_hint):
    if lam_hint is not None:
        expected = n_paths * lam_hint ** n
        if expected < 1000:
            warnings.warn(
                f"expected survivors {expected:.1f} < 1000 at n={n}; "
                "increase n_paths or lower n", stacklevel=3)


def bin_to_grid(samples, grid):
    """Histogram continuous samples onto grid cells (edges at node midpoints)."""
    edges = grid.cell_edges()
    counts, _ = np.histogram(samples, bins=edges)
    return counts.astype(float)


def estimate_yaglom(spec, x0, n, n_paths, seed=0, lam_hint=None, grid=None):
    """Histogram of the chain at time n over surviving paths.

    Continuous-state samples are binned to the cells of ``grid`` so the
    result is comparable (in TV) with the discretized eigenmeasure.  Raises
    TooFewSurvivors below 100 surviving paths.
    """
    _check_budget(spec, n, n_paths, lam_hint)
    batch = simulate_batch(spec, x0, n, n_paths, seed=seed)
    ns = batch.survivor_count
    if ns < 100:
        raise TooFewSurvivors(f"{ns} survivors out of {n_paths} paths at n={n}")
    if spec.is_explicit:
        nstates = np.asarray(spec.params["matrix"]).shape[0]
        counts = np.bincount(batch.terminal_states.astype(int), minlength=nstates).astype(float)
    else:
        if grid is None:
            raise ValueError("grid required to bin continuous samples")
        counts = bin_to_grid(batch.terminal_states, grid)
    hist = counts / counts.sum()
    return ConditionedEstimate(kind="yaglom_histogram", value=hist,
                               stderr=1.0 / math.sqrt(ns), effective_samples=ns)


def estimate_birkhoff(spec, x0, n, h, n_paths, seed=0, lam_hint=None):
    """Mean over surviving paths of the time average (1/n) sum h(X_i), i < n.

    The estimator is unbiased for the exact finite-horizon conditional
    expectation; its distance to the quasi-ergodic integral of h shrinks
    like 1/n.  Raises TooFewSurvivors below 100 surviving paths.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    _check_budget(spec, n, n_paths, lam_hint)
    batch = simulate_batch(spec, x0, n, n_paths, seed=seed, h=h)
    ns = batch.survivor_count
    if ns < 100:
        raise TooFewSurvivors(f"{ns} survivors out of {n_paths} paths at n={n}")
    vals = batch.running_sums / n
    mean = float(vals.mean())
    sd = float(vals.std(ddof=1)) if ns > 1 else float("inf")
    return ConditionedEstimate(kind="birkhoff_average", value=mean,
                               stderr=sd / math.sqrt(ns), effective_samples=ns)
