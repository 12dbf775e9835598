"""Protocol grid and the daily compress-add-smooth recursion.

The memory is a piecewise-linear path of mixtures over [0, 1], stored as
L + 1 nodes on the uniform grid t_j = j / L. Each day:

* compress relabels node times onto [0, L / (L + 1)] (lossless, the node
  states are untouched),
* add appends the new day's target at t = 1 (non-destructive),
* smooth evaluates the augmented L+2-node path back onto the L-segment
  grid. This rebinning is the only lossy step of the recursion.

Earlier days are recovered by evaluating the path at their readout time,
which contracts by L / (L + 1) per day, so day m is found at
t = (L / (L + 1)) ** (n - m) after n days.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gm import GaussianMixture, convex_combine

SNAPSHOT_SCHEMA_VERSION = 1


def _check_nodes(nodes: tuple[GaussianMixture, ...], minimum: int) -> None:
    if len(nodes) < minimum:
        raise ValueError(f"need at least {minimum} nodes, got {len(nodes)}")
    k, d = nodes[0].k, nodes[0].d
    for i, g in enumerate(nodes):
        if g.k != k or g.d != d:
            raise ValueError(f"node {i} has shape ({g.k}, {g.d}), expected ({k}, {d})")


def _eval_nodes(nodes: tuple[GaussianMixture, ...], t: float) -> GaussianMixture:
    """Piecewise-linear evaluation of a uniform node path over [0, 1]."""
    segs = len(nodes) - 1
    j = min(int(t * segs), segs - 1)
    alpha = t * segs - j
    return convex_combine(nodes[j], nodes[j + 1], alpha)


@dataclass(frozen=True)
class ProtocolGrid:
    """L + 1 mixture nodes at times j / L."""

    nodes: tuple[GaussianMixture, ...]

    def __post_init__(self):
        _check_nodes(self.nodes, 2)

    @property
    def L(self) -> int:
        return len(self.nodes) - 1

    @property
    def k(self) -> int:
        return self.nodes[0].k

    @property
    def d(self) -> int:
        return self.nodes[0].d

    def eval_at(self, t: float) -> GaussianMixture:
        return eval_at(self, t)


@dataclass(frozen=True)
class AugmentedGrid:
    """L + 2 nodes at times j / (L + 1): a compressed grid plus the new day."""

    nodes: tuple[GaussianMixture, ...]

    def __post_init__(self):
        _check_nodes(self.nodes, 3)

    @property
    def L(self) -> int:
        return len(self.nodes) - 2

    def eval_at(self, t: float) -> GaussianMixture:
        if not 0.0 <= t <= 1.0:
            raise ValueError(f"t must lie in [0, 1], got {t!r}")
        return _eval_nodes(self.nodes, t)


@dataclass(frozen=True)
class RebinMatrix:
    """Sparse-by-contract rebin operator: each row carries at most two weights."""

    L: int
    W: np.ndarray


@dataclass(frozen=True)
class MemoryState:
    """Everything retained between days: prior, grid, readout times, history.

    ``originals`` holds the exact daily targets for later comparison; it is
    not part of the memory budget and is not serialized in snapshots (runs
    regenerate it from their target stream).
    """

    prior: GaussianMixture
    grid: ProtocolGrid
    day: int
    readout: dict[int, float]
    originals: tuple[GaussianMixture, ...]


def eval_at(grid: ProtocolGrid, t: float) -> GaussianMixture:
    """Interpolate node parameters at time t in [0, 1]."""
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"t must lie in [0, 1], got {t!r}")
    return _eval_nodes(grid.nodes, t)


def init_protocol(prior: GaussianMixture, target1: GaussianMixture, L: int) -> ProtocolGrid:
    """Day-1 grid: the linear ramp from the prior (t=0) to the first target (t=1)."""
    if L < 1:
        raise ValueError(f"L must be >= 1, got {L}")
    if prior.k != target1.k or prior.d != target1.d:
        raise ValueError(
            f"prior shape ({prior.k}, {prior.d}) does not match target ({target1.k}, {target1.d})"
        )
    nodes = tuple(convex_combine(prior, target1, j / L) for j in range(L + 1))
    return ProtocolGrid(nodes)


def compress(grid: ProtocolGrid) -> tuple[GaussianMixture, ...]:
    """Relabel node times onto j / (L + 1); node states are reused as-is."""
    return tuple(grid.nodes)


def add(compressed: tuple[GaussianMixture, ...], target: GaussianMixture) -> AugmentedGrid:
    """Append the new day at t = 1, yielding L + 2 nodes on the (L + 1)-grid."""
    ref = compressed[0]
    if target.k != ref.k or target.d != ref.d:
        raise ValueError(
            f"target shape ({target.k}, {target.d}) does not match grid ({ref.k}, {ref.d})"
        )
    return AugmentedGrid(tuple(compressed) + (target,))


def rebin_indices(L: int) -> list[tuple[int, float]]:
    """Exact (segment, alpha) pairs locating each new node on the augmented grid.

    New node j sits at position j (L + 1) / L in augmented-node units; the
    arithmetic is done on integers so alpha is an exact rational r / L.
    """
    out = []
    for j in range(L + 1):
        num = j * (L + 1)
        k = num // L
        if k > L:
            k = L
        out.append((k, (num - k * L) / L))
    return out


def rebin_matrix(L: int) -> RebinMatrix:
    """Dense form of the rebin operator (cross-check path for smooth)."""
    if L < 1:
        raise ValueError(f"L must be >= 1, got {L}")
    W = np.zeros((L + 1, L + 2))
    for j, (k, alpha) in enumerate(rebin_indices(L)):
        W[j, k] = 1.0 - alpha
        W[j, k + 1] += alpha
    return RebinMatrix(L, W)


def smooth(aug: AugmentedGrid, L: int) -> ProtocolGrid:
    """Rebin the augmented path onto L + 1 nodes by direct interpolation."""
    if len(aug.nodes) != L + 2:
        raise ValueError(f"augmented grid has {len(aug.nodes)} nodes, expected {L + 2}")
    nodes = tuple(
        convex_combine(aug.nodes[k], aug.nodes[k + 1], alpha) for k, alpha in rebin_indices(L)
    )
    return ProtocolGrid(nodes)


def smooth_via_matrix(aug: AugmentedGrid, L: int) -> ProtocolGrid:
    """Rebin through the explicit matrix product; equivalent to smooth."""
    if len(aug.nodes) != L + 2:
        raise ValueError(f"augmented grid has {len(aug.nodes)} nodes, expected {L + 2}")
    W = rebin_matrix(L).W
    weights = np.stack([g.weights for g in aug.nodes])
    means = np.stack([g.means for g in aug.nodes])
    covs = np.stack([g.covs for g in aug.nodes])
    new_w = np.einsum("ja,ak->jk", W, weights)
    new_m = np.einsum("ja,akd->jkd", W, means)
    new_c = np.einsum("ja,akde->jkde", W, covs)
    nodes = tuple(
        GaussianMixture(new_w[j], new_m[j], new_c[j]) for j in range(L + 1)
    )
    return ProtocolGrid(nodes)


def new_memory(prior: GaussianMixture, target1: GaussianMixture, L: int) -> MemoryState:
    """State after day 1."""
    grid = init_protocol(prior, target1, L)
    return MemoryState(prior, grid, 1, {1: 1.0}, (target1,))


def incorporate(state: MemoryState, target: GaussianMixture) -> MemoryState:
    """One day of the recursion; returns the next state, inputs untouched."""
    L = state.grid.L
    grid = smooth(add(compress(state.grid), target), L)
    shrink = L / (L + 1.0)
    readout = {m: t * shrink for m, t in state.readout.items()}
    readout[state.day + 1] = 1.0
    return MemoryState(state.prior, grid, state.day + 1, readout, state.originals + (target,))


def readout_time(L: int, age: int) -> float:
    """Exact readout time of a memory of the given age: (L / (L + 1)) ** age."""
    if age < 0:
        raise ValueError(f"age must be >= 0, got {age}")
    return (L / (L + 1.0)) ** age


def replay(state: MemoryState, m: int) -> GaussianMixture:
    """Reconstruct day m by evaluating the grid at its current readout time."""
    if m not in state.readout:
        raise KeyError(f"day {m} is not tracked; run covers 1..{state.day}")
    return eval_at(state.grid, state.readout[m])


def memory_footprint(L: int, K: int, d: int) -> int:
    """Scalar parameter count of the grid: (L + 1) * K * (d^2 + d + 1)."""
    return (L + 1) * K * (d * d + d + 1)


def snapshot_dict(state: MemoryState) -> dict:
    """JSON-ready snapshot: grid, prior and readout table only."""
    return {
        "schema_version": SNAPSHOT_SCHEMA_VERSION,
        "L": state.grid.L,
        "day": state.day,
        "prior": state.prior.to_dict(),
        "nodes": [g.to_dict() for g in state.grid.nodes],
        "readout": {str(m): t for m, t in state.readout.items()},
    }


def state_from_snapshot(data: dict, originals: tuple[GaussianMixture, ...] = ()) -> MemoryState:
    """Rebuild a state from a snapshot dict.

    ``originals`` may be supplied by the caller (typically regenerated from
    the deterministic target stream) so that metrics can resume.
    """
    version = data.get("schema_version")
    if version != SNAPSHOT_SCHEMA_VERSION:
        raise ValueError(
            f"snapshot schema version {version!r} is not supported "
            f"(expected {SNAPSHOT_SCHEMA_VERSION})"
        )
    L = int(data["L"])
    nodes = tuple(GaussianMixture.from_dict(g) for g in data["nodes"])
    if len(nodes) != L + 1:
        raise ValueError(f"snapshot carries {len(nodes)} nodes but L = {L}")
    grid = ProtocolGrid(nodes)
    prior = GaussianMixture.from_dict(data["prior"])
    readout = {int(m): float(t) for m, t in data["readout"].items()}
    return MemoryState(prior, grid, int(data["day"]), readout, tuple(originals))
