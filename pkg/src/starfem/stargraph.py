"""Star metric graphs with per-edge diffusion coefficients.

Stage n is the star with rim vertices v_l = (cos l, sin l) for l = 1..n and
unit-length edges oriented away from the shared center: t = 0 at the center,
t = 1 at the rim, and the rim carries the homogeneous Dirichlet condition.
Edges are partitioned into groups by coefficient value; the group fractions
are the finite-n estimates of the limiting shares s_i.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._rng import coefficient_rng
from .errors import InvalidArgumentError

TWO_PI = 2.0 * np.pi

#: default two-group coefficient law: P(K=1) = 1/3, P(K=2) = 2/3
GROUP_VALUES = (1.0, 2.0)
GROUP_PROBS = (1.0 / 3.0, 2.0 / 3.0)


@dataclass(frozen=True)
class StarStage:
    """Geometry and coefficients of one n-edge star.

    ``group_of`` holds 1-based group indices; ``coeffs[l] ==
    group_values[group_of[l] - 1]`` for every edge. ``c_K`` is the recorded
    uniform lower coefficient bound.
    """

    n: int
    angles: np.ndarray
    coeffs: np.ndarray
    group_of: np.ndarray
    group_values: tuple[float, ...]
    c_K: float

    def __post_init__(self):
        for name in ("angles", "coeffs", "group_of"):
            getattr(self, name).flags.writeable = False

    def group_mask(self, i: int) -> np.ndarray:
        """Boolean mask of the edges in 1-based group i."""
        if not 1 <= i <= len(self.group_values):
            raise InvalidArgumentError(f"group index {i} out of range")
        return self.group_of == i


@dataclass(frozen=True)
class GroupStats:
    counts: tuple[int, ...]
    fractions: tuple[float, ...]
    kbar: float


def vertex_angles(n: int) -> np.ndarray:
    """Edge directions l mod 2*pi for l = 1..n, each in [0, 2*pi)."""
    if n < 1:
        raise InvalidArgumentError("vertex_angles requires n >= 1")
    return np.mod(np.arange(1, n + 1, dtype=float), TWO_PI)


def coefficient_deterministic(ell: int) -> float:
    """1 on every third edge, 2 otherwise."""
    if ell < 1:
        raise InvalidArgumentError("edge index starts at 1")
    return 1.0 if ell % 3 == 0 else 2.0


def coefficient_random(
    n: int,
    seed: int,
    probs: tuple[float, ...] = GROUP_PROBS,
    values: tuple[float, ...] = GROUP_VALUES,
) -> np.ndarray:
    """One coefficient per edge, K = values[i] with probability probs[i].

    The draw is a single sequential uniform stream, so the first n entries
    agree for every n (a fixed realization shared by all stages of a run).
    """
    probs = tuple(float(p) for p in probs)
    if len(probs) != len(values):
        raise InvalidArgumentError("one probability per group value required")
    if any(p < 0 for p in probs) or abs(sum(probs) - 1.0) > 1e-12:
        raise InvalidArgumentError("group probabilities must be >= 0 and sum to 1")
    u = coefficient_rng(seed).random(n)
    idx = np.searchsorted(np.cumsum(probs), u, side="right")
    idx = np.minimum(idx, len(values) - 1)
    return np.asarray(values, dtype=float)[idx]


def build_stage(
    n: int,
    source: str = "deterministic",
    *,
    seed: int = 0,
    probs: tuple[float, ...] = GROUP_PROBS,
    values: tuple[float, ...] = GROUP_VALUES,
    coeffs=None,
) -> StarStage:
    """Construct stage n with coefficients from the named source.

    ``source`` is "deterministic", "random", or "explicit" (then ``coeffs``
    supplies one positive value per edge and the group values are its sorted
    distinct entries). n = 1 is rejected: a single edge would make the center
    a degree-one boundary vertex and force p(0) = 0, a different problem.
    """
    if n < 2:
        raise InvalidArgumentError("build_stage requires n >= 2")
    if source == "deterministic":
        ell = np.arange(1, n + 1)
        coeff_arr = np.where(ell % 3 == 0, values[0], values[1]).astype(float)
        group_values = tuple(float(v) for v in values)
    elif source == "random":
        coeff_arr = coefficient_random(n, seed, probs, values)
        group_values = tuple(float(v) for v in values)
    elif source == "explicit":
        if coeffs is None:
            raise InvalidArgumentError("explicit source requires coeffs")
        coeff_arr = np.asarray(coeffs, dtype=float).copy()
        if coeff_arr.shape != (n,):
            raise InvalidArgumentError("coeffs must supply one value per edge")
        group_values = tuple(sorted(set(coeff_arr.tolist())))
    else:
        raise InvalidArgumentError(f"unknown coefficient source {source!r}")
    if np.any(coeff_arr <= 0):
        raise InvalidArgumentError("diffusion coefficients must be positive")
    lookup = {v: i + 1 for i, v in enumerate(group_values)}
    group_of = np.array([lookup[v] for v in coeff_arr.tolist()], dtype=int)
    return StarStage(
        n=n,
        angles=vertex_angles(n),
        coeffs=coeff_arr,
        group_of=group_of,
        group_values=group_values,
        c_K=float(coeff_arr.min()),
    )


def group_stats(stage: StarStage) -> GroupStats:
    counts = tuple(int(np.sum(stage.group_of == i + 1))
                   for i in range(len(stage.group_values)))
    fractions = tuple(c / stage.n for c in counts)
    kbar = float(np.dot(fractions, stage.group_values))
    return GroupStats(counts=counts, fractions=fractions, kbar=kbar)
