"""Bounded probability densities on finite supports and discretized boxes.

A ``Support`` is a finite collection of cells, each with a center and a
strictly positive Lebesgue measure; a ``Density`` assigns a positive value
to every cell, stored in log-space, with the measure-weighted values
summing to one.  Discrete distributions are the special case of
unit-measure cells, where the density value of a cell equals its
probability.  Entropy, KL and L2 are measure-weighted sums, so they agree
with the integral definitions on discretized boxes.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import SupportMismatchError

NORMALIZATION_TOL = 1e-10


def _logsumexp(x: np.ndarray) -> float:
    m = np.max(x)
    if not np.isfinite(m):
        return float(m)
    return float(m + np.log(np.sum(np.exp(x - m))))


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Support:
    """Finite cell decomposition of an action set.

    centers: (n, dim) cell midpoints; measures: (n,) positive cell volumes.
    """

    centers: np.ndarray
    measures: np.ndarray

    def __post_init__(self):
        centers = np.atleast_2d(np.asarray(self.centers, dtype=float))
        measures = np.asarray(self.measures, dtype=float).ravel()
        if centers.shape[0] != measures.shape[0]:
            raise ValueError("centers and measures disagree on cell count")
        if centers.shape[0] == 0:
            raise ValueError("support needs at least one cell")
        if np.any(measures <= 0) or not np.all(np.isfinite(measures)):
            raise ValueError("cell measures must be strictly positive and finite")
        object.__setattr__(self, "centers", _frozen(centers))
        object.__setattr__(self, "measures", _frozen(measures))

    @property
    def n_cells(self) -> int:
        return self.centers.shape[0]

    @property
    def dim(self) -> int:
        return self.centers.shape[1]

    @property
    def total_volume(self) -> float:
        return float(self.measures.sum())

    @property
    def log_measures(self) -> np.ndarray:
        return np.log(self.measures)

    def matches(self, other: "Support") -> bool:
        return (
            self is other
            or (
                self.centers.shape == other.centers.shape
                and np.array_equal(self.centers, other.centers)
                and np.array_equal(self.measures, other.measures)
            )
        )

    @staticmethod
    def atoms(n: int) -> "Support":
        """n discrete actions as unit-measure cells (density == probability)."""
        if n < 1:
            raise ValueError("need at least one atom")
        return Support(np.arange(n, dtype=float).reshape(n, 1), np.ones(n))

    @staticmethod
    def box(bounds: list[tuple[float, float]], resolution: int | list[int]) -> "Support":
        """Uniform midpoint grid over a compact box.

        Each axis is split into ``resolution`` equal cells; cell measure is
        the cell volume, so measure-weighted sums are midpoint quadrature.
        """
        bounds = [(float(lo), float(hi)) for lo, hi in bounds]
        if any(hi <= lo for lo, hi in bounds):
            raise ValueError("box bounds must satisfy lo < hi")
        res = [resolution] * len(bounds) if np.isscalar(resolution) else list(resolution)
        if len(res) != len(bounds) or any(r < 1 for r in res):
            raise ValueError("need a positive resolution per axis")
        axes = [
            lo + (hi - lo) * (np.arange(r) + 0.5) / r
            for (lo, hi), r in zip(bounds, res)
        ]
        centers = np.array(list(itertools.product(*axes)), dtype=float)
        cell_vol = float(np.prod([(hi - lo) / r for (lo, hi), r in zip(bounds, res)]))
        return Support(centers, np.full(centers.shape[0], cell_vol))


def _require_same_support(*densities: "Density") -> Support:
    support = densities[0].support
    for d in densities[1:]:
        if not support.matches(d.support):
            raise SupportMismatchError("densities live on different supports")
    return support


@dataclass(frozen=True)
class Density:
    """Strictly positive, normalized density over a Support, in log-space.

    Immutable: construct via ``from_logits`` (log-sum-exp normalization) or
    ``from_values``.  ``upper_bound`` is an optional declared cap ``b`` on
    the density values, checked at construction.
    """

    support: Support
    log_values: np.ndarray
    upper_bound: float | None = field(default=None)

    def __post_init__(self):
        lv = np.asarray(self.log_values, dtype=float).ravel()
        if lv.shape[0] != self.support.n_cells:
            raise ValueError("log_values length must equal cell count")
        if not np.all(np.isfinite(lv)):
            raise ValueError("density values must be finite and strictly positive")
        mass = np.exp(_logsumexp(lv + self.support.log_measures))
        if abs(mass - 1.0) > NORMALIZATION_TOL:
            raise ValueError(f"density mass {mass!r} deviates from 1 beyond tolerance")
        if self.upper_bound is not None and np.any(np.exp(lv) > self.upper_bound):
            raise ValueError("density exceeds its declared upper bound")
        object.__setattr__(self, "log_values", _frozen(lv))

    @property
    def values(self) -> np.ndarray:
        return np.exp(self.log_values)

    @property
    def max_value(self) -> float:
        return float(np.exp(self.log_values.max()))

    @staticmethod
    def _normalized(support: Support, log_values: np.ndarray,
                    upper_bound: float | None) -> "Density":
        # fast path for freshly log-sum-exp-normalized values: skips the
        # dataclass re-validation (these constructions dominate the update
        # loops' runtime)
        if upper_bound is not None and np.any(
                np.exp(log_values) > upper_bound):
            raise ValueError("density exceeds its declared upper bound")
        d = object.__new__(Density)
        object.__setattr__(d, "support", support)
        object.__setattr__(d, "log_values", _frozen(log_values))
        object.__setattr__(d, "upper_bound", upper_bound)
        return d

    @staticmethod
    def from_logits(support: Support, logits: np.ndarray,
                    upper_bound: float | None = None) -> "Density":
        """Density ∝ exp(logits), normalized against the cell measures."""
        logits = np.asarray(logits, dtype=float).ravel()
        if logits.shape[0] != support.n_cells:
            raise ValueError("logits length must equal cell count")
        if not np.all(np.isfinite(logits)):
            raise ValueError("logits must be finite (zero-mass cells are rejected)")
        log_z = _logsumexp(logits + support.log_measures)
        return Density._normalized(support, logits - log_z, upper_bound)

    @staticmethod
    def from_values(support: Support, values: np.ndarray,
                    upper_bound: float | None = None) -> "Density":
        values = np.asarray(values, dtype=float).ravel()
        if np.any(values <= 0) or not np.all(np.isfinite(values)):
            raise ValueError("density values must be finite and strictly positive")
        return Density.from_logits(support, np.log(values), upper_bound)

    @staticmethod
    def uniform(support: Support) -> "Density":
        return Density.from_logits(support, np.zeros(support.n_cells))


JointPolicy = tuple[Density, ...]


def entropy(d: Density) -> float:
    """Differential entropy −Σ p log p · measure; log(total_volume) at uniform."""
    p = d.values
    return float(-(p * d.log_values * d.support.measures).sum())


def kl(p: Density, q: Density) -> float:
    """KL(p, q) = Σ p (log p − log q) · measure ≥ 0."""
    _require_same_support(p, q)
    diff = p.log_values - q.log_values
    return float((p.values * diff * p.support.measures).sum())


def l2_dist(p: Density, q: Density) -> float:
    """Measure-weighted L2 distance sqrt(Σ (p−q)² · measure)."""
    _require_same_support(p, q)
    diff = p.values - q.values
    return float(np.sqrt((diff * diff * p.support.measures).sum()))


def kl_three_point(z_bar: Density, z: Density, y: Density) -> tuple[float, float]:
    """Both sides of KL(z̄,y) − KL(z,y) + KL(z,z̄) = ⟨log z̄ − log y, z̄ − z⟩.

    The identity is exact; the two returns agree to floating-point error and
    are exposed separately so the decomposition itself can be tested.
    """
    _require_same_support(z_bar, z, y)
    lhs = kl(z_bar, y) - kl(z, y) + kl(z, z_bar)
    rhs = float(
        ((z_bar.log_values - y.log_values) * (z_bar.values - z.values)
         * z.support.measures).sum()
    )
    return lhs, rhs


def joint_kl(p: JointPolicy, q: JointPolicy) -> float:
    """KL of a joint policy: sum of the per-player divergences."""
    if len(p) != len(q):
        raise SupportMismatchError("joint policies have different player counts")
    return sum(kl(pi, qi) for pi, qi in zip(p, q))


def density_to_json(d: Density) -> dict:
    return {
        "cells": [
            {"center": list(map(float, c)), "measure": float(m)}
            for c, m in zip(d.support.centers, d.support.measures)
        ],
        "log_values": [float(v) for v in d.log_values],
    }


def density_from_json(obj: dict) -> Density:
    cells = obj["cells"]
    support = Support(
        np.array([c["center"] for c in cells], dtype=float),
        np.array([c["measure"] for c in cells], dtype=float),
    )
    return Density(support, np.array(obj["log_values"], dtype=float))


def save_density(d: Density, path) -> None:
    with open(path, "w") as fh:
        json.dump(density_to_json(d), fh)


def load_density(path) -> Density:
    with open(path) as fh:
        return density_from_json(json.load(fh))
