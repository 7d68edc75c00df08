"""Statistical primitives: partial correlation, Fisher-z independence test,
discrete entropy, and a greedy minimum-entropy coupling.

The coupling machinery quantifies how much latent randomness a hidden common
cause would need to explain an observed pairwise dependence: couple the
conditional rows p(y | x = xi) through a shared latent index Z, greedily
assigning the largest joint atoms first, and report H(Z).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dataset import Dataset, Kind
from .errors import (
    InsufficientSamples,
    NonDiscreteVariable,
    SingularCovariance,
)

logger = logging.getLogger(__name__)

_COND_LIMIT = 1e12  # covariance condition number beyond which we call it singular


@dataclass(frozen=True)
class CiTestResult:
    x: str
    y: str
    conditioning_set: frozenset[str]
    statistic: float
    p_value: float
    independent: bool


@dataclass(frozen=True)
class EntropyEstimate:
    variables: tuple[str, ...]
    value_bits: float
    support_size: int


# --------------------------------------------------------------------------
# correlation


def partial_corr_from_cov(cov: np.ndarray) -> float:
    """Partial correlation of the first two variables given the rest, from
    their joint covariance matrix (precision-matrix identity)."""
    if cov.shape[0] == 2:
        denom = math.sqrt(cov[0, 0] * cov[1, 1])
        if denom == 0.0:
            return 0.0
        r = cov[0, 1] / denom
    else:
        if not np.all(np.isfinite(cov)) or np.linalg.cond(cov) > _COND_LIMIT:
            raise SingularCovariance(
                "covariance submatrix is singular; shrink the conditioning set",
                size=int(cov.shape[0]),
            )
        prec = np.linalg.inv(cov)
        denom = math.sqrt(prec[0, 0] * prec[1, 1])
        if denom == 0.0:
            return 0.0
        r = -prec[0, 1] / denom
    return float(min(1.0, max(-1.0, r)))


def partial_correlation(
    ds: Dataset, x: str, y: str, conditioning: Sequence[str] = ()
) -> float:
    """Pearson partial correlation of x and y given the conditioning columns.

    Equivalent to correlating the residuals of x and y after regressing each
    on the conditioning set (the regression route is the test oracle). A
    variable is perfectly correlated with itself.
    """
    cond = sorted(set(conditioning) - {x, y})
    if x == y:
        return 1.0
    n = ds.sample_count
    if n < len(cond) + 4:
        raise InsufficientSamples(
            f"need at least |conditioning|+4 = {len(cond) + 4} rows, have {n}",
            rows=n, conditioning=len(cond),
        )
    mat = ds.matrix([x, y, *cond])
    cov = np.cov(mat, rowvar=False)
    cov = np.atleast_2d(cov)
    if cov[0, 0] == 0.0 or cov[1, 1] == 0.0:
        return 0.0  # a constant column carries no association
    return partial_corr_from_cov(cov)


def fisher_z_test(
    ds: Dataset,
    x: str,
    y: str,
    conditioning: Sequence[str] = (),
    alpha: float = 0.05,
) -> CiTestResult:
    """Fisher-z conditional independence test.

    The z-transformed partial correlation scaled by sqrt(n - |cond| - 3) is
    asymptotically standard normal under independence; the two-sided p-value
    uses the closed-form normal CDF. ``independent`` is ``p > alpha``.
    """
    cond = tuple(sorted(set(conditioning) - {x, y}))
    n = ds.sample_count
    if n <= len(cond) + 3:
        raise InsufficientSamples(
            f"need more than |conditioning|+3 = {len(cond) + 3} rows, have {n}",
            rows=n, conditioning=len(cond),
        )
    rho = partial_correlation(ds, x, y, cond)
    if abs(rho) >= 1.0 - 1e-15:
        return CiTestResult(x, y, frozenset(cond), math.inf, 0.0, False)
    z = 0.5 * math.log((1.0 + rho) / (1.0 - rho))
    statistic = math.sqrt(n - len(cond) - 3) * z
    # 2 * (1 - Phi(|t|)) == erfc(|t| / sqrt(2))
    p_value = math.erfc(abs(statistic) / math.sqrt(2.0))
    return CiTestResult(
        x=x, y=y, conditioning_set=frozenset(cond),
        statistic=statistic, p_value=p_value,
        independent=bool(p_value > alpha),
    )


# --------------------------------------------------------------------------
# entropy


def _require_discrete(ds: Dataset, variables: Sequence[str]) -> np.ndarray:
    cols = []
    for name in variables:
        meta = ds.meta(name)
        if meta.kind == Kind.CONTINUOUS:
            raise NonDiscreteVariable(
                f"entropy requires discrete columns; {name!r} is continuous",
                variable=name,
            )
        cols.append(ds.column(name).astype(np.int64))
    return np.column_stack(cols)


def entropy(ds: Dataset, variables: Sequence[str]) -> EntropyEstimate:
    """Shannon entropy (bits) of the empirical joint over the named columns."""
    if not variables:
        raise NonDiscreteVariable("entropy requires at least one variable")
    mat = _require_discrete(ds, variables)
    _, counts = np.unique(mat, axis=0, return_counts=True)
    p = counts / counts.sum()
    bits = float(-(p * np.log2(p)).sum())
    return EntropyEstimate(tuple(variables), max(bits, 0.0), int(counts.shape[0]))


def conditional_entropy(ds: Dataset, target: str, given: str) -> float:
    """H(target | given) in bits, via the chain rule on empirical joints."""
    return entropy(ds, [given, target]).value_bits - entropy(ds, [given]).value_bits


# --------------------------------------------------------------------------
# minimum-entropy coupling


def greedy_coupling(rows: Sequence[np.ndarray]) -> list[tuple[tuple[int, ...], float]]:
    """Greedily couple probability vectors through a shared latent index.

    Each atom pairs every distribution's current largest entry and carries the
    minimum of those entries; residuals shrink until all mass is assigned.
    Returns (per-distribution value indices, mass) per atom. Atom masses sum
    to one and, restricted to any single distribution, reproduce it exactly.
    """
    residual = [np.asarray(r, dtype=np.float64).copy() for r in rows]
    atoms: list[tuple[tuple[int, ...], float]] = []
    remaining = 1.0
    while remaining > 1e-12:
        picks = tuple(int(np.argmax(r)) for r in residual)
        mass = float(min(r[i] for r, i in zip(residual, picks)))
        if mass <= 1e-12:
            break
        for r, i in zip(residual, picks):
            r[i] -= mass
        atoms.append((picks, mass))
        remaining -= mass
    return atoms


def min_entropy_latent(
    ds: Dataset, x: str, y: str
) -> tuple[float, dict[tuple[int, int, int], float]]:
    """Entropy (bits) of the smallest latent variable that can explain the
    observed x-y dependence as pure confounding, with the realized joint
    distribution over (x value, y value, latent index).

    A degenerate marginal (constant column) needs no latent: returns 0 and a
    point-mass joint.
    """
    mat = _require_discrete(ds, [x, y])
    xs = np.unique(mat[:, 0])
    ys = np.unique(mat[:, 1])
    if xs.shape[0] < 2 or ys.shape[0] < 2:
        logger.info("degenerate joint for (%s, %s); latent entropy is 0", x, y)
        joint = {(int(mat[0, 0]), int(mat[0, 1]), 0): 1.0}
        if xs.shape[0] >= 2 or ys.shape[0] >= 2:
            # keep the marginal of the non-constant side
            joint = {}
            vals, counts = np.unique(mat, axis=0, return_counts=True)
            for row, c in zip(vals, counts):
                joint[(int(row[0]), int(row[1]), 0)] = float(c / mat.shape[0])
        return 0.0, joint

    x_index = {int(v): i for i, v in enumerate(xs)}
    y_index = {int(v): i for i, v in enumerate(ys)}
    table = np.zeros((xs.shape[0], ys.shape[0]), dtype=np.float64)
    for xv, yv in mat:
        table[x_index[int(xv)], y_index[int(yv)]] += 1.0
    table /= table.sum()

    px = table.sum(axis=1)
    rows = [table[i] / px[i] for i in range(xs.shape[0])]
    atoms = greedy_coupling(rows)

    bits = 0.0
    joint: dict[tuple[int, int, int], float] = {}
    for z, (picks, mass) in enumerate(atoms):
        bits -= mass * math.log2(mass)
        for i, pick in enumerate(picks):
            key = (int(xs[i]), int(ys[pick]), z)
            joint[key] = joint.get(key, 0.0) + float(px[i] * mass)
    return max(bits, 0.0), joint
