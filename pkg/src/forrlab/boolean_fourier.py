"""Boolean functions as multilinear polynomials over {-1, 1}^N.

A function f: {-1,1}^N -> R is stored through the coefficients of its
multilinear expansion

    f(x) = sum_S c[S] * prod_{i in S} x_i,

one real coefficient per subset S of the N variables.  Coefficient tables
are dense arrays of length 2^N indexed by subset bitmask, with bit i of
the index marking variable i (0-based).  For a +-1-valued f these are the
Fourier coefficients of f and satisfy Parseval: sum_S c[S]^2 = 1.

Truth tables use the normative encoding for file and array I/O: entry j of
the table is f at the point x(j) with x_i = -1 when bit i of j is 1, and
x_i = +1 otherwise.  Under this encoding the coefficient table is exactly
the orthonormal Walsh-Hadamard transform of the truth table rescaled by
2^{-N/2}, which is how `from_truth_table` computes it.

Restrictions fix a subset of the variables to +-1 values and leave the
rest free.  The restricted function is represented over the full variable
set, with exact zero coefficients on every subset that touches a fixed
variable.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from forrlab._kernels import eval_multilinear_batch, wht_inplace_np
from forrlab.errors import CapacityError

__all__ = [
    "BooleanFunction",
    "Restriction",
    "RestrictionDistribution",
    "wht",
    "from_truth_table",
    "from_coeffs",
    "truth_table",
    "eval_multilinear",
    "eval_multilinear_many",
    "restrict",
    "partial_derivative",
    "level_mass",
    "max_restricted_level2_mass",
    "sample_restriction",
    "enumerate_restrictions",
    "subset_index",
    "random_sign_function",
    "to_json_dict",
    "from_json_dict",
    "load_function",
    "save_function",
]

EXHAUSTIVE_VAR_LIMIT = 12  # 3^N restriction scans are capped here
ENUMERATION_VAR_LIMIT = 10


def _require_power_of_two(m: int, what: str) -> int:
    if m < 1 or m & (m - 1):
        raise ValueError(f"{what} must be a power of two, got {m}")
    return m.bit_length() - 1


def subset_index(subset: Iterable[int]) -> int:
    """Bitmask index of a variable subset (variables are 0-based)."""
    mask = 0
    for i in subset:
        mask |= 1 << i
    return mask


@dataclass(frozen=True)
class BooleanFunction:
    """A multilinear polynomial over n_vars variables.

    coeffs[mask] is the coefficient of prod_{i: bit i of mask} x_i.
    """

    n_vars: int
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=np.float64)
        if self.n_vars < 1:
            raise ValueError(f"n_vars must be >= 1, got {self.n_vars}")
        if coeffs.shape != (2**self.n_vars,):
            raise ValueError(
                f"coefficient table must have length 2^{self.n_vars}, got {coeffs.shape}"
            )
        coeffs = coeffs.copy()
        coeffs.setflags(write=False)
        object.__setattr__(self, "coeffs", coeffs)

    def coefficient(self, subset: Iterable[int]) -> float:
        """Coefficient of the monomial over ``subset``."""
        idx = subset_index(subset)
        if idx >= self.coeffs.size:
            raise ValueError(f"subset {sorted(subset)} out of range for {self.n_vars} variables")
        return float(self.coeffs[idx])

    def __call__(self, x: Sequence[float]) -> float:
        return eval_multilinear(self, x)


_FREE = 0  # internal marker for a free coordinate


@dataclass(frozen=True)
class Restriction:
    """A partial assignment in {-1, +1, *}^N; value 0 encodes *."""

    values: np.ndarray

    def __post_init__(self):
        raw = np.asarray(self.values, dtype=object)
        if raw.ndim != 1 or raw.size < 1:
            raise ValueError("restriction needs a 1-D, non-empty value vector")
        out = []
        for v in raw:
            if isinstance(v, str) and v == "*" or v is None:
                out.append(0)
                continue
            iv = int(v)
            if iv != v or iv not in (-1, 0, 1):
                raise ValueError(f"restriction entries must be -1, +1, or * (0); got {v!r}")
            out.append(iv)
        vals = np.array(out, dtype=np.int8)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def n_vars(self) -> int:
        return self.values.size

    @property
    def free(self) -> tuple[int, ...]:
        """Indices of the free (*) coordinates."""
        return tuple(int(i) for i in np.flatnonzero(self.values == _FREE))

    def merge(self, x: Sequence[float]) -> np.ndarray:
        """The point with fixed coordinates from the restriction and the
        rest from ``x`` (read at the free positions)."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.n_vars,):
            raise ValueError(f"expected a point of length {self.n_vars}")
        out = self.values.astype(np.float64)
        free = self.values == _FREE
        out[free] = x[free]
        return out


@dataclass(frozen=True)
class RestrictionDistribution:
    """Product distribution over restrictions, anchored at a cube point.

    Coordinate i is fixed to +1 with probability 1/4 + x_i/2, to -1 with
    probability 1/4 - x_i/2, and left free with probability 1/2.  All
    three probabilities stay in [0, 1] exactly when the anchor lies in
    [-1/2, 1/2]^N.
    """

    anchor: np.ndarray

    def __post_init__(self):
        anchor = np.asarray(self.anchor, dtype=np.float64)
        if anchor.ndim != 1 or anchor.size < 1:
            raise ValueError("anchor must be a 1-D, non-empty vector")
        if np.abs(anchor).max() > 0.5 + 1e-12:
            raise ValueError("anchor must lie in [-1/2, 1/2]^N")
        anchor = anchor.copy()
        anchor.setflags(write=False)
        object.__setattr__(self, "anchor", anchor)

    @property
    def n_vars(self) -> int:
        return self.anchor.size

    @property
    def p_plus(self) -> np.ndarray:
        return 0.25 + self.anchor / 2

    @property
    def p_minus(self) -> np.ndarray:
        return 0.25 - self.anchor / 2

    @property
    def p_star(self) -> np.ndarray:
        return np.full(self.anchor.size, 0.5)


# ---------------------------------------------------------------------------
# Transforms and constructors
# ---------------------------------------------------------------------------


def wht(values: Sequence[float]) -> np.ndarray:
    """Orthonormal Walsh-Hadamard transform of a length-2^N vector.

    out[i] = 2^{-N/2} sum_j (-1)^{popcount(i & j)} values[j].  The
    transform is symmetric and self-inverse.
    """
    v = np.array(values, dtype=np.float64)
    if v.ndim != 1:
        raise ValueError("expected a 1-D vector")
    _require_power_of_two(v.size, "vector length")
    wht_inplace_np(v)
    v /= math.sqrt(v.size)
    return v


def from_truth_table(table: Sequence[float]) -> BooleanFunction:
    """Interpolate the multilinear polynomial through a +-1 truth table."""
    t = np.asarray(table, dtype=np.float64)
    if t.ndim != 1:
        raise ValueError("truth table must be a 1-D vector")
    n_vars = _require_power_of_two(t.size, "truth table length")
    if n_vars == 0:
        raise ValueError("need at least one variable")
    if not ((t == 1.0) | (t == -1.0)).all():
        raise ValueError("truth table entries must be exactly +-1")
    coeffs = wht_inplace_np(t.copy()) / t.size
    return BooleanFunction(n_vars, coeffs)


def from_coeffs(n_vars: int, coeffs: Sequence[float]) -> BooleanFunction:
    """Wrap an explicit coefficient table."""
    return BooleanFunction(n_vars, np.asarray(coeffs, dtype=np.float64))


def truth_table(f: BooleanFunction) -> np.ndarray:
    """Evaluate f on all of {-1,1}^N in the normative index encoding."""
    return wht_inplace_np(f.coeffs.copy())


def random_sign_function(n_vars: int, rng: np.random.Generator) -> BooleanFunction:
    """A uniformly random +-1-valued function on n_vars variables."""
    table = rng.integers(0, 2, size=2**n_vars) * 2 - 1
    return from_truth_table(table)


# ---------------------------------------------------------------------------
# Evaluation and calculus
# ---------------------------------------------------------------------------


def eval_multilinear(f: BooleanFunction, x: Sequence[float]) -> float:
    """Evaluate the multilinear expansion at a real point."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (f.n_vars,):
        raise ValueError(f"expected a point of length {f.n_vars}, got shape {x.shape}")
    if not np.isfinite(x).all():
        raise ValueError("evaluation point must be finite")
    c = f.coeffs
    for i in range(f.n_vars):
        pairs = c.reshape(-1, 2)
        c = pairs[:, 0] + x[i] * pairs[:, 1]
    return float(c[0])


def eval_multilinear_many(f: BooleanFunction, points: np.ndarray) -> np.ndarray:
    """Evaluate f at each row of ``points`` (backend-accelerated)."""
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[1] != f.n_vars:
        raise ValueError(f"expected points of shape (m, {f.n_vars})")
    return eval_multilinear_batch(f.coeffs, points)


def restrict(f: BooleanFunction, rho: Restriction) -> BooleanFunction:
    """Substitute the fixed coordinates of ``rho`` into f.

    The result is represented over all N variables; coefficients on any
    subset containing a fixed variable are exactly zero.
    """
    if rho.n_vars != f.n_vars:
        raise ValueError(
            f"restriction has {rho.n_vars} coordinates, function has {f.n_vars}"
        )
    c = f.coeffs.copy()
    kept = 0  # free variables already retained occupy bits 0..kept-1
    for i in range(f.n_vars):
        v = int(rho.values[i])
        if v == _FREE:
            kept += 1
            continue
        width = 1 << kept
        view = c.reshape(-1, 2 * width)
        c = (view[:, :width] + v * view[:, width:]).ravel()
    full = np.zeros(2**f.n_vars)
    free_positions = rho.free
    for packed in range(c.size):
        mask = 0
        for b, pos in enumerate(free_positions):
            if packed >> b & 1:
                mask |= 1 << pos
        full[mask] = c[packed]
    return BooleanFunction(f.n_vars, full)


def partial_derivative(f: BooleanFunction, subset: Iterable[int], x: Sequence[float]) -> float:
    """Mixed partial derivative of the expansion over ``subset``, at x.

    Since the expansion is linear in each variable the derivative is exact
    (no step size is involved) and at x = 0 it returns the coefficient of
    the monomial over ``subset``.
    """
    s = set(int(i) for i in subset)
    if any(i < 0 or i >= f.n_vars for i in s):
        raise ValueError(f"derivative subset {sorted(s)} out of range")
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (f.n_vars,):
        raise ValueError(f"expected a point of length {f.n_vars}")
    c = f.coeffs
    for i in range(f.n_vars):
        pairs = c.reshape(-1, 2)
        if i in s:
            c = pairs[:, 1].copy()
        else:
            c = pairs[:, 0] + x[i] * pairs[:, 1]
    return float(c[0])


def level_mass(f: BooleanFunction, k: int) -> float:
    """Sum of |coefficient| over all subsets of size exactly k."""
    if not 0 <= k <= f.n_vars:
        raise ValueError(f"level k must be in [0, {f.n_vars}], got {k}")
    sizes = np.bitwise_count(np.arange(f.coeffs.size, dtype=np.uint64))
    return float(np.abs(f.coeffs[sizes == k]).sum())


def _mass2(c: np.ndarray) -> float:
    sizes = np.bitwise_count(np.arange(c.size, dtype=np.uint64))
    return float(np.abs(c[sizes == 2]).sum())


def max_restricted_level2_mass(
    f: BooleanFunction,
    method: str = "exhaustive",
    samples: int = 1000,
    rng: np.random.Generator | None = None,
) -> float:
    """Largest level-2 coefficient mass over all restrictions of f.

    ``method="exhaustive"`` scans all 3^N restrictions by sharing folds
    along a ternary recursion (guarded at N <= 12).  ``method="monte_carlo"``
    samples ``samples`` uniformly random restrictions and returns the best
    found, which is only a lower bound on the true maximum.
    """
    if method == "monte_carlo":
        if rng is None:
            raise ValueError("monte_carlo mode needs an rng")
        best = 0.0
        for _ in range(samples):
            vals = rng.integers(-1, 2, size=f.n_vars)
            best = max(best, level_mass(restrict(f, Restriction(vals)), 2))
        return best
    if method != "exhaustive":
        raise ValueError(f"unknown method {method!r}")
    if f.n_vars > EXHAUSTIVE_VAR_LIMIT:
        raise CapacityError(
            f"exhaustive restriction scan is capped at {EXHAUSTIVE_VAR_LIMIT} variables "
            f"(got {f.n_vars}); use method='monte_carlo' for a lower bound"
        )

    def rec(c: np.ndarray, remaining: int, kept: int) -> float:
        if remaining == 0:
            return _mass2(c)
        width = 1 << kept
        view = c.reshape(-1, 2 * width)
        lo = view[:, :width]
        hi = view[:, width:]
        best = rec((lo + hi).ravel(), remaining - 1, kept)
        best = max(best, rec((lo - hi).ravel(), remaining - 1, kept))
        return max(best, rec(c, remaining - 1, kept + 1))

    return rec(f.coeffs.copy(), f.n_vars, 0)


# ---------------------------------------------------------------------------
# Random restrictions
# ---------------------------------------------------------------------------


def sample_restriction(dist: RestrictionDistribution, rng: np.random.Generator) -> Restriction:
    """Draw one restriction, coordinates independent."""
    u = rng.random(dist.n_vars)
    vals = np.zeros(dist.n_vars, dtype=np.int8)
    vals[u < dist.p_plus + dist.p_minus] = -1
    vals[u < dist.p_plus] = 1
    return Restriction(vals)


def enumerate_restrictions(
    dist: RestrictionDistribution,
) -> list[tuple[Restriction, float]]:
    """All 3^N restrictions with their probabilities (sum to 1)."""
    if dist.n_vars > ENUMERATION_VAR_LIMIT:
        raise CapacityError(
            f"restriction enumeration is capped at {ENUMERATION_VAR_LIMIT} variables"
        )
    per_coord = [
        ((1, float(pp)), (-1, float(pm)), (0, float(ps)))
        for pp, pm, ps in zip(dist.p_plus, dist.p_minus, dist.p_star)
    ]
    out = []
    for combo in itertools.product(*per_coord):
        vals = np.array([v for v, _ in combo], dtype=np.int8)
        prob = math.prod(p for _, p in combo)
        out.append((Restriction(vals), prob))
    return out


# ---------------------------------------------------------------------------
# Serialization (normative JSON schema)
# ---------------------------------------------------------------------------


def to_json_dict(f: BooleanFunction) -> dict:
    """{"n": N, "coeffs": [...]} with coefficients in bitmask order."""
    return {"n": f.n_vars, "coeffs": [float(c) for c in f.coeffs]}


def from_json_dict(d: dict) -> BooleanFunction:
    if not isinstance(d, dict) or set(d) != {"n", "coeffs"}:
        raise ValueError('expected an object with exactly the keys "n" and "coeffs"')
    return from_coeffs(int(d["n"]), d["coeffs"])


def load_function(path) -> BooleanFunction:
    with open(path, "r", encoding="utf-8") as fh:
        return from_json_dict(json.load(fh))


def save_function(f: BooleanFunction, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(to_json_dict(f), fh)
        fh.write("\n")
