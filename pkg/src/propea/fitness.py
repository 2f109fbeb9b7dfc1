"""Pseudo-Boolean fitness families and their level partitions.

Three families are supported:

* ``LinearSpec``: ``f(x) = sum_i a_i x_i`` with positive weights sorted in
  descending order (OneMax is the unit-weight case);
* ``DecompSpec``: a weighted sum of Boolean block predicates over disjoint
  blocks of positions, each predicate stored as a truth table (Royal Road is
  the contiguous, equal-length, all-ones case);
* ``ScaledSpec``: ``c ** f(x)`` for either of the above.  Only ``f(x) ln c``
  is ever computed.

Every family exposes the partition into levels used by the level-based
runtime bounds: level ``j`` holds the strings with
``a_1 + ... + a_j <= f(x) < a_1 + ... + a_{j+1}`` and the top level holds the
optima.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .bitcore import BitString, InvariantError, Population

MAX_BLOCK_BITS = 20
# f* must stay exactly representable as a float64.
MAX_EXACT_TOTAL = 2 ** 53


class FitnessSpecError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class CanonicalWeights:
    """Weights in canonical form plus the transform back to user coordinates.

    ``permutation[k]`` is the 1-based original position that canonical
    position ``k + 1`` came from; ``flip_mask[i]`` is True where the original
    weight at position ``i + 1`` was negative.  For every original string
    ``x``: ``f_original(x) == f_canonical(to_canonical(x)) - offset``.
    """

    weights: np.ndarray
    permutation: tuple
    flip_mask: tuple
    offset: float

    def to_canonical(self, x: BitString) -> BitString:
        x = np.asarray(x, dtype=np.uint8)
        flipped = x ^ np.array(self.flip_mask, dtype=np.uint8)
        return flipped[..., np.array(self.permutation) - 1]

    def to_original(self, y: BitString) -> BitString:
        y = np.asarray(y, dtype=np.uint8)
        x = np.empty_like(y)
        x[..., np.array(self.permutation) - 1] = y
        return x ^ np.array(self.flip_mask, dtype=np.uint8)


def _as_weight_array(raw: Sequence) -> np.ndarray:
    arr = np.asarray(raw)
    if arr.ndim != 1 or arr.size == 0:
        raise FitnessSpecError("weights must be a non-empty 1-D sequence")
    if not np.all(np.isfinite(arr.astype(float))):
        raise FitnessSpecError("weights must be finite")
    as_float = arr.astype(float)
    if np.all(as_float == np.round(as_float)) and np.all(np.abs(as_float) < MAX_EXACT_TOTAL):
        return arr.astype(np.int64)
    return as_float


def canonicalize_weights(raw: Sequence) -> CanonicalWeights:
    """Sort absolute weights descending, recording permutation and sign flips.

    Zero weights are rejected.  Ties keep their original order.
    """
    arr = _as_weight_array(raw)
    if np.any(arr == 0):
        raise FitnessSpecError("weights must be non-zero (a_i != 0)")
    mags = np.abs(arr)
    order = np.argsort(-mags, kind="stable")
    negative = arr < 0
    offset = mags[negative].sum()
    offset = int(offset) if arr.dtype.kind == "i" else float(offset)
    return CanonicalWeights(
        weights=mags[order],
        permutation=tuple(int(i) + 1 for i in order),
        flip_mask=tuple(bool(b) for b in negative),
        offset=offset,
    )


@dataclass(frozen=True, eq=False)
class LevelPartition:
    """Levels A_0..A_{m-1} given by prefix sums of the sorted weights."""

    thresholds: np.ndarray  # t_0 = 0 < t_1 < ... < t_{m-1} = f*
    slack: float = 0.0

    @property
    def m(self) -> int:
        return len(self.thresholds)

    def level_of_values(self, f) -> np.ndarray:
        f = np.asarray(f)
        return np.searchsorted(self.thresholds - self.slack, f, side="right") - 1


def _prefix_thresholds(weights: np.ndarray) -> np.ndarray:
    return np.concatenate([[0], np.cumsum(weights)]).astype(weights.dtype)


def _float_slack(weights: np.ndarray) -> float:
    # Dot products of float weights can miss a prefix sum by a few ulps.
    if weights.dtype.kind == "i":
        return 0.0
    return 64 * np.finfo(float).eps * float(weights.sum()) * len(weights)


@dataclass(frozen=True, eq=False)
class LinearSpec:
    weights: np.ndarray
    transform: Optional[CanonicalWeights] = field(default=None, compare=False)

    def __post_init__(self):
        w = _as_weight_array(self.weights)
        if np.any(w <= 0):
            raise FitnessSpecError("linear weights must be positive in canonical form")
        if np.any(np.diff(w) > 0):
            raise FitnessSpecError("linear weights must be sorted descending; use LinearSpec.from_raw")
        if float(w.sum()) > MAX_EXACT_TOTAL:
            raise FitnessSpecError("sum of weights overflows exact float range")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_raw(cls, raw: Sequence) -> "LinearSpec":
        cw = canonicalize_weights(raw)
        return cls(cw.weights, transform=cw)

    @property
    def n(self) -> int:
        return len(self.weights)

    @property
    def integer(self) -> bool:
        return self.weights.dtype.kind == "i"

    @property
    def is_onemax(self) -> bool:
        return self.integer and bool(np.all(self.weights == 1))

    @property
    def max_weight(self):
        return self.weights[0].item()

    def partition(self) -> LevelPartition:
        return LevelPartition(_prefix_thresholds(self.weights), _float_slack(self.weights))


def onemax(n: int) -> LinearSpec:
    if n < 1:
        raise FitnessSpecError("n must be >= 1")
    return LinearSpec(np.ones(n, dtype=np.int64))


@dataclass(frozen=True, eq=False)
class DecompSpec:
    """Separable additively decomposed function over disjoint blocks.

    ``blocks[l]`` lists the 0-based positions of block ``l`` (bit ``k`` of the
    lookup code is ``x[blocks[l][k]]``); ``tables[l]`` is a boolean array of
    length ``2 ** len(blocks[l])``.
    """

    n: int
    blocks: tuple
    tables: tuple
    weights: np.ndarray

    def __post_init__(self):
        w = _as_weight_array(self.weights)
        if w.dtype.kind != "i" or np.any(w <= 0):
            raise FitnessSpecError("decomposed weights must be positive integers")
        if len(w) != len(self.blocks) or len(self.tables) != len(self.blocks):
            raise FitnessSpecError("blocks, tables and weights must have equal length")
        if np.any(np.diff(w) > 0):
            raise FitnessSpecError("decomposed weights must be sorted descending; use DecompSpec.build")
        seen = sorted(p for b in self.blocks for p in b)
        if seen != list(range(self.n)):
            raise FitnessSpecError("blocks must partition positions 0..n-1")
        tables = []
        for b, t in zip(self.blocks, self.tables):
            if len(b) > MAX_BLOCK_BITS:
                raise FitnessSpecError(f"block size {len(b)} exceeds {MAX_BLOCK_BITS}")
            t = np.asarray(t, dtype=bool)
            if t.shape != (1 << len(b),):
                raise FitnessSpecError("truth table length must be 2**block_size")
            if not t.any():
                raise FitnessSpecError("every block predicate needs a satisfying assignment")
            t.setflags(write=False)
            tables.append(t)
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "blocks", tuple(tuple(int(p) for p in b) for b in self.blocks))
        object.__setattr__(self, "tables", tuple(tables))

    @classmethod
    def build(cls, n: int, blocks: Sequence[Sequence[int]],
              satisfying: Sequence[Iterable[str]], weights: Optional[Sequence[int]] = None) -> "DecompSpec":
        """Construct from satisfying assignments given as bit strings per block.

        ``satisfying[l]`` holds strings like ``"101"`` whose k-th character is
        the value of ``blocks[l][k]``.  Blocks are reordered by descending
        weight.
        """
        if weights is None:
            weights = [1] * len(blocks)
        tables = []
        for b, sats in zip(blocks, satisfying):
            t = np.zeros(1 << len(b), dtype=bool)
            for s in sats:
                if len(s) != len(b) or set(s) - {"0", "1"}:
                    raise FitnessSpecError(f"assignment {s!r} does not match block of size {len(b)}")
                t[sum(1 << k for k, ch in enumerate(s) if ch == "1")] = True
            tables.append(t)
        w = _as_weight_array(weights)
        order = np.argsort(-w, kind="stable")
        return cls(n, tuple(tuple(blocks[i]) for i in order), tuple(tables[i] for i in order), w[order])

    @property
    def N(self) -> int:
        return len(self.blocks)

    @property
    def r(self) -> int:
        return max(len(b) for b in self.blocks)

    @property
    def integer(self) -> bool:
        return True

    @property
    def max_weight(self):
        return self.weights[0].item()

    def partition(self) -> LevelPartition:
        return LevelPartition(_prefix_thresholds(self.weights))

    def solved(self, X: Population) -> np.ndarray:
        """Boolean ``(lam, N)`` matrix of satisfied block predicates."""
        X = np.atleast_2d(X)
        out = np.empty((X.shape[0], self.N), dtype=bool)
        for l, (b, t) in enumerate(zip(self.blocks, self.tables)):
            code = np.zeros(X.shape[0], dtype=np.int64)
            for k, p in enumerate(b):
                code |= X[:, p].astype(np.int64) << k
            out[:, l] = t[code]
        return out


def royal_road(n: int, r: int, weights: Optional[Sequence[int]] = None) -> DecompSpec:
    """Royal Road: contiguous blocks of length ``r``, each solved iff all ones."""
    if r < 1 or n % r:
        raise FitnessSpecError("n must be a positive multiple of r")
    N = n // r
    blocks = [list(range(i * r, (i + 1) * r)) for i in range(N)]
    return DecompSpec.build(n, blocks, [["1" * r]] * N, weights)


@dataclass(frozen=True)
class ScaledSpec:
    inner: Union[LinearSpec, DecompSpec]
    c: float

    def __post_init__(self):
        if isinstance(self.inner, ScaledSpec):
            raise FitnessSpecError("nested scaling is not supported")
        if not self.c > 1:
            raise FitnessSpecError("scaling base c must exceed 1")

    @property
    def n(self) -> int:
        return self.inner.n

    @property
    def log_c(self) -> float:
        return math.log(self.c)

    @property
    def integer(self) -> bool:
        return self.inner.integer

    @property
    def max_weight(self):
        return self.inner.max_weight

    def partition(self) -> LevelPartition:
        return self.inner.partition()


FitnessSpec = Union[LinearSpec, DecompSpec, ScaledSpec]


def base_spec(spec: FitnessSpec) -> Union[LinearSpec, DecompSpec]:
    return spec.inner if isinstance(spec, ScaledSpec) else spec


def evaluate(spec: FitnessSpec, x):
    """Unscaled fitness of a bitstring (scalar) or a population (1-D array)."""
    spec = base_spec(spec)
    X = np.asarray(x)
    if X.shape[-1] != spec.n:
        raise InvariantError(f"length {X.shape[-1]} does not match fitness dimension {spec.n}")
    if isinstance(spec, LinearSpec):
        if spec.is_onemax:
            vals = X.sum(axis=-1, dtype=np.int64)
        else:
            vals = X.astype(spec.weights.dtype) @ spec.weights
    else:
        vals = spec.solved(X).astype(np.int64) @ spec.weights
        if X.ndim == 1:
            vals = vals[0]
    if X.ndim == 1:
        return vals.item()
    return vals


def scaled_log_value(spec: ScaledSpec, x):
    """``ln(c ** f(x)) = f(x) ln c`` for a bitstring or a population."""
    f = evaluate(spec, x)
    return f * spec.log_c


def optimum_value(spec: FitnessSpec):
    """Maximum unscaled fitness f*: the sum of all (block) weights."""
    return base_spec(spec).weights.sum().item()


def level_of(spec: FitnessSpec, x):
    """Level index in ``0..m-1`` of a bitstring (int) or each population row."""
    f = evaluate(spec, x)
    lv = spec.partition().level_of_values(f)
    return int(lv) if np.ndim(lv) == 0 else lv
