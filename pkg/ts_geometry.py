"""Geometry of the Cayley tree of a semigroup G = <S_k | K>.

The relation matrix K is read purely as a branching rule: a node reached via
generator s_i has one child per s_j with K(s_i, s_j) = 1.  All counts are exact
Python integers; floating point only appears in ``spectral_radius``.
"""

import logging
import threading
from dataclasses import dataclass
from functools import cached_property, reduce
from itertools import accumulate
from math import gcd
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np

from ts_exceptions import (
    DeadRowError,
    IndexOutOfRangeError,
    NoConvergenceError,
    NonBinaryEntryError,
    NonSquareError,
    NotIrreducibleError,
    ValidationError,
)

logger = logging.getLogger(__name__)

BitMatrix = Tuple[Tuple[int, ...], ...]


def as_bit_matrix(raw: Sequence[Sequence[int]], name: str = "matrix") -> BitMatrix:
    """Check that ``raw`` is a non-empty square 0/1 array and freeze it"""
    rows = [list(row) for row in raw]
    size = len(rows)
    if size == 0:
        raise NonSquareError(f"{name} is empty")
    for index, row in enumerate(rows):
        if len(row) != size:
            raise NonSquareError(
                f"{name} is not square",
                detail=f"row {index} has {len(row)} entries, expected {size}",
            )
    frozen = []
    for i, row in enumerate(rows):
        for j, value in enumerate(row):
            if isinstance(value, str) or value not in (0, 1):
                raise NonBinaryEntryError(
                    f"{name} has a non-binary entry", detail=f"{name}[{i}][{j}] = {value!r}"
                )
        frozen.append(tuple(int(value) for value in row))
    return tuple(frozen)


def boolean_product(left: np.ndarray, right: np.ndarray) -> np.ndarray:
    """AND/OR product of two boolean matrices"""
    return (left.astype(np.int64) @ right.astype(np.int64)) > 0


def matrix_is_irreducible(matrix: np.ndarray) -> bool:
    """True iff the digraph with an edge i -> j for matrix[i, j] != 0 is strongly connected"""
    matrix = np.asarray(matrix)
    if matrix.shape == (1, 1):
        return bool(matrix[0, 0])
    graph = nx.from_numpy_array((matrix != 0).astype(int), create_using=nx.DiGraph)
    return nx.is_strongly_connected(graph)


def matrix_period(matrix: np.ndarray) -> Tuple[int, List[FrozenSet[int]]]:
    """Period and cyclic classes of an irreducible matrix.

    Breadth-first levels from vertex 0; the period is the gcd of
    ``level[u] + 1 - level[v]`` over all edges u -> v, and vertex v belongs
    to class ``level[v] mod period``.
    """
    matrix = np.asarray(matrix) != 0
    if not matrix_is_irreducible(matrix):
        raise NotIrreducibleError("period is only defined for irreducible matrices")
    size = matrix.shape[0]
    level: Dict[int, int] = {0: 0}
    frontier = [0]
    while frontier:
        next_frontier = []
        for u in frontier:
            for v in np.flatnonzero(matrix[u]):
                v = int(v)
                if v not in level:
                    level[v] = level[u] + 1
                    next_frontier.append(v)
        frontier = next_frontier

    differences = (
        level[u] + 1 - level[v]
        for u in range(size)
        for v in np.flatnonzero(matrix[u])
    )
    period = reduce(gcd, (abs(int(d)) for d in differences), 0)
    classes: List[set] = [set() for _ in range(period)]
    for vertex in range(size):
        classes[level[vertex] % period].add(vertex)
    return period, [frozenset(c) for c in classes]


def matrix_primitive_exponent(matrix: np.ndarray) -> Optional[int]:
    """Smallest m <= (n-1)^2 + 1 with matrix^m entrywise positive, None if there is none"""
    matrix = np.asarray(matrix) != 0
    size = matrix.shape[0]
    wielandt_bound = (size - 1) ** 2 + 1
    power = matrix.copy()
    for exponent in range(1, wielandt_bound + 1):
        if power.all():
            return exponent
        power = boolean_product(power, matrix)
    return None


@dataclass(frozen=True)
class RelationMatrix:
    """Binary k x k matrix K of G = <S_k | K>; structural flags are computed lazily"""
    entries: BitMatrix

    @property
    def k(self) -> int:
        return len(self.entries)

    @cached_property
    def array(self) -> np.ndarray:
        array = np.array(self.entries, dtype=np.int64)
        array.setflags(write=False)
        return array

    @property
    def row_sums(self) -> Tuple[int, ...]:
        return tuple(sum(row) for row in self.entries)

    def successors(self, i: int) -> Tuple[int, ...]:
        """Generators that may follow s_i"""
        return tuple(j for j, bit in enumerate(self.entries[i]) if bit)

    @cached_property
    def primitive_exponent(self) -> Optional[int]:
        return matrix_primitive_exponent(self.array)

    @cached_property
    def primitive(self) -> bool:
        return self.primitive_exponent is not None

    @cached_property
    def irreducible(self) -> bool:
        return matrix_is_irreducible(self.array)

    @cached_property
    def cyclic_structure(self) -> Optional[Tuple[int, List[FrozenSet[int]]]]:
        if not self.irreducible:
            return None
        return matrix_period(self.array)

    @property
    def period(self) -> Optional[int]:
        structure = self.cyclic_structure
        return structure[0] if structure else None

    @cached_property
    def geometry(self) -> "BallGeometry":
        return BallGeometry(self)

    def __repr__(self) -> str:
        rows = ";".join(",".join(str(bit) for bit in row) for row in self.entries)
        return f"RelationMatrix(k={self.k}, K=({rows}))"


class BallGeometry:
    """Level counts, semiball sizes and ball sizes of one relation matrix.

    Matrix powers and level vectors are memoized.  Cache fills happen under a
    lock and only ever append values that are a pure function of K, so
    concurrent readers see either a shorter or a longer cache, never a wrong one.
    """

    def __init__(self, owner: RelationMatrix):
        self.owner = owner
        self._lock = threading.Lock()
        identity = np.identity(owner.k, dtype=np.int64).astype(object)
        self._powers: List[np.ndarray] = [identity]
        # level vectors v_l with v_l[i] = L^{(s_i)}_l, v_0 = (1, ..., 1)
        self._levels: List[Tuple[int, ...]] = [tuple([1] * owner.k)]

    def power(self, exponent: int) -> np.ndarray:
        """Exact K^exponent as an object array of Python ints"""
        if exponent < 0:
            raise ValidationError(f"negative matrix exponent {exponent}")
        if exponent >= len(self._powers):
            relation = self.owner.array.astype(object)
            with self._lock:
                while len(self._powers) <= exponent:
                    self._powers.append(self._powers[-1].dot(relation))
        return self._powers[exponent]

    def level_vector(self, level: int) -> Tuple[int, ...]:
        if level >= len(self._levels):
            entries = self.owner.entries
            with self._lock:
                while len(self._levels) <= level:
                    previous = self._levels[-1]
                    self._levels.append(
                        tuple(sum(bit * count for bit, count in zip(row, previous)) for row in entries)
                    )
        return self._levels[level]

    def level_counts(self, i: int, n: int) -> List[int]:
        return [self.level_vector(level)[i] for level in range(n + 1)]

    def semiball_sizes(self, i: int, n: int) -> List[int]:
        return list(accumulate(self.level_counts(i, n)))

    def semiball_size(self, i: int, n: int) -> int:
        return sum(self.level_counts(i, n))

    def ball_size(self, n: int) -> int:
        if n == 0:
            return 1
        return 1 + sum(self.semiball_size(i, n - 1) for i in range(self.owner.k))


def validate_relation(raw: Sequence[Sequence[int]]) -> RelationMatrix:
    """Validate a raw k x k bit array and wrap it as a RelationMatrix"""
    entries = as_bit_matrix(raw, name="K")
    dead_rows = [index for index, row in enumerate(entries) if not any(row)]
    if dead_rows:
        raise DeadRowError(
            "relation matrix has a row of zeros",
            detail=f"rows {dead_rows} have no successor generator",
        )
    relation = RelationMatrix(entries)
    logger.debug(f"Validated {relation!r}")
    return relation


def full_relation(k: int) -> RelationMatrix:
    """Strict free semigroup of rank k (every node has k children)"""
    return validate_relation([[1] * k for _ in range(k)])


def bethe_relation(k: int) -> RelationMatrix:
    """Free product of k copies of Z_2: zero diagonal, ones elsewhere"""
    return validate_relation([[int(i != j) for j in range(k)] for i in range(k)])


def free_group_relation(rank: int) -> RelationMatrix:
    """F_rank on generators s_1..s_r, s_1^-1..s_r^-1: K(s_i, s_j) = 0 iff |i - j| = rank"""
    size = 2 * rank
    return validate_relation([[int(abs(i - j) != rank) for j in range(size)] for i in range(size)])


def _check_generator(K: RelationMatrix, i: int) -> None:
    if not 0 <= i < K.k:
        raise IndexOutOfRangeError(f"generator index {i} out of range", detail=f"k = {K.k}")


def _check_depth(n: int) -> None:
    if n < 0:
        raise ValidationError(f"depth must be non-negative, got {n}")


def level_counts(K: RelationMatrix, i: int, n: int) -> List[int]:
    """[L_0, ..., L_n] for the subtree rooted via generator s_i"""
    _check_generator(K, i)
    _check_depth(n)
    return K.geometry.level_counts(i, n)


def semiball_size(K: RelationMatrix, i: int, n: int) -> int:
    _check_generator(K, i)
    _check_depth(n)
    return K.geometry.semiball_size(i, n)


def ball_size(K: RelationMatrix, n: int) -> int:
    _check_depth(n)
    return K.geometry.ball_size(n)


def is_primitive(K: RelationMatrix) -> bool:
    return K.primitive


def is_irreducible(K: RelationMatrix) -> bool:
    return K.irreducible


def period_and_classes(K: RelationMatrix) -> Tuple[int, List[FrozenSet[int]]]:
    structure = K.cyclic_structure
    if structure is None:
        raise NotIrreducibleError(f"{K!r} is not irreducible")
    return structure


def spectral_radius(K: RelationMatrix, tol: float = 1e-12, max_iter: int = 10_000) -> float:
    """Perron root of an irreducible K from Collatz-Wielandt bounds.

    min_i (Mv)_i / v_i <= rho(M) <= max_i (Mv)_i / v_i for positive v; the
    bracket closes under repeated application of M = K^P, whose cyclic blocks
    are primitive and share the root rho(K)^P.
    """
    if tol <= 0:
        raise ValidationError(f"tolerance must be positive, got {tol}")
    period, _ = period_and_classes(K)
    matrix = np.linalg.matrix_power(K.array.astype(float), period)
    vector = np.ones(K.k)
    for iteration in range(max_iter):
        image = matrix @ vector
        ratios = image / vector
        lower = float(ratios.min()) ** (1.0 / period)
        upper = float(ratios.max()) ** (1.0 / period)
        if upper - lower <= tol:
            logger.debug(f"Spectral radius of {K!r} bracketed after {iteration + 1} steps")
            return 0.5 * (lower + upper)
        vector = image / image.max()
    raise NoConvergenceError(
        f"Collatz-Wielandt bounds did not close within {max_iter} iterations",
        detail=f"last bracket [{lower}, {upper}]",
    )
