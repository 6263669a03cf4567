"""Markov tree shifts X_A on the Cayley tree of G = <S_k | K>.

Edge convention: a child reached from its parent via generator s_l must satisfy
A_l(parent symbol, child symbol) = 1, i.e. the matrix is indexed by the child's
generator.  Counting comes in two independent flavours: the exact big-integer
recursion and an explicit enumeration of labelings used as an oracle.
"""

import logging
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ts_exceptions import (
    DepthCapExceededError,
    DimensionMismatchError,
    EmptyAlphabetError,
    NotRecordedError,
    OracleTooLargeError,
    ValidationError,
)
from ts_geometry import BitMatrix, RelationMatrix, as_bit_matrix, free_group_relation

logger = logging.getLogger(__name__)

DEFAULT_DEPTH_CAP = 12
DEFAULT_ORACLE_BITS = 25

# [m][j][a] for stem counts, [m][a] for ball counts
CountLayer = Tuple[Tuple[int, ...], ...]


def transpose(matrix: BitMatrix) -> BitMatrix:
    return tuple(zip(*matrix))


def is_essential(matrix: BitMatrix) -> bool:
    """Every row and every column contains a 1"""
    return all(any(row) for row in matrix) and all(any(column) for column in zip(*matrix))


def with_inverse_transposes(matrices: Sequence[Sequence[Sequence[int]]]) -> List[BitMatrix]:
    """(A_1..A_r) -> (A_1..A_r, A_1^t..A_r^t), the transitions of X_{A,A^t} over F_r"""
    frozen = [as_bit_matrix(matrix, name=f"A[{index}]") for index, matrix in enumerate(matrices)]
    return frozen + [transpose(matrix) for matrix in frozen]


@dataclass(frozen=True)
class Classification:
    is_hom: bool
    full_row_index: Optional[int]
    constant_row_sum: Optional[int]
    free_group_shape: Optional[int]
    transpose_paired: bool
    alphabet_small_enough: Optional[bool]
    essential: bool


@dataclass(frozen=True)
class MarkovSystem:
    """Relation matrix, alphabet and one transition matrix per generator"""
    relation: RelationMatrix
    symbols: Tuple[str, ...]
    transitions: Tuple[BitMatrix, ...]
    generators: Tuple[str, ...]

    @property
    def k(self) -> int:
        return self.relation.k

    @property
    def alphabet_size(self) -> int:
        return len(self.symbols)

    @cached_property
    def transition_arrays(self) -> np.ndarray:
        """Shape (k, |A|, |A|) integer array"""
        arrays = np.array(self.transitions, dtype=np.int64)
        arrays.setflags(write=False)
        return arrays

    @cached_property
    def classification(self) -> Classification:
        return classify(self)


def validate_system(
    K: RelationMatrix,
    alphabet: Sequence[str],
    A_list: Sequence[Sequence[Sequence[int]]],
    generators: Optional[Sequence[str]] = None,
) -> MarkovSystem:
    """Validate shapes and entries and return a classified MarkovSystem"""
    symbols = tuple(str(symbol) for symbol in alphabet)
    if not symbols:
        raise EmptyAlphabetError("alphabet is empty")
    if len(set(symbols)) != len(symbols):
        raise ValidationError("alphabet symbols must be unique", detail=f"symbols = {list(symbols)}")
    if len(A_list) != K.k:
        raise DimensionMismatchError(
            f"expected {K.k} transition matrices, got {len(A_list)}"
        )
    transitions = []
    for index, matrix in enumerate(A_list):
        frozen = as_bit_matrix(matrix, name=f"A[{index}]")
        if len(frozen) != len(symbols):
            raise DimensionMismatchError(
                f"A[{index}] has dimension {len(frozen)}, alphabet has {len(symbols)} symbols"
            )
        transitions.append(frozen)

    if generators is None:
        generators = [f"s{index + 1}" for index in range(K.k)]
    names = tuple(str(name) for name in generators)
    if len(names) != K.k:
        raise DimensionMismatchError(f"expected {K.k} generator names, got {len(names)}")
    if len(set(names)) != len(names):
        raise ValidationError("generator names must be unique", detail=f"generators = {list(names)}")

    system = MarkovSystem(relation=K, symbols=symbols, transitions=tuple(transitions), generators=names)
    classification = system.classification
    logger.debug(f"Validated system k={K.k}, |A|={len(symbols)}: {classification}")
    return system


def classify(sys: MarkovSystem) -> Classification:
    """Structural hypotheses of the entropy existence results"""
    K = sys.relation
    k = K.k
    transitions = sys.transitions
    row_sums = K.row_sums

    is_hom = all(matrix == transitions[0] for matrix in transitions)
    full_row_index = next((i for i, total in enumerate(row_sums) if total == k), None)
    constant_row_sum = row_sums[0] if len(set(row_sums)) == 1 else None

    free_group_shape = None
    if k % 2 == 0 and K.entries == free_group_relation(k // 2).entries:
        free_group_shape = k // 2

    transpose_paired = False
    alphabet_small_enough = None
    if free_group_shape is not None:
        rank = free_group_shape
        transpose_paired = all(
            transitions[rank + i] == transpose(transitions[i]) for i in range(rank)
        )
        alphabet_small_enough = sys.alphabet_size <= 2 * rank - 1

    return Classification(
        is_hom=is_hom,
        full_row_index=full_row_index,
        constant_row_sum=constant_row_sum,
        free_group_shape=free_group_shape,
        transpose_paired=transpose_paired,
        alphabet_small_enough=alphabet_small_enough,
        essential=all(is_essential(matrix) for matrix in transitions),
    )


@dataclass(frozen=True)
class ExactCountTable:
    """Exact pattern counts up to ``depth``.

    stem_counts[m][j][a]   = p^{(s_j)}_{m;a}
    ball_counts[m][a]      = p_{m;a}
    branch_counts[m][i][a] = q^{(s_i)}_{m;a}; an empty branch (m = 0) admits one pattern
    """
    depth: int
    stem_counts: Tuple[CountLayer, ...]
    ball_counts: Optional[CountLayer] = None
    branch_counts: Optional[Tuple[CountLayer, ...]] = None

    def stem_total(self, m: int, j: int) -> int:
        return sum(self.stem_counts[m][j])

    def ball_total(self, m: int) -> int:
        if self.ball_counts is None:
            raise NotRecordedError("table holds stem counts only", detail="use exact_ball_counts for ball and branch totals")
        return sum(self.ball_counts[m])

    def branch_total(self, m: int, i: int) -> int:
        if self.branch_counts is None:
            raise NotRecordedError("table holds stem counts only", detail="use exact_ball_counts for ball and branch totals")
        return sum(self.branch_counts[m][i])


def _check_depth(n: int, depth_cap: int) -> None:
    if n < 0:
        raise ValidationError(f"depth must be non-negative, got {n}")
    if n > depth_cap:
        raise DepthCapExceededError(
            f"depth {n} exceeds the cap {depth_cap}",
            detail="exact counts grow doubly exponentially with depth",
        )


def _branch(matrix: BitMatrix, a: int, counts: Sequence[int]) -> int:
    return sum(count for bit, count in zip(matrix[a], counts) if bit)


def _stem_layers(sys: MarkovSystem, depth: int) -> List[CountLayer]:
    q = sys.alphabet_size
    successors = [sys.relation.successors(j) for j in range(sys.k)]
    layers: List[CountLayer] = [tuple((1,) * q for _ in range(sys.k))]
    for _ in range(depth):
        previous = layers[-1]
        layers.append(tuple(
            tuple(
                math.prod(_branch(sys.transitions[l], a, previous[l]) for l in successors[j])
                for a in range(q)
            )
            for j in range(sys.k)
        ))
    return layers


def exact_stem_counts(sys: MarkovSystem, n: int, depth_cap: int = DEFAULT_DEPTH_CAP) -> ExactCountTable:
    _check_depth(n, depth_cap)
    return ExactCountTable(depth=n, stem_counts=tuple(_stem_layers(sys, n)))


def exact_ball_counts(sys: MarkovSystem, n: int, depth_cap: int = DEFAULT_DEPTH_CAP) -> ExactCountTable:
    _check_depth(n, depth_cap)
    q = sys.alphabet_size
    stems = _stem_layers(sys, n)
    branches: List[CountLayer] = [tuple((1,) * q for _ in range(sys.k))]
    for m in range(1, n + 1):
        branches.append(tuple(
            tuple(_branch(sys.transitions[i], a, stems[m - 1][i]) for a in range(q))
            for i in range(sys.k)
        ))
    balls = tuple(
        tuple(math.prod(layer[i][a] for i in range(sys.k)) for a in range(q))
        for layer in branches
    )
    return ExactCountTable(
        depth=n,
        stem_counts=tuple(stems),
        ball_counts=balls,
        branch_counts=tuple(branches),
    )


def cayley_nodes(K: RelationMatrix, first_children: Sequence[int], depth: int) -> List[Tuple[int, int]]:
    """Breadth-first (parent index, generator) list of every non-root node.

    The root has index 0 and children ``first_children``; below it a node
    reached via s_g has one child per successor of s_g, down to ``depth``.
    """
    nodes: List[Tuple[int, int]] = []
    frontier = [(0, generator) for generator in first_children]
    for _ in range(depth):
        next_frontier = []
        for parent, generator in frontier:
            nodes.append((parent, generator))
            index = len(nodes)
            next_frontier.extend((index, child) for child in K.successors(generator))
        frontier = next_frontier
    return nodes


def _last_child_positions(nodes: Sequence[Tuple[int, int]]) -> Dict[int, int]:
    last: Dict[int, int] = {}
    for position, (parent, _) in enumerate(nodes, start=1):
        last[parent] = position
    return last


def _merge_states(labels: np.ndarray, weights: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Collapse labelings that agree on every live column, summing their weights"""
    if labels.shape[1] == 0:
        return labels[:1], weights.sum(keepdims=True)
    states, inverse = np.unique(labels, axis=0, return_inverse=True)
    merged = np.zeros(states.shape[0], dtype=np.int64)
    np.add.at(merged, inverse.ravel(), weights)
    return states, merged


def _count_labelings(nodes: Sequence[Tuple[int, int]], arrays: np.ndarray, q: int) -> Tuple[int, ...]:
    """Per root symbol, the number of labelings accepted on every edge.

    Nodes are placed in breadth-first order. Only labels of nodes with children
    still to place are kept as columns; rows agreeing on them are merged with a
    multiplicity, so memory is bounded by q ** (frontier width).
    """
    last_child = _last_child_positions(nodes)
    counts = []
    for root_symbol in range(q):
        live = [0] if 0 in last_child else []
        labels = np.full((1, len(live)), root_symbol, dtype=np.int64)
        weights = np.ones(1, dtype=np.int64)
        for position, (parent, generator) in enumerate(nodes, start=1):
            column = live.index(parent)
            allowed = arrays[generator][labels[:, column]] != 0
            rows, symbols = np.nonzero(allowed)
            if rows.size == 0:
                weights = np.zeros(0, dtype=np.int64)
                break
            labels, weights = labels[rows], weights[rows]
            keep = [c for c, node in enumerate(live) if node != parent or last_child[parent] != position]
            live = [live[c] for c in keep]
            labels = labels[:, keep]
            if position in last_child:
                live.append(position)
                labels = np.column_stack([labels, symbols])
            labels, weights = _merge_states(labels, weights)
        counts.append(int(weights.sum()))
    return tuple(counts)


def brute_force_counts(
    sys: MarkovSystem,
    n: int,
    max_bits: float = DEFAULT_ORACLE_BITS,
    depth_cap: int = DEFAULT_DEPTH_CAP,
) -> ExactCountTable:
    """Enumerate labelings of explicitly built trees Delta_m, semiballs and branches"""
    _check_depth(n, depth_cap)
    K = sys.relation
    q = sys.alphabet_size
    bits = K.geometry.ball_size(n) * math.log2(q)
    if bits > max_bits:
        raise OracleTooLargeError(
            f"oracle needs {bits:.1f} bits of labeling state, limit is {max_bits}",
            detail=f"|Delta_{n}| = {K.geometry.ball_size(n)}, |A| = {q}",
        )

    arrays = sys.transition_arrays
    stems, balls, branches = [], [], []
    for m in range(n + 1):
        stems.append(tuple(
            _count_labelings(cayley_nodes(K, K.successors(j), m), arrays, q) for j in range(sys.k)
        ))
        balls.append(_count_labelings(cayley_nodes(K, range(sys.k), m), arrays, q))
        branches.append(tuple(
            # a branch of depth 0 is empty
            _count_labelings(cayley_nodes(K, (i,), m), arrays, q) if m else (1,) * q
            for i in range(sys.k)
        ))
    logger.debug(f"Brute-force oracle enumerated depth {n} ({bits:.1f} bits)")
    return ExactCountTable(
        depth=n,
        stem_counts=tuple(stems),
        ball_counts=tuple(balls),
        branch_counts=tuple(branches),
    )
