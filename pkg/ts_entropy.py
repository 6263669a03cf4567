"""Stem, topological and full-tree entropy of Markov tree shifts.

The pattern-count recursions are run in the log domain: for each generator
s_j the vector log p^{(s_j)}_{n;.} is kept as a normalized part (max 0) plus a
scalar accumulator t^{(s_j)}_n = log max_a p^{(s_j)}_{n;a}.  Internally all
logarithms are natural; estimates are converted to the requested base once.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import logsumexp

from ts_exceptions import (
    DimensionMismatchError,
    EmptyShiftError,
    NoConvergenceError,
    NotRecordedError,
    ValidationError,
)
from ts_geometry import as_bit_matrix
from ts_shift import MarkovSystem, is_essential

logger = logging.getLogger(__name__)

LOG_BASES: Dict[str, float] = {"e": 1.0, "2": math.log(2.0), "10": math.log(10.0)}
MAX_ITERS_LIMIT = 600


@dataclass(frozen=True)
class EntropyOptions:
    max_iters: int = 300
    eps: float = 1e-13
    eps_zero: float = 1e-13
    log_base: str = "e"

    def __post_init__(self):
        if not 1 <= self.max_iters <= MAX_ITERS_LIMIT:
            raise ValidationError(
                f"max_iters must lie in [1, {MAX_ITERS_LIMIT}], got {self.max_iters}",
                detail="accumulators grow like rho(K)^n and leave double range beyond the limit",
            )
        if self.eps <= 0 or self.eps_zero <= 0:
            raise ValidationError("eps and eps_zero must be positive")
        if self.log_base not in LOG_BASES:
            raise ValidationError(f"unknown log base {self.log_base!r}", detail=f"choose from {list(LOG_BASES)}")


def convert_base(value: float, from_base: str, to_base: str) -> float:
    return value * LOG_BASES[from_base] / LOG_BASES[to_base]


@dataclass(frozen=True)
class TraceRow:
    n: int
    values: Tuple[float, ...]
    spread: float
    envelope: float
    log_normalizers: Tuple[float, ...]

    def scaled(self, factor: float) -> "TraceRow":
        return TraceRow(
            n=self.n,
            values=tuple(value * factor for value in self.values),
            spread=self.spread * factor,
            envelope=self.envelope * factor,
            log_normalizers=tuple(value * factor for value in self.log_normalizers),
        )


@dataclass(frozen=True)
class SeriesBracket:
    """Partial sums S_N of h = sum_n log r_n (d-1)/d^(n+1), with tails when the bound applies"""
    partial_sums: Tuple[float, ...]
    tails: Optional[Tuple[float, ...]] = None

    def bracket(self, N: int) -> Tuple[float, float]:
        if self.tails is None:
            raise NotRecordedError("no tail bound recorded", detail="the matrices are not essential and identical")
        return self.partial_sums[N], self.partial_sums[N] + self.tails[N]

    def width(self, N: int) -> float:
        lower, upper = self.bracket(N)
        return upper - lower

    def scaled(self, factor: float) -> "SeriesBracket":
        return SeriesBracket(
            partial_sums=tuple(value * factor for value in self.partial_sums),
            tails=None if self.tails is None else tuple(value * factor for value in self.tails),
        )


@dataclass(frozen=True)
class EntropyEstimate:
    kind: str
    value: float
    base: str
    converged: bool
    iterations_used: int
    trace: Tuple[TraceRow, ...]
    upper_envelope: Tuple[float, ...]
    per_generator: Dict[str, float] = field(default_factory=dict)
    series: Optional[SeriesBracket] = None

    def in_base(self, base: str) -> "EntropyEstimate":
        if base not in LOG_BASES:
            raise ValidationError(f"unknown log base {base!r}")
        factor = LOG_BASES[self.base] / LOG_BASES[base]
        return replace(
            self,
            value=self.value * factor,
            base=base,
            trace=tuple(row.scaled(factor) for row in self.trace),
            upper_envelope=tuple(value * factor for value in self.upper_envelope),
            per_generator={name: value * factor for name, value in self.per_generator.items()},
            series=None if self.series is None else self.series.scaled(factor),
        )

    def raise_for_convergence(self) -> "EntropyEstimate":
        if not self.converged:
            raise NoConvergenceError(
                f"{self.kind} entropy did not converge within {self.iterations_used} iterations",
                estimate=self,
                detail=f"last value {self.value!r} (log base {self.base})",
            )
        return self

    def as_dict(self) -> Dict[str, Any]:
        report: Dict[str, Any] = {
            "kind": self.kind,
            "value": self.value,
            "base": self.base,
            "converged": self.converged,
            "iterations_used": self.iterations_used,
            "per_generator": dict(self.per_generator),
            "upper_envelope": list(self.upper_envelope),
            "trace": [
                {
                    "n": row.n,
                    "values": list(row.values),
                    "spread": row.spread,
                    "envelope": row.envelope,
                    "log_normalizers": list(row.log_normalizers),
                }
                for row in self.trace
            ],
        }
        if self.series is not None:
            report["series"] = {
                "partial_sums": list(self.series.partial_sums),
                "tails": None if self.series.tails is None else list(self.series.tails),
            }
        return report


@dataclass
class LogCountState:
    """Normalized log-counts l^{(s_j)}_{n;a} (shape k x |A|) and accumulators t^{(s_j)}_n"""
    n: int
    log_counts: np.ndarray
    accumulators: np.ndarray
    log_normalizers: np.ndarray

    @classmethod
    def initial(cls, k: int, alphabet_size: int) -> "LogCountState":
        # p_{0;a} = 1 for every symbol, so r_0 = 1
        return cls(
            n=0,
            log_counts=np.zeros((k, alphabet_size)),
            accumulators=np.zeros(k),
            log_normalizers=np.zeros(k),
        )

    def log_totals(self) -> np.ndarray:
        """log p^{(s_j)}_n = t^{(s_j)}_n + log sum_a exp l^{(s_j)}_{n;a}"""
        return self.accumulators + logsumexp(self.log_counts, axis=1)


def log_matrices(matrices: np.ndarray) -> np.ndarray:
    """0 where A(a, b) = 1, -inf where A(a, b) = 0"""
    return np.where(np.asarray(matrices) != 0, 0.0, -np.inf)


def log_branch(log_matrix: np.ndarray, log_counts: np.ndarray) -> np.ndarray:
    """log sum_b A(a, b) exp(l_b) for every symbol a; -inf over an empty support"""
    with np.errstate(divide="ignore"):
        return logsumexp(log_matrix + log_counts[np.newaxis, :], axis=1)


def advance_state(sys: MarkovSystem, state: LogCountState, log_A: Optional[np.ndarray] = None) -> LogCountState:
    """One step of the normalized stem recursion"""
    if log_A is None:
        log_A = log_matrices(sys.transition_arrays)
    relation = sys.relation
    combined = np.zeros_like(state.log_counts)
    for j in range(sys.k):
        for l in relation.successors(j):
            combined[j] += log_branch(log_A[l], state.log_counts[l])
    log_normalizers = combined.max(axis=1)
    if np.isneginf(log_normalizers).any():
        dead = [sys.generators[j] for j in np.flatnonzero(np.isneginf(log_normalizers))]
        raise EmptyShiftError(
            f"no admissible pattern on the semiballs of {dead} at depth {state.n + 1}"
        )
    return LogCountState(
        n=state.n + 1,
        log_counts=combined - log_normalizers[:, np.newaxis],
        accumulators=relation.array @ state.accumulators + log_normalizers,
        log_normalizers=log_normalizers,
    )


def iterate_states(sys: MarkovSystem, n_max: int) -> Iterator[LogCountState]:
    """States for n = 0..n_max"""
    log_A = log_matrices(sys.transition_arrays)
    state = LogCountState.initial(sys.k, sys.alphabet_size)
    yield state
    for _ in range(n_max):
        state = advance_state(sys, state, log_A)
        yield state


def _has_converged(current: np.ndarray, previous: np.ndarray, options: EntropyOptions) -> bool:
    relative = np.abs(current - previous) < options.eps * np.abs(previous)
    vanishing = np.abs(current) < options.eps_zero
    return bool(np.all(relative | vanishing))


def _finish(
    kind: str,
    options: EntropyOptions,
    converged: bool,
    iterations: int,
    trace: List[TraceRow],
    envelope: List[float],
    value: float,
    per_generator: Optional[Dict[str, float]] = None,
    series: Optional[SeriesBracket] = None,
) -> EntropyEstimate:
    estimate = EntropyEstimate(
        kind=kind,
        value=value,
        base="e",
        converged=converged,
        iterations_used=iterations,
        trace=tuple(trace),
        upper_envelope=tuple(envelope),
        per_generator=per_generator or {},
        series=series,
    ).in_base(options.log_base)
    if converged:
        logger.info(
            f"{kind} entropy converged after {iterations} iterations: "
            f"{estimate.value:.13f} (log base {options.log_base})"
        )
    else:
        logger.warning(
            f"{kind} entropy did not converge within {iterations} iterations; "
            f"last value {estimate.value:.13f} (log base {options.log_base})"
        )
    return estimate


def stem_entropy(sys: MarkovSystem, opts: Optional[EntropyOptions] = None) -> EntropyEstimate:
    """Per-generator stem entropy h^{(s_j)} by the normalized stem recursion"""
    options = opts or EntropyOptions()
    geometry = sys.relation.geometry
    log_A = log_matrices(sys.transition_arrays)
    state = LogCountState.initial(sys.k, sys.alphabet_size)
    sizes = np.ones(sys.k)
    exact_sizes = [1] * sys.k

    values = state.accumulators / sizes
    envelope = [float(np.max(state.log_totals() / sizes))]
    trace = [TraceRow(0, tuple(values), 0.0, envelope[0], tuple(state.log_normalizers))]
    converged = False
    logger.info(f"Running stem entropy on k={sys.k}, |A|={sys.alphabet_size}")

    for n in range(1, options.max_iters + 1):
        state = advance_state(sys, state, log_A)
        level = geometry.level_vector(n)
        exact_sizes = [size + count for size, count in zip(exact_sizes, level)]
        try:
            sizes = np.array([float(size) for size in exact_sizes])
        except OverflowError:
            logger.warning(f"Semiball sizes leave double range at n={n}; stopping")
            break
        previous = values
        values = state.accumulators / sizes
        envelope.append(float(np.max(state.log_totals() / sizes)))
        trace.append(TraceRow(
            n=n,
            values=tuple(values),
            spread=float(values.max() - values.min()),
            envelope=envelope[-1],
            log_normalizers=tuple(state.log_normalizers),
        ))
        logger.debug(f"n={n} h={values.tolist()}")
        if _has_converged(values, previous, options):
            converged = True
            break

    per_generator = {name: float(value) for name, value in zip(sys.generators, values)}
    return _finish(
        "stem", options, converged, trace[-1].n, trace, envelope,
        value=float(np.mean(values)), per_generator=per_generator,
    )


def topological_entropy_cayley(sys: MarkovSystem, opts: Optional[EntropyOptions] = None) -> EntropyEstimate:
    """Root-ball entropy: log max_a p_{n;a} / |Delta_n| from the stem state at depth n - 1.

    The envelope column of the trace is the stem upper envelope
    max_j log p^{(s_j)}_n / |semiball_n(s_j)|, not a ball quantity.
    """
    options = opts or EntropyOptions()
    geometry = sys.relation.geometry
    log_A = log_matrices(sys.transition_arrays)
    state = LogCountState.initial(sys.k, sys.alphabet_size)
    semiball_sizes = [1] * sys.k

    value = 0.0
    envelope = [float(np.max(state.log_totals()))]
    trace = [TraceRow(0, (value,), 0.0, envelope[0], (0.0,))]
    converged = False
    logger.info(f"Running topological entropy on k={sys.k}, |A|={sys.alphabet_size}")

    for n in range(1, options.max_iters + 1):
        root = np.zeros(sys.alphabet_size)
        for i in range(sys.k):
            root += log_branch(log_A[i], state.log_counts[i])
        log_root_max = float(root.max())
        if math.isinf(log_root_max):
            raise EmptyShiftError(f"no admissible pattern on the ball of radius {n}")
        try:
            ball = float(geometry.ball_size(n))
        except OverflowError:
            logger.warning(f"Ball size leaves double range at n={n}; stopping")
            break
        previous = value
        value = (float(state.accumulators.sum()) + log_root_max) / ball

        state = advance_state(sys, state, log_A)
        level = geometry.level_vector(n)
        semiball_sizes = [size + count for size, count in zip(semiball_sizes, level)]
        try:
            sizes = np.array([float(size) for size in semiball_sizes])
        except OverflowError:
            logger.warning(f"Semiball sizes leave double range at n={n}; stopping")
            break
        envelope.append(float(np.max(state.log_totals() / sizes)))
        trace.append(TraceRow(n, (value,), 0.0, envelope[-1], (log_root_max,)))
        logger.debug(f"n={n} h={value}")
        if _has_converged(np.array([value]), np.array([previous]), options):
            converged = True
            break

    return _finish("topological", options, converged, trace[-1].n, trace, envelope, value=value)


def fulltree_entropy(A_list: Sequence[Sequence[Sequence[int]]], opts: Optional[EntropyOptions] = None) -> EntropyEstimate:
    """Entropy of X_A on the full d-ary rooted tree with the series partial sums.

    h = sum_n log r_n (d-1)/d^(n+1).  For identical essential matrices
    1 <= r_n <= |A|^d, so S_N <= h <= S_N + log|A| / d^N.
    """
    options = opts or EntropyOptions()
    matrices = [as_bit_matrix(matrix, name=f"A[{index}]") for index, matrix in enumerate(A_list)]
    if not matrices:
        raise ValidationError("fulltree needs at least one transition matrix")
    alphabet_size = len(matrices[0])
    if any(len(matrix) != alphabet_size for matrix in matrices):
        raise DimensionMismatchError("transition matrices must share one alphabet")
    d = len(matrices)
    log_A = log_matrices(np.array(matrices))
    bracketed = d >= 2 and all(matrix == matrices[0] for matrix in matrices) and is_essential(matrices[0])

    log_counts = np.zeros(alphabet_size)
    accumulator = 0.0
    size = 1
    value = 0.0
    partial_sums = [0.0]
    tails = [math.log(alphabet_size)] if bracketed else None
    envelope = [math.log(alphabet_size)]
    trace = [TraceRow(0, (value,), 0.0, envelope[0], (0.0,))]
    converged = False
    logger.info(f"Running full-tree entropy with d={d}, |A|={alphabet_size}")

    for n in range(1, options.max_iters + 1):
        combined = np.zeros(alphabet_size)
        for matrix in log_A:
            combined += log_branch(matrix, log_counts)
        log_normalizer = float(combined.max())
        if math.isinf(log_normalizer):
            raise EmptyShiftError(f"no admissible pattern on the full tree at depth {n}")
        log_counts = combined - log_normalizer
        accumulator = d * accumulator + log_normalizer
        size = d * size + 1
        try:
            float_size = float(size)
        except OverflowError:
            logger.warning(f"Tree size leaves double range at n={n}; stopping")
            break
        previous = value
        value = accumulator / float_size
        if d >= 2:
            partial_sums.append(partial_sums[-1] + log_normalizer * (d - 1) / d ** (n + 1))
            if tails is not None:
                tails.append(math.log(alphabet_size) / d ** n)
        envelope.append(float((accumulator + logsumexp(log_counts)) / float_size))
        trace.append(TraceRow(n, (value,), 0.0, envelope[-1], (log_normalizer,)))
        if _has_converged(np.array([value]), np.array([previous]), options):
            converged = True
            break

    series = None
    if d >= 2:
        series = SeriesBracket(partial_sums=tuple(partial_sums), tails=None if tails is None else tuple(tails))
    return _finish("fulltree", options, converged, trace[-1].n, trace, envelope, value=value, series=series)


def stem_upper_envelope(sys: MarkovSystem, n_max: int, log_base: str = "e") -> List[float]:
    """max_j log p^{(s_j)}_n / |semiball_n^{(s_j)}| for n = 0..n_max; its infimum is the stem entropy"""
    if n_max < 0:
        raise ValidationError(f"n_max must be non-negative, got {n_max}")
    if log_base not in LOG_BASES:
        raise ValidationError(f"unknown log base {log_base!r}")
    geometry = sys.relation.geometry
    envelope = []
    for state in iterate_states(sys, n_max):
        sizes = np.array([float(geometry.semiball_size(j, state.n)) for j in range(sys.k)])
        envelope.append(float(np.max(state.log_totals() / sizes)) / LOG_BASES[log_base])
    return envelope
