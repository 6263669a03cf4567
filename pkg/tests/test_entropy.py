import math

import numpy as np
import pytest

from ts_entropy import (
    EntropyOptions,
    convert_base,
    fulltree_entropy,
    iterate_states,
    stem_entropy,
    stem_upper_envelope,
    topological_entropy_cayley,
)
from ts_exceptions import DimensionMismatchError, EmptyShiftError, NoConvergenceError, NotRecordedError, ValidationError
from ts_geometry import free_group_relation, full_relation, validate_relation
from ts_shift import exact_stem_counts, validate_system, with_inverse_transposes

GOLDEN = [[1, 1], [1, 0]]
FLIPPED = [[0, 1], [1, 1]]
FIBONACCI = validate_relation([[1, 1], [1, 0]])
BASE_10 = EntropyOptions(log_base="10")


def hom(K, matrix):
    return validate_system(K, [str(a) for a in range(len(matrix))], [matrix] * K.k)


def ones(q):
    return [[1] * q for _ in range(q)]


class TestOptions:
    @pytest.mark.parametrize("kwargs", [{"max_iters": 0}, {"max_iters": 601}, {"eps": 0}, {"eps_zero": -1.0}, {"log_base": "3"}])
    def test_rejects(self, kwargs):
        with pytest.raises(ValidationError):
            EntropyOptions(**kwargs)

    def test_defaults(self):
        options = EntropyOptions()
        assert (options.max_iters, options.eps, options.eps_zero, options.log_base) == (300, 1e-13, 1e-13, "e")

    def test_convert_base(self):
        assert convert_base(math.log(8), "e", "2") == pytest.approx(3.0)
        assert convert_base(1.0, "10", "e") == pytest.approx(math.log(10))


class TestLogCountState:
    @pytest.mark.parametrize("system", [
        hom(FIBONACCI, GOLDEN),
        hom(full_relation(2), FLIPPED),
        validate_system(free_group_relation(2), "01", with_inverse_transposes([FLIPPED, GOLDEN])),
        validate_system(validate_relation([[0, 1, 1], [1, 1, 0], [1, 0, 1]]), "abc",
                        [[[1, 1, 0], [0, 1, 1], [1, 0, 1]], [[0, 1, 0], [1, 0, 1], [0, 1, 0]], ones(3)]),
    ])
    def test_accumulators_track_exact_counts(self, system):
        table = exact_stem_counts(system, 7)
        for state in iterate_states(system, 7):
            assert np.all(state.log_counts.max(axis=1) == 0)
            for j in range(system.k):
                counts = table.stem_counts[state.n][j]
                assert state.accumulators[j] == pytest.approx(math.log(max(counts)), rel=1e-10, abs=1e-12)
                assert state.log_totals()[j] == pytest.approx(math.log(sum(counts)), rel=1e-10)

    def test_empty_shift(self):
        system = validate_system(validate_relation([[1]]), "a", [[[0]]])
        with pytest.raises(EmptyShiftError):
            stem_entropy(system)
        with pytest.raises(EmptyShiftError):
            topological_entropy_cayley(system)

    def test_dead_symbol_is_kept(self):
        # symbol b never has a child; a survives with p_{n;a} = 2^(2^n)
        system = validate_system(full_relation(2), "ab", [[[1, 1], [0, 0]]] * 2)
        estimate = stem_entropy(system)
        assert estimate.converged
        assert estimate.value == pytest.approx(math.log(2) / 2, abs=1e-12)


class TestStemEntropy:
    def test_fibonacci_golden(self):
        estimate = stem_entropy(hom(FIBONACCI, GOLDEN), BASE_10)
        assert estimate.converged
        assert estimate.value == pytest.approx(0.2178219813166, abs=1e-9)
        assert estimate.iterations_used <= 120
        assert estimate.base == "10"
        assert set(estimate.per_generator) == {"s1", "s2"}

    @pytest.mark.parametrize("K", [FIBONACCI, full_relation(3), free_group_relation(2)])
    @pytest.mark.parametrize("q", [1, 2, 3, 4])
    def test_full_shift(self, K, q):
        estimate = stem_entropy(hom(K, ones(q)), BASE_10)
        assert estimate.converged
        assert estimate.value == pytest.approx(math.log10(q), abs=1e-12)

    def test_trace_rows(self):
        estimate = stem_entropy(hom(FIBONACCI, GOLDEN), BASE_10)
        assert [row.n for row in estimate.trace] == list(range(estimate.iterations_used + 1))
        assert len(estimate.upper_envelope) == len(estimate.trace)
        last = estimate.trace[-1]
        assert last.spread == pytest.approx(max(last.values) - min(last.values))

    def test_base_invariance(self):
        system = hom(FIBONACCI, GOLDEN)
        natural = stem_entropy(system).value
        binary = stem_entropy(system, EntropyOptions(log_base="2")).value
        assert binary * math.log(2) == pytest.approx(natural, abs=1e-12)
        assert stem_entropy(system).in_base("2").value == pytest.approx(binary, abs=1e-12)

    def test_period_two_relation_oscillates(self):
        # s1 and s2 trade places every level, so the per-generator values
        # settle into a two-cycle instead of a limit
        K = validate_relation([[0, 1, 1], [1, 0, 0], [1, 0, 0]])
        system = hom(K, GOLDEN)
        estimate = stem_entropy(system, EntropyOptions(max_iters=600, log_base="10"))
        assert not estimate.converged

        table = exact_stem_counts(system, 12)
        exact = {
            n: [math.log10(table.stem_total(n, j)) / K.geometry.semiball_size(j, n) for j in range(K.k)]
            for n in range(8, 13)
        }
        for n, values in exact.items():
            for j, value in enumerate(values):
                # normalizers drop at most log |A| against the exact total
                slack = math.log10(2) / K.geometry.semiball_size(j, n)
                assert value - slack - 1e-12 <= estimate.trace[n].values[j] <= value + 1e-12
        assert all((exact[n][0] - exact[n][1]) * (exact[n + 1][0] - exact[n + 1][1]) < 0 for n in range(8, 12))

        tail = estimate.trace[-6:]
        gaps = [row.values[0] - row.values[1] for row in tail]
        assert all(a * b < 0 for a, b in zip(gaps, gaps[1:]))
        assert all(row.spread > 1e-3 for row in tail)
        assert all(row.values[1] == pytest.approx(row.values[2], abs=1e-15) for row in tail)

    def test_swap_relation_generators_agree(self):
        # every semiball is a path, so |semiball_n| = n + 1 and the relative
        # criterion is out of reach; the generators still agree exactly
        K = validate_relation([[0, 1], [1, 0]])
        estimate = stem_entropy(hom(K, GOLDEN), EntropyOptions(max_iters=400, log_base="10"))
        assert not estimate.converged
        assert all(row.spread == 0.0 for row in estimate.trace)
        assert estimate.value == pytest.approx(math.log10((1 + math.sqrt(5)) / 2), abs=1e-2)
        with pytest.raises(NoConvergenceError) as info:
            estimate.raise_for_convergence()
        assert info.value.estimate is estimate

    def test_envelope_bounds_value(self):
        estimate = stem_entropy(hom(FIBONACCI, FLIPPED), BASE_10)
        assert estimate.value <= min(estimate.upper_envelope) + 1e-9
        assert estimate.upper_envelope[-1] == pytest.approx(estimate.value, abs=1e-6)


class TestTopologicalEntropy:
    def test_fibonacci_golden(self):
        estimate = topological_entropy_cayley(hom(FIBONACCI, GOLDEN), BASE_10)
        assert estimate.converged
        assert estimate.value == pytest.approx(0.2178219813166, abs=1e-9)

    @pytest.mark.parametrize("K", [FIBONACCI, full_relation(2), free_group_relation(2)])
    @pytest.mark.parametrize("q", [1, 2, 3, 4])
    def test_full_shift(self, K, q):
        estimate = topological_entropy_cayley(hom(K, ones(q)), BASE_10)
        assert estimate.converged
        assert estimate.value == pytest.approx(math.log10(q), abs=1e-12)


class TestFullTree:
    def test_matches_stem_on_full_relation(self):
        stem = stem_entropy(hom(full_relation(2), GOLDEN))
        full = fulltree_entropy([GOLDEN, GOLDEN])
        assert full.value == pytest.approx(stem.value, abs=1e-10)

    def test_full_shift(self):
        assert fulltree_entropy([ones(2)] * 2).value == pytest.approx(math.log(2), abs=1e-12)

    def test_single_symbol(self):
        estimate = fulltree_entropy([[[1]]] * 3)
        assert estimate.converged
        assert estimate.value == 0.0

    def test_series_bracket(self):
        options = EntropyOptions(max_iters=60, eps=1e-300, eps_zero=1e-300, log_base="10")
        estimate = fulltree_entropy([GOLDEN, GOLDEN], options)
        series = estimate.series
        assert len(series.partial_sums) > 40
        for N in range(len(series.partial_sums)):
            lower, upper = series.bracket(N)
            assert lower <= estimate.value + 1e-12
            assert estimate.value <= upper + 1e-12
        assert series.width(30) == pytest.approx(math.log10(2) / 2 ** 30, rel=1e-9)
        assert all(series.width(N) < 1e-12 for N in range(40, len(series.partial_sums)))
        assert series.partial_sums[-1] == pytest.approx(estimate.value, abs=1e-12)

    def test_no_bracket_for_mixed_matrices(self):
        estimate = fulltree_entropy([GOLDEN, FLIPPED])
        assert estimate.series.tails is None
        with pytest.raises(NotRecordedError) as info:
            estimate.series.bracket(1)
        assert info.value.error_code == "TS204"

    def test_mismatched_alphabets(self):
        with pytest.raises(DimensionMismatchError):
            fulltree_entropy([GOLDEN, ones(3)])


class TestEnvelope:
    def test_full_shift_is_constant(self):
        envelope = stem_upper_envelope(hom(FIBONACCI, ones(3)), 20, log_base="10")
        assert envelope == pytest.approx([math.log10(3)] * 21, abs=1e-12)

    def test_fibonacci_golden_stays_above_entropy(self):
        envelope = stem_upper_envelope(hom(FIBONACCI, GOLDEN), 100, log_base="10")
        assert min(envelope) >= 0.2178219813166 - 1e-9

    def test_depth_zero(self):
        assert stem_upper_envelope(hom(FIBONACCI, GOLDEN), 0) == [pytest.approx(math.log(2))]

    def test_negative_depth(self):
        with pytest.raises(ValidationError):
            stem_upper_envelope(hom(FIBONACCI, GOLDEN), -1)
