"""
End-to-end checks against published entropy tables and cross-module laws.

    - free-group tables: stem and topological values to 1e-9 within 100 iterations
    - Fibonacci-Cayley tables: both values to 1e-9 within 120 iterations
    - full shifts: every estimator gives log q
    - whenever a top-equals-stem certificate is issued, both entropies agree
"""

import math

import pytest

from ts_entropy import EntropyOptions, fulltree_entropy, stem_entropy, topological_entropy_cayley
from ts_geometry import bethe_relation, free_group_relation, full_relation, validate_relation
from ts_mixing import existence_certificate
from ts_shift import validate_system, with_inverse_transposes

GOLDEN = [[1, 1], [1, 0]]
FLIPPED = [[0, 1], [1, 1]]
PATH = [[0, 1, 0], [1, 0, 1], [0, 1, 0]]
SPLIT = [[0, 1, 1], [1, 0, 0], [0, 1, 1]]
FIBONACCI = validate_relation([[1, 1], [1, 0]])
BASE_10 = EntropyOptions(log_base="10")

FREE_GROUP_TABLE = [
    ([FLIPPED, GOLDEN], 0.1261881372008),
    ([GOLDEN, GOLDEN], 0.2332621211030),
    ([PATH, SPLIT], 0.1681464340595),
]

FIBONACCI_TABLE = [
    ([GOLDEN, GOLDEN], 0.2178219813166),
    ([FLIPPED, FLIPPED], 0.2178219813166),
    ([GOLDEN, FLIPPED], 0.1267559612313),
    ([FLIPPED, GOLDEN], 0.1267559612313),
]


def free_group_system(pair):
    return validate_system(free_group_relation(2), [str(a) for a in range(len(pair[0]))], with_inverse_transposes(pair))


@pytest.mark.parametrize("pair, expected", FREE_GROUP_TABLE)
def test_free_group_table(pair, expected):
    system = free_group_system(pair)
    stem = stem_entropy(system, BASE_10)
    top = topological_entropy_cayley(system, BASE_10)
    for estimate in (stem, top):
        assert estimate.converged
        assert estimate.value == pytest.approx(expected, abs=1e-9)
        assert estimate.iterations_used <= 100


@pytest.mark.parametrize("pair, expected", FIBONACCI_TABLE)
def test_fibonacci_table(pair, expected):
    system = validate_system(FIBONACCI, ["0", "1"], pair)
    stem = stem_entropy(system, BASE_10)
    top = topological_entropy_cayley(system, BASE_10)
    for estimate in (stem, top):
        assert estimate.converged
        assert estimate.value == pytest.approx(expected, abs=1e-9)
        assert estimate.iterations_used <= 120


@pytest.mark.parametrize("K", [FIBONACCI, full_relation(2), free_group_relation(2), bethe_relation(3)])
@pytest.mark.parametrize("q", [1, 2, 3, 4])
def test_full_shift_law(K, q):
    full = [[1] * q for _ in range(q)]
    system = validate_system(K, [str(a) for a in range(q)], [full] * K.k)
    expected = math.log10(q)
    assert stem_entropy(system, BASE_10).value == pytest.approx(expected, abs=1e-12)
    assert topological_entropy_cayley(system, BASE_10).value == pytest.approx(expected, abs=1e-12)
    assert fulltree_entropy([full] * K.k, BASE_10).value == pytest.approx(expected, abs=1e-12)


CERTIFIED_SYSTEMS = [
    *(free_group_system(pair) for pair, _ in FREE_GROUP_TABLE),
    *(validate_system(FIBONACCI, ["0", "1"], pair) for pair, _ in FIBONACCI_TABLE),
    validate_system(bethe_relation(3), ["0", "1"], [GOLDEN] * 3),
    validate_system(bethe_relation(3), ["0", "1", "2"], [PATH, SPLIT, [[1, 1, 0], [0, 1, 1], [1, 0, 1]]]),
    validate_system(full_relation(3), ["0", "1"], [GOLDEN, FLIPPED, [[1, 0], [1, 1]]]),
]


@pytest.mark.slow
@pytest.mark.parametrize("system", CERTIFIED_SYSTEMS)
def test_certificates_couple_entropies(system):
    certificates = [c for c in existence_certificate(system) if c.kind.top_equals_stem]
    if not certificates:
        pytest.skip("no top-equals-stem certificate applies")
    stem = stem_entropy(system).raise_for_convergence()
    top = topological_entropy_cayley(system).raise_for_convergence()
    assert abs(top.value - stem.value) < 1e-8


@pytest.mark.parametrize("system", CERTIFIED_SYSTEMS[:7])
def test_primitive_relation_generators_agree(system):
    estimate = stem_entropy(system)
    assert estimate.converged
    assert estimate.trace[-1].spread < 1e-8
    assert estimate.value <= min(estimate.upper_envelope) + 1e-9
    assert estimate.upper_envelope[-1] == pytest.approx(estimate.value, abs=1e-6)
