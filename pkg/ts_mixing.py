"""Graph representation of a Markov tree shift and entropy-existence certificates.

Vertices are pairs (a, s_i); ((a, s_i), (b, s_j)) is an edge iff
K(s_i, s_j) = 1 and A_j(a, b) = 1.  Strong connectivity plus a pivot vertex
certify that topological and stem entropy agree.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Any, Dict, FrozenSet, List, Optional, Tuple

import networkx as nx
import numpy as np

from ts_geometry import boolean_product
from ts_shift import MarkovSystem

logger = logging.getLogger(__name__)

Vertex = Tuple[int, int]


@dataclass(frozen=True)
class GraphRep:
    """Graph representation on A x S_k; vertex (a, i) has index a * k + i"""
    alphabet_size: int
    k: int
    adjacency: np.ndarray = field(compare=False)

    @property
    def vertices(self) -> List[Vertex]:
        return [(a, i) for a in range(self.alphabet_size) for i in range(self.k)]

    def index(self, vertex: Vertex) -> int:
        a, i = vertex
        return a * self.k + i

    def has_edge(self, source: Vertex, target: Vertex) -> bool:
        return bool(self.adjacency[self.index(source), self.index(target)])

    @property
    def edges(self) -> FrozenSet[Tuple[Vertex, Vertex]]:
        vertices = self.vertices
        rows, columns = np.nonzero(self.adjacency)
        return frozenset((vertices[r], vertices[c]) for r, c in zip(rows, columns))

    @cached_property
    def digraph(self) -> nx.DiGraph:
        graph = nx.DiGraph()
        graph.add_nodes_from(self.vertices)
        graph.add_edges_from(self.edges)
        return graph


@dataclass(frozen=True)
class Pivot:
    vertex: Vertex
    target_generator: int
    walk_length: int


class CertificateKind(str, Enum):
    PRIMITIVE_K_STEM_EXISTS = "PrimitiveK_StemExists"
    IRREDUCIBLE_K_STEM_EXISTS = "IrreducibleK_StemExists"
    FULL_ROW_TOP_EQUALS_STEM = "FullRow_TopEqualsStem"
    HOM_CONSTANT_ROW_SUM_TOP_EQUALS_STEM = "HomConstantRowSum_TopEqualsStem"
    FREE_GROUP_HOM_TOP_EQUALS_STEM = "FreeGroupHom_TopEqualsStem"
    FREE_GROUP_SMALL_ALPHABET_TOP_EQUALS_STEM = "FreeGroupSmallAlphabet_TopEqualsStem"
    PIVOT_SC_TOP_EQUALS_STEM = "PivotSC_TopEqualsStem"

    @property
    def top_equals_stem(self) -> bool:
        return self.value.endswith("TopEqualsStem")


@dataclass(frozen=True)
class Certificate:
    kind: CertificateKind
    evidence: Dict[str, Any] = field(default_factory=dict)

    def as_dict(self) -> Dict[str, Any]:
        return {"kind": self.kind.value, "evidence": dict(self.evidence)}


def build_graph_representation(sys: MarkovSystem) -> GraphRep:
    k = sys.k
    q = sys.alphabet_size
    relation = sys.relation.array
    arrays = sys.transition_arrays
    # adjacency[(a,i),(b,j)] = K[i,j] * A_j[a,b]
    blocks = np.einsum("ij,jab->aibj", relation, arrays)
    adjacency = blocks.reshape(q * k, q * k) != 0
    adjacency.setflags(write=False)
    return GraphRep(alphabet_size=q, k=k, adjacency=adjacency)


def is_strongly_connected(G: GraphRep) -> bool:
    return nx.is_strongly_connected(G.digraph)


def strongly_connected_components(G: GraphRep) -> List[List[Vertex]]:
    """Components sorted by their smallest vertex"""
    components = [sorted(component) for component in nx.strongly_connected_components(G.digraph)]
    return sorted(components)


def _scan_for_pivot(G: GraphRep, reach: np.ndarray, walk_length: int) -> Optional[Pivot]:
    q, k = G.alphabet_size, G.k
    # reach[a, i, b, j]; a pivot row hits every b for one fixed j
    blocks = reach.reshape(q, k, q, k)
    hits = blocks.all(axis=2)
    for a in range(q):
        for i in range(k):
            for j in range(k):
                if hits[a, i, j]:
                    return Pivot(vertex=(a, i), target_generator=j, walk_length=walk_length)
    return None


def find_pivot(G: GraphRep) -> Optional[Pivot]:
    """First pivot over boolean powers A_G^N, N = 1, 2, ...

    The power sequence is eventually periodic; the search stops with None as
    soon as a power repeats.
    """
    reach = G.adjacency.copy()
    seen = set()
    walk_length = 1
    while True:
        pivot = _scan_for_pivot(G, reach, walk_length)
        if pivot is not None:
            logger.debug(f"Pivot {pivot}")
            return pivot
        key = np.packbits(reach).tobytes()
        if key in seen:
            logger.debug(f"Boolean powers cycle at N={walk_length} without a pivot")
            return None
        seen.add(key)
        reach = boolean_product(reach, G.adjacency)
        walk_length += 1


def existence_certificate(sys: MarkovSystem) -> List[Certificate]:
    """One certificate per existence result whose hypotheses hold.

    An empty list only means no known sufficient condition applies.
    """
    relation = sys.relation
    classification = sys.classification
    certificates: List[Certificate] = []

    if relation.primitive:
        certificates.append(Certificate(
            CertificateKind.PRIMITIVE_K_STEM_EXISTS,
            {"primitive_exponent": relation.primitive_exponent},
        ))
    if relation.irreducible:
        period, classes = relation.cyclic_structure
        certificates.append(Certificate(
            CertificateKind.IRREDUCIBLE_K_STEM_EXISTS,
            {"period": period, "cyclic_classes": [sorted(c) for c in classes]},
        ))

        # these results go through the infimum formula for the stem entropy,
        # which needs an irreducible K
        if classification.full_row_index is not None:
            certificates.append(Certificate(
                CertificateKind.FULL_ROW_TOP_EQUALS_STEM,
                {"row": classification.full_row_index, "row_sum": relation.k},
            ))
        if classification.is_hom and classification.constant_row_sum is not None:
            certificates.append(Certificate(
                CertificateKind.HOM_CONSTANT_ROW_SUM_TOP_EQUALS_STEM,
                {"row_sum": classification.constant_row_sum},
            ))
        if classification.free_group_shape is not None and classification.transpose_paired:
            rank = classification.free_group_shape
            if all(sys.transitions[i] == sys.transitions[0] for i in range(rank)):
                certificates.append(Certificate(
                    CertificateKind.FREE_GROUP_HOM_TOP_EQUALS_STEM,
                    {"rank": rank},
                ))
            if classification.alphabet_small_enough:
                certificates.append(Certificate(
                    CertificateKind.FREE_GROUP_SMALL_ALPHABET_TOP_EQUALS_STEM,
                    {"rank": rank, "alphabet_size": sys.alphabet_size, "bound": 2 * rank - 1},
                ))

    graph = build_graph_representation(sys)
    if is_strongly_connected(graph):
        pivot = find_pivot(graph)
        if pivot is not None:
            a, i = pivot.vertex
            certificates.append(Certificate(
                CertificateKind.PIVOT_SC_TOP_EQUALS_STEM,
                {
                    "pivot": [sys.symbols[a], sys.generators[i]],
                    "target_generator": sys.generators[pivot.target_generator],
                    "walk_length": pivot.walk_length,
                },
            ))

    logger.info(f"Issued {len(certificates)} certificate(s): {[c.kind.value for c in certificates]}")
    return certificates
