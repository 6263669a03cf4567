import csv
import io
import json
import logging
from typing import Any, Dict, List, Mapping, Optional

from typing_extensions import override

from ts_config import entropy_options, load_config, merge_flags
from ts_entropy import (
    EntropyEstimate,
    fulltree_entropy,
    stem_entropy,
    topological_entropy_cayley,
)
from ts_exceptions import TreeShiftException, ValidationError
from ts_geometry import spectral_radius
from ts_mixing import (
    build_graph_representation,
    existence_certificate,
    find_pivot,
    is_strongly_connected,
    strongly_connected_components,
)
from ts_shift import ExactCountTable, brute_force_counts, exact_ball_counts

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_NO_CERTIFICATE = 2
EXIT_NO_CONVERGENCE = 3
EXIT_ORACLE_MISMATCH = 4


def log_failure(error: TreeShiftException, context: str) -> None:
    logger.error(f"{context}:")
    logger.error(f"  Message: {error.message}")
    logger.error(f"  Error Code: {getattr(error, 'error_code', 'Unknown')}")
    logger.error(f"  Detail: {getattr(error, 'detail', '')}")
    if getattr(error, 'field', ''):
        logger.error(f"  Field: {error.field}")


class TreeShiftClient:
    """Base class for commands run against one system config"""
    command = ""

    def __init__(self, config_file: str = 'system.yml', flags: Optional[Mapping[str, Any]] = None):
        self.config_file = config_file
        self.relation, self.system, options = load_config(config_file)
        self.options = merge_flags(options, flags or {})
        self.report: Dict[str, Any] = {}
        self.exit_code = EXIT_OK

    def execute(self) -> Dict[str, Any]:
        raise NotImplementedError

    def run(self) -> Dict[str, Any]:
        logger.info(f"Starting {self.command} on {self.config_file}...")
        try:
            self.report = {"command": self.command, "config": self.config_file, **self.execute()}
        except TreeShiftException as e:
            log_failure(e, f"Error running {self.command} on {self.config_file}")
            raise
        logger.info(f"Finished {self.command} on {self.config_file} (exit code {self.exit_code})")
        return self.report

    def csv_rows(self) -> List[List[Any]]:
        return [["key", "value"]] + [
            [key, json.dumps(value, sort_keys=True)] for key, value in sorted(self.report.items())
        ]

    def text_lines(self) -> List[str]:
        return [f"{key}: {value}" for key, value in self.report.items()]

    def render(self, fmt: str = "text") -> str:
        if fmt == "json":
            return json.dumps(self.report, sort_keys=True, indent=2)
        if fmt == "csv":
            buffer = io.StringIO()
            writer = csv.writer(buffer, lineterminator="\n")
            for row in self.csv_rows():
                writer.writerow([repr(cell) if isinstance(cell, float) else cell for cell in row])
            return buffer.getvalue().rstrip("\n")
        if fmt == "text":
            return "\n".join(self.text_lines())
        raise ValidationError(f"unknown report format {fmt!r}", detail="choose text, csv or json")


class EntropyReport(TreeShiftClient):
    """Shared rendering for the stem, top and fulltree commands"""
    envelope_label = "envelope"

    def _estimate(self) -> EntropyEstimate:
        raise NotImplementedError

    def _value_columns(self) -> List[str]:
        return ["h"]

    @override
    def execute(self) -> Dict[str, Any]:
        self.estimate = self._estimate()
        if not self.estimate.converged:
            self.exit_code = EXIT_NO_CONVERGENCE
        return {"estimate": self.estimate.as_dict()}

    @override
    def csv_rows(self) -> List[List[Any]]:
        rows: List[List[Any]] = [["n", *self._value_columns(), self.envelope_label]]
        for row in self.estimate.trace:
            rows.append([row.n, *row.values, row.envelope])
        return rows

    @override
    def text_lines(self) -> List[str]:
        estimate = self.estimate
        lines = [
            f"=== {estimate.kind} entropy of {self.config_file} ===",
            f"Value (log base {estimate.base}): {estimate.value:.13f}",
            f"Converged: {estimate.converged}",
            f"Iterations: {estimate.iterations_used}",
        ]
        for name, value in estimate.per_generator.items():
            lines.append(f"  h^({name}) = {value:.13f}")
        if estimate.upper_envelope:
            lines.append(f"Minimum {self.envelope_label}: {min(estimate.upper_envelope):.13f}")
        if estimate.series is not None:
            last = len(estimate.series.partial_sums) - 1
            lines.append(f"Series partial sum S_{last}: {estimate.series.partial_sums[last]:.13f}")
            if estimate.series.tails is not None:
                lower, upper = estimate.series.bracket(last)
                lines.append(f"Series bracket: [{lower:.13f}, {upper:.13f}]")
        return lines


class StemReport(EntropyReport):
    command = "stem"

    @override
    def _estimate(self) -> EntropyEstimate:
        return stem_entropy(self.system, entropy_options(self.options))

    @override
    def _value_columns(self) -> List[str]:
        return [f"h_{name}" for name in self.system.generators]


class TopologicalReport(EntropyReport):
    """Root-ball entropy; the trace carries the stem envelope alongside it"""
    command = "top"
    envelope_label = "stem_envelope"

    @override
    def _estimate(self) -> EntropyEstimate:
        return topological_entropy_cayley(self.system, entropy_options(self.options))


class FullTreeReport(EntropyReport):
    """Full d-ary tree with the configured matrices; K is ignored"""
    command = "fulltree"

    @override
    def _estimate(self) -> EntropyEstimate:
        logger.info(f"Ignoring K for fulltree; using d={self.system.k} matrices on the full tree")
        return fulltree_entropy(self.system.transitions, entropy_options(self.options))


class AnalyzeReport(TreeShiftClient):
    command = "analyze"

    @override
    def execute(self) -> Dict[str, Any]:
        relation = self.relation
        geometry = relation.geometry
        depth = self.options.depth
        structure: Dict[str, Any] = {
            "k": relation.k,
            "primitive": relation.primitive,
            "primitive_exponent": relation.primitive_exponent,
            "irreducible": relation.irreducible,
            "period": relation.period,
            "ball_sizes": [geometry.ball_size(n) for n in range(depth + 1)],
        }
        if relation.irreducible:
            period, classes = relation.cyclic_structure
            structure["cyclic_classes"] = [sorted(c) for c in classes]
            structure["spectral_radius"] = spectral_radius(relation)
            sizes = [geometry.semiball_size(0, n) for n in (depth, depth + 1)]
            structure["growth_ratio"] = sizes[1] / sizes[0]

        graph = build_graph_representation(self.system)
        strongly_connected = is_strongly_connected(graph)
        pivot = find_pivot(graph)
        graph_report: Dict[str, Any] = {
            "vertices": len(graph.vertices),
            "edges": len(graph.edges),
            "strongly_connected": strongly_connected,
            "components": [
                [[self.system.symbols[a], self.system.generators[i]] for a, i in component]
                for component in strongly_connected_components(graph)
            ],
            "pivot": None,
        }
        if pivot is not None:
            a, i = pivot.vertex
            graph_report["pivot"] = {
                "vertex": [self.system.symbols[a], self.system.generators[i]],
                "target_generator": self.system.generators[pivot.target_generator],
                "walk_length": pivot.walk_length,
            }

        classification = self.system.classification
        return {
            "relation": structure,
            "classification": {
                "is_hom": classification.is_hom,
                "full_row_index": classification.full_row_index,
                "constant_row_sum": classification.constant_row_sum,
                "free_group_shape": classification.free_group_shape,
                "transpose_paired": classification.transpose_paired,
                "alphabet_small_enough": classification.alphabet_small_enough,
                "essential": classification.essential,
            },
            "graph": graph_report,
            "certificates": [c.as_dict() for c in existence_certificate(self.system)],
        }


class OracleReport(TreeShiftClient):
    """Exact recursion against brute-force enumeration up to options.depth"""
    command = "oracle"

    def _mismatches(self, exact: ExactCountTable, brute: ExactCountTable) -> List[str]:
        differences = []
        for label, left, right in (
            ("stem", exact.stem_counts, brute.stem_counts),
            ("ball", exact.ball_counts, brute.ball_counts),
            ("branch", exact.branch_counts, brute.branch_counts),
        ):
            for m, (expected, found) in enumerate(zip(left, right)):
                if expected != found:
                    differences.append(f"{label} m={m}: exact {expected} != brute force {found}")
        return differences

    @override
    def execute(self) -> Dict[str, Any]:
        depth = self.options.depth
        exact = exact_ball_counts(self.system, depth, self.options.depth_cap)
        brute = brute_force_counts(self.system, depth, self.options.oracle_bits, self.options.depth_cap)
        mismatches = self._mismatches(exact, brute)
        for line in mismatches:
            logger.warning(f"Oracle mismatch: {line}")
        if mismatches:
            self.exit_code = EXIT_ORACLE_MISMATCH
        names = self.system.generators
        return {
            "depth": depth,
            "status": "FAIL" if mismatches else "PASS",
            "mismatches": mismatches,
            "stem_counts": [
                {name: list(counts) for name, counts in zip(names, layer)} for layer in exact.stem_counts
            ],
            "ball_counts": [list(layer) for layer in exact.ball_counts],
        }

    @override
    def text_lines(self) -> List[str]:
        lines = [f"=== Oracle check of {self.config_file} to depth {self.report['depth']}: {self.report['status']} ==="]
        for m, layer in enumerate(self.report["stem_counts"]):
            stems = "  ".join(f"{name}: {tuple(counts)}" for name, counts in layer.items())
            lines.append(f"n={m}  {stems}  ball: {tuple(self.report['ball_counts'][m])}")
        lines.extend(self.report["mismatches"])
        return lines


class CertifyReport(TreeShiftClient):
    command = "certify"

    @override
    def execute(self) -> Dict[str, Any]:
        certificates = existence_certificate(self.system)
        if not certificates:
            logger.warning("No sufficient condition applies; this does not mean the entropy fails to exist")
            self.exit_code = EXIT_NO_CERTIFICATE
        return {"certificates": [c.as_dict() for c in certificates]}

    @override
    def text_lines(self) -> List[str]:
        lines = [f"=== Certificates for {self.config_file} ({len(self.report['certificates'])}) ==="]
        for certificate in self.report["certificates"]:
            lines.append(f"{certificate['kind']}: {certificate['evidence']}")
        return lines


COMMANDS = {
    report.command: report
    for report in (AnalyzeReport, StemReport, TopologicalReport, FullTreeReport, OracleReport, CertifyReport)
}
