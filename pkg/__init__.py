"""
Tree-Shift Entropy Package

This package computes stem and topological entropy of Markov tree shifts on
Cayley trees of finitely generated monoids, with exact pattern counts, a
brute-force oracle and existence certificates.
"""

from ts_geometry import RelationMatrix, validate_relation
from ts_shift import MarkovSystem, validate_system
from ts_entropy import EntropyOptions, fulltree_entropy, stem_entropy, topological_entropy_cayley
from ts_mixing import existence_certificate
from ts_client import TreeShiftClient

__all__ = ['RelationMatrix', 'validate_relation', 'MarkovSystem', 'validate_system', 'EntropyOptions',
           'stem_entropy', 'topological_entropy_cayley', 'fulltree_entropy', 'existence_certificate',
           'TreeShiftClient']
