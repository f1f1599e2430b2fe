"""Exact two-body Coulomb matrix elements in the 3D Cartesian oscillator basis."""
from .closed_form import ElementValue, ExactValue, OscillatorScale, element_batch, element_direct
from .core import ElementKey, QuantumTriple, canonical_key, selection_rule
from .oracle import QuadratureSpec, element_quadrature
from .recurrence import build_family
from .tensor_store import BasisCutoff, build_tensor, export, import_store

__all__ = [
    "BasisCutoff",
    "ElementKey",
    "ElementValue",
    "ExactValue",
    "OscillatorScale",
    "QuadratureSpec",
    "QuantumTriple",
    "build_family",
    "build_tensor",
    "canonical_key",
    "element_batch",
    "element_direct",
    "element_quadrature",
    "export",
    "import_store",
    "selection_rule",
]
