"""Truth-value assignment on quantization-induced sheaves over finite context posets."""

from ._kernels import BACKEND
from .contexts import ContextPoset, build_poset, check_poset_axioms
from .errors import (ClosureViolation, InvalidInput, NonCommutingSet, NotCommutative,
                     NotDense, NotFilter, NotSheaf, QSheafError, SizeLimit)
from .presheaves import (NatTransform, Presheaf, Sieve, Subpresheaf, TruthValue,
                         build_omega, build_omega_j, closure, count_global_elements,
                         global_elements, is_sheaf, sheafify, truth_values, truth_values_j)
from .spectral import (PRESHEAF, SHEAF, Prop, build_outer, build_sigma, daseinize,
                       daseinize_j, proposition_of, propositions)
from .translate import verify_theorem
from .truth import TruthObject, nu, truth_rho_r, truth_vector

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "ContextPoset", "build_poset", "check_poset_axioms",
    "ClosureViolation", "InvalidInput", "NonCommutingSet", "NotCommutative", "NotDense",
    "NotFilter", "NotSheaf", "QSheafError", "SizeLimit",
    "NatTransform", "Presheaf", "Sieve", "Subpresheaf", "TruthValue", "build_omega",
    "build_omega_j", "closure", "count_global_elements", "global_elements", "is_sheaf",
    "sheafify", "truth_values", "truth_values_j",
    "PRESHEAF", "SHEAF", "Prop", "build_outer", "build_sigma", "daseinize", "daseinize_j",
    "proposition_of", "propositions", "verify_theorem",
    "TruthObject", "nu", "truth_rho_r", "truth_vector",
]
