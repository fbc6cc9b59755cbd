"""Sampling and reconstruction in shift-invariant spaces with several
vector generators, lattice sampling and linear time-invariant filters."""

from .errors import (
    BoxTooSmall,
    DegenerateGenerators,
    DomainMismatch,
    MissingProvenance,
    NotLeftInvertible,
    OutOfReliableRegion,
    ParseError,
    SamplingError,
    ShapeMismatch,
    SingularMatrix,
    TruncationLoss,
    TruncationLossWarning,
    UnsupportedRegime,
    ValidationError,
)
from .lattice import SamplingLattice, build_cells, coset_representatives
from .gridfn import Grid, GridFunction, PatchFunction
from .sispace import CoefficientArray, GeneratorSet, SpaceElement, synthesis_operator_T, synthesize
from .filters import FilterBank, KernelFilter, PointEvaluation, box_kernel, build_symbols
from .modulation import build_modulation_field, classify, completeness_test, spectral_bounds
from .reconstruction import build_kernels, dual_rows, pseudo_inverse_field, reconstruct, take_samples
from .scenario import load_golden, load_scenario

__version__ = "0.1.0"
