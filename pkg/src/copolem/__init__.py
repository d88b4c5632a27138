"""Free-energy and phase-diagram engine for a directed copolymer in an
emulsion of A- and B-blocks.

The heavy dynamic programs live in a compiled extension with a pure NumPy
fallback; see copolem.kernels.backend_name() for which one is active.
"""

from .model import (
    LABEL_A,
    LABEL_B,
    RIGHT,
    UP,
    DOWN,
    CopolymerSequence,
    DirectedPath,
    EmulsionField,
    InteractionParams,
    SymmetryTransform,
    cone_reduce,
    edge_block,
    hamiltonian,
    sample_copolymer,
    sample_emulsion,
)

__version__ = "0.1.0"

__all__ = [
    "LABEL_A",
    "LABEL_B",
    "RIGHT",
    "UP",
    "DOWN",
    "CopolymerSequence",
    "DirectedPath",
    "EmulsionField",
    "InteractionParams",
    "SymmetryTransform",
    "cone_reduce",
    "edge_block",
    "hamiltonian",
    "sample_copolymer",
    "sample_emulsion",
    "__version__",
]
