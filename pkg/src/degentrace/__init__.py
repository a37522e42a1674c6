"""Numerical checks of the trace formula at a degenerate maximum of the potential.

Modules: geometry (potentials, admissibility, angular factor), dynamics (flow,
jets, generating function), mellin (pole bookkeeping, closed-form integrals,
residues), oscillatory (model integrals and their expansions), spectral
(eigenvalues and the smoothed trace) and cli (configured runs).
"""

__version__ = "0.1.0"
