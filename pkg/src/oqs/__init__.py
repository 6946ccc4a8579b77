"""Discrete eigenstates (resonant, anti-resonant, bound, anti-bound) of
one-dimensional open quantum systems, their completeness relation, and the
survival dynamics they generate."""

from .continuum import (
    ContinuumModel,
    SearchBox,
    conserved_probability,
    ep_trajectory,
    exceptional_point,
    perfect_transmission_points,
    poles_general,
    poles_symmetric,
    t11_closed,
    transfer_matrix,
    transmission,
)
from .dynamics import (
    SurvivalSeries,
    TailFit,
    long_time_tail,
    memory_kernel,
    oracle_survival,
    short_time_expansion,
    survival_bessel,
    survival_k_integral,
    survival_series,
    t_zero_estimate,
    zeno_product,
)
from .errors import InputError, NumericalError, OqsError
from .feshbach import (
    Branch,
    Lead,
    OpenLattice,
    dimer_lattice,
    discretize_continuum,
    effective_hamiltonian,
    lead_green_closed,
    lead_green_truncated,
    self_energy,
)
from .lattice import DimerModel, dimer_poles, lattice_transmission, pole_sweep
from .numerics import Tolerance
from .qep import QepSpectrum, completeness_check, qep_solve, resolvent_expansion
from .states import Kind, Parity, Pole

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
