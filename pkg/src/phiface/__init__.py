"""Two coupled 1-D conservation-law panels with a (moving) interface.

Structure-preserving discretization, growth-bound certificates with
spectral verification, energy-balance audits, and the divergence sweep
showing the certificate's assumptions are necessary.
"""

__version__ = "0.1.0"

from .model import (
    CoefficientProfile,
    DomainSpec,
    InterfacePath,
    MaterialPair,
    P1,
    color,
    coercivity_bounds,
    eval_material,
    eval_Q_l,
)
from .discretization import (
    PanelGrid,
    SbpOperator,
    StateVector,
    adjoint_residual,
    apply_dl,
    apply_dl_star,
    apply_J,
    build_grid,
    skew_residual,
    weighted_inner,
)
from .ports import (
    BoundarySpec,
    PortVariables,
    boundary_ports,
    check_A1,
    check_A2,
    constraint_projector,
    interface_ports,
    power_balance_terms,
)
from .stability import (
    StabilityCertificate,
    assemble_generator,
    kato_product_check,
    norm_equivalence_check,
    omega_bound,
    omega_one,
    omega_two,
    qtilde,
    rayleigh_check,
    resolvent_norm,
    semigroup_norm_check,
)
from .simulate import SimulationConfig, TimeSeries, energy_audit, regrid, run, step
from .counterexample import (
    CounterexampleSpec,
    build_materials,
    build_xk,
    divergence_sweep,
    quadratic_form,
)
