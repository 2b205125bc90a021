"""Spin Calogero-Moser systems: quiver and particle charts, Lax matrices, flows."""

from .errors import (
    CMLaxError,
    CollisionError,
    ConfigError,
    ConstraintError,
    PoleError,
    QuadratureError,
    SingularMatrixError,
    StepError,
)
from .flows import (
    FlowSpec,
    Trajectory,
    eigenvalue_projection,
    exact_flow,
    exact_flow_rational,
    exact_flow_trig,
    ode_flow,
    spin_hierarchy_flow,
)
from .ham import (
    HamiltonianSpec,
    Kind,
    evaluate,
    framed_hamiltonian,
    particle_h2,
    poisson_bracket,
    residue_trace_power,
    spin_hamiltonian,
    trace_hamiltonian,
)
from .lax import (
    LaxSample,
    SpectralRecord,
    char_poly_coeffs,
    elliptic_higgs,
    higgs,
    particle_higgs,
    rational_higgs,
    spectral_record,
    trig_higgs,
    twist_shift,
)
from .phase import (
    GaugeElement,
    ParticleState,
    QuiverDatum,
    check_constraint,
    from_particles,
    gauge_transform,
    moment_map,
    to_particles,
)
from .specfun import Lattice, Variant, lax_kernel, potential, sigma_w, weierstrass_zeta, wp, wp_prime, zeta_w

__version__ = "0.1.0"
