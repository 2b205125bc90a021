import numpy as np
import pytest
from scipy.linalg import expm

from cmlax.errors import CollisionError, StepError
from cmlax.flows import (
    FlowSpec,
    eigenvalue_projection,
    exact_flow,
    exact_flow_rational,
    exact_flow_trig,
    ode_flow,
    spin_hierarchy_flow,
)
from cmlax.ham import HamiltonianSpec
from cmlax.lax import default_grid
from cmlax.phase import ParticleState, QuiverDatum, check_constraint, constraint_residual
from cmlax.sampling import random_on_shell, random_particle_state
from cmlax.specfun import Lattice

GRID = default_grid("rational")


def example_n2():
    return QuiverDatum("rational", np.diag([0.0, 1.0]), [[0, -1], [1, 0]], [[1], [-1]], [[1, -1]])


def closed_form_positions(t):
    root = np.sqrt(complex(1 - 4 * t * t))
    vals = np.array([(1 - root) / 2, (1 + root) / 2])
    return vals[np.lexsort((vals.imag, vals.real))]


def test_exact_flow_at_zero_is_identity(rng):
    for variant in ("rational", "trigonometric"):
        d = random_on_shell(rng, variant, 3, 2)
        e = exact_flow(d, 2, 0.0)
        for name in "XYuv":
            assert np.array_equal(getattr(e, name), getattr(d, name))


def test_rational_exact_flow_keeps_moment_map(rng):
    d = random_on_shell(rng, "rational", 3, 2)
    for i in (1, 2, 3):
        assert abs(constraint_residual(exact_flow_rational(d, i, 0.7)) - constraint_residual(d)) < 1e-12


def test_projection_follows_closed_form_through_collision():
    times = np.linspace(0, 1, 41)
    proj = eigenvalue_projection(example_n2(), 1, times)
    for t, row in zip(times, proj):
        assert np.max(np.abs(row - closed_form_positions(t))) < 1e-8


def test_trig_exact_flow_nilpotent_oracle():
    Y = np.array([[0.0, 1.3], [0.0, 0.0]])
    X = np.array([[1.0, 0.2], [0.1, 2.0]])
    d = QuiverDatum("trigonometric", X, Y, np.ones((2, 1)), np.ones((1, 2)))
    t = 0.8
    E = np.eye(2) + t * Y
    e = exact_flow_trig(d, 1, t)
    assert np.allclose(e.X, X @ E, atol=1e-14)
    assert np.allclose(e.v, d.v @ E, atol=1e-14)
    assert np.allclose(e.u, (np.eye(2) - t * Y) @ d.u, atol=1e-14)


def test_trig_exact_flow_preserves_constraint(rng):
    d = random_on_shell(rng, "trigonometric", 3, 2)
    for i in (1, 2, 3):
        for t in np.linspace(0, 1, 6):
            assert check_constraint(exact_flow_trig(d, i, t), 1e-10)[0]


@pytest.mark.parametrize("variant", ["rational", "trigonometric"])
def test_exact_flows_commute(rng, variant):
    d = random_on_shell(rng, variant, 3, 2)
    a = exact_flow(exact_flow(d, 1, 0.4), 3, 0.3)
    b = exact_flow(exact_flow(d, 3, 0.3), 1, 0.4)
    for name in "XYuv":
        assert np.max(np.abs(getattr(a, name) - getattr(b, name))) < 1e-10


def test_rk4_trace_flow_matches_exact_rational(rng):
    d = random_on_shell(rng, "rational", 3, 2)
    traj = ode_flow(d, FlowSpec(HamiltonianSpec.trace(2)))
    for t, st in zip(traj.times, traj.states):
        ref = exact_flow_rational(d, 1, t)
        assert np.max(np.abs(st.X - ref.X)) < 1e-8
        assert np.max(np.abs(st.Y - ref.Y)) < 1e-12


def test_rk4_trace_flow_matches_exact_trig_up_to_gauge(rng):
    d = random_on_shell(rng, "trigonometric", 3, 2)
    traj = ode_flow(d, FlowSpec(HamiltonianSpec.trace(3), t_final=0.5))
    for t, st in zip(traj.times, traj.states):
        ref = exact_flow_trig(d, 2, t)
        # canonical-chart flow is E X with u, v fixed; the exact form is X E: they differ by E
        E = expm(t * np.linalg.matrix_power(d.Y, 2))
        Einv = np.linalg.inv(E)
        assert np.max(np.abs(Einv @ st.X @ E - ref.X)) < 1e-8
        assert np.max(np.abs(Einv @ st.Y @ E - ref.Y)) < 1e-8
        assert check_constraint(st, 1e-10)[0]


def test_exact_method_runs_through_collision():
    traj = ode_flow(example_n2(), FlowSpec(HamiltonianSpec.trace(2), method="exact", record_every=50),
                    [HamiltonianSpec.trace(j) for j in (1, 2, 3, 4)], GRID)
    assert traj.times[-1] == 1.0
    assert max(traj.invariant_drift().values()) == 0.0
    assert traj.spectral_drift() < 1e-12


def test_exact_method_needs_trace():
    with pytest.raises(ValueError):
        ode_flow(example_n2(), FlowSpec(HamiltonianSpec.residue_at_b(2), method="exact"))


def test_free_elliptic_particles_coast():
    lat = Lattice(1j)
    s = ParticleState("elliptic", [0.1 + 0.1j, 0.6 + 0.4j], [0, 0], [[1, 0], [0, 1]], [[1, 0], [0, 1]], lat)
    traj = ode_flow(s, FlowSpec(HamiltonianSpec.particle_h2(), t_final=0.1))
    end = traj.states[-1]
    assert np.array_equal(end.q, s.q) and np.array_equal(end.p, s.p)


def test_elliptic_two_body_energy_conserved():
    s = random_particle_state(np.random.default_rng(0), "elliptic", 2, 1, Lattice(1j))
    traj = ode_flow(s, FlowSpec(HamiltonianSpec.particle_h2()), [HamiltonianSpec.particle_h2()])
    assert traj.invariant_drift()["H2_particle"] < 1e-8


def test_elliptic_energy_error_is_fourth_order():
    s = random_particle_state(np.random.default_rng(1), "elliptic", 2, 1, Lattice(1j))
    h = [HamiltonianSpec.particle_h2()]
    coarse = ode_flow(s, FlowSpec(h[0], dt=2e-3, record_every=50), h).invariant_drift()["H2_particle"]
    fine = ode_flow(s, FlowSpec(h[0], dt=1e-3, record_every=100), h).invariant_drift()["H2_particle"]
    assert coarse / fine > 10


def test_particle_collision_raises():
    s = ParticleState("rational", [0.5, 0.5], [0, 0], [[1.0], [1.0]], [[1.0], [1.0]])
    with pytest.raises(CollisionError):
        ode_flow(s, FlowSpec(HamiltonianSpec.particle_h2()))


def test_drift_beyond_tolerance_raises():
    s = random_particle_state(np.random.default_rng(1), "rational", 3, 2)
    with pytest.raises(StepError):
        ode_flow(s, FlowSpec(HamiltonianSpec.particle_h2(), t_final=0.2, drift_tolerance=1e-30),
                 [HamiltonianSpec.particle_h2()])


def test_spin_flow_of_constant_hamiltonian_is_stationary():
    d = QuiverDatum("rational", [[0.3]], [[0.0]], [[1.0]], [[1.0]])
    traj = spin_hierarchy_flow(d, 2, FlowSpec(HamiltonianSpec.trace(2), t_final=0.01, dt=1e-3))
    assert np.allclose(traj.states[-1].X, d.X, atol=1e-12)


def test_rk4_runs_are_reproducible(rng):
    s = random_particle_state(rng, "trigonometric", 3, 2)
    spec = FlowSpec(HamiltonianSpec.particle_h2(), t_final=0.2)
    a, b = ode_flow(s, spec), ode_flow(s, spec)
    assert all(np.array_equal(x.q, y.q) and np.array_equal(x.b, y.b) for x, y in zip(a.states, b.states))


def test_flow_spec_validation():
    h = HamiltonianSpec.trace(2)
    with pytest.raises(ValueError):
        FlowSpec(h, dt=0)
    with pytest.raises(ValueError):
        FlowSpec(h, method="euler")
    with pytest.raises(ValueError):
        FlowSpec(h, record_every=0)
