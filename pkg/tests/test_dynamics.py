import math

import numpy as np
import pytest

from kuragraph import dynamics as dyn
from kuragraph import frequency as fq
from kuragraph import graphon as gr
from kuragraph.errors import InvalidArgument, NumericalFailure
from kuragraph.io import read_phase_sidecar, write_phase_sidecar

TWO_PI = 2 * math.pi


def circ(a, b):
    d = np.mod(np.asarray(a) - np.asarray(b), TWO_PI)
    return np.minimum(d, TWO_PI - d)


def test_incoherent_sample_is_flat():
    n = 10_000
    grid = gr.make_grid(n)
    st = dyn.sample_initial(n, dyn.InitialCondition.incoherent(), np.zeros(n), grid, 1)
    assert dyn.order_parameter(st.phases)[0] <= 4 / math.sqrt(n)
    assert np.all((st.phases >= 0) & (st.phases < TWO_PI))


def test_point_mass_and_determinism():
    grid = gr.make_grid(50)
    st = dyn.sample_initial(50, dyn.InitialCondition.wrapped_gaussian(math.inf, 1.0), np.zeros(50), grid, 0)
    assert dyn.order_parameter(st.phases)[0] == pytest.approx(1.0)
    ic = dyn.InitialCondition.wrapped_gaussian(2.0)
    a = dyn.sample_initial(50, ic, np.zeros(50), grid, 9).phases
    b = dyn.sample_initial(50, ic, np.zeros(50), grid, 9).phases
    assert np.array_equal(a, b)


def test_custom_density_sampling():
    ic = dyn.InitialCondition.custom(lambda th, om, x: (1 + np.cos(th)) / TWO_PI + 0 * om + 0 * x)
    n = 20_000
    st = dyn.sample_initial(n, ic, np.zeros(n), gr.make_grid(n), 4)
    # E cos(theta) = 1/2 for this density
    assert np.mean(np.cos(st.phases)) == pytest.approx(0.5, abs=0.02)


def test_custom_density_must_be_normalised():
    ic = dyn.InitialCondition.custom(lambda th, om, x: 2 / TWO_PI + 0 * th * om * x)
    with pytest.raises(InvalidArgument):
        dyn.sample_initial(5, ic, np.zeros(5), gr.make_grid(5), 0)


def test_rhs_examples():
    w = np.array([[0.0, 1.0], [1.0, 0.0]])
    for method in ("matvec", "pairwise"):
        out = dyn.rhs(np.array([0.0, math.pi / 2]), np.zeros(2), w, 1.0, method)
        assert out == pytest.approx([0.5, -0.5], abs=1e-15)
    om = np.array([0.3, -1.0, 2.0])
    assert np.array_equal(dyn.rhs(np.full(3, 1.1), om, np.ones((3, 3)), 4.0, "pairwise"), om)
    assert np.array_equal(dyn.rhs(np.array([0.1, 2.0, 4.0]), om, np.ones((3, 3)), 0.0), om)
    with pytest.raises(InvalidArgument):
        dyn.rhs(np.zeros(3), np.zeros(3), np.ones((2, 2)), 1.0)


def test_rhs_methods_agree_batched():
    rng = np.random.default_rng(0)
    n = 300
    w = gr.build_weighted_graph(gr.small_world(0.1, 0.25), gr.make_grid(n))
    th = rng.uniform(0, TWO_PI, (n, 4))
    om = rng.normal(size=(n, 4))
    K = np.array([0.5, 1.0, 2.0, -3.0])
    a = dyn.rhs(th, om, w, K)
    b = dyn.rhs(th, om, w, K, "pairwise")
    assert np.max(np.abs(a - b)) < 1e-12
    for j in range(4):
        assert np.max(np.abs(a[:, j] - dyn.rhs(th[:, j], om[:, j], w, K[j]))) < 1e-12


def test_uniform_fast_path_matches_dense():
    rng = np.random.default_rng(1)
    n = 400
    th, om = rng.uniform(0, TWO_PI, n), rng.standard_cauchy(n) * 0.5
    cfg = dyn.SimConfig(K=2.0, dt=0.05, T=5.0)
    a = dyn.integrate(dyn.OscillatorState(th), om, np.ones((n, n)), cfg)
    b = dyn.integrate(dyn.OscillatorState(th), om, dyn.UniformCoupling(n), cfg)
    assert np.max(circ(a.final.phases, b.final.phases)) < 1e-10
    assert np.max(np.abs(a.r - b.r)) < 1e-12


def test_complete_graph_matches_order_parameter_form():
    # classical form: omega_i + K r sin(psi - theta_i)
    rng = np.random.default_rng(2)
    n = 200
    th, om = rng.uniform(0, TWO_PI, n), rng.normal(size=n)
    K, dt = 1.5, 0.01

    def f(t):
        z = np.mean(np.exp(1j * t))
        return om + K * abs(z) * np.sin(np.angle(z) - t)

    y = th.copy()
    for _ in range(500):
        k1 = f(y)
        k2 = f(y + 0.5 * dt * k1)
        k3 = f(y + 0.5 * dt * k2)
        k4 = f(y + dt * k3)
        y = np.mod(y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4), TWO_PI)
    traj = dyn.integrate(dyn.OscillatorState(th), om, np.ones((n, n)), dyn.SimConfig(K=K, dt=dt, T=5.0))
    assert np.max(circ(traj.final.phases, y)) < 1e-10


def test_free_rotation_exact():
    rng = np.random.default_rng(3)
    th, om = rng.uniform(0, TWO_PI, 20), rng.normal(size=20) * 3
    traj = dyn.integrate(dyn.OscillatorState(th), om, np.ones((20, 20)), dyn.SimConfig(K=0.0, dt=0.01, T=7.0))
    assert np.max(circ(traj.final.phases, th + om * 7.0)) < 1e-10
    assert traj.times[-1] == pytest.approx(7.0)


def test_two_oscillator_locking():
    w = 0.1
    cfg = dyn.SimConfig(K=1.0, dt=0.01, T=100.0, record_stride=100)
    traj = dyn.integrate(dyn.OscillatorState([0.0, 0.5]), np.array([-w, w]), np.ones((2, 2)), cfg)
    d = traj.final.phases[1] - traj.final.phases[0]
    assert abs(math.sin(d) - 2 * w / 1.0) <= 1e-6


def test_rk4_order():
    rng = np.random.default_rng(4)
    n = 6
    th, om = rng.uniform(0, TWO_PI, n), rng.normal(size=n) * 0.3
    w = np.ones((n, n))

    def run(dt):
        cfg = dyn.SimConfig(K=0.8, dt=dt, T=4.0)
        return dyn.integrate(dyn.OscillatorState(th), om, w, cfg, wrap=False).final.phases

    ref = run(0.001)
    e1 = np.max(np.abs(run(0.02) - ref))
    e2 = np.max(np.abs(run(0.01) - ref))
    assert e1 / e2 >= 12


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_integrate_detects_nonfinite():
    with pytest.raises(NumericalFailure):
        dyn.integrate(dyn.OscillatorState([0.0, 1.0]), np.array([np.inf, 0.0]), np.ones((2, 2)),
                      dyn.SimConfig(K=1.0, dt=0.01, T=0.1))


def test_simconfig_guards():
    with pytest.raises(InvalidArgument):
        dyn.SimConfig(K=1.0, dt=0.2)
    with pytest.raises(InvalidArgument):
        dyn.SimConfig(K=1.0, T=0.0)


def test_order_parameter_examples():
    r, psi = dyn.order_parameter(np.full(5, 1.3))
    assert r == pytest.approx(1.0) and psi == pytest.approx(1.3)
    assert dyn.order_parameter(np.array([0.0, math.pi]))[0] < 1e-15
    r, psi = dyn.order_parameter(TWO_PI * np.arange(8) / 8)
    assert r <= 1e-14 and psi == 0.0


def test_phase_distance_examples():
    a = np.array([0.3, 1.0, 2.0])
    assert dyn.phase_distance(a, a) == 0.0
    assert dyn.phase_distance(a + 0.7, a) == pytest.approx(0.7)
    assert dyn.phase_distance(np.array([0.3, -0.4]), np.zeros(2)) == pytest.approx(0.35355, abs=1e-5)
    with pytest.raises(InvalidArgument):
        dyn.phase_distance(np.zeros(2), np.zeros(3))


def test_translation_equivariance():
    rng = np.random.default_rng(5)
    n = 100
    th, om = rng.uniform(0, TWO_PI, n), rng.normal(size=n)
    w = gr.build_weighted_graph(gr.small_world(0.1, 0.25), gr.make_grid(n))
    cfg = dyn.SimConfig(K=3.0, dt=0.02, T=5.0)
    a = dyn.integrate(dyn.OscillatorState(th), om, w, cfg, wrap=False)
    c = 0.9
    shifted = dyn.integrate(dyn.OscillatorState(np.mod(th + c, TWO_PI)), om, w, cfg)
    assert np.max(circ(shifted.final.phases, a.final.phases + c)) < 1e-10
    assert np.max(np.abs(shifted.r - a.r)) < 1e-10


def test_permutation_equivariance():
    rng = np.random.default_rng(6)
    n = 80
    th, om = rng.uniform(0, TWO_PI, n), rng.normal(size=n)
    w = gr.sample_random_graph(gr.small_world(0.2, 0.2), gr.make_grid(n), 3)
    perm = rng.permutation(n)
    cfg = dyn.SimConfig(K=2.0, dt=0.02, T=4.0)
    a = dyn.integrate(dyn.OscillatorState(th), om, w, cfg)
    b = dyn.integrate(dyn.OscillatorState(th[perm]), om[perm], w[np.ix_(perm, perm)], cfg)
    assert np.max(circ(a.final.phases[perm], b.final.phases)) < 1e-10


def test_identical_couplings_compare_to_zero():
    n = 60
    grid = gr.make_grid(n)
    om = fq.sample(fq.gaussian(1.0), n, 1)
    cmp = dyn.compare_couplings(gr.small_world(0.1, 0.25), gr.small_world(0.1, 0.25), grid, om,
                                dyn.InitialCondition.incoherent(), dyn.SimConfig(K=1.0, dt=0.05, T=5.0))
    assert cmp.sup_distance < 1e-12 and cmp.coupling_gap == 0.0


def test_compare_couplings_linear_in_perturbation():
    n = 200
    grid = gr.make_grid(n)
    base = gr.build_weighted_graph(gr.small_world(0.1, 0.25), grid)
    rng = np.random.default_rng(8)
    pert = rng.uniform(-1, 1, (n, n))
    pert = 0.5 * (pert + pert.T)
    pert /= gr.norm_2n(pert)
    om = fq.sample(fq.gaussian(1.0), n, 2)
    cfg = dyn.SimConfig(K=1.0, dt=0.05, T=10.0, seed=3)
    ratios = []
    for eta in (0.01, 0.02, 0.04):
        cmp = dyn.compare_couplings(base, base + eta * pert, grid, om, dyn.InitialCondition.incoherent(), cfg)
        assert cmp.coupling_gap == pytest.approx(eta)
        ratios.append(cmp.ratio)
    assert max(ratios) / min(ratios) < 1.1


def test_compare_rejects_mismatch():
    with pytest.raises(InvalidArgument):
        dyn.compare_couplings(np.ones((3, 3)), np.ones((4, 4)), gr.make_grid(3), np.zeros(3),
                              dyn.InitialCondition.incoherent(), dyn.SimConfig(K=1.0))


def test_subcritical_incoherence_classical():
    n = 2000
    om = fq.sample(fq.cauchy(0.5), n, 11)
    st = dyn.sample_initial(n, dyn.InitialCondition.incoherent(), om, gr.make_grid(n), 12)
    cfg = dyn.SimConfig(K=0.5, dt=0.05, T=200.0, record_stride=4)
    traj = dyn.integrate(st, om, dyn.UniformCoupling(n), cfg)
    late = traj.times >= 100
    assert traj.r[late].mean() <= 3 / math.sqrt(n)


def test_identical_frequencies_synchronise():
    n = 200
    w = gr.build_weighted_graph(gr.small_world(0.1, 0.25), gr.make_grid(n))
    st = dyn.sample_initial(n, dyn.InitialCondition.wrapped_gaussian(1.0), np.zeros(n), gr.make_grid(n), 1)
    traj = dyn.integrate(st, np.zeros(n), w, dyn.SimConfig(K=4.0, dt=0.05, T=60.0, record_stride=20))
    late = traj.r[len(traj.r) // 2:]
    assert np.all(np.diff(late) >= -1e-9)
    assert late[-1] > 0.99


def test_phase_sidecar_roundtrip(tmp_path):
    snaps = np.random.default_rng(0).uniform(0, TWO_PI, (5, 7))
    path = write_phase_sidecar(tmp_path / "p.bin", snaps)
    raw = path.read_bytes()
    assert int.from_bytes(raw[:8], "little") == 5 and len(raw) == 8 + 5 * 7 * 8
    assert np.array_equal(read_phase_sidecar(path, 7), snaps)


def test_steady_state_window():
    t = np.linspace(0, 10, 101)
    r = np.where(t >= 8, 1.0, 0.0)
    assert dyn.steady_state_r(t, r) == 1.0
