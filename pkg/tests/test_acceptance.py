"""End-to-end acceptance suite.

Each test exercises one headline behavior of the library at a stated
numerical tolerance and asserts a wall-clock budget, so ``pytest -v``
emits exactly one pass/fail line per criterion.  Randomized tests pin
their seeds; nothing here depends on execution order.
"""

import time

import numpy as np

from conftest import (
    generic_probe_point,
    random_connected_laplacian,
    random_first_order_tf,
    random_second_order_tf,
)
from coherelab import (
    CompleteFamily,
    Constant,
    FrequencyGrid,
    ImpulseAll,
    NetworkModel,
    RandomTFModel,
    RationalTF,
    SinusoidAll,
    StepNode,
    SwingParams,
    Uniform,
    aggregate_dynamics,
    aggregation_error,
    closed_loop,
    coherent_pole_direction,
    complete_graph,
    concentration_experiment,
    convergence_study,
    default_step,
    evaluate_point,
    failure_experiment,
    grounded_bound_check,
    harmonic_mean,
    k_regular_ring,
    normalized_incoherence,
    poles,
    sample_nodes,
    scale_connectivity,
    simulate,
    swing_aggregate,
    swing_turbine_aggregate,
    tf_approx_equal,
    tf_scale,
    transfer_matrix,
    transfer_matrix_direct,
    transfer_matrix_modal,
    zeros,
)

ONE = RationalTF([1.0], [1.0])
INTEGRATOR = RationalTF([1.0], [0.0, 1.0])


def test_01_harmonic_mean_splits_shared_double_pole():
    """Averaging two near-identical biquads moves one pole to the midpoint."""
    start = time.perf_counter()
    g1 = RationalTF([1.0, 1.0], [0.0, 0.0, 1.0])  # (s+1)/s^2
    g2 = RationalTF([1.1, 1.0], [0.0, 0.0, 1.0])  # (s+1.1)/s^2
    mean = harmonic_mean([g1, g2])
    ps = np.sort_complex(poles(mean))
    zs = np.sort_complex(zeros(mean))
    assert np.allclose(ps, [-1.05, 0.0, 0.0], atol=1e-8)
    assert np.allclose(zs, [-1.1, -1.0], atol=1e-8)
    assert time.perf_counter() - start < 1.0


def test_02_envelope_bound_never_undershoots_incoherence():
    """On 500 random strongly coupled networks the analytic envelope, whenever
    it applies, dominates the measured incoherence."""
    start = time.perf_counter()
    rng = np.random.default_rng(1002)
    applicable = 0
    for _ in range(500):
        n = int(rng.integers(3, 9))
        lap = scale_connectivity(
            random_connected_laplacian(rng, n), float(rng.uniform(5.0, 50.0))
        )
        gains = [random_first_order_tf(rng) for _ in range(n)]
        coupling = ONE if rng.uniform() < 0.5 else INTEGRATOR
        net = NetworkModel(lap, gains, coupling)
        report = evaluate_point(net, generic_probe_point(rng))
        if report.bound is not None:
            applicable += 1
            assert report.incoherence <= report.bound + 1e-9
    assert applicable >= 200  # the check must not pass vacuously
    assert time.perf_counter() - start < 30.0


def test_03_incoherence_decays_like_inverse_connectivity():
    """alpha * incoherence(alpha L) is nearly constant over a dyadic ladder."""
    start = time.perf_counter()
    rng = np.random.default_rng(1003)
    for _ in range(20):
        n = int(rng.integers(3, 9))
        net = NetworkModel(
            random_connected_laplacian(rng, n),
            [random_first_order_tf(rng) for _ in range(n)],
            ONE,
        )
        rows = convergence_study(net, generic_probe_point(rng), [64.0, 128.0, 256.0])
        assert all(row.kind == "incoherence" for row in rows)
        products = [row.alpha * row.value for row in rows]
        spread = (max(products) - min(products)) / (sum(products) / len(products))
        assert spread < 0.10
    assert time.perf_counter() - start < 30.0


def test_04_grounded_spectrum_keeps_its_connectivity_share():
    """Grounding m of n nodes never drops the smallest eigenvalue below the
    (m/n)-share of the ungrounded algebraic connectivity."""
    start = time.perf_counter()
    rng = np.random.default_rng(1004)
    for _ in range(200):
        n = int(rng.integers(2, 13))
        lap = random_connected_laplacian(rng, n)
        m = int(rng.integers(1, n))
        removed = [int(i) for i in rng.choice(n, size=m, replace=False)]
        _, _, holds = grounded_bound_check(lap, removed)
        assert holds
    assert time.perf_counter() - start < 10.0


def test_05_transfer_solvers_agree_entrywise():
    """Grounded solve, dense inversion, and (for identical nodes) the
    eigenvector decomposition give the same matrix to 1e-9."""
    start = time.perf_counter()
    rng = np.random.default_rng(1005)
    modal_cases = 0
    for case in range(100):
        n = int(rng.integers(2, 9))
        lap = random_connected_laplacian(rng, n)
        homogeneous = case % 10 < 3
        if homogeneous:
            g = random_first_order_tf(rng)
            gains = [g] * n
        else:
            gains = [
                random_first_order_tf(rng)
                if rng.uniform() < 0.7
                else random_second_order_tf(rng)
                for _ in range(n)
            ]
        coupling = ONE if rng.uniform() < 0.5 else INTEGRATOR
        net = NetworkModel(lap, gains, coupling)
        s = generic_probe_point(rng)
        t_solve = transfer_matrix(net, s)
        t_dense = transfer_matrix_direct(net, s)
        assert float(np.max(np.abs(t_solve - t_dense))) < 1e-9
        if homogeneous:
            modal_cases += 1
            t_modal = transfer_matrix_modal(net, s)
            assert float(np.max(np.abs(t_solve - t_modal))) < 1e-9
    assert modal_cases == 30
    assert time.perf_counter() - start < 20.0


def test_06_large_ring_of_random_integrators_reaches_consensus():
    """500 random-gain integrators on a 74-regular ring agree with the
    harmonic consensus value at t = 10."""
    start = time.perf_counter()
    model = RandomTFModel((Uniform(1.0, 5.0),), (Constant(0.0), Constant(1.0)), seed=42)
    gains = sample_nodes(model, 500)
    ks = np.array([float(g.num.coeffs[0]) for g in gains])
    consensus = 500.0 / float(np.sum(1.0 / ks))
    population_value = 4.0 / np.log(5.0)
    assert abs(consensus - population_value) / population_value < 0.05
    lap = k_regular_ring(500, 37)
    net = NetworkModel(lap, gains, ONE)
    traj = simulate(closed_loop(net), ImpulseAll(), 10.0)
    finals = traj.outputs[:, -1]
    assert float(np.max(np.abs(finals - consensus))) / abs(consensus) < 0.02
    assert time.perf_counter() - start < 120.0


def test_07_incoherence_concentrates_as_networks_grow():
    """Random gain-over-integrator populations on growing complete graphs:
    the exceedance fraction shrinks and the sampled mean approaches the
    population harmonic expectation."""
    start = time.perf_counter()
    model = RandomTFModel((Uniform(1.0, 5.0),), (Constant(0.0), Constant(1.0)), seed=2024)
    grid = FrequencyGrid.linear(0.5, 0.1, 2.0, 8)
    table = concentration_experiment(
        model, CompleteFamily(), [20, 50, 100], grid, trials=50, epsilon=0.1, seed=2024
    )
    exceed = [row.exceed_frac for row in table.rows]
    assert all(later <= earlier for earlier, later in zip(exceed, exceed[1:]))
    assert table.rows[-1].sup_gbar_dev < table.rows[0].sup_gbar_dev
    assert time.perf_counter() - start < 180.0


def test_08_swing_aggregation_closed_forms_match_generic_path():
    """Closed-form swing sums equal the generic harmonic aggregate; a shared
    turbine constant collapses the order to two with summed droop."""
    start = time.perf_counter()
    rng = np.random.default_rng(1008)
    for _ in range(50):
        count = int(rng.integers(2, 9))
        params = [
            SwingParams(m=float(rng.uniform(0.5, 3.0)), d=float(rng.uniform(0.5, 3.0)))
            for _ in range(count)
        ]
        closed = swing_aggregate(params)
        generic = aggregate_dynamics([p.transfer() for p in params])
        assert tf_approx_equal(closed.g_aggr, generic.g_aggr)
    for _ in range(10):
        count = int(rng.integers(2, 7))
        tau = float(rng.uniform(0.3, 1.5))
        params = [
            SwingParams(
                m=float(rng.uniform(0.5, 3.0)),
                d=float(rng.uniform(0.5, 3.0)),
                r_inv=float(rng.uniform(0.2, 2.0)),
                tau=tau,
            )
            for _ in range(count)
        ]
        pooled = swing_turbine_aggregate(params)
        assert pooled.order == 2
        effective = SwingParams(
            m=sum(p.m for p in params),
            d=sum(p.d for p in params),
            r_inv=sum(p.r_inv for p in params),
            tau=tau,
        ).transfer()
        assert tf_approx_equal(pooled.g_aggr, effective)
    count = 5
    distinct = [
        SwingParams(m=1.0 + i, d=1.0, r_inv=0.5, tau=0.3 + 0.2 * i) for i in range(count)
    ]
    assert swing_turbine_aggregate(distinct).order == count + 1
    assert time.perf_counter() - start < 5.0


def test_09_aggregate_tracking_degrades_with_frequency_improves_with_coupling():
    """Ten heterogeneous droop generators track their aggregate worse at a
    faster forcing frequency, and better once every line is 10x stronger."""
    start = time.perf_counter()
    rng = np.random.default_rng(7)
    params = [
        SwingParams(
            m=float(rng.uniform(1.0, 2.0)),
            d=float(rng.uniform(0.5, 1.5)),
            r_inv=float(rng.uniform(0.5, 1.5)),
            tau=0.5,
        )
        for _ in range(10)
    ]
    gains = tuple(p.transfer() for p in params)
    lap = complete_graph(10)
    net = NetworkModel(lap, gains, INTEGRATOR)
    error_slow = aggregation_error(net, SinusoidAll(0.1), 60.0)
    error_fast = aggregation_error(net, SinusoidAll(0.25), 60.0)
    assert error_fast > error_slow
    strong = NetworkModel(scale_connectivity(lap, 10.0), gains, INTEGRATOR)
    shared_dt = min(default_step(closed_loop(net)), default_step(closed_loop(strong)))
    error_step = aggregation_error(net, StepNode(0), 20.0, shared_dt)
    error_step_strong = aggregation_error(strong, StepNode(0), 20.0, shared_dt)
    assert error_step_strong < error_step
    assert time.perf_counter() - start < 60.0


def test_10_shared_zero_pins_incoherence_distinct_zero_releases_it():
    """Around a zero common to every node the sup incoherence refuses to
    flatten under stronger coupling, while a distinct-zero control
    collapses by more than 10x."""
    start = time.perf_counter()
    g1 = RationalTF([1.0, 1.0], [2.0, 1.0])
    alphas = [10.0, 100.0, 1000.0]
    shared = NetworkModel(complete_graph(2), (g1, tf_scale(g1, 1.3)), ONE)
    rows = failure_experiment(shared, -1.0, 0.25, alphas)
    assert rows[1].sup_value >= 0.5 * rows[0].sup_value
    assert rows[2].sup_value >= 0.5 * rows[0].sup_value
    control = NetworkModel(
        complete_graph(2),
        (g1, tf_scale(RationalTF([3.0, 1.0], [2.0, 1.0]), 1.3)),
        ONE,
    )
    control_rows = failure_experiment(control, -1.0, 0.25, alphas, expect_shared=False)
    assert control_rows[-1].sup_value <= control_rows[0].sup_value / 10.0
    assert time.perf_counter() - start < 30.0


def test_11_mirrored_pair_direction_is_real_and_shape_error_decays():
    """For {1/(s-1), 1/(s+1)} the limiting direction at the origin is exactly
    one, and the shape distance falls as the edge strengthens."""
    start = time.perf_counter()
    g_unstable = RationalTF([1.0], [-1.0, 1.0])
    g_stable = RationalTF([1.0], [1.0, 1.0])
    values = []
    for weight in (10.0, 100.0, 1000.0):
        net = NetworkModel(complete_graph(2, weight), (g_unstable, g_stable), ONE)
        gamma = coherent_pole_direction(net, 0.0)
        assert abs(gamma - 1.0) < 1e-10
        values.append(normalized_incoherence(net, 0.0))
    assert values[0] > values[1] > values[2]
    assert time.perf_counter() - start < 5.0


def test_12_state_space_realization_matches_frequency_domain():
    """The assembled closed-loop state space reproduces the transfer matrix
    on the imaginary axis to 1e-7."""
    start = time.perf_counter()
    rng = np.random.default_rng(1012)
    for _ in range(20):
        n = int(rng.integers(2, 7))
        lap = random_connected_laplacian(rng, n)
        gains = [random_first_order_tf(rng, biproper_fraction=0.0) for _ in range(n)]
        coupling = ONE if rng.uniform() < 0.5 else INTEGRATOR
        net = NetworkModel(lap, gains, coupling)
        ss = closed_loop(net)
        for _ in range(10):
            s = 1j * float(rng.uniform(0.1, 5.0))
            response = ss.frequency_response(s)
            reference = transfer_matrix(net, s)
            assert float(np.max(np.abs(response - reference))) < 1e-7
    assert time.perf_counter() - start < 30.0
