import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_pd
from tlportfolio.errors import InputError
from tlportfolio.estimators import GaussianMoments, block_moments, expanding_moments
from tlportfolio.maxsharpe import max_sharpe, sharpe_value
from tlportfolio.panel import AlignedPanel, ReturnMatrix
from tlportfolio.simplex import on_simplex, simplex_lattice
from tlportfolio.transfer import (
    CandidateAllocations,
    ValidationSchedule,
    build_schedule,
    final_allocation,
    fit_candidates,
    informative_mass,
    solve_weights,
    transfer_allocate,
    weight_objective,
)


def panel_of(sizes, d=2, seed=0):
    rng = np.random.default_rng(seed)
    mats = [ReturnMatrix(f"m{i}", rng.normal(0.1, 1.0, size=(n, d))) for i, n in enumerate(sizes)]
    return AlignedPanel(mats[0], tuple(mats[1:]))


def synthetic_candidates(allocs, validation):
    allocs = np.asarray(allocs, dtype=float)
    k = allocs.shape[0]
    sched = ValidationSchedule(2, k, tuple(range(1, k + 1)), (2,) * allocs.shape[1])
    return CandidateAllocations(sched, allocs, tuple(validation))


def random_candidates(rng, n_datasets, k, d):
    allocs = rng.dirichlet(np.full(d, 0.5), size=(k, n_datasets))
    validation = [random_pd(rng, d, mean_scale=0.5) for _ in range(k - 1)]
    return synthetic_candidates(allocs, validation)


def objective_oracle(w, cand):
    """Average Sharpe of the mixed allocation, one validation block at a time."""
    terms = []
    for i, v in enumerate(cand.validation):
        phi = sum(w[m] * cand.allocations[i, m] for m in range(len(w)))
        terms.append(sharpe_value(phi, v))
    return float(np.mean(terms))


# ------------------------------------------------------------------ schedule


def test_schedule_four_datasets():
    s = build_schedule(panel_of((300, 400, 500, 600)), 50)
    assert s.k == 6
    assert s.taus == (51, 101, 151, 201, 251, 301)
    assert s.first_segment_lengths == (50, 150, 250, 350)


def test_schedule_minimal():
    s = build_schedule(panel_of((10,)), 5)
    assert (s.k, s.taus) == (2, (6, 11))


def test_schedule_too_few_parts():
    with pytest.raises(InputError):
        build_schedule(panel_of((10,)), 8)
    with pytest.raises(InputError):
        build_schedule(panel_of((10,)), 1)


@given(st.integers(2, 60), st.integers(4, 400), st.lists(st.integers(0, 200), max_size=3))
def test_schedule_invariants(h, nt, extra):
    panel = panel_of([nt] + [nt + e for e in extra], d=1)
    if nt // h < 2 or nt - (nt // h - 1) * h < 2:
        with pytest.raises(InputError):
            build_schedule(panel, h)
        return
    s = build_schedule(panel, h)
    assert s.k == nt // h
    assert s.taus[-1] == nt + 1
    assert s.taus[-1] - s.taus[0] == (s.k - 1) * h
    assert all(b - a == h for a, b in zip(s.taus, s.taus[1:]))
    for m, first in zip(panel.datasets, s.first_segment_lengths):
        assert first + (s.k - 1) * h == m.n_rows


def test_first_block_matches_expanding_window():
    panel = panel_of((40, 40), d=3)
    s = build_schedule(panel, 10)
    assert s.first_segment_lengths[0] == 10
    a = expanding_moments(panel.target, 40, s.taus[0])
    b = block_moments(panel.target, 40, s.taus[0], 10)
    np.testing.assert_array_equal(a.mean, b.mean)
    np.testing.assert_array_equal(a.cov, b.cov)


# ---------------------------------------------------------------- candidates


def test_candidates_identical_datasets():
    base = panel_of((60,), d=3)
    panel = AlignedPanel(base.target, (base.target, base.target))
    cand = fit_candidates(panel, build_schedule(panel, 12))
    for i in range(cand.schedule.k):
        np.testing.assert_array_equal(cand.allocations[i, 0], cand.allocations[i, 1])
        np.testing.assert_array_equal(cand.allocations[i, 0], cand.allocations[i, 2])


def test_candidates_match_direct_fits():
    panel = panel_of((60, 90), d=3)
    sched = build_schedule(panel, 12)
    cand = fit_candidates(panel, sched)
    assert cand.allocations.shape == (sched.k, 2, 3)
    assert len(cand.validation) == sched.k - 1
    for i, tau in enumerate(sched.taus):
        for m, data in enumerate(panel.datasets):
            np.testing.assert_array_equal(cand.allocations[i, m], max_sharpe(expanding_moments(data, 60, tau)))
            assert on_simplex(cand.allocations[i, m])
    v = block_moments(panel.target, 60, sched.taus[1], 12)
    np.testing.assert_allclose(cand.validation[0].mean, v.mean)


def test_candidates_single_dataset_and_single_asset():
    cand = fit_candidates(panel_of((30,)), build_schedule(panel_of((30,)), 6))
    assert cand.allocations.shape[1] == 1
    one = panel_of((30, 40), d=1)
    cand = fit_candidates(one, build_schedule(one, 6))
    np.testing.assert_array_equal(cand.allocations, np.ones_like(cand.allocations))


# ----------------------------------------------------------------- objective

SINGLE_TERM = dict(
    allocs=[[[1.0, 0.0], [0.0, 1.0]], [[1.0, 0.0], [0.0, 1.0]]],
    validation=[GaussianMoments(np.array([1.0, 0.0]), np.eye(2))],
)


def test_objective_single_term():
    cand = synthetic_candidates(**SINGLE_TERM)
    assert weight_objective(np.array([1.0, 0.0]), cand) == pytest.approx(1.0)
    assert weight_objective(np.array([0.5, 0.5]), cand) == pytest.approx(0.5 / np.sqrt(0.5))
    assert weight_objective(np.array([0.5, 0.5]), cand) == pytest.approx(0.7071, abs=1e-4)


def test_objective_target_vertex_is_target_average():
    rng = np.random.default_rng(5)
    cand = random_candidates(rng, 3, 5, 4)
    expected = np.mean([sharpe_value(cand.allocations[i, 0], v) for i, v in enumerate(cand.validation)])
    assert weight_objective(np.array([1.0, 0.0, 0.0]), cand) == pytest.approx(expected, rel=1e-12)


def test_objective_rejects_wrong_length():
    with pytest.raises(InputError):
        weight_objective(np.ones(3) / 3, synthetic_candidates(**SINGLE_TERM))


@settings(deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 4), st.integers(2, 6), st.integers(1, 5))
def test_objective_matches_oracle(seed, n_datasets, k, d):
    rng = np.random.default_rng(seed)
    cand = random_candidates(rng, n_datasets, k, d)
    w = rng.dirichlet(np.ones(n_datasets))
    assert weight_objective(w, cand) == pytest.approx(objective_oracle(w, cand), rel=1e-10, abs=1e-12)


# ------------------------------------------------------------------- weights


def test_solve_single_term():
    w = solve_weights(synthetic_candidates(**SINGLE_TERM))
    np.testing.assert_allclose(w, [1.0, 0.0], atol=1e-6)


def test_solve_flat_objective():
    a = np.array([[0.2, 0.8], [0.6, 0.4]])
    allocs = np.stack([np.stack([a[i]] * 3) for i in range(2)])
    cand = synthetic_candidates(allocs, [GaussianMoments(np.array([0.3, 0.1]), np.eye(2))])
    w = solve_weights(cand)
    assert on_simplex(w)
    assert weight_objective(w, cand) == pytest.approx(weight_objective(np.ones(3) / 3, cand), abs=1e-12)


def test_solve_single_dataset():
    cand = fit_candidates(panel_of((30,)), build_schedule(panel_of((30,)), 6))
    np.testing.assert_array_equal(solve_weights(cand), [1.0])


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 3), st.integers(2, 6), st.integers(2, 5))
def test_solve_dominates_grid(seed, n_datasets, k, d):
    rng = np.random.default_rng(seed)
    cand = random_candidates(rng, n_datasets, k, d)
    w = solve_weights(cand)
    assert on_simplex(w)
    lattice = simplex_lattice(100, n_datasets)
    best = max(objective_oracle(p, cand) for p in lattice)
    assert weight_objective(w, cand) >= best - 1e-4


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_solve_four_datasets_beats_vertices_and_centre(seed):
    rng = np.random.default_rng(seed)
    cand = random_candidates(rng, 4, 4, 3)
    w = solve_weights(cand)
    starts = list(np.eye(4)) + [np.full(4, 0.25)]
    assert weight_objective(w, cand) >= max(weight_objective(s, cand) for s in starts) - 1e-9


# ------------------------------------------------------------ final + mass


def test_final_allocation_vertex_and_mix():
    panel = panel_of((50, 70, 90), d=3)
    terminal = [max_sharpe(expanding_moments(m, 50, 51)) for m in panel.datasets]
    for m in range(3):
        np.testing.assert_allclose(final_allocation(panel, np.eye(3)[m]), terminal[m], atol=1e-15)
    w = np.array([0.3, 0.7, 0.0])
    np.testing.assert_allclose(final_allocation(panel, w), 0.3 * terminal[0] + 0.7 * terminal[1], atol=1e-12)


def test_final_allocation_convex_combination_of_vertices():
    # d=2 datasets whose terminal allocations are opposite vertices
    # orthogonal noise patterns give a diagonal sample covariance
    e1 = np.tile([1.0, -1.0], 10)
    e2 = np.tile([1.0, 1.0, -1.0, -1.0], 5)
    up = np.column_stack([1.0 + 0.5 * e1, -1.0 + 0.5 * e2])
    a = ReturnMatrix("a", up)
    b = ReturnMatrix("b", up[:, ::-1])
    panel = AlignedPanel(a, (b,))
    np.testing.assert_allclose(final_allocation(panel, np.eye(2)[0]), [1, 0], atol=1e-12)
    np.testing.assert_allclose(final_allocation(panel, np.eye(2)[1]), [0, 1], atol=1e-12)
    np.testing.assert_allclose(final_allocation(panel, np.array([0.3, 0.7])), [0.3, 0.7], atol=1e-12)


def test_final_allocation_identical_terminals():
    base = panel_of((40,), d=3)
    panel = AlignedPanel(base.target, (base.target,))
    ref = max_sharpe(expanding_moments(base.target, 40, 41))
    np.testing.assert_allclose(final_allocation(panel, np.array([0.25, 0.75])), ref, atol=1e-14)


@settings(deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_final_allocation_on_simplex(seed):
    rng = np.random.default_rng(seed)
    panel = panel_of((30, 45, 60), d=4, seed=seed % 1000)
    assert on_simplex(final_allocation(panel, rng.dirichlet(np.ones(3))))


def test_informative_mass():
    w = np.array([0.3, 0.2, 0.0, 0.0, 0.0, 0.5])
    assert informative_mass(w, {0, 1, 5}) == pytest.approx(1.0)
    assert informative_mass(w, range(6)) == pytest.approx(1.0)
    assert informative_mass(w, set()) == 0.0
    with pytest.raises(InputError):
        informative_mass(w, {6})


def test_transfer_allocate_uses_terminal_candidates():
    panel = panel_of((50, 80), d=3, seed=2)
    res = transfer_allocate(panel)
    np.testing.assert_allclose(res.allocation, final_allocation(panel, res.weights), atol=1e-12)
    assert res.candidates.schedule.h == 10
