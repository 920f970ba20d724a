import time
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qdarray.electrostatics import (
    BoxParams,
    ConvergenceError,
    PotentialGrid,
    assemble,
    discretize,
    find_wells,
    local_maxima,
    match_wells,
    solve_laplace,
    uniform_box,
    with_metal,
)
from qdarray.geometry import NM, build_gate_stack_3x3

from oracles import dense_laplace


def small_box(seed=0, n=12):
    """Random-permittivity box with three electrodes at distinct voltages."""
    rng = np.random.default_rng(seed)
    box = replace(uniform_box((n, n, n), h=NM), eps=rng.uniform(1.0, 13.0, (n, n, n)))
    box = with_metal(box, _plate(box.shape, 0), 0.0, "bottom")
    box = with_metal(box, _plate(box.shape, n - 1), 1.0, "top")
    block = np.zeros((n, n, n), bool)
    block[3:6, 4:8, 5:7] = True
    return with_metal(box, block, 0.35, "island")


def _plate(shape, k):
    m = np.zeros(shape, bool)
    m[:, :, k] = True
    return m


@pytest.mark.parametrize("method", ["amg", "sor"])
def test_small_grid_matches_dense_oracle(method):
    box = small_box()
    ref = dense_laplace(np.nan_to_num(box.eps, nan=1.0), box.metal, np.nan_to_num(box.voltage))
    grid = solve_laplace(box, tol=1e-13, method=method, max_iter=20000)
    assert np.max(np.abs(grid.phi - ref)) < 1e-8
    assert grid.max_principle_violation() == 0.0


def test_assembled_matrix_is_symmetric_positive():
    A, b, free = assemble(small_box(1, n=8))
    assert abs(A - A.T).max() < 1e-12
    assert np.all(A.diagonal() > 0)
    # weakly diagonally dominant
    off = np.asarray(abs(A).sum(axis=1)).ravel() - A.diagonal()
    assert np.all(A.diagonal() >= off - 1e-12)


def test_parallel_plate_is_linear():
    n = 10
    box = uniform_box((4, 4, n), h=NM, eps_r=3.9)
    box = with_metal(box, _plate(box.shape, 0), 0.0)
    box = with_metal(box, _plate(box.shape, n - 1), 0.9)
    grid = solve_laplace(box)
    np.testing.assert_allclose(grid.phi[1, 2, :], np.linspace(0, 0.9, n), atol=1e-10)


def test_two_dielectrics_in_series():
    # plates at cells 0 and 10; eps 1 for cells 1..4, eps 4 above
    box = uniform_box((3, 3, 11), h=NM, eps_r=1.0)
    eps = box.eps.copy()
    eps[:, :, 5:] = 4.0
    box = replace(box, eps=eps)
    box = with_metal(box, _plate(box.shape, 0), 0.0)
    box = with_metal(box, _plate(box.shape, 10), 1.0)
    phi = solve_laplace(box, tol=1e-13).phi[1, 1, :]
    # series capacitors: the flux is uniform, so the field is 4x larger in the low-eps part
    steps = np.diff(phi)
    np.testing.assert_allclose(steps[:4], steps[0], rtol=1e-9)
    np.testing.assert_allclose(steps[5:], steps[0] / 4, rtol=1e-9)


def test_uniform_voltage_gives_flat_potential_and_no_wells():
    stack = build_gate_stack_3x3().with_uniform_voltage(0.5)
    grid = solve_laplace(discretize(stack))
    np.testing.assert_allclose(grid.phi, 0.5, atol=1e-12)
    assert find_wells(grid) == []


def test_superposition():
    base = uniform_box((9, 9, 9), h=NM, eps_r=2.0)

    def solve(va, vb):
        b = with_metal(base, _plate(base.shape, 0), va)
        b = with_metal(b, _plate(base.shape, 8), vb)
        return solve_laplace(b, tol=1e-13).phi

    np.testing.assert_allclose(solve(0.3, 0.7), solve(0.3, 0) + solve(0, 0.7), atol=1e-10)


def test_spacing_limit():
    with pytest.raises(ValueError, match="coarse"):
        discretize(build_gate_stack_3x3(), BoxParams(h=6 * NM))


def test_no_metal_rejected():
    with pytest.raises(ValueError):
        solve_laplace(uniform_box((4, 4, 4)))
    with pytest.raises(ValueError):
        solve_laplace(small_box(n=6), method="jacobi")
    with pytest.raises(ValueError):
        solve_laplace(small_box(n=6), method="sor", omega=2.5)


@pytest.mark.parametrize("method", ["amg", "sor"])
def test_nonconvergence_reports_history(method):
    with pytest.raises(ConvergenceError) as err:
        solve_laplace(small_box(n=10), tol=1e-14, max_iter=2, method=method)
    assert 1 <= len(err.value.history) <= 3


def test_sor_records_every_sweep():
    grid = solve_laplace(small_box(n=8), method="sor", tol=1e-9)
    assert len(grid.residual_history) == grid.iterations + 1
    assert grid.residual_history[-1] < 1e-9


def test_discretize_layers_and_materials():
    box = discretize(build_gate_stack_3x3())
    h = box.h
    assert h == 5 * NM
    # cell centres on integer multiples of h, QW plane is a cell layer
    assert np.allclose(box.z / h, np.round(box.z / h))
    assert np.any(np.isclose(box.z, 0.0))
    # nine plungers at 0.6 V
    names = [n for n in box.electrode_names if n.startswith("P")]
    assert len(names) == 9
    for n in names:
        cells = box.cells_of(n)
        assert cells.any() and np.all(box.voltage[cells] == 0.6)
    # the thinnest layer (15 nm) is three cells thick
    b = box.cells_of("B11-12")
    assert np.unique(np.nonzero(b)[2]).size == 3
    # metal never sits in the semiconductor
    zq = box.z <= 30 * NM
    assert not box.metal[:, :, zq].any()


def test_touching_gates_at_different_voltages_rejected():
    with pytest.raises(ValueError, match="different voltage"):
        discretize(build_gate_stack_3x3().with_voltages({"B21-22": 0.5}))


def test_local_maxima_strict():
    p = np.zeros((5, 5))
    p[2, 2] = 1.0
    assert local_maxima(p) == [(2, 2)]
    p[2, 3] = 1.0  # a plateau is not a strict maximum
    assert local_maxima(p) == []


def test_parabolic_refinement_recovers_peak():
    box = replace(uniform_box((21, 21, 3), h=NM), origin=np.array([-10 * NM, -10 * NM, -NM]))
    x, y = box.x, box.y
    x0, y0 = 1.3 * NM, -2.2 * NM
    plane = 1 - ((x[:, None] - x0) ** 2 + (y[None, :] - y0) ** 2) / (20 * NM) ** 2
    phi = np.repeat(plane[:, :, None], 3, axis=2)
    (w,) = find_wells(PotentialGrid(phi, box, 0.0, 0))
    assert w.x == pytest.approx(x0, abs=1e-15) and w.y == pytest.approx(y0, abs=1e-15)


@pytest.fixture(scope="module")
def stack_solution():
    t = time.perf_counter()
    stack = build_gate_stack_3x3()
    grid = solve_laplace(discretize(stack))
    return stack, grid, time.perf_counter() - t


def test_nine_wells_under_plungers(stack_solution):
    stack, grid, elapsed = stack_solution
    wells = find_wells(grid)
    assert len(wells) == 9
    dist = match_wells(wells, stack.dot_centers)
    assert np.all(dist <= 20 * NM)
    assert grid.max_principle_violation() == 0.0
    assert elapsed < 60


def test_wells_respect_symmetry(stack_solution):
    stack, grid, _ = stack_solution
    wells = find_wells(grid)
    # the centre well is at the origin by construction of the stack
    centre = min(wells, key=lambda w: np.hypot(w.x, w.y))
    assert np.hypot(centre.x, centre.y) < 5 * NM


def test_raised_plunger_deepens_its_well(stack_solution):
    stack, grid, _ = stack_solution
    raised = solve_laplace(discretize(stack.with_voltages({"P13": 0.8})))
    wells = find_wells(raised)
    top = wells[0]
    cx, cy = stack.by_name("P13").center
    assert np.hypot(top.x - cx, top.y - cy) < 20 * NM
    assert raised.max_principle_violation() == 0.0


@settings(max_examples=10, deadline=None)
@given(st.floats(0.0, 1.0), st.floats(0.0, 1.0), st.integers(0, 100))
def test_maximum_principle_random_boxes(va, vb, seed):
    rng = np.random.default_rng(seed)
    box = replace(uniform_box((7, 7, 7), h=NM), eps=rng.uniform(1, 12, (7, 7, 7)))
    box = with_metal(box, _plate(box.shape, 0), va)
    box = with_metal(box, _plate(box.shape, 6), vb)
    grid = solve_laplace(box, tol=1e-12)
    assert grid.max_principle_violation() <= 1e-9
