import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import bdlab
from bdlab import InputError, ResolutionError
from bdlab.functional import kernel_1d, kernel_cdf, mollified_density


def unit_grid(n=17):
    return bdlab.Grid(((0.0, 1.0), (0.0, 1.0)), (n, n))


def mixed_field(seed=0, n=17):
    rng = np.random.default_rng(seed)
    g = unit_grid(n)
    vals = 0.3 * rng.normal(size=g.n + (2,))
    j = bdlab.JumpInterface(np.array([[0.25, 0.0], [0.25, 1.0]]),
                            rng.normal(size=2))
    return bdlab.DisplacementField(g, vals, (j,))


def test_breakdown_decomposition_exact():
    u = mixed_field()
    br = bdlab.evaluate_functional(bdlab.make_area(), u, include_boundary=True)
    assert br.total == br.bulk + br.singular + br.boundary


@settings(max_examples=15, deadline=None)
@given(st.floats(0.1, 5.0))
def test_one_homogeneous_scaling(c):
    u = mixed_field(3)
    f = bdlab.make_norm()
    base = bdlab.evaluate_functional(f, u, include_boundary=True)
    scaled_u = bdlab.DisplacementField(
        u.grid, c * u.values,
        tuple(bdlab.JumpInterface(j.polyline, c * j.jump) for j in u.jumps))
    scaled = bdlab.evaluate_functional(f, scaled_u, include_boundary=True)
    for part in ("bulk", "singular", "boundary", "total"):
        assert getattr(scaled, part) == pytest.approx(
            c * getattr(base, part), rel=1e-9, abs=1e-12)


def test_zero_field_all_parts_zero():
    g = unit_grid(9)
    u = bdlab.DisplacementField(g, np.zeros(g.n + (2,)))
    br = bdlab.evaluate_functional(bdlab.make_norm(), u, include_boundary=True)
    assert br.total == 0.0


def test_affine_field_bulk_closed_form():
    g = unit_grid(33)
    A = np.array([[0.4, -0.1], [-0.1, 0.8]])
    u = bdlab.field_from_function(g, lambda x: x @ A.T)
    br = bdlab.evaluate_functional(bdlab.make_area(), u, include_boundary=False)
    assert br.bulk == pytest.approx(np.sqrt(1 + np.sum(A * A)), abs=1e-10)
    assert br.singular == 0.0


def test_area_functional_examples():
    g = unit_grid(9)
    zero = bdlab.SymMeasure(g, np.zeros(g.cell_shape + (2, 2)))
    assert bdlab.area_functional(zero) == pytest.approx(1.0, abs=1e-12)
    A = np.array([[1.0, 0.5], [0.5, -2.0]])
    const = bdlab.SymMeasure(g, np.broadcast_to(A, g.cell_shape + (2, 2)).copy())
    assert bdlab.area_functional(const) == pytest.approx(
        np.sqrt(1 + np.sum(A * A)), abs=1e-12)


def test_minimize_dirichlet_misfit_zero_for_matching_competitor():
    g = unit_grid(9)

    def dirichlet(x):
        return np.broadcast_to(np.array([1.0, 0.0]),
                               np.asarray(x).shape[:-1] + (2,))

    u, br = bdlab.minimize_functional(bdlab.make_norm(), g, dirichlet=dirichlet)
    assert br.total == pytest.approx(0.0, abs=1e-8)
    assert np.abs(u.values - np.array([1.0, 0.0])).max() < 1e-6


def test_minimize_competitor_never_beaten():
    g = unit_grid(9)
    comp = bdlab.field_from_function(g, lambda x: 0.1 * x)
    u, br = bdlab.minimize_functional(bdlab.make_area(), g,
                                      opts={"competitor": comp, "iters": 20})
    comp_br = bdlab.evaluate_functional(bdlab.make_area(), comp)
    assert br.total <= comp_br.total + 1e-12


def test_minimize_coercivity_check():
    g = unit_grid(9)
    bounded = bdlab.parse_integrand("norm(A) / (1 + norm(A))")
    with pytest.raises(InputError):
        bdlab.minimize_functional(bounded, g, opts={"coercivity_m": 1.0})


def test_laminate_sequence_exact_strains():
    seq = bdlab.laminate_sequence()
    P = bdlab.sym_dyad([1, 0], [0, 1]).array
    for u in seq.fields:
        mu = bdlab.assemble_symmetrized_measure(u)
        dev = np.minimum(np.abs(mu.density - P).max(axis=(-2, -1)),
                         np.abs(mu.density + P).max(axis=(-2, -1)))
        assert dev.max() < 1e-12


def test_laminate_resolution_floor():
    g = bdlab.Grid(((0.0, 1.0), (0.0, 1.0)), (17, 17))
    with pytest.raises(ResolutionError):
        bdlab.laminate_sequence(g, js=(5,))


def test_lsc_pass_for_convex_on_builtin_sequences():
    for f in (bdlab.make_norm(), bdlab.make_area()):
        for seq in (bdlab.laminate_sequence(), bdlab.concentration_sequence()):
            assert bdlab.lsc_experiment(f, seq)["verdict"] == "PASS"


def test_concentration_limit_carries_jump():
    seq = bdlab.concentration_sequence()
    mu = bdlab.assemble_symmetrized_measure(seq.limit_field)
    assert len(mu.surface_atoms) == 1
    # jump e1 across the vertical midline: mass = |e1 (x) e1| * length
    assert mu.singular_mass() == pytest.approx(1.0, abs=1e-12)


def test_kernel_normalization():
    s = np.linspace(-0.5, 0.5, 20001)
    for delta in (0.1, 0.37):
        mass = np.trapezoid(kernel_1d(s, delta), s)
        assert mass == pytest.approx(1.0, abs=1e-8)
        assert kernel_cdf(np.array([-delta]), delta)[()] == pytest.approx(0.0, abs=1e-12)
        assert kernel_cdf(np.array([delta]), delta)[()] == pytest.approx(1.0, abs=1e-12)


def test_mollified_density_preserves_jump_mass():
    u = bdlab.staircase_field(n=65)
    mu = bdlab.assemble_symmetrized_measure(u)
    eg = bdlab.Grid(u.grid.box, (257, 257))
    D = mollified_density(mu, 0.2, eg)
    total = np.linalg.norm(D, axis=(-2, -1)).sum() * eg.cell_volume
    # TV of the mollification never exceeds TV of the measure and most of
    # the mass stays inside the box at this delta
    assert total <= mu.total_variation() + 1e-9
    assert total > 0.85 * mu.total_variation()


def test_strict_experiment_validation():
    u = bdlab.staircase_field(n=129)
    with pytest.raises(InputError):
        bdlab.strict_continuity_experiment(bdlab.make_area(), u, (0.1, 0.2))
    with pytest.raises(ResolutionError):
        bdlab.strict_continuity_experiment(bdlab.make_area(), u, (0.02,))


def test_strict_experiment_smooth_field_small_gaps():
    g = bdlab.Grid(((0.0, 1.0), (0.0, 1.0)), (65, 65))
    u = bdlab.field_from_function(
        g, lambda x: np.stack([np.sin(x[..., 0]), x[..., 1] ** 2], axis=-1))
    rep = bdlab.strict_continuity_experiment(bdlab.make_area(), u, (0.2, 0.1))
    assert rep["F_gap"] < 5e-2
