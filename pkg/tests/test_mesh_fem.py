import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from critmult.fem import (
    FemFunction,
    P1Space,
    assemble_potentials,
    dual_norm,
    energy,
    energy_gradient,
    energy_hessian,
    holder_audit,
    pair_operators,
)
from critmult.mesh import (
    MeshError,
    SimplicialMesh,
    build_box_mesh,
    conformity_audit,
    dumps_mesh,
    loads_mesh,
    read_mesh,
    volume,
    write_mesh,
)
from critmult.params import ProblemParams
from critmult.quadrature import monomial_integral, simplex_rule

# --- mesh -----------------------------------------------------------------------


def test_unit_square_single_cell():
    m = build_box_mesh(2, (1, 1), (1, 1))
    assert m.n_cells == 2 and m.n_vertices == 4
    assert sorted(m.boundary_vertices) == [0, 1, 2, 3]


def test_cube_two_divisions():
    m = build_box_mesh(3, (2, 2, 2))
    assert m.n_cells == 48
    assert volume(m) == pytest.approx(1.0, abs=1e-14)
    assert np.all(m.cell_volumes() > 0)


@pytest.mark.parametrize("pattern", ["kuhn", "reflected"])
@pytest.mark.parametrize("N,div", [(2, (3, 5)), (3, (2, 3, 1)), (3, (4, 4, 4))])
def test_conforming_and_oriented(N, div, pattern):
    m = build_box_mesh(N, div, pattern=pattern)
    assert conformity_audit(m)
    P = m.vertices[m.cells]
    det = np.linalg.det(P[:, 1:] - P[:, :1])
    assert np.all(det > 0)


@pytest.mark.parametrize("pattern", ["kuhn", "reflected"])
def test_boundary_matches_box_faces(pattern):
    m = build_box_mesh(3, (3, 2, 4), (1.0, 2.0, 0.5), pattern=pattern)
    x = m.vertices
    on_face = np.any(np.isclose(x, 0) | np.isclose(x, [1.0, 2.0, 0.5]), axis=1)
    assert np.array_equal(np.flatnonzero(on_face), m.boundary_vertices)
    # the topological boundary agrees with the geometric one
    auto = SimplicialMesh(m.vertices, m.cells)
    assert np.array_equal(auto.boundary_vertices, m.boundary_vertices)


def test_box_volume_and_refinement():
    assert volume(build_box_mesh(3, 1, (2, 1, 1))) == pytest.approx(2.0)
    vols = [volume(build_box_mesh(3, n, (1.3, 0.7, 2.1))) for n in (1, 2, 4, 8)]
    assert np.allclose(vols, 1.3 * 0.7 * 2.1, rtol=0, atol=1e-12)


@pytest.mark.parametrize("bad", [dict(N=4, divisions=2), dict(N=2, divisions=0), dict(N=3, divisions=(1, 1)),
                                 dict(N=2, divisions=2, lengths=(1, -1)), dict(N=2, divisions=2, pattern="x")])
def test_build_rejects(bad):
    with pytest.raises(MeshError):
        build_box_mesh(**bad)


def test_text_roundtrip(tmp_path):
    m = build_box_mesh(3, (2, 3, 2), (0.3, 1.0 / 3.0, 2.0))
    assert loads_mesh(dumps_mesh(m)).checksum() == m.checksum()
    write_mesh(m, tmp_path / "m.txt")
    assert read_mesh(tmp_path / "m.txt").checksum() == m.checksum()
    with pytest.raises(MeshError):
        loads_mesh("DIM 2\nVERTICES 3\nCELLS 1\n0 0\n1 0\n")


# --- quadrature ------------------------------------------------------------------


@pytest.mark.parametrize("N", [2, 3])
def test_rule_exact_to_degree_five(N):
    rule = simplex_rule(N, 4)
    assert rule.degree >= 4
    assert np.all(rule.weights > 0)
    x = rule.points
    for total in range(6):
        for a in np.ndindex(*(total + 1,) * N):
            if sum(a) != total:
                continue
            val = float(rule.weights @ np.prod(x ** np.array(a), axis=1))
            assert val == pytest.approx(monomial_integral(a), rel=1e-13, abs=1e-16)


# --- FEM functions and potentials ------------------------------------------------------


def test_zero_trace_and_linearity(square8):
    rng = np.random.default_rng(0)
    a, b = rng.standard_normal((2, square8.ndofs))
    u = FemFunction(a, square8)
    assert np.all(u.nodal_values()[square8.mesh.boundary_vertices] == 0)
    lhs = square8.cell_gradients(2 * a - 3 * b)
    rhs = 2 * square8.cell_gradients(a) - 3 * square8.cell_gradients(b)
    assert np.allclose(lhs, rhs, atol=1e-12)
    assert np.allclose(square8.quad_values(2 * a - 3 * b), 2 * square8.quad_values(a) - 3 * square8.quad_values(b))


def test_hat_function_by_hand():
    V = P1Space(build_box_mesh(2, 2))
    assert V.ndofs == 1
    u = FemFunction([1.0], V)
    # six triangles of area 1/8 touch the centre: four with |∇φ|² = 4, two with 8
    P = ProblemParams(N=2, p=1.5, r=2, volume=1)
    V2 = ProblemParams(N=3, p=2, r=3, volume=1)
    assert assemble_potentials(u, V2).I_p == pytest.approx(0.5 * (4 * 4 + 2 * 8) / 8, abs=1e-12)
    assert assemble_potentials(u, P).I_p == pytest.approx((4 * 2**1.5 + 2 * 8**0.75) / 8 / 1.5, abs=1e-12)


def test_zero_function():
    V = P1Space(build_box_mesh(3, 3))
    P = ProblemParams(N=3, p=2, r=3, volume=1, q=1.5, lam=4.0)
    rep = energy(FemFunction.zero(V), P)
    assert (rep.I_p, rep.J_p, rep.F, rep.G, rep.H, rep.E, rep.grad_dual_norm) == (0, 0, 0, 0, 0, 0, 0)
    s = holder_audit(FemFunction.zero(V), P)
    assert (s.F_bound, s.G_bound, s.H_bound) == (0, 0, 0)


PARAMS = [
    ProblemParams(N=3, p=2.0, r=3.0, volume=1.0, lam=5.0),
    ProblemParams(N=3, p=2.0, r=4.0, volume=1.0, q=1.5, lam=5.0),
    ProblemParams(N=3, p=2.5, r=3.5, volume=1.0, lam=5.0),
    ProblemParams(N=4, p=3.0, r=4.0, volume=1.0, q=2.0, lam=5.0),
]


@pytest.mark.parametrize("P", PARAMS)
def test_homogeneity_and_evenness(cube4, P):
    rng = np.random.default_rng(1)
    u = FemFunction(rng.standard_normal(cube4.ndofs), cube4)
    a = assemble_potentials(u, P)
    b = assemble_potentials(2.0 * u, P)
    assert b.I_p == pytest.approx(2**P.p * a.I_p, rel=1e-12)
    assert b.J_p == pytest.approx(2**P.p * a.J_p, rel=1e-12)
    assert b.G == pytest.approx(2**P.r * a.G, rel=1e-12)
    assert b.H == pytest.approx(2**P.pstar * a.H, rel=1e-12)
    assert energy(-u, P).E == energy(u, P).E
    assert min(a.I_p, a.J_p, a.F, a.G, a.H) >= 0
    rep = energy(u, P)
    assert rep.E == pytest.approx(rep.I_p + rep.F - P.lam * rep.G - rep.H, rel=1e-13, abs=1e-13)


@pytest.mark.parametrize("P", PARAMS)
def test_operator_identities(cube4, P):
    rng = np.random.default_rng(2)
    for _ in range(5):
        u = FemFunction(rng.standard_normal(cube4.ndofs), cube4)
        v = FemFunction(rng.standard_normal(cube4.ndofs), cube4)
        pot = assemble_potentials(u, P)
        pr = pair_operators(u, u, P, eps=0.0)
        assert pr.A == pytest.approx(P.p * pot.I_p, rel=1e-12)
        assert pr.B == pytest.approx(P.p * pot.J_p, rel=1e-12)
        a, b = pair_operators(u, v, P), pair_operators(-u, v, P)
        for name in ("A", "B", "f", "g", "h"):
            assert getattr(b, name) == -getattr(a, name)


@pytest.mark.parametrize("P", PARAMS)
def test_gradient_finite_differences(cube4, P):
    rng = np.random.default_rng(3)
    from critmult.fem import energy_value

    for _ in range(3):
        c, w = rng.standard_normal((2, cube4.ndofs))
        c *= 0.3
        h = 1e-5
        fd = (energy_value(cube4, c + h * w, P) - energy_value(cube4, c - h * w, P)) / (2 * h)
        an = float(energy_gradient(cube4, c, P, eps=0.0) @ w)
        assert an == pytest.approx(fd, rel=1e-5)


@pytest.mark.parametrize("P", PARAMS[:2])
def test_hessian_finite_differences(cube4, P):
    rng = np.random.default_rng(4)
    c, w = rng.standard_normal((2, cube4.ndofs))
    h = 1e-6
    fd = (energy_gradient(cube4, c + h * w, P) - energy_gradient(cube4, c - h * w, P)) / (2 * h)
    an = energy_hessian(cube4, c, P) @ w
    assert np.linalg.norm(an - fd) <= 1e-6 * np.linalg.norm(fd)


@given(st.integers(0, 2**32 - 1), st.floats(0.1, 10.0))
def test_holder_battery_property(seed, scale):
    V = _square()
    rng = np.random.default_rng(seed)
    P = ProblemParams(N=2, p=1.5, r=2.0, volume=1.0, q=1.2)
    u = FemFunction(scale * rng.standard_normal(V.ndofs), V)
    assert holder_audit(u, P).ok(1e-10)


def test_holder_scaling(square8):
    rng = np.random.default_rng(5)
    P = ProblemParams(N=2, p=1.5, r=2.0, volume=1.0, q=1.2)
    u = FemFunction(rng.standard_normal(square8.ndofs), square8)
    a, b = holder_audit(u, P), holder_audit(3.0 * u, P)
    assert b.G_bound == pytest.approx(3.0**P.r * a.G_bound, rel=1e-9)


_SQ = {}


def _square():
    if "V" not in _SQ:
        _SQ["V"] = P1Space(build_box_mesh(2, 8))
    return _SQ["V"]


def test_dual_norm_p2_is_riesz(square8):
    rng = np.random.default_rng(6)
    g = rng.standard_normal(square8.ndofs)
    v = square8.solve_stiffness(g)
    assert dual_norm(square8, g, 2.0) == pytest.approx(math.sqrt(g @ v), rel=1e-13)


@pytest.mark.parametrize("p", [1.5, 2.5, 3.0])
def test_dual_norm_is_a_supremum(square8, p):
    """⟨g, v⟩/‖∇v‖_p never exceeds the computed dual norm."""
    rng = np.random.default_rng(7)
    g = rng.standard_normal(square8.ndofs)
    d = dual_norm(square8, g, p)
    for _ in range(50):
        v = rng.standard_normal(square8.ndofs)
        assert float(g @ v) / square8.norm(v, p) <= d * (1 + 1e-8)
    # homogeneity of degree one in g
    assert dual_norm(square8, 3.0 * g, p) == pytest.approx(3.0 * d, rel=1e-7)
