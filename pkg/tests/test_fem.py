import math

import numpy as np
import pytest

from penflow import (AssemblyConfig, ConfigurationError, DomainSpec,
                     EXACT_REGION, LevelField, PENALIZED_B, PLAIN_B,
                     assemble_bilinear, assemble_load, assemble_trilinear,
                     build_spaces, compose_disks, compute_norm,
                     evaluate_coefficients, generate_mesh,
                     matrix_to_coordinate_text, smoothed_heaviside,
                     triangle_rule)


def exact_barycentric_integral(p, q, r, area):
    """Closed form of the integral of lam0^p lam1^q lam2^r on a triangle."""
    num = math.factorial(p) * math.factorial(q) * math.factorial(r)
    return num * 2.0 * area / math.factorial(p + q + r + 2)


@pytest.mark.parametrize("order,degree", [(5, 5), (7, 7)])
def test_triangle_rule_integrates_barycentric_monomials(order, degree):
    lam, wts = triangle_rule(order)
    assert np.isclose(wts.sum(), 1.0, atol=1e-14)
    area = 1.0  # weights are normalized, so compare on a unit-area triangle
    for p in range(degree + 1):
        for q in range(degree + 1 - p):
            for r in range(degree + 1 - p - q):
                if p + q + r > degree:
                    continue
                got = area * np.sum(
                    wts * lam[:, 0] ** p * lam[:, 1] ** q * lam[:, 2] ** r)
                want = exact_barycentric_integral(p, q, r, area)
                assert abs(got - want) < 1e-15, (p, q, r)


def test_space_layout_counts(unit_square_mesh):
    lay = build_spaces(unit_square_mesh)
    V, T = unit_square_mesh.num_vertices, unit_square_mesh.num_triangles
    assert lay.V == V and lay.T == T
    assert lay.N1 == V + T
    assert lay.N2 == V and lay.N3 == V
    assert lay.M == 2 * lay.N1 + V
    assert lay.N == lay.M + V
    assert lay.cell_dofs.shape == (T, 4)
    assert np.array_equal(lay.cell_dofs[:, 3], V + np.arange(T))
    # Dirichlet velocity components cover both components of each wall vertex
    assert lay.dirichlet_dofs.size == 2 * lay.dirichlet_vertices.size


# ------------------------------------------------------------------
# independent dense evaluation of the mini-element forms
def _basis_at(lam_q, grads_t):
    """Values and gradients of the 4 cell basis functions at one point."""
    l1, l2, l3 = lam_q
    vals = np.array([l1, l2, l3, 27.0 * l1 * l2 * l3])
    g = np.zeros((4, 2))
    g[:3] = grads_t
    g[3] = 27.0 * (l2 * l3 * grads_t[0] + l1 * l3 * grads_t[1]
                   + l1 * l2 * grads_t[2])
    return vals, g


def _dense_forms(mesh, lay, coeffs, order=5):
    """Per-quadrature-point loop over triangles, no vectorized shortcuts."""
    lam, wts = triangle_rule(order)
    pts = mesh.vertices[mesh.triangles]
    out = []
    for t in range(mesh.num_triangles):
        p0, p1, p2 = pts[t]
        J = np.array([p1 - p0, p2 - p0]).T
        area = 0.5 * abs(np.linalg.det(J))
        Jinv = np.linalg.inv(J)
        grads_t = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]]) @ Jinv
        for q in range(len(wts)):
            vals, grads = _basis_at(lam[q], grads_t)
            out.append((t, q, wts[q] * area, vals, grads))
    return out


def _velocity_at(lay, Y, t, vals, grads):
    dofs = lay.cell_dofs[t]
    u = np.array([vals @ Y[dofs], vals @ Y[lay.N1 + dofs]])
    gu = np.array([grads.T @ Y[dofs], grads.T @ Y[lay.N1 + dofs]])
    return u, gu  # gu[c, d] = d u_c / d x_d


def _convection_value(mesh, lay, coeffs, u_vec, v_vec, w_vec):
    total = 0.0
    for t, q, wa, vals, grads in _dense_forms(mesh, lay, coeffs):
        cw = coeffs.conv[t, q]
        u, _ = _velocity_at(lay, u_vec, t, vals, grads)
        v, gv = _velocity_at(lay, v_vec, t, vals, grads)
        w, _ = _velocity_at(lay, w_vec, t, vals, grads)
        total += wa * cw * float((gv @ u) @ w)
    return total


def _viscous_mass_value(mesh, lay, coeffs, u_vec, v_vec):
    total = 0.0
    for t, q, wa, vals, grads in _dense_forms(mesh, lay, coeffs):
        u, gu = _velocity_at(lay, u_vec, t, vals, grads)
        v, gv = _velocity_at(lay, v_vec, t, vals, grads)
        total += wa * (coeffs.visc[t, q] * np.sum(gu * gv)
                       + coeffs.mass[t, q] * u @ v)
    return total


def _divergence_value(mesh, lay, coeffs, v_vec, p_vec):
    total = 0.0
    for t, q, wa, vals, grads in _dense_forms(mesh, lay, coeffs):
        _, gv = _velocity_at(lay, v_vec, t, vals, grads)
        pr = vals[:3] @ p_vec[mesh.triangles[t]]
        total += -wa * coeffs.divc[t, q] * (gv[0, 0] + gv[1, 1]) * pr
    return total


@pytest.fixture(scope="module")
def small_assembly():
    mesh = generate_mesh(DomainSpec(outer=(0.0, 0.0, 1.0, 1.0), h_mesh=0.3))
    lay = build_spaces(mesh)
    g = LevelField.interpolate(mesh, compose_disks([(0.5, 0.5)], [0.25],
                                                   signed_distance=True))
    cfg = AssemblyConfig(nu=0.7, eps=0.05, divergence_form=PENALIZED_B)
    coeffs = evaluate_coefficients(lay, cfg, g)
    return mesh, lay, cfg, g, coeffs


def test_viscous_block_matches_dense_oracle(small_assembly, rng):
    mesh, lay, cfg, g, coeffs = small_assembly
    A, B = assemble_bilinear(lay, cfg, g, coeffs)
    for _ in range(3):
        u = rng.standard_normal(2 * lay.N1)
        v = rng.standard_normal(2 * lay.N1)
        want = _viscous_mass_value(mesh, lay, coeffs, u, v)
        got = float(u @ (A @ v))
        assert abs(got - want) < 1e-11 * max(1.0, abs(want))


def test_viscous_block_is_symmetric(small_assembly):
    _, lay, cfg, g, coeffs = small_assembly
    A, _ = assemble_bilinear(lay, cfg, g, coeffs)
    gap = abs(A - A.T).max()
    assert gap < 1e-12 * max(1.0, abs(A).max())


def test_divergence_block_matches_dense_oracle(small_assembly, rng):
    mesh, lay, cfg, g, coeffs = small_assembly
    _, B = assemble_bilinear(lay, cfg, g, coeffs)
    for _ in range(3):
        v = rng.standard_normal(2 * lay.N1)
        p = rng.standard_normal(lay.N2)
        want = _divergence_value(mesh, lay, coeffs, v, p)
        got = float(p @ (B @ v))
        assert abs(got - want) < 1e-11 * max(1.0, abs(want))


def test_convection_matches_skew_symmetrized_oracle(small_assembly, rng):
    mesh, lay, cfg, g, coeffs = small_assembly
    for _ in range(3):
        u = rng.standard_normal(2 * lay.N1)
        v = rng.standard_normal(2 * lay.N1)
        w = rng.standard_normal(2 * lay.N1)
        C1, _ = assemble_trilinear(lay, cfg, g, u, coeffs)
        want = 0.5 * (_convection_value(mesh, lay, coeffs, u, v, w)
                      - _convection_value(mesh, lay, coeffs, u, w, v))
        got = float(w @ (C1 @ v))
        assert abs(got - want) < 1e-11 * max(1.0, abs(want))


def test_convection_form_annihilates_equal_arguments(small_assembly, rng):
    _, lay, cfg, g, coeffs = small_assembly
    scale = 0.0
    worst = 0.0
    for _ in range(10):
        u = rng.standard_normal(2 * lay.N1)
        w = rng.standard_normal(2 * lay.N1)
        C1, _ = assemble_trilinear(lay, cfg, g, u, coeffs)
        dense = abs(C1).max() * np.abs(w).max() ** 2
        worst = max(worst, abs(float(w @ (C1 @ w))) / max(dense, 1e-30))
    assert worst < 1e-12


def test_load_vector_matches_dense_oracle(rng):
    mesh = generate_mesh(DomainSpec(outer=(0.0, 0.0, 1.0, 1.0), h_mesh=0.3))
    lay = build_spaces(mesh)

    def body(x):
        x = np.asarray(x)
        return np.stack([1.0 + x[..., 0], x[..., 1] ** 2], axis=-1)

    cfg = AssemblyConfig(nu=1.0, eps=0.1, body_force=body)
    coeffs = evaluate_coefficients(lay, cfg, None)
    F = assemble_load(lay, cfg, None, coeffs)
    for _ in range(3):
        w_vec = rng.standard_normal(2 * lay.N1)
        want = 0.0
        for t, q, wa, vals, grads in _dense_forms(mesh, lay, coeffs):
            pts = mesh.vertices[mesh.triangles[t]]
            xq = vals[:3] @ pts
            w, _ = _velocity_at(lay, w_vec, t, vals, grads)
            want += wa * coeffs.loadc[t, q] * (body(xq) @ w)
        got = float(F @ w_vec)
        assert abs(got - want) < 1e-11 * max(1.0, abs(want))


def test_traction_load_on_side_has_exact_total(unit_square_mesh):
    lay = build_spaces(unit_square_mesh)

    def pull(x):
        x = np.asarray(x)
        out = np.zeros(x.shape)
        out[..., 0] = 1.0
        return out

    cfg = AssemblyConfig(nu=1.0, eps=0.1, traction=pull,
                         traction_label="Gamma1")
    F = assemble_load(lay, cfg, None)
    comp1 = F[:lay.N1]
    # the side has unit length, so the total applied force is 1
    assert np.isclose(comp1.sum(), 1.0, atol=1e-12)
    side = np.unique(unit_square_mesh.edges_with_label("Gamma1"))
    inside = np.setdiff1d(np.arange(lay.V), side)
    assert np.allclose(comp1[inside], 0.0, atol=1e-15)
    assert np.allclose(F[lay.N1:], 0.0, atol=1e-15)


def test_exact_region_coefficients_are_sharp(square_disk_conforming):
    full, _ = square_disk_conforming
    lay = build_spaces(full)
    cfg = AssemblyConfig(nu=2.0, eps=0.03, divergence_form=PENALIZED_B)
    co = evaluate_coefficients(lay, cfg, EXACT_REGION)
    hole = full.triangles_in_region("Obstacle")
    fluid = full.triangles_in_region("Fluid")
    assert np.allclose(co.visc[hole], 0.03) and np.allclose(co.visc[fluid], 2.0)
    assert np.allclose(co.mass[hole], 0.03) and np.allclose(co.mass[fluid], 0.0)
    assert np.allclose(co.conv[hole], 0.03) and np.allclose(co.conv[fluid], 1.0)
    assert np.allclose(co.divc[hole], 0.03) and np.allclose(co.divc[fluid], 1.0)
    assert np.allclose(co.loadc[hole], 0.0) and np.allclose(co.loadc[fluid], 1.0)
    plain = evaluate_coefficients(lay, AssemblyConfig(nu=2.0, eps=0.03,
                                                      divergence_form=PLAIN_B),
                                  EXACT_REGION)
    assert np.allclose(plain.divc, 1.0)


def test_smoothed_coefficients_match_pointwise_formula(small_assembly):
    mesh, lay, cfg, g, coeffs = small_assembly
    geom = lay.geometry(cfg.quadrature_order)
    params = cfg.smoothing_for(mesh)
    gq = np.einsum("qj,tj->tq", geom["lam"], g.nodal_values[mesh.triangles])
    H, _ = smoothed_heaviside(gq, params)
    Hs, _ = smoothed_heaviside(gq, params.with_kind("shifted"))
    assert np.allclose(coeffs.visc, cfg.nu * (1.0 - H) + cfg.eps * Hs,
                       atol=1e-15)
    assert np.allclose(coeffs.mass, cfg.eps * Hs, atol=1e-15)
    assert np.allclose(coeffs.conv, (1.0 - Hs) + cfg.eps * Hs, atol=1e-15)
    assert np.allclose(coeffs.loadc, 1.0 - Hs, atol=1e-15)
    assert np.allclose(coeffs.divc, (1.0 - Hs) + cfg.eps * Hs, atol=1e-15)


def test_norms_of_linear_fields_are_exact(unit_square_mesh):
    m = unit_square_mesh
    V = m.num_vertices
    T = m.num_triangles
    x, y = m.vertices[:, 0], m.vertices[:, 1]
    u1, u2 = 1.0 + 2.0 * x, 3.0 * y
    flat = np.concatenate([u1, np.zeros(T), u2, np.zeros(T)])
    # integral of (1+2x)^2 + (3y)^2 over the unit square
    l2sq = 13.0 / 3.0 + 3.0
    assert np.isclose(compute_norm(m, flat, kind="L2") ** 2, l2sq, atol=1e-12)
    assert np.isclose(compute_norm(m, flat, kind="H1seminorm") ** 2, 13.0,
                      atol=1e-12)
    assert np.isclose(compute_norm(m, flat, kind="DivL2") ** 2, 25.0,
                      atol=1e-12)
    h1 = compute_norm(m, flat, kind="H1")
    assert np.isclose(h1 ** 2, l2sq + 13.0, atol=1e-12)
    # the (V, 2) and scalar entry points agree with the flat one
    pair = np.stack([u1, u2], axis=1)
    assert np.isclose(compute_norm(m, pair, kind="L2") ** 2, l2sq, atol=1e-12)
    assert np.isclose(compute_norm(m, x, kind="L2") ** 2, 1.0 / 3.0,
                      atol=1e-12)


def test_norm_restricted_to_region(square_disk_conforming):
    full, _ = square_disk_conforming
    ones = np.ones(full.num_vertices)
    hole_area = compute_norm(full, ones, region="Obstacle", kind="L2") ** 2
    assert abs(hole_area - np.pi * 0.04) < 2e-3


def test_assembly_config_validation():
    with pytest.raises(ConfigurationError):
        AssemblyConfig(nu=0.0)
    with pytest.raises(ConfigurationError):
        AssemblyConfig(eps=-1.0)
    with pytest.raises(ConfigurationError):
        AssemblyConfig(divergence_form="magic")
    with pytest.raises(ConfigurationError):
        AssemblyConfig(quadrature_order=3)


def test_matrix_coordinate_text_round_trips():
    from scipy.sparse import csr_matrix
    mat = csr_matrix(np.array([[1.5, 0.0], [0.0, -2.0], [0.25, 0.0]]))
    text = matrix_to_coordinate_text(mat)
    lines = text.strip().splitlines()
    entries = {(int(r), int(c)): float(v)
               for r, c, v in (ln.split() for ln in lines)}
    assert entries == {(0, 0): 1.5, (1, 1): -2.0, (2, 0): 0.25}
    # entries come out sorted by row, then column
    assert lines == sorted(lines, key=lambda ln: (int(ln.split()[0]),
                                                  int(ln.split()[1])))
