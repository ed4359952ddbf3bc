"""Accuracy studies: penalized vs body-fitted reference flow on one mesh.

Each data point solves both problems on the same obstacle-conforming mesh,
restricts the penalized solution to the fluid submesh (exact, no
interpolation), and records relative errors there.  Sweeps vary either the
penalization parameter on a fixed mesh or the mesh size at fixed
penalization.
"""

import numpy as np

from .errors import ConfigurationError, DegenerateInputError
from .fem import EXACT_REGION, AssemblyConfig, build_spaces, compute_norm
from .levelset import LevelField, domain_level_function
from .mesh import FLUID, DomainSpec, extract_submesh, generate_mesh
from .ns_solver import solve_navier_stokes, solve_reference_flux_constrained

EPSILON_SWEEP = "epsilon"
MESH_SWEEP = "mesh"


class ErrorRecord:
    """One sweep point: parameters, relative errors on the fluid region."""

    def __init__(self, epsilon, mesh_size, l2_rel, h1_rel, div_norm_omega,
                 newton_iters, p_l2_rel=None):
        self.epsilon = float(epsilon)
        self.mesh_size = float(mesh_size)
        self.l2_rel = float(l2_rel)
        self.h1_rel = float(h1_rel)
        self.div_norm_omega = float(div_norm_omega)
        self.newton_iters = int(newton_iters)
        self.p_l2_rel = None if p_l2_rel is None else float(p_l2_rel)
        for v in (self.l2_rel, self.h1_rel, self.div_norm_omega):
            if not np.isfinite(v) or v < 0:
                raise ConfigurationError("error record values must be finite and >= 0")

    def as_dict(self):
        d = {"epsilon": self.epsilon, "mesh_size": self.mesh_size,
             "l2_rel": self.l2_rel, "h1_rel": self.h1_rel,
             "div_norm_omega": self.div_norm_omega,
             "newton_iters": self.newton_iters}
        if self.p_l2_rel is not None:
            d["p_l2_rel"] = self.p_l2_rel
        return d

    def __repr__(self):
        return (f"ErrorRecord(eps={self.epsilon:g}, h={self.mesh_size:.4g}, "
                f"l2_rel={self.l2_rel:.4e}, h1_rel={self.h1_rel:.4e})")


class SweepBase:
    """Problem setup shared by all sweep points.

    domain_spec must describe the obstacles explicitly so conforming meshes
    can be generated; config carries physics (its eps is used as the fixed
    penalization during a mesh sweep).  coefficient_mode selects how the
    obstacle enters the forms: "exact-region" (sharp indicator on the
    conforming mesh, the zero-width limit of the smoothing) or "smoothed"
    (level-field coefficients with the configured width).
    """

    def __init__(self, domain_spec: DomainSpec, config: AssemblyConfig,
                 dirichlet=None, coefficient_mode=EXACT_REGION):
        if not domain_spec.obstacles:
            raise ConfigurationError("sweep setup needs at least one obstacle")
        if coefficient_mode not in (EXACT_REGION, "smoothed"):
            raise ConfigurationError(
                f"unknown coefficient mode {coefficient_mode!r}")
        self.domain_spec = domain_spec
        self.config = config
        self.dirichlet = dirichlet
        self.coefficient_mode = coefficient_mode


def restrict_state(full_layout, sub_mesh, Y, P=None):
    """Restrict full-mesh velocity/pressure DOFs to an extracted submesh.

    Uses the parent ids attached by extract_submesh; exact for conforming
    submeshes.  Returns Y_sub or (Y_sub, P_sub).
    """
    pv = sub_mesh.parent_vertex_ids
    pt = sub_mesh.parent_triangle_ids
    N1, V = full_layout.N1, full_layout.V
    Vs, Ts = len(pv), len(pt)
    N1s = Vs + Ts
    Ys = np.empty(2 * N1s)
    for c in range(2):
        comp = Y[c * N1:(c + 1) * N1]
        Ys[c * N1s:c * N1s + Vs] = comp[pv]
        Ys[c * N1s + Vs:(c + 1) * N1s] = comp[V + pt]
    if P is None:
        return Ys
    return Ys, P[pv]


def _one_point(mesh, sub, base, eps):
    cfg = base.config
    point_cfg = AssemblyConfig(
        nu=cfg.nu, eps=eps, smoothing=cfg.smoothing,
        quadrature_order=cfg.quadrature_order,
        divergence_form=cfg.divergence_form, traction=cfg.traction,
        traction_label=cfg.traction_label, body_force=cfg.body_force,
        uniform_smoothing=cfg.uniform_smoothing, pin_pressure=cfg.pin_pressure)
    ref_cfg = AssemblyConfig(
        nu=cfg.nu, eps=0.0, smoothing=cfg.smoothing,
        quadrature_order=cfg.quadrature_order,
        divergence_form=cfg.divergence_form, traction=cfg.traction,
        traction_label=cfg.traction_label, body_force=cfg.body_force,
        uniform_smoothing=cfg.uniform_smoothing, pin_pressure=cfg.pin_pressure)

    ref, _, ref_report = solve_reference_flux_constrained(
        sub, ref_cfg, dirichlet=base.dirichlet, raise_on_failure=True)

    layout = build_spaces(mesh)
    if base.coefficient_mode == EXACT_REGION:
        g = EXACT_REGION
    else:
        g = LevelField.interpolate(mesh, domain_level_function(base.domain_spec))
    state, report = solve_navier_stokes(
        layout, point_cfg, g, dirichlet=base.dirichlet,
        raise_on_failure=True)

    Ys, Ps = restrict_state(layout, sub, state.Y, state.P)
    dY = Ys - ref.Y
    ref_l2 = compute_norm(sub, ref.Y, kind="L2")
    ref_h1 = compute_norm(sub, ref.Y, kind="H1seminorm")
    l2_rel = compute_norm(sub, dY, kind="L2") / ref_l2
    h1_rel = compute_norm(sub, dY, kind="H1seminorm") / ref_h1
    div_omega = compute_norm(sub, Ys, kind="DivL2")
    ref_p = compute_norm(sub, ref.P, kind="L2")
    p_rel = compute_norm(sub, Ps - ref.P, kind="L2") / ref_p if ref_p > 0 else 0.0
    return ErrorRecord(eps, mesh.mean_edge_length, l2_rel, h1_rel,
                       div_omega, report.iterations, p_rel), ref_report


def run_sweep(kind, values, base: SweepBase):
    """Run an accuracy sweep; one ErrorRecord per value, in input order.

    kind "epsilon": values are penalization parameters, one shared
    conforming mesh.  kind "mesh": values are target mesh sizes, eps fixed
    from base.config.  Nonconvergence raises with the offending value named.
    """
    if kind not in (EPSILON_SWEEP, MESH_SWEEP):
        raise ConfigurationError(f"unknown sweep kind {kind!r}")
    values = list(values)
    if not values:
        raise ConfigurationError("sweep needs at least one value")
    records = []
    if kind == EPSILON_SWEEP:
        mesh = generate_mesh(base.domain_spec, conform_to_obstacles=True)
        sub = extract_submesh(mesh, FLUID)
        for eps in values:
            try:
                rec, _ = _one_point(mesh, sub, base, float(eps))
            except Exception as exc:
                raise type(exc)(f"sweep point epsilon={eps}: {exc}") from exc
            records.append(rec)
    else:
        eps = base.config.eps
        for h in values:
            spec = base.domain_spec.with_mesh_size(float(h))
            mesh = generate_mesh(spec, conform_to_obstacles=True)
            sub = extract_submesh(mesh, FLUID)
            try:
                rec, _ = _one_point(mesh, sub, base, eps)
            except Exception as exc:
                raise type(exc)(f"sweep point h={h}: {exc}") from exc
            records.append(rec)
    return records


def regression_slope(points) -> float:
    """Least-squares slope of y on x for a list of (x, y) pairs."""
    pts = np.asarray(list(points), dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 2:
        raise DegenerateInputError("need at least two (x, y) points")
    x, y = pts[:, 0], pts[:, 1]
    sxx = np.sum((x - x.mean()) ** 2)
    if sxx == 0.0:
        raise DegenerateInputError("all x values coincide")
    return float(np.sum((x - x.mean()) * (y - y.mean())) / sxx)


def records_to_csv(records) -> str:
    """Serialize sweep records as a CSV table (header + one row each)."""
    cols = ["epsilon", "mesh_size", "l2_rel", "h1_rel", "div_norm_omega",
            "newton_iters"]
    if any(r.p_l2_rel is not None for r in records):
        cols.append("p_l2_rel")
    lines = [",".join(cols)]
    for r in records:
        d = r.as_dict()
        lines.append(",".join(repr(d[c]) if isinstance(d[c], float)
                              else str(d[c]) for c in cols))
    return "\n".join(lines) + "\n"
