"""Level-set topology optimization of the penalized flow system.

The optimization unknown is the concatenated vector X = (Y, P, G):
velocity and pressure DOFs together with the nodal level field describing
the obstacle.  The flow equations enter as an equality constraint C(X) = 0
whose full Jacobian (including level-field sensitivities of every
coefficient) is assembled analytically; the driver minimizes the
quadratic-penalty functional J_rho = J_h + (rho/2) C^T C by projected
steepest descent with Armijo backtracking.  The flow system is solved by
Newton only once, to initialize (Y, P) at the starting geometry.
"""

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .errors import ConfigurationError, SolverError
from .fem import (AssemblyConfig, SpaceLayout, assemble_bilinear,
                  assemble_load, assemble_trilinear, evaluate_coefficients)
from .levelset import LevelField, check_admissibility
from .ns_solver import solve_navier_stokes

DISSIPATED_ENERGY = "dissipated-energy"
TRACKING = "tracking"


class OptVector:
    """Optimization unknown X = (Y, P, G) on a fixed layout."""

    def __init__(self, layout: SpaceLayout, Y, P, G):
        self.layout = layout
        self.Y = np.asarray(Y, dtype=float)
        self.P = np.asarray(P, dtype=float)
        self.G = np.asarray(G, dtype=float)
        if self.Y.shape != (2 * layout.N1,):
            raise ConfigurationError("Y does not match the layout")
        if self.P.shape != (layout.N2,):
            raise ConfigurationError("P does not match the layout")
        if self.G.shape != (layout.N3,):
            raise ConfigurationError("G does not match the layout")

    @classmethod
    def from_vector(cls, layout, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (layout.N,):
            raise ConfigurationError("vector length does not match the layout")
        m = 2 * layout.N1
        return cls(layout, x[:m], x[m:m + layout.N2], x[m + layout.N2:])

    def as_vector(self):
        return np.concatenate([self.Y, self.P, self.G])

    def copy(self):
        return OptVector(self.layout, self.Y.copy(), self.P.copy(),
                         self.G.copy())

    def level_field(self):
        return LevelField(self.G.copy())


class CostSpec:
    """Objective choice: dissipated energy, or tracking of a target velocity."""

    def __init__(self, kind=DISSIPATED_ENERGY, target=None):
        if kind not in (DISSIPATED_ENERGY, TRACKING):
            raise ConfigurationError(f"unknown cost kind {kind!r}")
        if kind == TRACKING:
            if target is None:
                raise ConfigurationError("tracking cost needs a target field")
            target = np.asarray(target, dtype=float)
        self.kind = kind
        self.target = target


class OptConfig:
    """Descent parameters for the penalty scheme.

    The initial step is auto-scaled by the sup-norm of the first projected
    gradient; the plateau rule stops after plateau_steps consecutive
    iterations with a relative J_rho change below plateau_tol.
    """

    def __init__(self, rho, initial_step=1.0, armijo_factor=0.5, armijo_c=1e-4,
                 max_backtracks=30, max_iter=200, snapshot_every=25,
                 plateau_tol=1e-3, plateau_steps=50,
                 freeze_boundary_level=True, step_growth=1.3):
        if rho < 0:
            raise ConfigurationError("penalty weight must be nonnegative")
        if initial_step <= 0:
            raise ConfigurationError("initial step must be positive")
        if not (0 < armijo_factor < 1):
            raise ConfigurationError("backtracking factor must be in (0, 1)")
        if not (0 < armijo_c < 1):
            raise ConfigurationError("Armijo constant must be in (0, 1)")
        self.rho = float(rho)
        self.initial_step = float(initial_step)
        self.armijo_factor = float(armijo_factor)
        self.armijo_c = float(armijo_c)
        self.max_backtracks = int(max_backtracks)
        self.max_iter = int(max_iter)
        self.snapshot_every = int(snapshot_every)
        self.plateau_tol = float(plateau_tol)
        self.plateau_steps = int(plateau_steps)
        self.freeze_boundary_level = bool(freeze_boundary_level)
        self.step_growth = float(step_growth)


class IterateRecord:
    """Per-iteration descent data."""

    def __init__(self, iteration, j_h, j_rho, constraint_inf, divergence_inf,
                 step, accepted, grad_norm2, backtracks):
        self.iteration = int(iteration)
        self.j_h = float(j_h)
        self.j_rho = float(j_rho)
        self.constraint_inf = float(constraint_inf)
        self.divergence_inf = float(divergence_inf)
        self.step = float(step)
        self.accepted = bool(accepted)
        self.grad_norm2 = float(grad_norm2)
        self.backtracks = int(backtracks)
        for v in (self.j_h, self.j_rho, self.constraint_inf,
                  self.divergence_inf, self.step, self.grad_norm2):
            if not np.isfinite(v):
                raise SolverError("non-finite iterate data")

    def as_dict(self):
        return {"iteration": self.iteration, "j_h": self.j_h,
                "j_rho": self.j_rho, "constraint_inf": self.constraint_inf,
                "divergence_inf": self.divergence_inf, "step": self.step,
                "accepted": self.accepted, "grad_norm2": self.grad_norm2,
                "backtracks": self.backtracks}


class Snapshot:
    """Geometry snapshot: level field plus diagnostics, never filtered."""

    def __init__(self, iteration, level, obstacle_components,
                 boundary_sign_ok, j_h):
        self.iteration = int(iteration)
        self.level = level
        self.obstacle_components = int(obstacle_components)
        self.boundary_sign_ok = bool(boundary_sign_ok)
        self.j_h = float(j_h)


def obstacle_component_count(mesh, G) -> int:
    """Number of connected pieces of the nonnegative level region."""
    pos = np.asarray(G) >= 0.0
    idx = np.nonzero(pos)[0]
    if idx.size == 0:
        return 0
    renum = -np.ones(mesh.num_vertices, dtype=np.int64)
    renum[idx] = np.arange(idx.size)
    edges = mesh.edges()
    keep = pos[edges[:, 0]] & pos[edges[:, 1]]
    e = renum[edges[keep]]
    graph = sp.coo_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])),
                          shape=(idx.size, idx.size))
    n, _ = connected_components(graph, directed=False)
    return int(n)


# ------------------------------------------------------------- assembly
class _Forms:
    """All matrices, vectors and local data shared by C, jac C and costs."""

    def __init__(self, X: OptVector, layout, config):
        self.layout = layout
        self.config = config
        g = LevelField(X.G)
        self.coeffs = evaluate_coefficients(layout, config, g)
        self.A, self.B = assemble_bilinear(layout, config, g, self.coeffs)
        self.C1, self.C2 = assemble_trilinear(layout, config, g, X.Y,
                                              self.coeffs)
        self.F = assemble_load(layout, config, g, self.coeffs)
        geom = layout.geometry(config.quadrature_order)
        self.geom = geom
        self.wa = geom["weights"][None, :] * geom["area"][:, None]
        N1, V = layout.N1, layout.V
        yl = np.stack([X.Y[:N1][layout.cell_dofs],
                       X.Y[N1:][layout.cell_dofs]], axis=2)
        self.uq = np.einsum("qa,tac->tqc", geom["vals"], yl)
        self.gu = np.einsum("tqad,tac->tqcd", geom["grads"], yl)
        self.pq = np.einsum("qk,tk->tq", geom["lam"],
                            X.P[layout.mesh.triangles])

    def momentum_residual(self, X):
        mom = (self.A @ X.Y + self.C1 @ X.Y + self.B.T @ X.P - self.F)
        mom[self.layout.dirichlet_dofs] = X.Y[self.layout.dirichlet_dofs]
        return mom

    def divergence_residual(self, X):
        return self.B @ X.Y

    def level_jacobian_blocks(self):
        """(jac13, Bprime): level-field derivatives of momentum and divergence."""
        lay, geom, co = self.layout, self.geom, self.coeffs
        lam, vals, grads = geom["lam"], geom["vals"], geom["grads"]
        wa, uq, gu, pq = self.wa, self.uq, self.gu, self.pq

        # momentum block, local shape (T, comp, basis, hat)
        loc = np.einsum("tq,tqcd,tqad,qj->tcaj", wa * co.dvisc, gu, grads, lam)
        loc += np.einsum("tq,tqc,qa,qj->tcaj", wa * co.dmass, uq, vals, lam)
        conv1 = np.einsum("tqd,tqcd->tqc", uq, gu)  # (y . grad) y
        loc += 0.5 * np.einsum("tq,tqc,qa,qj->tcaj", wa * co.dconv, conv1,
                               vals, lam)
        udotg = np.einsum("tqd,tqad->tqa", uq, grads)
        loc -= 0.5 * np.einsum("tq,tqa,tqc,qj->tcaj", wa * co.dconv, udotg,
                               uq, lam)
        loc -= np.einsum("tq,tqac,qj->tcaj", wa * co.ddivc * pq, grads, lam)
        if self.config.body_force is not None:
            fq = np.asarray(self.config.body_force(geom["xq"]), dtype=float)
            loc -= np.einsum("tq,tqc,qa,qj->tcaj", wa * co.dloadc, fq,
                             vals, lam)

        N1 = lay.N1
        rows = (np.arange(2)[None, :, None, None] * N1
                + lay.cell_dofs[:, None, :, None])
        cols = lay.mesh.triangles[:, None, None, :]
        rows = np.broadcast_to(rows, loc.shape)
        cols = np.broadcast_to(cols, loc.shape)
        jac13 = sp.coo_matrix((loc.ravel(), (rows.ravel(), cols.ravel())),
                              shape=(2 * N1, lay.N3)).tocsr()

        divy = gu[:, :, 0, 0] + gu[:, :, 1, 1]
        locb = -np.einsum("tq,qp,qj->tpj", wa * co.ddivc * divy, lam, lam)
        prow = np.broadcast_to(lay.mesh.triangles[:, :, None], locb.shape)
        pcol = np.broadcast_to(lay.mesh.triangles[:, None, :], locb.shape)
        bprime = sp.coo_matrix((locb.ravel(), (prow.ravel(), pcol.ravel())),
                               shape=(lay.N2, lay.N3)).tocsr()
        return jac13, bprime

    def cost(self, spec: CostSpec):
        """(J_h, dJ/dY, dJ/dG) with the configured smoothed cutoff."""
        lay, co, geom = self.layout, self.coeffs, self.geom
        wa = self.wa
        if spec.kind == DISSIPATED_ENERGY:
            e = 0.5 * (self.gu + np.swapaxes(self.gu, 2, 3))
            dens = np.einsum("tqcd,tqcd->tq", e, e)
            gY = 2.0 * np.einsum("tq,tqcd,tqad->tca", wa * co.loadc, e,
                                 geom["grads"])
        else:
            V, N1, T = lay.V, lay.N1, lay.T
            yd = spec.target
            if yd.shape != (2 * N1,):
                raise ConfigurationError("target field does not match layout")
            ydl = np.stack([yd[:N1][lay.cell_dofs],
                            yd[N1:][lay.cell_dofs]], axis=2)
            ydq = np.einsum("qa,tac->tqc", geom["vals"], ydl)
            diff = self.uq - ydq
            dens = np.einsum("tqc,tqc->tq", diff, diff)
            gY = 2.0 * np.einsum("tq,tqc,qa->tca", wa * co.loadc, diff,
                                 geom["vals"])
        value = float(np.sum(wa * co.loadc * dens))

        gradY = np.zeros(2 * lay.N1)
        idx = (np.arange(2)[None, :, None] * lay.N1
               + lay.cell_dofs[:, None, :])
        np.add.at(gradY, idx.ravel(), gY.ravel())

        gradG = np.zeros(lay.N3)
        gG = np.einsum("tq,qj->tj", wa * co.dloadc * dens, geom["lam"])
        np.add.at(gradG, lay.mesh.triangles.ravel(), gG.ravel())
        return value, gradY, gradG


def constraint_residual(X: OptVector, layout, config) -> np.ndarray:
    """The flow-system residual C(X) of length M = 2N1 + N2.

    Momentum rows carry identity Dirichlet replacement (homogeneous data);
    divergence rows are B(G) Y with the configured divergence form.
    """
    forms = _Forms(X, layout, config)
    return np.concatenate([forms.momentum_residual(X),
                           forms.divergence_residual(X)])


def _jacobian_from_forms(forms, layout):
    jac13, bprime = forms.level_jacobian_blocks()
    top = sp.hstack([forms.A + forms.C1 + forms.C2, forms.B.T, jac13],
                    format="csr")
    bottom = sp.hstack([forms.B,
                        sp.csr_matrix((layout.N2, layout.N2)), bprime],
                       format="csr")
    jac = sp.vstack([top, bottom], format="csr")
    rows = layout.dirichlet_dofs
    mask = np.ones(jac.shape[0])
    mask[rows] = 0.0
    jac = sp.diags(mask) @ jac
    jac = jac + sp.coo_matrix(
        (np.ones(len(rows)), (rows, rows)), shape=jac.shape)
    return jac.tocsr()


def constraint_jacobian(X: OptVector, layout, config):
    """Full analytic Jacobian of C, sparse M x N.

    Velocity block A + C1 + C2, pressure block B^T, level block from the
    Heaviside chain rule through every coefficient.  Dirichlet rows are
    identity in their velocity column and zero elsewhere.
    """
    forms = _Forms(X, layout, config)
    return _jacobian_from_forms(forms, layout)


def cost_and_gradient(X: OptVector, spec: CostSpec, layout, config):
    """J_h(X) and its gradient over all N components (pressure block zero)."""
    forms = _Forms(X, layout, config)
    value, gradY, gradG = forms.cost(spec)
    grad = np.concatenate([gradY, np.zeros(layout.N2), gradG])
    return value, grad


def _penalized_vg_from_forms(forms, X, spec, rho, layout):
    value, gradY, gradG = forms.cost(spec)
    grad = np.concatenate([gradY, np.zeros(layout.N2), gradG])
    C = np.concatenate([forms.momentum_residual(X),
                        forms.divergence_residual(X)])
    if rho > 0:
        jac = _jacobian_from_forms(forms, layout)
        grad = grad + rho * (jac.T @ C)
        value = value + 0.5 * rho * float(C @ C)
    return value, grad, C


def penalized_value_and_gradient(X: OptVector, spec: CostSpec, rho,
                                 layout, config):
    """J_rho = J_h + (rho/2) C^T C and its gradient grad J_h + rho jac^T C."""
    if rho < 0:
        raise ConfigurationError("penalty weight must be nonnegative")
    forms = _Forms(X, layout, config)
    value, grad, _ = _penalized_vg_from_forms(forms, X, spec, rho, layout)
    return value, grad


def _penalized_value(X: OptVector, spec, rho, layout, config):
    # value-only path for line-search trials: no Jacobian assembly
    forms = _Forms(X, layout, config)
    value, _, _ = forms.cost(spec)
    C = np.concatenate([forms.momentum_residual(X),
                        forms.divergence_residual(X)])
    return value + 0.5 * rho * float(C @ C), forms, C


def _frozen_components(layout, opt):
    frozen = [layout.dirichlet_dofs]
    if opt.freeze_boundary_level:
        bverts = np.unique(layout.mesh.boundary_edges.ravel())
        frozen.append(2 * layout.N1 + layout.N2 + bverts)
    return np.concatenate(frozen)


def optimize(initial_G: LevelField, spec: CostSpec, opt: OptConfig,
             layout, config):
    """Projected steepest descent on J_rho from an admissible level field.

    (Y, P) are initialized by one Newton flow solve at the initial geometry
    and evolve by descent afterwards.  The descent direction is the
    negative gradient with clamped velocity components and outer-boundary
    level components zeroed, which preserves the Dirichlet data and the
    boundary sign condition exactly.  Returns (history, final X, snapshots).
    """
    mesh = layout.mesh
    report = check_admissibility(initial_G, mesh)
    if not report.boundary_sign_ok:
        raise ConfigurationError(
            "initial level field must be negative on the outer boundary")

    state, newton = solve_navier_stokes(layout, config, initial_G,
                                        raise_on_failure=True)
    X = OptVector(layout, state.Y.copy(), state.P.copy(),
                  initial_G.nodal_values.copy())

    frozen = _frozen_components(layout, opt)
    history = []
    snapshots = []

    def take_snapshot(it, j_h):
        G = X.G
        snapshots.append(Snapshot(
            it, LevelField(G.copy()), obstacle_component_count(mesh, G),
            bool(np.all(G[np.unique(mesh.boundary_edges.ravel())] < 0.0)),
            j_h))

    forms0 = _Forms(X, layout, config)
    j_rho, grad, C0 = _penalized_vg_from_forms(forms0, X, spec, opt.rho,
                                               layout)
    if not np.isfinite(j_rho):
        raise SolverError("non-finite penalized cost at the initial point")
    direction = -grad
    direction[frozen] = 0.0
    gnorm_inf = np.abs(direction).max()
    if gnorm_inf == 0.0:
        gnorm_inf = 1.0
    step = opt.initial_step / gnorm_inf
    base_cap = 10.0 * step

    j_h0, _, _ = forms0.cost(spec)
    history.append(IterateRecord(0, j_h0, j_rho, float(np.abs(C0).max()),
                                 float(np.abs(C0[2 * layout.N1:]).max()),
                                 0.0, True, float(direction @ direction), 0))
    take_snapshot(0, j_h0)
    plateau_run = 0

    for it in range(1, opt.max_iter + 1):
        gn2 = float(direction @ direction)
        trial = step
        accepted = False
        backtracks = 0
        for _ in range(opt.max_backtracks + 1):
            Xn = OptVector.from_vector(layout,
                                       X.as_vector() + trial * direction)
            j_new, forms_n, C_n = _penalized_value(Xn, spec, opt.rho,
                                                   layout, config)
            if np.isfinite(j_new) and \
                    j_new <= j_rho - opt.armijo_c * trial * gn2:
                accepted = True
                break
            trial *= opt.armijo_factor
            backtracks += 1
        if accepted:
            X = Xn
            delta = abs(j_rho - j_new)
            j_h, _, _ = forms_n.cost(spec)
            div_inf = float(np.abs(C_n[2 * layout.N1:]).max())
            c_inf = float(np.abs(C_n).max())
            history.append(IterateRecord(it, j_h, j_new, c_inf, div_inf,
                                         trial, True, gn2, backtracks))
            if backtracks == 0:
                step = min(trial * opt.step_growth, base_cap)
            else:
                step = trial
            j_rho, grad, _ = _penalized_vg_from_forms(forms_n, X, spec,
                                                      opt.rho, layout)
            direction = -grad
            direction[frozen] = 0.0
            if delta <= opt.plateau_tol * (1.0 + abs(j_rho)):
                plateau_run += 1
            else:
                plateau_run = 0
        else:
            # stall: keep the iterate, shrink the base step, move on
            step *= opt.armijo_factor
            j_h, _, _ = _Forms(X, layout, config).cost(spec)
            C_now = constraint_residual(X, layout, config)
            div_now = float(np.abs(
                C_now[2 * layout.N1:]).max())
            history.append(IterateRecord(it, j_h, j_rho,
                                         float(np.abs(C_now).max()), div_now,
                                         0.0, False, gn2, backtracks))
            plateau_run += 1

        if opt.snapshot_every > 0 and it % opt.snapshot_every == 0:
            take_snapshot(it, history[-1].j_h)
        if plateau_run >= opt.plateau_steps:
            break

    if not snapshots or snapshots[-1].iteration != history[-1].iteration:
        take_snapshot(history[-1].iteration if history else 0,
                      history[-1].j_h if history else j_h0)
    return history, X, snapshots


def history_to_csv(history) -> str:
    """Serialize descent records as CSV (one row per iteration)."""
    cols = ["iteration", "j_h", "j_rho", "constraint_inf", "divergence_inf",
            "step", "accepted", "grad_norm2", "backtracks"]
    lines = [",".join(cols)]
    for r in history:
        d = r.as_dict()
        parts = []
        for c in cols:
            v = d[c]
            parts.append(repr(v) if isinstance(v, float) else str(v))
        lines.append(",".join(parts))
    return "\n".join(lines) + "\n"
