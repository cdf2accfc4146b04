"""Primal-dual active set solver for the discrete optimality system.

The discrete system couples the state equation, the adjoint equation and a
variational inequality for the piecewise-constant control. The active-set
iteration fixes the control at its bounds on the estimated active sets,
eliminates it on the inactive set via the clamp relation, and solves the
resulting 2x2 block linear system by sparse direct factorization.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import (assemble_a_h, assemble_load, assemble_mass,
                       build_edge_cache, control_coupling, element_geometry,
                       eval_on_elements, _quad_points)
from .controls import ControlField, clamp, control_measures
from .fem import P2Function, build_dofmap, quadrature

__all__ = [
    "ProblemSpec",
    "KktSolution",
    "Discretization",
    "PdasError",
    "discretize",
    "solve_linear_block",
    "solve_pdas",
    "solve_variational",
    "projection_ph",
]


class PdasError(RuntimeError):
    """Active-set iteration failed to terminate."""

    def __init__(self, message, signatures=None):
        super().__init__(message)
        self.signatures = signatures


@dataclass
class ProblemSpec:
    """Data of one control problem instance.

    ``kind`` selects distributed (volume source) or boundary (flux) control.
    ``f`` and ``u_d`` are vectorized callables of (x, y). ``exact`` may hold
    a manufactured solution (see ``cases``) for error reporting.
    """

    kind: str
    f: object
    u_d: object
    alpha: float = 1e-3
    lower: float = -750.0
    upper: float = -50.0
    eta: float = 10.0
    exact: object = None
    load_degree: int = 6

    def __post_init__(self):
        if self.kind not in ("distributed", "boundary"):
            raise ValueError("kind must be 'distributed' or 'boundary'")
        if self.alpha <= 0.0:
            raise ValueError("alpha must be positive")
        if (np.isfinite(self.lower) and np.isfinite(self.upper)
                and not self.lower < self.upper):
            raise ValueError("bounds must satisfy lower < upper")


@dataclass
class Discretization:
    """Assembled operators for one (spec, mesh) pair."""

    spec: ProblemSpec
    mesh: object
    dofmap: object
    cache: object
    stiffness: object          # SparseOperator
    mass: object               # SparseOperator
    coupling: sp.csr_matrix    # ndof x n_entities
    measures: np.ndarray
    load_f: np.ndarray         # int f v_i over all dofs
    load_ud: np.ndarray        # int u_d v_i over all dofs

    def full_coeffs(self, free_vec):
        out = np.zeros(self.dofmap.ndof)
        out[self.dofmap.free] = free_vec
        return out


def discretize(spec, mesh):
    dofmap = build_dofmap(mesh)
    cache = build_edge_cache(mesh, dofmap)
    a_op = assemble_a_h(mesh, dofmap, spec.eta, cache=cache)
    m_op = assemble_mass(mesh, dofmap)
    bmat, measures = control_coupling(mesh, dofmap, spec.kind, cache=cache)
    load_f = assemble_load(mesh, dofmap, spec.f, spec.load_degree)
    load_ud = assemble_load(mesh, dofmap, spec.u_d, spec.load_degree)
    return Discretization(spec, mesh, dofmap, cache, a_op, m_op, bmat,
                          measures, load_f, load_ud)


def backward_error(op_norm, x, residual, rhs):
    """Normwise relative backward error ||r|| / (||A|| ||x|| + ||b||)."""
    denom = op_norm * np.linalg.norm(x) + np.linalg.norm(rhs)
    if denom == 0.0:
        return 0.0
    return float(np.linalg.norm(residual) / denom)


def solve_linear_block(a_free, m_free, coupling_free, rhs_state, rhs_adjoint):
    """Solve [[A, C], [-M, A]] [u; phi] = [b1; b2] by sparse LU.

    Returns (u, phi, normwise backward error of the block system).
    """
    n = a_free.shape[0]
    block = sp.bmat([[a_free, coupling_free], [-m_free, a_free]],
                    format="csc")
    rhs = np.concatenate([rhs_state, rhs_adjoint])
    try:
        lu = spla.splu(block)
    except RuntimeError as exc:
        raise PdasError("block factorization failed: %s" % exc) from exc
    sol = lu.solve(rhs)
    res = backward_error(spla.norm(block, np.inf), sol,
                         block @ sol - rhs, rhs)
    return sol[:n], sol[n:], res


@dataclass
class KktSolution:
    """Solution triple with active sets and solver diagnostics."""

    u: P2Function
    phi: P2Function
    q: ControlField
    active_lower: np.ndarray
    active_upper: np.ndarray
    iterations: int
    state_residual: float
    adjoint_residual: float
    block_residual: float
    objective_history: list = field(default_factory=list)


def _residuals(ws, u_free, phi_free, qvals):
    """Backward errors of the state and adjoint equations at the iterate."""
    free = ws.dofmap.free
    a_f, m_f = ws.stiffness.free, ws.mass.free
    b_f = ws.coupling[free]
    a_norm = spla.norm(a_f, np.inf)
    rhs_state = ws.load_f[free] + b_f @ qvals
    r_state = a_f @ u_free - rhs_state
    rhs_adj = m_f @ u_free - ws.load_ud[free]
    r_adj = a_f @ phi_free - rhs_adj
    return (backward_error(a_norm, u_free, r_state, rhs_state),
            backward_error(a_norm, phi_free, r_adj, rhs_adj))


def _objective(ws, u_coeffs, qvals):
    """Discrete tracking functional 0.5||u - u_d||^2 + 0.5 alpha ||q||_Q^2."""
    geom = element_geometry(ws.mesh)
    rule = quadrature("triangle", 6)
    pts = _quad_points(ws.mesh, geom, rule)
    ud = np.broadcast_to(
        np.asarray(ws.spec.u_d(pts[..., 0], pts[..., 1]), dtype=float),
        pts.shape[:2])
    uvals = eval_on_elements(geom, ws.dofmap, u_coeffs, rule)
    track = float(np.einsum("q,tq->", rule.weights,
                            (uvals - ud) ** 2 * geom.det[:, None]))
    return 0.5 * track + 0.5 * ws.spec.alpha * float(
        np.sum(ws.measures * qvals ** 2))


def solve_pdas(spec, mesh, max_iter=50, ws=None):
    """Primal-dual active set iteration for the coupled optimality system.

    Active sets come from the raw (unclamped) control estimate
    -(1/alpha) Pi_h(B_h phi); entities with estimate at or beyond a bound are
    fixed there, the rest keep the clamp relation and are eliminated from the
    block system. Terminates when the active sets repeat.
    """
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    if ws is None:
        ws = discretize(spec, mesh)
    free = ws.dofmap.free
    a_f, m_f = ws.stiffness.free, ws.mass.free
    b_f = ws.coupling[free].tocsc()
    d_meas = ws.measures
    alpha = spec.alpha
    nent = len(d_meas)

    raw = np.zeros(nent)        # from phi = 0, q0 = clamp(0)
    prev_sig = None
    seen = []
    solution = None
    objective_history = []

    for it in range(1, max_iter + 1):
        act_up = (raw >= spec.upper) if np.isfinite(spec.upper) \
            else np.zeros(nent, dtype=bool)
        act_lo = (raw <= spec.lower) if np.isfinite(spec.lower) \
            else np.zeros(nent, dtype=bool)
        act_lo &= ~act_up
        sig = (act_up.tobytes(), act_lo.tobytes())
        if sig == prev_sig and solution is not None:
            u_free, phi_free, qvals, block_res = solution
            break
        seen.append(sig)
        prev_sig = sig

        inactive = ~(act_up | act_lo)
        b_in = b_f[:, inactive]
        scal = sp.diags(1.0 / (alpha * d_meas[inactive]))
        coupling_free = (b_in @ scal @ b_in.T).tocsc()
        q_fixed = np.zeros(nent)
        q_fixed[act_up] = spec.upper
        q_fixed[act_lo] = spec.lower
        rhs_state = ws.load_f[free] + b_f @ q_fixed
        rhs_adj = -ws.load_ud[free]
        u_free, phi_free, block_res = solve_linear_block(
            a_f, m_f, coupling_free, rhs_state, rhs_adj)

        raw = -(b_f.T @ phi_free) / (alpha * d_meas)
        qvals = q_fixed.copy()
        qvals[inactive] = raw[inactive]
        solution = (u_free, phi_free, qvals, block_res)
        objective_history.append(_objective(ws, ws.full_coeffs(u_free), qvals))
        if len(objective_history) >= 2 and \
                objective_history[-1] > objective_history[-2] * (1 + 1e-12):
            warnings.warn("PDAS objective increased at iteration %d" % it,
                          RuntimeWarning, stacklevel=2)
    else:
        raise PdasError(
            "active sets did not stabilize within %d iterations" % max_iter,
            signatures=seen[-2:])

    q = ControlField(spec.kind, qvals, spec.lower, spec.upper, d_meas)
    r_state, r_adj = _residuals(ws, u_free, phi_free, qvals)
    return KktSolution(
        u=P2Function(mesh, ws.dofmap, ws.full_coeffs(u_free)),
        phi=P2Function(mesh, ws.dofmap, ws.full_coeffs(phi_free)),
        q=q,
        active_lower=np.flatnonzero(act_lo),
        active_upper=np.flatnonzero(act_up),
        iterations=it - 1,
        state_residual=r_state,
        adjoint_residual=r_adj,
        block_residual=block_res,
        objective_history=objective_history,
    )


def _clamped_control_load(ws, phi_coeffs, degree=8):
    """Load vector of int clamp(-phi_h/alpha) v_i dx (distributed only)."""
    geom = element_geometry(ws.mesh)
    rule = quadrature("triangle", degree)
    from .fem import shape_values
    phivals = eval_on_elements(geom, ws.dofmap, phi_coeffs, rule)
    qvals = clamp(-phivals / ws.spec.alpha, ws.spec.lower, ws.spec.upper)
    vals = shape_values(rule.points)
    local = np.einsum("q,tq,qi->ti", rule.weights, qvals, vals)
    local *= geom.det[:, None]
    vec = np.zeros(ws.dofmap.ndof)
    np.add.at(vec, ws.dofmap.tri_dofs, local)
    return vec


def solve_variational(spec, mesh, tol=1e-10, max_iter=200, ws=None,
                      quad_degree=8):
    """Variational discretization: the control stays continuous.

    The control is the pointwise clamp of -B_h phi / alpha; a damped fixed
    point iterates on phi with the clamped coupling integrated elementwise.
    Only distributed control is supported. Returns (u, phi, q_callable)
    where the callable evaluates the clamped control at arbitrary points.
    """
    if spec.kind != "distributed":
        raise ValueError("variational discretization: distributed kind only")
    if ws is None:
        ws = discretize(spec, mesh)
    free = ws.dofmap.free
    lu = spla.splu(ws.stiffness.free)
    m_f = ws.mass.free

    phi = np.zeros(len(free))
    omega = 1.0
    prev_res = np.inf
    u = np.zeros(len(free))
    for _ in range(max_iter):
        load_q = _clamped_control_load(ws, ws.full_coeffs(phi), quad_degree)
        u = lu.solve(ws.load_f[free] + load_q[free])
        phi_new = lu.solve(m_f @ u - ws.load_ud[free])
        res = float(np.max(np.abs(phi_new - phi))) if len(phi) else 0.0
        if res <= tol:
            phi = phi_new
            break
        if res > prev_res:
            omega = max(0.25, 0.5 * omega)
        prev_res = res
        phi = phi + omega * (phi_new - phi)
    else:
        raise RuntimeError(
            "variational fixed point did not converge in %d iterations"
            % max_iter)

    u_fn = P2Function(mesh, ws.dofmap, ws.full_coeffs(u))
    phi_fn = P2Function(mesh, ws.dofmap, ws.full_coeffs(phi))

    def q_tilde(x, y):
        vals = evaluate_p2(phi_fn, x, y)
        return clamp(-vals / spec.alpha, spec.lower, spec.upper)

    return u_fn, phi_fn, q_tilde


def evaluate_p2(v, x, y):
    """Evaluate a P2 function at arbitrary points inside the domain."""
    from .fem import shape_values
    mesh = v.mesh
    pts = np.column_stack([np.atleast_1d(np.asarray(x, dtype=float)).ravel(),
                           np.atleast_1d(np.asarray(y, dtype=float)).ravel()])
    geom = element_geometry(mesh)
    out = np.empty(len(pts))
    for lo in range(0, len(pts), 256):
        chunk = pts[lo:lo + 256]
        rel = chunk[None, :, :] - geom.v0[:, None, :]
        ref = np.einsum("tab,tpb->tpa", geom.inv_jac, rel)
        lam0 = 1.0 - ref[..., 0] - ref[..., 1]
        inside = (ref[..., 0] >= -1e-10) & (ref[..., 1] >= -1e-10) \
            & (lam0 >= -1e-10)
        tri = np.argmax(inside, axis=0)
        sel = np.arange(len(chunk))
        if not inside[tri, sel].all():
            raise ValueError("point outside the mesh")
        vals = shape_values(ref[tri, sel])
        out[lo:lo + 256] = np.einsum(
            "pi,pi->p", vals, v.coeffs[v.dofmap.tri_dofs[tri]])
    return out.reshape(np.shape(x)) if np.ndim(x) else float(out[0])


def projection_ph(spec, mesh, which, ws=None, degree=8):
    """Discrete solutions of the auxiliary problems driven by exact data.

    ``which`` = "state": a_h(P_h u, v) = (f, v) + <q, B_h v> with the exact
    control q; "adjoint": a_h(v, P_h phi) = (u - u_d, v) with the exact
    state u. Requires ``spec.exact``.
    """
    if spec.exact is None:
        raise ValueError("projection requires a manufactured exact solution")
    if ws is None:
        ws = discretize(spec, mesh)
    free = ws.dofmap.free
    lu = spla.splu(ws.stiffness.free)
    case = spec.exact
    if which == "state":
        rhs = assemble_load(mesh, ws.dofmap, spec.f, spec.load_degree)
        if spec.kind == "distributed":
            rhs = rhs + assemble_load(mesh, ws.dofmap, case.q, degree)
        else:
            raise NotImplementedError("boundary-control projection")
    elif which == "adjoint":
        def misfit(x, y):
            return case.u(x, y) - spec.u_d(x, y)
        rhs = assemble_load(mesh, ws.dofmap, misfit, degree)
    else:
        raise ValueError("which must be 'state' or 'adjoint'")
    sol = lu.solve(rhs[free])
    return P2Function(mesh, ws.dofmap, ws.full_coeffs(sol))
