"""Inner convex solves: minimize the elastic energy at a fixed crack set.

For the quadratic exponent pair (p = q = 2) the problem is a symmetric
positive definite linear system; it is solved directly (dense Cholesky up to
200 free DOFs, which doubles as the reference path) or by diagonally
preconditioned conjugate gradients beyond that.  For any other exponents a
damped Newton iteration with Armijo backtracking runs on the free DOFs,
cold-started from the boundary interpolant so results do not depend on
evaluation order.

A run with zero confinement and a crack that isolates a piece of the body
from the Dirichlet boundary has no bounded minimizer; this surfaces as a
``FloatingComponentError`` naming the component rather than a pseudo-inverse
solution, keeping the coercivity requirement of the model visible.
"""

from __future__ import annotations

import time
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

from .broken import BrokenField, CrackSet, DofTopology, _corner_structure, build_topology, trace_on_surface_part
from .energy import (
    EnergyModel,
    body_hessian_coeff,
    body_value_and_gradient,
    elastic_energy,
    stress,
    stress_jacobian,
    surface_value_and_gradient,
)
from .mesh import Mesh

__all__ = [
    "SolveReport",
    "SolveError",
    "FloatingComponentError",
    "ElasticSolver",
    "minimize_elastic",
    "euler_residual",
    "assemble_gradient",
    "assemble_forms",
]

_DENSE_LIMIT = 200
_NEWTON_CAP = 200
_ARMIJO = 1e-4


class SolveError(RuntimeError):
    """Solver failed to reach the requested residual."""


class FloatingComponentError(SolveError):
    """A connected piece of the broken body has no constraint and no confinement."""


@dataclass
class SolveReport:
    iterations: int
    residual: float
    energy: float
    wall_time: float
    method: str
    n_free: int


# ---------------------------------------------------------------------------
# assembly helpers
# ---------------------------------------------------------------------------

def assemble_forms(mesh: Mesh, topo: DofTopology, stiff_coef, mass_coef) -> scipy.sparse.csr_matrix:
    """Assemble sum_T stiff[T] * (Gt G) + mass[T]/9 * ones(3,3) on the DOFs.

    With stiff = area * mu and mass = area * lam this is the Hessian of the
    quadratic elastic energy; other coefficient choices reuse the same
    scatter (e.g. the Gram operator of the dual-certificate projection).
    """
    m = mesh.n_triangles
    stiff = np.broadcast_to(np.asarray(stiff_coef, dtype=float), (m,))
    mass = np.broadcast_to(np.asarray(mass_coef, dtype=float), (m,))
    g = mesh.grad_op
    local = np.einsum("t,tki,tkj->tij", stiff, g, g)
    local = local + (mass / 9.0)[:, None, None] * np.ones((3, 3))
    rows = np.repeat(topo.corner_dof, 3, axis=1).ravel()
    cols = np.tile(topo.corner_dof, (1, 3)).ravel()
    mat = scipy.sparse.coo_matrix(
        (local.ravel(), (rows, cols)), shape=(topo.n_dofs, topo.n_dofs)
    )
    return mat.tocsr()


def _scatter_corner(topo: DofTopology, per_corner: np.ndarray) -> np.ndarray:
    out = np.zeros(topo.n_dofs)
    np.add.at(out, topo.corner_dof.ravel(), per_corner.ravel())
    return out


def _surface_corner_dofs(mesh: Mesh, topo: DofTopology) -> np.ndarray:
    """DOF ids of the two endpoints of each surface-force edge, (n_surf, 2)."""
    ids = mesh.surface_edges
    out = np.empty((len(ids), 2), dtype=int)
    tris = mesh.triangles
    for k, e in enumerate(ids):
        t = int(mesh.edge_tris[e, 0])
        for j, v in enumerate(mesh.edges[e]):
            loc = int(np.flatnonzero(tris[t] == v)[0])
            out[k, j] = topo.corner_dof[t, loc]
    return out


def assemble_gradient(model: EnergyModel, mesh: Mesh, t: float, u: BrokenField) -> np.ndarray:
    """Full DOF gradient of the elastic energy W - F - G at ``u``."""
    topo = u.topology
    grads = u.gradients()
    tri = np.arange(mesh.n_triangles)
    sig = stress(model.bulk, tri, grads)                      # (m, 2)
    per_corner = mesh.tri_area[:, None] * np.einsum("tk,tki->ti", sig, mesh.grad_op)
    out = _scatter_corner(topo, per_corner)

    _, dens = body_value_and_gradient(model.body, t, u)
    out -= _scatter_corner(topo, np.repeat((mesh.tri_area * dens / 3.0)[:, None], 3, axis=1))

    ids = mesh.surface_edges
    if len(ids):
        _, g_dens = surface_value_and_gradient(model.surface, t, trace_on_surface_part(u), mesh)
        w = mesh.edge_length[ids] * g_dens / 2.0
        sd = _surface_corner_dofs(mesh, topo)
        np.subtract.at(out, sd[:, 0], w)
        np.subtract.at(out, sd[:, 1], w)
    return out


def _assemble_hessian(model: EnergyModel, mesh: Mesh, t: float, u: BrokenField) -> scipy.sparse.csr_matrix:
    topo = u.topology
    grads = u.gradients()
    tri = np.arange(mesh.n_triangles)
    d = stress_jacobian(model.bulk, tri, grads)               # (m, 2, 2)
    g = mesh.grad_op
    local = mesh.tri_area[:, None, None] * np.einsum("tki,tkl,tlj->tij", g, d, g)
    c = mesh.tri_area * body_hessian_coeff(model.body, t, u.tri_means())
    local = local + (c / 9.0)[:, None, None] * np.ones((3, 3))
    rows = np.repeat(topo.corner_dof, 3, axis=1).ravel()
    cols = np.tile(topo.corner_dof, (1, 3)).ravel()
    return scipy.sparse.coo_matrix(
        (local.ravel(), (rows, cols)), shape=(topo.n_dofs, topo.n_dofs)
    ).tocsr()


# ---------------------------------------------------------------------------
# the solver
# ---------------------------------------------------------------------------

class _CrackData:
    """Per-crack-set immutable solve structure, cached inside ElasticSolver."""

    __slots__ = ("structure", "matrix", "free", "cons", "factor", "k_fc",
                 "surf_dofs", "components")

    def __init__(self, model: EnergyModel, mesh: Mesh, crack: CrackSet, quadratic: bool):
        self.structure = _corner_structure(mesh, crack)
        topo = build_topology(mesh, crack, None, _structure=self.structure)
        self.free = topo.free_dofs
        self.cons = topo.constrained_dofs
        self.surf_dofs = _surface_corner_dofs(mesh, topo) if len(mesh.surface_edges) else None
        self.components = _dof_components(topo)
        self.matrix = None
        self.factor = None
        self.k_fc = None
        if quadratic:
            if model.body.lam == 0.0:
                _raise_if_floating(topo, self.components)
            stiff = mesh.tri_area * model.bulk.mu_at(np.arange(mesh.n_triangles))
            mass = mesh.tri_area * model.body.lam
            k = assemble_forms(mesh, topo, stiff, mass)
            self.matrix = k
            kff = k[self.free][:, self.free]
            self.k_fc = k[self.free][:, self.cons]
            if len(self.free) <= _DENSE_LIMIT:
                self.factor = ("dense", scipy.linalg.cho_factor(kff.toarray()))
            else:
                diag = kff.diagonal()
                diag = np.where(diag > 0, diag, 1.0)
                self.factor = ("cg", kff, scipy.sparse.diags(1.0 / diag))


def _raise_if_floating(topo: DofTopology, components: list[np.ndarray]) -> None:
    constrained = set(topo.constrained_dofs.tolist())
    for comp in components:
        if not any(int(d) in constrained for d in comp):
            verts = sorted({int(topo.dof_vertex[d]) for d in comp})
            raise FloatingComponentError(
                "component with no Dirichlet constraint and zero confinement "
                f"(vertices {verts}); the minimum is unbounded below or non-unique"
            )


def _dof_components(topo: DofTopology) -> list[np.ndarray]:
    """Connected components of the DOF graph (DOFs sharing a triangle)."""
    n = topo.n_dofs
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for row in topo.corner_dof:
        r = find(int(row[0]))
        for other in row[1:]:
            ro = find(int(other))
            if ro != r:
                if ro < r:
                    r, ro = ro, r
                parent[ro] = r
    groups: dict[int, list[int]] = {}
    for d in range(n):
        groups.setdefault(find(d), []).append(d)
    return [np.asarray(v) for v in groups.values()]


class ElasticSolver:
    """Minimizes the elastic energy over the broken space at fixed cracks.

    Solve structures (DOF layout, stiffness factorization) are cached per
    crack set, so sweeping many candidate cracks over many times reuses the
    expensive parts.  The cache is bounded LRU.
    """

    def __init__(self, model: EnergyModel, mesh: Mesh, cache_size: int = 8192):
        model.validate(mesh)
        self.model = model
        self.mesh = mesh
        self.quadratic = model.p == 2.0 and model.q == 2.0
        self.cache_size = cache_size
        self._cache: OrderedDict[tuple, _CrackData] = OrderedDict()

    def _data(self, crack: CrackSet) -> _CrackData:
        key = crack.edge_ids
        data = self._cache.get(key)
        if data is None:
            data = _CrackData(self.model, self.mesh, crack, self.quadratic)
            self._cache[key] = data
            if len(self._cache) > self.cache_size:
                self._cache.popitem(last=False)
        else:
            self._cache.move_to_end(key)
        return data

    def topology(self, crack: CrackSet, t: float) -> DofTopology:
        data = self._data(crack)
        return build_topology(self.mesh, crack, self.model.boundary.value(t),
                              _structure=data.structure)

    def _check_floating(self, data: _CrackData, topo: DofTopology) -> None:
        if self.model.body.lam > 0:
            return
        _raise_if_floating(topo, data.components)

    def _load_vector(self, topo: DofTopology, data: _CrackData, t: float) -> np.ndarray:
        mesh = self.mesh
        b = np.zeros(topo.n_dofs)
        f = self.model.body.table.value(t)
        np.add.at(b, topo.corner_dof.ravel(),
                  np.repeat(mesh.tri_area * f / 3.0, 3))
        if data.surf_dofs is not None:
            g = self.model.surface.table.value(t)
            w = mesh.edge_length[mesh.surface_edges] * g / 2.0
            np.add.at(b, data.surf_dofs[:, 0], w)
            np.add.at(b, data.surf_dofs[:, 1], w)
        return b

    def solve(self, crack: CrackSet, t: float, tol: float = 1e-10):
        """Return (field, report) with the free-DOF gradient norm at most tol."""
        start = time.perf_counter()
        data = self._data(crack)
        topo = self.topology(crack, t)
        self._check_floating(data, topo)
        if self.quadratic:
            field, iters, res, method = self._solve_quadratic(topo, data, t, tol)
        else:
            field, iters, res, method = self._solve_newton(topo, t, tol)
        energy, _ = elastic_energy(self.model, self.mesh, t, field)
        report = SolveReport(
            iterations=iters, residual=res, energy=energy,
            wall_time=time.perf_counter() - start, method=method,
            n_free=topo.n_free,
        )
        return field, report

    def _solve_quadratic(self, topo: DofTopology, data: _CrackData, t: float, tol: float):
        b = self._load_vector(topo, data, t)
        free, cons = data.free, data.cons
        u = topo.dirichlet_values.copy()
        rhs = b[free] - (data.k_fc @ u[cons] if len(cons) else 0.0)
        kind = data.factor[0]
        iters = 1
        if len(free):
            if kind == "dense":
                x = scipy.linalg.cho_solve(data.factor[1], rhs)
                method = "direct"
            else:
                _, kff, precond = data.factor
                x, info = scipy.sparse.linalg.cg(kff, rhs, rtol=1e-10, atol=0.0, M=precond)
                iters = 0 if info == 0 else info
                method = "cg"
            u[free] = x
            grad = (data.matrix @ u - b)[free]
            res = float(np.linalg.norm(grad))
            if res > tol:
                # one refinement pass, then give up honestly
                if kind == "dense":
                    u[free] += scipy.linalg.cho_solve(data.factor[1], -grad)
                else:
                    dx, _ = scipy.sparse.linalg.cg(data.factor[1], -grad, rtol=1e-14,
                                                   atol=0.0, M=data.factor[2])
                    u[free] += dx
                res = float(np.linalg.norm((data.matrix @ u - b)[free]))
                iters += 1
                if res > tol:
                    raise SolveError(f"linear solve stalled at residual {res:.3e} > tol {tol:.3e}")
        else:
            method = "direct"
            res = 0.0
        return BrokenField(topo, u), iters, res, method

    def _trust_region_start(self, topo: DofTopology, t: float, field: BrokenField,
                            tol: float) -> BrokenField:
        """Globalize with a trust-region Newton before the damped polish.

        For exponents below 2 the curvature of the power laws decays away
        from the current iterate, and line-searched Newton steps can stall in
        a long flat valley; a trust region traverses it.
        """
        import scipy.optimize

        model, mesh = self.model, self.mesh
        free = topo.free_dofs
        base = field.values.copy()

        def embed(v):
            vals = base.copy()
            vals[free] = v
            return BrokenField(topo, vals)

        def fun(v):
            val, _ = elastic_energy(model, mesh, t, embed(v))
            return val

        def jac(v):
            return assemble_gradient(model, mesh, t, embed(v))[free]

        options = {"gtol": max(tol, 1e-12), "maxiter": 500}
        if len(free) <= _DENSE_LIMIT:
            def hess(v):
                return _assemble_hessian(model, mesh, t, embed(v))[free][:, free].toarray()

            result = scipy.optimize.minimize(fun, base[free], jac=jac, hess=hess,
                                             method="trust-exact", options=options)
        else:
            def hessp(v, w):
                h = _assemble_hessian(model, mesh, t, embed(v))[free][:, free]
                return h @ w

            result = scipy.optimize.minimize(fun, base[free], jac=jac, hessp=hessp,
                                             method="trust-ncg", options=options)
        # even on nominal failure the iterate is a descent point; the damped
        # Newton polish below decides whether the tolerance is reachable
        return embed(result.x)

    def _solve_newton(self, topo: DofTopology, t: float, tol: float):
        model, mesh = self.model, self.mesh
        field = BrokenField.from_nodal(topo, model.boundary.value(t))
        free = topo.free_dofs
        if len(free) == 0:
            return field, 0, 0.0, "newton"
        if min(model.p, model.q) < 2.0:
            field = self._trust_region_start(topo, t, field, tol)
        energy, _ = elastic_energy(model, mesh, t, field)
        for it in range(_NEWTON_CAP):
            g = assemble_gradient(model, mesh, t, field)[free]
            res = float(np.linalg.norm(g))
            if res <= tol:
                return field, it, res, "newton"
            h = _assemble_hessian(model, mesh, t, field)[free][:, free]
            d = self._newton_direction(h, g)
            slope = float(g @ d)
            if slope >= 0:
                d, slope = -g, -float(g @ g)

            def energy_at(alpha):
                trial = field.values.copy()
                trial[free] += alpha * d
                cand = field.with_values(trial)
                e_new, _ = elastic_energy(model, mesh, t, cand)
                return cand, e_new

            # near the minimum the energy decrement drops below rounding while
            # the full Newton step still contracts the gradient; accept on
            # gradient descent before falling back to the Armijo search
            cand, e_new = energy_at(1.0)
            g_new = assemble_gradient(model, mesh, t, cand)[free]
            if float(np.linalg.norm(g_new)) <= 0.5 * res:
                field, energy = cand, e_new
                continue

            alpha = 1.0
            while alpha >= 1e-14:
                cand, e_new = energy_at(alpha)
                if e_new <= energy + _ARMIJO * alpha * slope:
                    break
                alpha *= 0.5
            else:
                raise SolveError(f"line search failed at Newton iteration {it}, residual {res:.3e}")
            # expansion: with exponents below 2 the curvature decays away from
            # the current iterate and the unit Newton step can undershoot
            # along a flat valley; doubling while the energy drops fixes the
            # crawl and is inert near the solution
            while alpha < 2.0**30:
                cand2, e_new2 = energy_at(2.0 * alpha)
                if e_new2 < e_new:
                    alpha, cand, e_new = 2.0 * alpha, cand2, e_new2
                else:
                    break
            field, energy = cand, e_new
        raise SolveError(f"Newton did not reach tol {tol:.3e} within {_NEWTON_CAP} iterations")

    @staticmethod
    def _newton_direction(h: scipy.sparse.csr_matrix, g: np.ndarray) -> np.ndarray:
        n = h.shape[0]
        ridge = 0.0
        base = float(np.mean(h.diagonal())) or 1.0
        for _ in range(8):
            try:
                hh = h + ridge * base * scipy.sparse.identity(n) if ridge else h
                if n <= _DENSE_LIMIT:
                    d = scipy.linalg.solve(hh.toarray(), -g, assume_a="pos")
                else:
                    d = scipy.sparse.linalg.spsolve(hh.tocsc(), -g)
                if np.all(np.isfinite(d)):
                    return d
            except (scipy.linalg.LinAlgError, RuntimeError):
                pass
            ridge = max(ridge * 10.0, 1e-12)
        raise SolveError("Newton direction solve failed even with ridge regularization")


def minimize_elastic(model: EnergyModel, mesh: Mesh, crack: CrackSet, t: float,
                     tol: float = 1e-10):
    """One-shot minimization of the elastic energy over the broken space.

    Returns (field, report); the report's residual is the Euclidean norm of
    the energy gradient on the free DOFs.  Long sweeps should construct an
    ``ElasticSolver`` once and reuse it.
    """
    return ElasticSolver(model, mesh).solve(crack, t, tol)


def euler_residual(model: EnergyModel, mesh: Mesh, crack: CrackSet, t: float,
                   u: BrokenField) -> float:
    """Stationarity defect of ``u``: norm of the energy gradient over the
    admissible variations (free DOFs) at fixed crack set.

    The variation space contains exactly the fields vanishing on the uncracked
    Dirichlet boundary with jumps inside the crack set, i.e. the free DOFs.
    """
    if u.topology.crack != crack:
        raise ValueError("field was built on a different crack set")
    psi = model.boundary.value(t)
    cons = u.topology.constrained_dofs
    expected = psi[u.topology.dof_vertex[cons]]
    scale = 1.0 + float(np.max(np.abs(psi))) if len(psi) else 1.0
    if len(cons) and float(np.max(np.abs(u.values[cons] - expected))) > 1e-8 * scale:
        raise ValueError("field does not match the boundary datum at time t")
    g = assemble_gradient(model, mesh, t, u)
    return float(np.linalg.norm(g[u.topology.free_dofs]))
