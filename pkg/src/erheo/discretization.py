"""Taylor-Hood (P2/P1) flow spaces, P1 temperature, and the coupled forms.

Velocity dofs are component blocked: ``c * n2 + s`` where ``s`` runs over
mesh vertices followed by edges.  Local element ordering for P2 is
``(v0, v1, v2, e12, e20, e01)``.

Linear forms use rules exact for their polynomial degree.  Nonlinear
integrands use a degree-8 rule by default (``quad_degree``); the 7-point
degree-5 rule changes residuals by ~1e-6 when the order is doubled, the
degree-8 rule by ~1e-11 on smooth problems.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from . import constitutive as cm
from .errors import ClosureError, ConfigError
from .linalg import RieszMap, SaddleSolver
from .mesh import S1, S2, _unique_edges
from .quadrature import line_rule, triangle_rule

VELOCITY_P2 = "VELOCITY_P2"
PRESSURE_P1 = "PRESSURE_P1"
TEMPERATURE_P1 = "TEMPERATURE_P1"

_EDGE_PAIRS = ((1, 2), (2, 0), (0, 1))


@dataclass(eq=False)
class FunctionSpace:
    kind: str
    n_dofs: int
    dof_map: np.ndarray
    constrained_dofs: np.ndarray
    components: int = 1

    @cached_property
    def free_dofs(self):
        mask = np.ones(self.n_dofs, dtype=bool)
        mask[self.constrained_dofs] = False
        return np.flatnonzero(mask)


@dataclass(eq=False)
class FieldVector:
    space: FunctionSpace
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if self.coeffs.shape != (self.space.n_dofs,):
            raise ValueError(f"expected {self.space.n_dofs} coefficients, got {self.coeffs.shape}")


def coeffs(x):
    return x.coeffs if isinstance(x, FieldVector) else np.asarray(x, dtype=float)


class ElementData:
    """Quadrature points, weights and basis tables for one rule degree."""

    def __init__(self, spaces, degree):
        L, w = triangle_rule(degree)
        mesh = spaces.mesh
        verts = mesh.nodes[mesh.triangles]  # (ne, 3, 2)
        self.degree = degree
        self.L = L
        self.weights = spaces.area[:, None] * w[None, :]
        self.points = np.einsum("qk,ekd->eqd", L, verts)
        self.p2 = np.column_stack([
            L[:, 0] * (2 * L[:, 0] - 1), L[:, 1] * (2 * L[:, 1] - 1), L[:, 2] * (2 * L[:, 2] - 1),
            4 * L[:, 1] * L[:, 2], 4 * L[:, 2] * L[:, 0], 4 * L[:, 0] * L[:, 1],
        ])
        gl = spaces.grad_lambda
        G = np.empty((mesh.n_triangles, len(w), 6, 2))
        for i in range(3):
            G[:, :, i] = (4 * L[:, i] - 1)[None, :, None] * gl[:, None, i]
        for k, (i, j) in enumerate(_EDGE_PAIRS):
            G[:, :, 3 + k] = 4 * (L[:, j][None, :, None] * gl[:, None, i]
                                  + L[:, i][None, :, None] * gl[:, None, j])
        self.p2_grad = G


class Spaces:
    """Velocity, pressure and temperature spaces on one mesh, with cached matrices."""

    def __init__(self, mesh, quad_degree=8):
        self.mesh = mesh
        self.quad_degree = quad_degree
        tri = mesh.triangles
        nv = mesh.n_nodes
        self.edges, tri_edges = _unique_edges(tri)
        self.n2 = nv + len(self.edges)
        p = mesh.nodes[tri]
        d1, d2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
        det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
        self.area = 0.5 * det
        gl = np.empty((len(tri), 3, 2))
        gl[:, 0] = np.stack([p[:, 1, 1] - p[:, 2, 1], p[:, 2, 0] - p[:, 1, 0]], 1)
        gl[:, 1] = np.stack([p[:, 2, 1] - p[:, 0, 1], p[:, 0, 0] - p[:, 2, 0]], 1)
        gl[:, 2] = np.stack([p[:, 0, 1] - p[:, 1, 1], p[:, 1, 0] - p[:, 0, 0]], 1)
        self.grad_lambda = gl / det[:, None, None]
        self.p2_map = np.hstack([tri, nv + tri_edges])
        self.p2_coords = np.vstack([mesh.nodes, 0.5 * (mesh.nodes[self.edges[:, 0]] + mesh.nodes[self.edges[:, 1]])])

        key = self.edges[:, 0] * nv + self.edges[:, 1]
        order = np.argsort(key)
        bsorted = np.sort(mesh.boundary_edges, axis=1)
        pos = np.searchsorted(key[order], bsorted[:, 0] * nv + bsorted[:, 1])
        self.boundary_edge_ids = order[pos]
        tags = np.array(mesh.boundary_tags)
        s1 = tags == S1
        s1_scalar = np.unique(np.concatenate([bsorted[s1].ravel(), nv + self.boundary_edge_ids[s1]]))
        self.velocity = FunctionSpace(
            VELOCITY_P2, 2 * self.n2, np.hstack([self.p2_map, self.n2 + self.p2_map]),
            np.concatenate([s1_scalar, self.n2 + s1_scalar]), components=2)
        self.pressure = FunctionSpace(PRESSURE_P1, nv, tri, np.array([], dtype=np.int64))
        self.temperature = FunctionSpace(TEMPERATURE_P1, nv, tri, mesh.boundary_nodes())
        self._data = {}

    # -- tables -------------------------------------------------------------

    def element_data(self, degree=None):
        degree = self.quad_degree if degree is None else degree
        if degree not in self._data:
            self._data[degree] = ElementData(self, degree)
        return self._data[degree]

    @property
    def needs_gauge(self):
        return not self.mesh.has_traction_boundary()

    # -- pointwise evaluation -------------------------------------------------

    def velocity_values(self, u, data=None):
        data = data or self.element_data()
        U = coeffs(u).reshape(2, self.n2)[:, self.p2_map]
        return np.einsum("cea,qa->eqc", U, data.p2)

    def velocity_grads(self, u, data=None):
        """``grad[e, q, c, j] = d u_c / d x_j`` at quadrature points."""
        data = data or self.element_data()
        Ue = coeffs(u).reshape(2, self.n2)[:, self.p2_map].transpose(1, 2, 0)  # (e, a, c)
        return np.swapaxes(np.matmul(np.swapaxes(data.p2_grad, 2, 3), Ue[:, None]), 2, 3)

    def scalar_values(self, z, data=None):
        data = data or self.element_data()
        return coeffs(z)[self.mesh.triangles] @ data.L.T

    def scalar_grads(self, z):
        return np.einsum("ek,ekj->ej", coeffs(z)[self.mesh.triangles], self.grad_lambda)

    def interpolate_velocity(self, func):
        vals = np.asarray(func(self.p2_coords), dtype=float)
        return np.concatenate([vals[:, 0], vals[:, 1]])

    def interpolate_scalar(self, func):
        return np.asarray(func(self.mesh.nodes), dtype=float).reshape(-1)

    # -- assembly primitives ------------------------------------------------

    def _scatter_matrix(self, local, rows, cols, shape):
        r = np.repeat(rows[:, :, None], cols.shape[1], axis=2)
        c = np.repeat(cols[:, None, :], rows.shape[1], axis=1)
        return sp.coo_matrix((local.ravel(), (r.ravel(), c.ravel())), shape=shape).tocsr()

    def _scatter_vector(self, local, dofs, n):
        return np.bincount(dofs.ravel(), weights=local.ravel(), minlength=n)

    def viscous_matrix(self, coef, data=None):
        """``sum_q w coef eps(trial):eps(test)`` with ``coef`` shaped (ne, nq)."""
        data = data or self.element_data()
        ne, nq = data.weights.shape
        X = data.p2_grad.reshape(ne, nq, 12)
        Wc = data.weights * coef
        # M[e, (a, d), (b, c)] = sum_q w G[q, a, d] G[q, b, c] as one batched product
        M = np.matmul(np.swapaxes(X * Wc[:, :, None], 1, 2), X).reshape(ne, 6, 2, 6, 2)
        cross = 0.5 * M.transpose(0, 4, 1, 2, 3)  # (e, c, a, d, b)
        lap = 0.5 * np.einsum("eajbj->eab", M)
        cross[:, 0, :, 0, :] += lap
        cross[:, 1, :, 1, :] += lap
        local = cross.reshape(-1, 12, 12)
        dm = self.velocity.dof_map
        return self._scatter_matrix(local, dm, dm, (self.velocity.n_dofs,) * 2)

    def viscous_residual(self, coef, eps, data=None):
        data = data or self.element_data()
        ne, nq = data.weights.shape
        We = (eps * (data.weights * coef)[:, :, None, None]).transpose(0, 1, 3, 2).reshape(ne, 2 * nq, 2)
        G = np.swapaxes(data.p2_grad, 2, 3).reshape(ne, 2 * nq, 6)
        local = np.matmul(np.swapaxes(We, 1, 2), G)  # (e, c, a)
        return self._scatter_vector(local.reshape(-1, 12), self.velocity.dof_map, self.velocity.n_dofs)

    @cached_property
    def gram_X(self):
        """Gram matrix of the symmetric-gradient inner product on the velocity space."""
        data = self.element_data(2)
        return self.viscous_matrix(np.ones(data.weights.shape), data)

    @cached_property
    def B(self):
        """Divergence pairing ``(div v, q)``: pressure rows, velocity columns."""
        data = self.element_data(2)
        local = np.einsum("eq,qk,eqac->ekca", data.weights, data.L, data.p2_grad).reshape(-1, 3, 12)
        return self._scatter_matrix(local, self.mesh.triangles, self.velocity.dof_map,
                                    (self.pressure.n_dofs, self.velocity.n_dofs))

    @cached_property
    def pi(self):
        local = self.area[:, None, None] * np.einsum("eik,ejk->eij", self.grad_lambda, self.grad_lambda)
        tri = self.mesh.triangles
        return self._scatter_matrix(local, tri, tri, (self.temperature.n_dofs,) * 2)

    @cached_property
    def p1_mass(self):
        data = self.element_data(2)
        local = np.einsum("eq,qi,qj->eij", data.weights, data.L, data.L)
        tri = self.mesh.triangles
        return self._scatter_matrix(local, tri, tri, (self.mesh.n_nodes,) * 2)

    @cached_property
    def velocity_mass(self):
        data = self.element_data(5)
        scalar = np.einsum("eq,qa,qb->eab", data.weights, data.p2, data.p2)
        local = np.zeros((len(scalar), 12, 12))
        local[:, :6, :6] = scalar
        local[:, 6:, 6:] = scalar
        dm = self.velocity.dof_map
        return self._scatter_matrix(local, dm, dm, (self.velocity.n_dofs,) * 2)

    @cached_property
    def velocity_laplace(self):
        data = self.element_data(2)
        scalar = np.einsum("eq,eqaj,eqbj->eab", data.weights, data.p2_grad, data.p2_grad)
        local = np.zeros((len(scalar), 12, 12))
        local[:, :6, :6] = scalar
        local[:, 6:, 6:] = scalar
        dm = self.velocity.dof_map
        return self._scatter_matrix(local, dm, dm, (self.velocity.n_dofs,) * 2)

    @cached_property
    def pressure_gauge_vector(self):
        return np.asarray(self.p1_mass.sum(axis=0)).ravel()

    def convection_matrix(self, u):
        """``T[i, j] = int (u . grad phi_j) phi_i`` on P1 temperature functions."""
        data = self.element_data()
        uq = self.velocity_values(u, data)
        adv = np.matmul(uq, np.swapaxes(self.grad_lambda, 1, 2))  # (e, q, j): u . grad lambda_j
        local = np.matmul(np.swapaxes(data.weights[:, :, None] * data.L[None], 1, 2), adv)
        tri = self.mesh.triangles
        return self._scatter_matrix(local, tri, tri, (self.temperature.n_dofs,) * 2)

    def p1_load(self, values, data=None):
        """``int s phi_i`` for a source ``values`` given at quadrature points."""
        data = data or self.element_data()
        local = np.einsum("eq,eq,qi->ei", data.weights, values, data.L)
        return self._scatter_vector(local, self.mesh.triangles, self.mesh.n_nodes)

    # -- restricted solvers (cached) ----------------------------------------

    @cached_property
    def riesz_X(self):
        f = self.velocity.free_dofs
        return RieszMap(self.gram_X[f][:, f])

    @cached_property
    def riesz_1(self):
        f = self.temperature.free_dofs
        return RieszMap(self.pi[f][:, f])

    @cached_property
    def riesz_V(self):
        f = self.velocity.free_dofs
        gauge = self.pressure_gauge_vector if self.needs_gauge else None
        return SaddleSolver(self.gram_X[f][:, f], self.B[:, f], gauge)


def build_spaces(mesh, quad_degree=8):
    return Spaces(mesh, quad_degree)


# ---------------------------------------------------------------------------
# norms


def norm_X(v, spaces):
    data = spaces.element_data()
    _, I = cm.strain_tensors(spaces.velocity_grads(v, data))
    return float(np.sqrt(max(np.sum(data.weights * I), 0.0)))


def norm_1(zeta, spaces):
    z = coeffs(zeta)
    return float(np.sqrt(max(z @ (spaces.pi @ z), 0.0)))


def norm_2(zeta, spaces):
    g = spaces.scalar_grads(zeta)
    return float(np.sum(spaces.area * np.sum(np.abs(g) ** 1.2, axis=1)) ** (5 / 6))


def norm_H1(u, spaces):
    u = coeffs(u)
    return float(np.sqrt(max(u @ (spaces.velocity_mass @ u) + u @ (spaces.velocity_laplace @ u), 0.0)))


def pressure_L2(p, spaces):
    p = coeffs(p)
    return float(np.sqrt(max(p @ (spaces.p1_mass @ p), 0.0)))


def dual_norm_X(r, spaces):
    """``||r||_{X*}`` for a residual given on all velocity dofs."""
    return spaces.riesz_X.dual_norm(coeffs(r)[spaces.velocity.free_dofs])


def dual_norm_V(r, spaces):
    """``||r||_{V*}`` via the discrete Riesz problem constrained to div-free fields."""
    f = spaces.velocity.free_dofs
    w, _ = spaces.riesz_V.solve(coeffs(r)[f])
    # w^T M w rather than r . w: the latter loses half the digits to the pressure part
    return float(np.sqrt(max(w @ (spaces.riesz_V.K @ w), 0.0)))


def dual_norm_1(r, spaces):
    return spaces.riesz_1.dual_norm(coeffs(r)[spaces.temperature.free_dofs])


# ---------------------------------------------------------------------------
# lifts and loads


def boundary_flux(u, spaces, tag=S1):
    """``sum over tagged edges of int u . nu ds`` for a velocity coefficient vector."""
    mesh = spaces.mesh
    mask = np.array([t == tag for t in mesh.boundary_tags], dtype=bool)
    if not mask.any():
        return 0.0
    edges = mesh.boundary_edges[mask]
    ids = spaces.boundary_edge_ids[mask]
    normals, length = mesh.outward_normals(edges)
    U = coeffs(u).reshape(2, spaces.n2)
    t, w = line_rule(3)
    shape = np.stack([(1 - t) * (1 - 2 * t), t * (2 * t - 1), 4 * t * (1 - t)], axis=1)
    dofs = np.stack([edges[:, 0], edges[:, 1], mesh.n_nodes + ids], axis=1)
    vals = np.einsum("cek,qk->eqc", U[:, dofs], shape)
    return float(np.sum(length[:, None] * w[None, :] * np.einsum("eqc,ec->eq", vals, normals)))


def lift_velocity(data, spaces):
    """Discretely divergence-free extension of the boundary velocity.

    Solves a unit-viscosity Stokes problem with the S1 data as Dirichlet
    values and zero traction on S2.
    """
    vel = spaces.velocity
    g = np.zeros(vel.n_dofs)
    full = spaces.interpolate_velocity(data.boundary_velocity)
    c = vel.constrained_dofs
    g[c] = full[c]
    if not np.any(g):
        return FieldVector(vel, np.zeros(vel.n_dofs))
    if spaces.needs_gauge:
        flux = boundary_flux(g, spaces)
        if abs(flux) > 1e-10:
            raise ConfigError(f"boundary velocity has net flux {flux:.3e} but S2 is empty")
    f = vel.free_dofs
    K = spaces.gram_X
    rhs = -(K[f][:, c] @ g[c])
    gp = spaces.B[:, c] @ g[c]
    uf, _ = spaces.riesz_V.solve(rhs, gp)
    g[f] = uf
    return FieldVector(vel, g)


def lift_temperature(data, spaces):
    """Discrete harmonic extension of the boundary temperature."""
    T = spaces.temperature
    tau = np.zeros(T.n_dofs)
    c = T.constrained_dofs
    tau[c] = spaces.interpolate_scalar(data.boundary_temperature)[c]
    f = T.free_dofs
    if np.any(tau):
        tau[f] = spaces.riesz_1.apply(-(spaces.pi[f][:, c] @ tau[c]))
    return FieldVector(T, tau)


def assemble_loads(data, spaces):
    """``(K, h) + (F, h)_{S2}`` for every velocity basis function ``h``."""
    qd = spaces.element_data()
    Kq = np.asarray(data.body_force(qd.points), dtype=float)
    local = np.einsum("eq,eqc,qa->eca", qd.weights, Kq, qd.p2).reshape(-1, 12)
    r = spaces._scatter_vector(local, spaces.velocity.dof_map, spaces.velocity.n_dofs)
    mesh = spaces.mesh
    mask = np.array([t == S2 for t in mesh.boundary_tags], dtype=bool)
    if mask.any():
        edges = mesh.boundary_edges[mask]
        ids = spaces.boundary_edge_ids[mask]
        a, b = mesh.nodes[edges[:, 0]], mesh.nodes[edges[:, 1]]
        length = np.linalg.norm(b - a, axis=1)
        t, w = line_rule(3)
        x = a[:, None, :] + t[None, :, None] * (b - a)[:, None, :]
        Fq = np.asarray(data.traction(x), dtype=float)
        shape = np.stack([(1 - t) * (1 - 2 * t), t * (2 * t - 1), 4 * t * (1 - t)], axis=1)
        loc = np.einsum("e,q,eqc,qk->eck", length, w, Fq, shape)
        dofs = np.stack([edges[:, 0], edges[:, 1], mesh.n_nodes + ids], axis=1)
        dofs = np.stack([dofs, spaces.n2 + dofs], axis=1)
        r += spaces._scatter_vector(loc, dofs, spaces.velocity.n_dofs)
    return r


def assemble_B(spaces):
    return spaces.B


def assemble_pi(spaces):
    return spaces.pi


# ---------------------------------------------------------------------------
# coupled operators


class CoupledForms:
    """The flow operators N/N1 and heat operators A/A1 for one problem.

    Holds the lifts, the field strength at quadrature points, and a cache
    of regularisation operators keyed by kernel radius.
    """

    def __init__(self, spaces, data, model, u_lift=None, tau_lift=None, quad_degree=None):
        self.spaces = spaces
        self.data = data
        self.model = model
        self.qd = spaces.element_data(quad_degree)
        self.E_q = np.asarray(data.E_field(self.qd.points), dtype=float)
        self.Emag_q = np.linalg.norm(self.E_q, axis=-1)
        self.u_lift = coeffs(u_lift) if u_lift is not None else lift_velocity(data, spaces).coeffs
        self.tau_lift = coeffs(tau_lift) if tau_lift is not None else lift_temperature(data, spaces).coeffs
        self._loads = None
        self._regularizers = {}

    # -- helpers -----------------------------------------------------------

    @property
    def loads(self):
        if self._loads is None:
            self._loads = assemble_loads(self.data, self.spaces)
        return self._loads

    def total_velocity(self, v):
        return self.u_lift + coeffs(v)

    def total_temperature(self, zeta):
        return self.tau_lift + coeffs(zeta)

    def strain(self, u):
        return cm.strain_tensors(self.spaces.velocity_grads(u, self.qd))

    def tau_q(self, zeta):
        return self.spaces.scalar_values(self.total_temperature(zeta), self.qd)

    def mu_q(self, u):
        uq = self.spaces.velocity_values(u, self.qd)
        return cm.alignment_mu_field(uq, self.E_q, self.model)

    def _located(self, fn, *args):
        try:
            return fn(*args)
        except ClosureError as exc:
            loc = exc.location
            if not loc or isinstance(loc, dict) or len(loc[0]) < 2:
                raise
            e, q = int(loc[0][0]), int(loc[0][1])
            x = self.qd.points[e, q].tolist()
            raise ClosureError(f"{exc} at element {e}, x = {x}", {"element": e, "point": x}) from exc

    def phi2_q(self, I, zeta):
        return self._located(cm.viscosity_phi2, I, self.Emag_q, self.tau_q(zeta), self.qd.points, self.model)

    def phi1_q(self, I, mu, zeta):
        return self._located(cm.viscosity_phi1, I, self.Emag_q, mu, self.tau_q(zeta), self.model)

    def regularizer(self, kernel):
        from .mollify import Regularizer

        key = kernel.radius
        if key not in self._regularizers:
            self._regularizers[key] = Regularizer(self.spaces, kernel)
        return self._regularizers[key]

    def regularized_invariant(self, u, kernel):
        """``I(P u)`` at quadrature points; ``kernel=None`` means P = identity."""
        if kernel is None:
            return self.strain(u)[1]
        Pu = self.regularizer(kernel).apply(u)
        return self.strain(Pu)[1]

    # -- flow --------------------------------------------------------------

    def N(self, v, zeta, matrix=True):
        """Residual ``(N(v, zeta), h)`` over all velocity dofs and the frozen-viscosity matrix."""
        u = self.total_velocity(v)
        eps, I = self.strain(u)
        phi = self.phi2_q(I, zeta)
        r = self.spaces.viscous_residual(2 * phi, eps, self.qd)
        return r, (self.spaces.viscous_matrix(2 * phi, self.qd) if matrix else None)

    def N1(self, v, zeta, matrix=True):
        u = self.total_velocity(v)
        eps, I = self.strain(u)
        phi = self.phi1_q(I, self.mu_q(u), zeta)
        r = self.spaces.viscous_residual(2 * phi, eps, self.qd)
        return r, (self.spaces.viscous_matrix(2 * phi, self.qd) if matrix else None)

    def flow_operator(self, v, zeta, matrix=True):
        if self.model.variant == cm.PHI1:
            return self.N1(v, zeta, matrix)
        return self.N(v, zeta, matrix)

    # -- heat --------------------------------------------------------------

    def dissipation_density(self, v, zeta_visc, kernel=None, caps=None, variant=None):
        """``2 eps phi I_reg`` at quadrature points, the heat source of the energy balance."""
        variant = variant or self.model.variant
        u = self.total_velocity(v)
        I_reg = self.regularized_invariant(u, kernel)
        if variant == cm.PHI1:
            phi = self.phi1_q(I_reg, self.mu_q(u), zeta_visc)
            if caps is not None:
                phi = cm.truncate_phi3(I_reg, caps[0], caps[1], phi)
        else:
            I_visc = I_reg if self.model.regularized_viscosity else self.strain(u)[1]
            phi = self.phi2_q(I_visc, zeta_visc)
        return 2 * self.model.eps_heat * phi * I_reg

    def _heat(self, v, zeta, density, form):
        u = self.total_velocity(v)
        tau = self.total_temperature(zeta)
        T = self.spaces.convection_matrix(u)
        conv = T.T @ tau if form == "weak" else -(T @ tau)
        return conv + self.spaces.p1_load(density, self.qd) - self.model.chi * (self.spaces.pi @ self.tau_lift)

    def A(self, v, zeta, kernel=None, zeta_visc=None):
        """``(A(v, zeta), xi)`` with the regularised dissipation and the
        convection written against the test gradient."""
        zv = zeta if zeta_visc is None else zeta_visc
        return self._heat(v, zeta, self.dissipation_density(v, zv, kernel, variant=cm.PHI2), "weak")

    def A_unreg(self, v, zeta, zeta_visc=None):
        """Unregularised dissipation and convection ``-(u . grad tau) xi``."""
        zv = zeta if zeta_visc is None else zeta_visc
        u = self.total_velocity(v)
        _, I = self.strain(u)
        density = 2 * self.model.eps_heat * self.phi2_q(I, zv) * I
        return self._heat(v, zeta, density, "strong")

    def A_phi1(self, v, zeta, kernel=None, caps=None, zeta_visc=None):
        zv = zeta if zeta_visc is None else zeta_visc
        return self._heat(v, zeta, self.dissipation_density(v, zv, kernel, caps, variant=cm.PHI1), "strong")

    def heat_operator(self, v, zeta, kernel=None, caps=None, zeta_visc=None):
        if self.model.variant == cm.PHI1:
            return self.A_phi1(v, zeta, kernel, caps, zeta_visc)
        if kernel is None:
            return self.A_unreg(v, zeta, zeta_visc)
        return self.A(v, zeta, kernel, zeta_visc)


# thin functional wrappers -------------------------------------------------


def assemble_N(v, zeta, data, model, spaces, forms=None):
    forms = forms or CoupledForms(spaces, data, model)
    return forms.N(v, zeta)


def assemble_N1(v, zeta, data, model, spaces, forms=None):
    forms = forms or CoupledForms(spaces, data, model)
    return forms.N1(v, zeta)


def assemble_A(v, zeta, data, model, spaces, kernel=None, forms=None):
    forms = forms or CoupledForms(spaces, data, model)
    return forms.A(v, zeta, kernel)


def assemble_A_unreg(v, zeta, data, model, spaces, forms=None):
    forms = forms or CoupledForms(spaces, data, model)
    return forms.A_unreg(v, zeta)


def assemble_A2_A3_phi1(v, zeta, data, model, spaces, kernel=None, caps=None, forms=None):
    forms = forms or CoupledForms(spaces, data, model)
    return forms.A_phi1(v, zeta, kernel, caps)
