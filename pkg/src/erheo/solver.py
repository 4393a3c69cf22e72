"""Flow, temperature and coupled solves, plus the stability diagnostics."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
from scipy.linalg import eigh
from scipy.sparse.linalg import LinearOperator, cg, splu

from . import constitutive as cm
from .discretization import (
    CoupledForms,
    FieldVector,
    dual_norm_1,
    dual_norm_V,
    dual_norm_X,
    norm_1,
    norm_2,
    norm_H1,
    norm_X,
    pressure_L2,
)
from .errors import ConfigError, InternalError, NonConvergenceError, UnstablePairError
from .linalg import SaddleSolver

MEAN_ZERO = "MEAN_ZERO"
NONE = "NONE"


@dataclass(frozen=True)
class SolverConfig:
    tol_flow: float = 1e-10
    tol_temp: float = 1e-10
    tol_coupled: float = 1e-8
    max_picard: int = 200
    max_outer: int = 50
    relax: float = 0.7
    variant: str | None = None
    caps: tuple | None = None
    pressure_gauge: str = MEAN_ZERO

    def __post_init__(self):
        for name in ("tol_flow", "tol_temp", "tol_coupled"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"solver.{name} must be > 0")
        if self.max_picard < 1 or self.max_outer < 1:
            raise ConfigError("iteration caps must be >= 1")
        if not 0 < self.relax <= 1:
            raise ConfigError(f"solver.relax must lie in (0, 1], got {self.relax}")
        if self.variant not in (None, cm.PHI1, cm.PHI2):
            raise ConfigError(f"unknown variant {self.variant!r}")
        if self.caps is not None:
            b1, b2 = self.caps
            if not (b1 >= 1 and b2 > b1):
                raise ConfigError(f"caps need 1 <= b1 < b2, got {self.caps}")
        if self.pressure_gauge not in (MEAN_ZERO, NONE):
            raise ConfigError(f"unknown pressure gauge {self.pressure_gauge!r}")

    def with_(self, **changes):
        return replace(self, **changes)


@dataclass
class FlowResult:
    v: FieldVector
    p: FieldVector
    residual: float
    iterations: int
    residual_history: list
    bound: dict


@dataclass
class SolutionTriple:
    v: FieldVector
    p: FieldVector
    zeta: FieldVector
    u: np.ndarray
    tau: np.ndarray
    history: list = field(default_factory=list)
    converged: bool = False
    ball_radius: float = 0.0
    bound: dict = field(default_factory=dict)
    kernel_radius: float | None = None


def _model_for(model, config):
    if config is not None and config.variant is not None and config.variant != model.variant:
        return model.with_(variant=config.variant)
    return model


def _gauge(spaces, config):
    if not spaces.needs_gauge:
        return None
    if config.pressure_gauge == NONE:
        raise ConfigError("saddle-point system is singular: S2 is empty and pressure_gauge = NONE")
    return spaces.pressure_gauge_vector


def apriori_bound(v, forms):
    """Check ``||v||_X <= (||K+F||_{V*} + mu4) / mu3``."""
    spaces = forms.spaces
    model = forms.model
    _, I_lift = forms.strain(forms.u_lift)
    mu1, mu2, mu3, mu4 = cm.monotone_constants(model, float(np.sum(forms.qd.weights * I_lift)))
    load = dual_norm_V(forms.loads, spaces)
    bound = (load + mu4) / mu3
    nv = norm_X(v, spaces)
    return {"norm_X_v": nv, "bound": bound, "load_V_star": load, "mu3": mu3, "mu4": mu4,
            "holds": bool(nv <= bound * (1 + 1e-6))}


def solve_flow(zeta, data, model, spaces, config=None, forms=None, v0=None):
    """Damped Picard iteration for the velocity perturbation and pressure at fixed ``zeta``.

    Each step solves the saddle system with the viscosity frozen at the
    current iterate; steps are halved until the residual in V* decreases.
    """
    config = config or SolverConfig()
    model = _model_for(model, config)
    if model.lam <= 0:
        raise ConfigError("the flow solve needs lambda > 0")
    if forms is None or forms.model is not model:
        forms = CoupledForms(spaces, data, model) if forms is None else _reforms(forms, model)
    zeta = getattr(zeta, "coeffs", zeta)
    vel = spaces.velocity
    f = vel.free_dofs
    gauge = _gauge(spaces, config)
    B_f = spaces.B[:, f]
    g_p = spaces.B @ forms.u_lift
    L = forms.loads
    v = np.zeros(vel.n_dofs) if v0 is None else np.array(getattr(v0, "coeffs", v0), dtype=float)

    p_est = np.zeros(spaces.pressure.n_dofs)

    def reduced(r):
        # B^T p does not change the V* norm but shifting by a pressure estimate keeps it well conditioned
        return dual_norm_V(r - L - spaces.B.T @ p_est, spaces)

    r, K = forms.flow_operator(v, zeta)
    res = reduced(r)
    history = [res]
    it = 0
    while res >= config.tol_flow:
        if it >= config.max_picard:
            raise NonConvergenceError(
                f"Picard iteration hit max_picard = {config.max_picard} at residual {res:.3e}",
                history=[{"picard": k, "flow_residual": h} for k, h in enumerate(history)])
        it += 1
        u_full = forms.u_lift
        rhs = L[f] - K[f] @ u_full
        vf, p_est = SaddleSolver(K[f][:, f], B_f, gauge).solve(rhs, g_p)
        res = reduced(r)
        step = np.zeros(vel.n_dofs)
        step[f] = vf - v[f]
        theta = 1.0
        while True:
            vt = v + theta * step
            rt, Kt = forms.flow_operator(vt, zeta)
            res_t = reduced(rt)
            if res_t < res:
                break
            theta *= 0.5
            if theta < 1 / 64:
                if res < 10 * config.tol_flow:
                    # round-off floor just above the tolerance: accept the iterate
                    res_t, vt, rt, Kt = res, v, r, K
                    break
                raise NonConvergenceError(
                    f"Picard step failed to reduce the residual {res:.3e}",
                    history=[{"picard": k, "flow_residual": h} for k, h in enumerate(history)])
        if vt is v:
            break
        v, r, K, res = vt, rt, Kt, res_t
        history.append(res)

    # pressure minimising the X* residual; X* residual then equals the V* residual
    _, q = spaces.riesz_V.solve((r - L - spaces.B.T @ p_est)[f])
    p = p_est - q
    bound = apriori_bound(v, forms)
    return FlowResult(FieldVector(vel, v), FieldVector(spaces.pressure, p), res, it, history, bound)


def _reforms(forms, model):
    return CoupledForms(forms.spaces, forms.data, model, forms.u_lift, forms.tau_lift)


def flow_residual(v, p, zeta, forms):
    """``||N(v, zeta) - K - F - B^T p||_{X*} + ||B(u_lift + v)||``."""
    spaces = forms.spaces
    r, _ = forms.flow_operator(v, zeta, matrix=False)
    r = r - forms.loads - spaces.B.T @ getattr(p, "coeffs", p)
    div = spaces.B @ forms.total_velocity(v)
    return dual_norm_X(r, spaces) + float(np.linalg.norm(div))


def temperature_residual(v, zeta, forms, kernel=None, caps=None):
    spaces = forms.spaces
    z = getattr(zeta, "coeffs", zeta)
    r = forms.model.chi * (spaces.pi @ z) - forms.heat_operator(v, z, kernel, caps)
    return dual_norm_1(r, spaces)


def heat_load(v, zeta_visc, forms, kernel=None, caps=None):
    """The ``zeta``-independent part of the heat operator (``zeta = 0``, viscosity at ``zeta_visc``)."""
    zero = np.zeros(forms.spaces.temperature.n_dofs)
    return forms.heat_operator(v, zero, kernel, caps, zeta_visc=zeta_visc)


def solve_temperature(v, zeta_prev, data, model, spaces, config=None, kernel=None, forms=None):
    """Linear temperature solve with the viscosity's temperature lagged at ``zeta_prev``."""
    config = config or SolverConfig()
    model = _model_for(model, config)
    if forms is None:
        forms = CoupledForms(spaces, data, model)
    elif forms.model is not model:
        forms = _reforms(forms, model)
    zp = np.asarray(getattr(zeta_prev, "coeffs", zeta_prev), dtype=float)
    T = spaces.temperature
    f = T.free_dofs
    u = forms.total_velocity(v)
    C = spaces.convection_matrix(u)
    ell = heat_load(v, zp, forms, kernel, config.caps)
    weak = model.variant == cm.PHI2 and kernel is not None
    conv = -C.T if weak else C
    M = (model.chi * spaces.pi + conv).tocsr()[f][:, f]
    zeta = np.zeros(T.n_dofs)
    try:
        zeta[f] = splu(sp.csc_matrix(M)).solve(ell[f])
    except RuntimeError as exc:
        raise InternalError(f"temperature system is singular: {exc}") from exc
    if not np.all(np.isfinite(zeta)):
        raise InternalError("temperature solve produced non-finite values")
    return FieldVector(T, zeta)


def _oscillating(values, window=5):
    if len(values) < window + 1:
        return False
    tail = values[-(window + 1):]
    return all(b > a for a, b in zip(tail, tail[1:]))


def solve_coupled(data, model, spaces, config=None, kernel=None, forms=None):
    """Relaxed fixed point between the flow and temperature subproblems."""
    config = config or SolverConfig()
    model = _model_for(model, config)
    model.validate()
    if forms is None:
        forms = CoupledForms(spaces, data, model)
    elif forms.model is not model:
        forms = _reforms(forms, model)
    caps = config.caps if model.variant == cm.PHI1 else None
    T = spaces.temperature
    zeta = np.zeros(T.n_dofs)
    v_prev = None
    history = []
    ball = 0.0
    coupled_values = []
    for m in range(config.max_outer + 1):
        flow = solve_flow(zeta, data, model, spaces, config, forms, v0=v_prev)
        v = flow.v.coeffs
        v_prev = v
        fr = flow_residual(v, flow.p, zeta, forms)
        tr = temperature_residual(v, zeta, forms, kernel, caps)
        ell = heat_load(v, zeta, forms, kernel, caps)
        c_m = dual_norm_1(ell, spaces) / model.chi
        ball = max(ball, c_m)
        n1 = norm_1(zeta, spaces)
        a_zz = forms.heat_operator(v, zeta, kernel, caps) @ zeta
        history.append({
            "iter": m,
            "flow_residual": fr,
            "temp_residual": tr,
            "coupled_residual": fr + tr,
            "norm_X_v": norm_X(v, spaces),
            "norm_1_zeta": n1,
            "norm_2_zeta": norm_2(zeta, spaces),
            "ball_radius": c_m,
            "energy_residual": abs(model.chi * n1 * n1 - a_zz),
            "picard_iterations": flow.iterations,
        })
        coupled_values.append(fr + tr)
        if fr + tr < config.tol_coupled:
            return SolutionTriple(
                flow.v, flow.p, FieldVector(T, zeta), forms.total_velocity(v), forms.total_temperature(zeta),
                history, True, ball, flow.bound, None if kernel is None else kernel.radius)
        if m == config.max_outer:
            break
        if _oscillating(coupled_values):
            raise NonConvergenceError(
                "coupled residual increased over 5 consecutive iterations",
                history=history, hint={"relax": round(config.relax / 2, 6)})
        z_star = solve_temperature(v, zeta, data, model, spaces, config, kernel, forms).coeffs
        zeta = (1 - config.relax) * zeta + config.relax * z_star
    raise NonConvergenceError(
        f"coupled iteration hit max_outer = {config.max_outer} at residual {coupled_values[-1]:.3e}",
        history=history, hint={"relax": round(config.relax / 2, 6)})


def ball_check(triple, slack=1e-6):
    """Every iterate's ``||zeta||_1`` within the reported ball radius."""
    c = triple.ball_radius
    return all(h["norm_1_zeta"] <= c * (1 + slack) + 1e-14 for h in triple.history)


# ---------------------------------------------------------------------------
# inf-sup estimate


def _schur_parts(spaces):
    f = spaces.velocity.free_dofs
    lu = splu(sp.csc_matrix(spaces.gram_X[f][:, f]))
    B_f = spaces.B[:, f].tocsr()
    return lu, B_f, spaces.p1_mass.tocsc()


def schur_dense(spaces):
    """Dense ``B M_X^{-1} B^T`` and pressure mass, for small meshes."""
    lu, B_f, Mp = _schur_parts(spaces)
    Y = lu.solve(B_f.T.toarray())
    return B_f @ Y, Mp.toarray()


def estimate_inf_sup(spaces, block=4, tol=1e-9, max_iter=200):
    """Smallest nonzero ``beta`` with ``B M_X^{-1} B^T q = beta^2 M_p q`` by block inverse iteration.

    Without a traction boundary the constants span the kernel; a rank-one
    shift moves them to eigenvalue 1 so the operator stays SPD.
    """
    lu, B_f, Mp = _schur_parts(spaces)
    n = Mp.shape[0]
    m1 = Mp @ np.ones(n)
    shift = spaces.needs_gauge
    c_norm = float(np.sum(m1))

    def S(x):
        y = B_f @ lu.solve(B_f.T @ x)
        return y + m1 * (m1 @ x) / c_norm if shift else y

    Mp_lu = splu(Mp)
    Sop = LinearOperator((n, n), matvec=S, dtype=float)
    Prec = LinearOperator((n, n), matvec=Mp_lu.solve, dtype=float)

    rng = np.random.default_rng(12345)
    X = rng.standard_normal((n, block))
    prev = None
    for _ in range(max_iter):
        Y = np.empty_like(X)
        for j in range(block):
            y, info = cg(Sop, Mp @ X[:, j], rtol=1e-12, atol=0.0, M=Prec, maxiter=2000)
            if info != 0:
                raise InternalError(f"inner CG for the inf-sup estimate failed (info={info})")
            Y[:, j] = y
        # Rayleigh-Ritz on span(Y)
        Q, _ = np.linalg.qr(Y)
        SQ = np.column_stack([S(Q[:, j]) for j in range(block)])
        A = Q.T @ SQ
        Bm = Q.T @ (Mp @ Q)
        w, U = eigh(0.5 * (A + A.T), 0.5 * (Bm + Bm.T))
        X = Q @ U
        lam = w[0]
        if prev is not None and abs(lam - prev) <= tol * abs(lam):
            break
        prev = lam
    beta = math.sqrt(max(lam, 0.0))
    if beta < 1e-8:
        raise UnstablePairError(f"inf-sup constant {beta:.3e} is numerically zero")
    return beta


# ---------------------------------------------------------------------------
# smallness report and diagnostics


def random_divergence_free(spaces, count, seed=0, scale=1.0):
    """Discretely divergence-free velocity fields vanishing on S1."""
    rng = np.random.default_rng(seed)
    f = spaces.velocity.free_dofs
    out = []
    for _ in range(count):
        wf, _ = spaces.riesz_V.solve(rng.standard_normal(len(f)))
        w = np.zeros(spaces.velocity.n_dofs)
        w[f] = wf
        nx = norm_X(w, spaces)
        out.append(scale * w / nx if nx > 0 else w)
    return out


def smallness_bracket(w, forms):
    spaces = forms.spaces
    model = forms.model
    u = forms.total_velocity(w)
    _, I = forms.strain(u)
    top = model.a0 / math.sqrt(model.lam) + model.a2
    load = dual_norm_V(forms.loads, spaces)
    return norm_H1(u, spaces) + (load + 2 * top * math.sqrt(max(np.sum(forms.qd.weights * I), 0.0))) / (2 * model.a1)


def smallness_report(data, model, spaces, trial_w_count=8, seed=0, forms=None):
    forms = forms or CoupledForms(spaces, data, model)
    trials = [np.zeros(spaces.velocity.n_dofs)] + random_divergence_free(spaces, trial_w_count, seed, 0.1)
    values = [smallness_bracket(w, forms) for w in trials]
    k = int(np.argmin(values))
    return {"bracket_at_zero": values[0], "bracket_min": values[k], "argmin": k,
            "ratio": values[k] / model.chi, "trials": len(trials)}


def flow_continuity(zeta, dzeta, data, model, spaces, config=None, scales=(1.0, 0.1, 0.01), forms=None):
    """Flow change ``||v(zeta + s dzeta) - v(zeta)||_X`` for shrinking ``s``.

    Returns rows of ``(||s dzeta||_1, change, change / ||s dzeta||_1^(1/2))``.
    """
    forms = forms or CoupledForms(spaces, data, model)
    zeta = np.asarray(getattr(zeta, "coeffs", zeta), dtype=float)
    dzeta = np.asarray(getattr(dzeta, "coeffs", dzeta), dtype=float)
    base = solve_flow(zeta, data, model, spaces, config, forms)
    rows = []
    for s in scales:
        pert = solve_flow(zeta + s * dzeta, data, model, spaces, config, forms, v0=base.v.coeffs)
        d = norm_1(s * dzeta, spaces)
        ch = norm_X(pert.v.coeffs - base.v.coeffs, spaces)
        rows.append((d, ch, ch / math.sqrt(d) if d > 0 else 0.0))
    return rows


# ---------------------------------------------------------------------------
# regularization sweep


def regularization_sweep(data, model, spaces, config=None, kernels=(), forms=None):
    """Coupled solve per kernel, tabulated against the finest kernel."""
    config = config or SolverConfig()
    model = _model_for(model, config)
    forms = forms or CoupledForms(spaces, data, model)
    triples = []
    failures = {}
    for k, ker in enumerate(kernels):
        try:
            triples.append(solve_coupled(data, model, spaces, config, ker, forms))
        except NonConvergenceError as exc:
            triples.append(None)
            failures[k] = str(exc)
    ref = triples[-1] if triples else None
    table = []
    for k, (ker, t) in enumerate(zip(kernels, triples)):
        row = {"index": k, "radius": ker.radius, "failed": t is None}
        if t is not None and ref is not None:
            dv = t.v.coeffs - ref.v.coeffs
            row.update({
                "dv_X": norm_X(dv, spaces),
                "dp_L2": pressure_L2(t.p.coeffs - ref.p.coeffs, spaces),
                "dzeta_2": norm_2(t.zeta.coeffs - ref.zeta.coeffs, spaces),
                "unreg_residual": _unreg_residual(t, forms),
                "iterations": len(t.history),
            })
        elif t is None:
            row["error"] = failures[k]
        table.append(row)
    return triples, table


def _unreg_residual(t, forms):
    spaces = forms.spaces
    z = t.zeta.coeffs
    r = forms.model.chi * (spaces.pi @ z) - forms.heat_operator(t.v.coeffs, z, None, None)
    return dual_norm_1(r, spaces)
