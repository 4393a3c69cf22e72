"""Pointwise kinematics and electrorheological viscosity laws.

Two viscosity families are supported::

    phi2 = e(|E|, tau, x) (lam + I)^(-1/2) + psi1(I, |E|, tau, x)
    phi1 = b(|E|, mu, tau) (lam + I)^(-1/2) + psi(I, |E|, mu, tau)

where ``I`` is the second invariant of the rate of strain and ``mu`` the
squared cosine between flow direction and field.  Every function here is
vectorised over leading array axes and free of side effects.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .errors import ClosureError, ConfigError, DomainError, InvalidInputError

PHI1 = "PHI1"
PHI2 = "PHI2"


@dataclass(frozen=True)
class Closure:
    """A named material function.

    ``deriv`` is the partial derivative in the first argument (the shear
    invariant) for the psi-type closures; None means finite differences.
    """

    name: str
    func: Callable
    deriv: Optional[Callable] = None

    def __call__(self, *args):
        return self.func(*args)


@dataclass(frozen=True)
class MaterialModel:
    lam: float = 1.0
    chi: float = 1.0
    eps_heat: float = 0.1
    a0: float = 1.0
    a1: float = 0.5
    a2: float = 2.0
    a3: float = 0.5
    a4: float = 1.0
    alpha: float = 1e-8
    u_frame: tuple = (0.0, 0.0)
    closure_e: Closure = None
    closure_psi1: Closure = None
    closure_b: Closure = None
    closure_psi: Closure = None
    variant: str = PHI2
    # use I(P u) instead of I(u) as the viscosity argument in the phi2 heat source
    regularized_viscosity: bool = False
    params: dict = field(default_factory=dict)

    def validate(self, need_lambda=True):
        if not (self.a1 > 0 and self.a2 >= self.a1):
            raise ConfigError(f"need 0 < a1 <= a2, got a1={self.a1}, a2={self.a2}")
        if self.a0 < 0:
            raise ConfigError(f"need a0 >= 0, got {self.a0}")
        if self.a3 <= 0 or self.a4 <= 0:
            raise ConfigError(f"need a3, a4 > 0, got a3={self.a3}, a4={self.a4}")
        if self.lam < 0 or (need_lambda and self.lam <= 0):
            raise ConfigError(f"lambda must be > 0 for the flow operator, got {self.lam}")
        if self.chi <= 0:
            raise ConfigError(f"chi must be > 0, got {self.chi}")
        if self.eps_heat < 0:
            raise ConfigError(f"eps_heat must be >= 0, got {self.eps_heat}")
        if self.alpha < 0:
            raise ConfigError(f"alpha must be >= 0, got {self.alpha}")
        if self.variant not in (PHI1, PHI2):
            raise ConfigError(f"unknown variant {self.variant!r}")
        for name in ("closure_e", "closure_psi1", "closure_b", "closure_psi"):
            if getattr(self, name) is None:
                raise ConfigError(f"{name} is not set")
        return self

    def with_(self, **changes):
        return replace(self, **changes)


# ---------------------------------------------------------------------------
# closure registry


def _field_factor(E_mag, tau, c_tau):
    E2 = np.square(E_mag)
    return np.minimum(1.0, E2 / (1.0 + E2) * np.exp(-c_tau * np.asarray(tau, dtype=float)))


def _e_default(p):
    a0, c_tau = p["a0"], p.get("c_tau", 1.0)

    def e(E_mag, tau, x=None):
        return a0 * _field_factor(E_mag, tau, c_tau)

    return Closure("default", e)


def _b_default(p):
    a0, c_tau, kappa = p["a0"], p.get("c_tau", 1.0), p.get("kappa", 0.5)
    if not 0.0 <= kappa < 1.0:
        raise ConfigError(f"kappa must lie in [0, 1), got {kappa}")

    def b(E_mag, mu, tau):
        return a0 * (1.0 - kappa * np.asarray(mu, dtype=float)) * _field_factor(E_mag, tau, c_tau)

    return Closure("default", b)


def _carreau(p):
    a1, a2 = p["a1"], p["a2"]

    def psi(I, *rest):
        return a1 + (a2 - a1) / np.sqrt(1.0 + np.asarray(I, dtype=float))

    def dpsi(I, *rest):
        return -0.5 * (a2 - a1) * (1.0 + np.asarray(I, dtype=float)) ** -1.5

    return Closure("carreau", psi, dpsi)


def _zero(p):
    return Closure("zero", lambda first, *rest: np.zeros(np.shape(first)),
                   lambda first, *rest: np.zeros(np.shape(first)))


def _const_e(p):
    value = p.get("e_value", p["a0"])
    return Closure("constant", lambda E_mag, *rest: np.full(np.shape(E_mag), float(value)))


def _const_psi(p):
    value = p.get("psi_value", p["a1"])
    return Closure("constant", lambda I, *rest: np.full(np.shape(I), float(value)),
                   lambda I, *rest: np.zeros(np.shape(I)))


CLOSURES = {
    "e": {"default": _e_default, "zero": _zero, "constant": _const_e},
    "b": {"default": _b_default, "zero": _zero, "constant": _const_e},
    "psi1": {"carreau": _carreau, "default": _carreau, "constant": _const_psi},
    "psi": {"carreau": _carreau, "default": _carreau, "constant": _const_psi},
}


def make_closure(kind, name, params):
    try:
        factory = CLOSURES[kind][name]
    except KeyError:
        known = sorted(CLOSURES.get(kind, {}))
        raise ConfigError(f"unknown {kind} closure {name!r}; known: {known}") from None
    return factory(params)


def make_model(closures=None, params=None, **constants):
    """Build a validated model from registry names.

    ``closures`` maps ``e``/``psi1``/``b``/``psi`` to registry names;
    ``params`` holds closure parameters (``c_tau``, ``kappa``, ``psi_value``...).
    """
    names = {"e": "default", "psi1": "carreau", "b": "default", "psi": "carreau"}
    names.update(closures or {})
    base = MaterialModel(**constants)
    p = {"a0": base.a0, "a1": base.a1, "a2": base.a2}
    p.update(params or {})
    model = replace(
        base,
        closure_e=make_closure("e", names["e"], p),
        closure_psi1=make_closure("psi1", names["psi1"], p),
        closure_b=make_closure("b", names["b"], p),
        closure_psi=make_closure("psi", names["psi"], p),
        params=dict(p, **{f"closure_{k}": v for k, v in names.items()}),
    )
    return model.validate(need_lambda=False)


def default_model(**overrides):
    return make_model(**overrides)


def constant_viscosity_model(value, **constants):
    """Newtonian special case: e = b = 0 and psi1 = psi = value."""
    constants.setdefault("a1", value)
    constants.setdefault("a2", value)
    constants.setdefault("a3", value)
    return make_model(
        closures={"e": "zero", "b": "zero", "psi1": "constant", "psi": "constant"},
        params={"psi_value": value},
        **constants,
    )


# ---------------------------------------------------------------------------
# kinematics


@dataclass(frozen=True)
class StrainState:
    eps: np.ndarray
    invariant_I: float


def strain_rate(grad_u):
    """Symmetric part of a velocity gradient and its second invariant."""
    g = np.asarray(grad_u, dtype=float)
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        raise InvalidInputError(f"grad_u must be square, got shape {g.shape}")
    if not np.all(np.isfinite(g)):
        raise InvalidInputError("grad_u has non-finite entries")
    eps = 0.5 * (g + g.T)
    return StrainState(eps, float(np.sum(eps * eps)))


def strain_tensors(grad):
    """Batched version of :func:`strain_rate`: ``grad[..., i, j] = du_i/dx_j``."""
    eps = 0.5 * (grad + np.swapaxes(grad, -1, -2))
    return eps, np.einsum("...ij,...ij->...", eps, eps)


def alignment_mu(u, E, model):
    """Squared cosine between the shifted flow direction and the field.

    With ``alpha > 0`` the offset keeps the expression defined at zero flow.
    """
    u = np.asarray(u, dtype=float)
    E = np.asarray(E, dtype=float)
    n = u.shape[-1]
    E_norm = np.linalg.norm(E, axis=-1)
    if np.any(E_norm == 0):
        raise DomainError("alignment undefined for |E| = 0")
    w = u + np.asarray(model.u_frame, dtype=float)
    w_norm = np.linalg.norm(w, axis=-1)
    if model.alpha == 0 and np.any(w_norm == 0):
        raise DomainError("alignment undefined for u + u_frame = 0 with alpha = 0")
    num = model.alpha + w
    cos = np.sum(num * E, axis=-1) / ((model.alpha * math.sqrt(n) + w_norm) * E_norm)
    mu = np.clip(cos * cos, 0.0, 1.0)
    return float(mu) if mu.ndim == 0 else mu


def alignment_mu_field(u, E, model):
    """``alignment_mu`` that returns 0 where E vanishes (the field has no effect there)."""
    E = np.asarray(E, dtype=float)
    mask = np.linalg.norm(E, axis=-1) > 0
    mu = np.zeros(mask.shape)
    if np.any(mask):
        mu[mask] = alignment_mu(np.asarray(u)[mask], E[mask], model)
    return mu


# ---------------------------------------------------------------------------
# viscosities


def _check_singular(I, lam):
    if lam <= 0 and np.any(np.asarray(I) <= 0):
        raise DomainError("viscosity is singular at lambda = 0, I = 0")


def _safe_call(closure, label, *args):
    try:
        out = closure(*args)
    except Exception as exc:  # noqa: BLE001 - re-raised with location
        raise ClosureError(f"closure {label} ({closure.name}) failed: {exc}") from exc
    out = np.asarray(out, dtype=float)
    if not np.all(np.isfinite(out)):
        bad = np.argwhere(~np.isfinite(np.broadcast_to(out, np.broadcast(*args[:1]).shape)))
        raise ClosureError(f"closure {label} returned non-finite values", location=bad[:1].tolist())
    return out


def viscosity_phi2(I, E_mag, tau, x, model):
    I = np.asarray(I, dtype=float)
    _check_singular(I, model.lam)
    e = _safe_call(model.closure_e, "e", E_mag, tau, x)
    psi = _safe_call(model.closure_psi1, "psi1", I, E_mag, tau, x)
    out = e / np.sqrt(model.lam + I) + psi
    return float(out) if out.ndim == 0 else out


def viscosity_phi1(I, E_mag, mu, tau, model):
    I = np.asarray(I, dtype=float)
    _check_singular(I, model.lam)
    b = _safe_call(model.closure_b, "b", E_mag, mu, tau)
    psi = _safe_call(model.closure_psi, "psi", I, E_mag, mu, tau)
    out = b / np.sqrt(model.lam + I) + psi
    return float(out) if out.ndim == 0 else out


def smoothstep_blend(s):
    s = np.clip(s, 0.0, 1.0)
    return 1.0 - s * s * (3.0 - 2.0 * s)


def truncate_phi3(I_reg, b1, b2, phi1_value):
    """Cap the viscosity: unchanged below ``b1``, zero above ``b2``.

    The transition is a cubic smoothstep, so the result is C^1 in ``I_reg``
    with Lipschitz constant ``1.5 * |phi1_value| / (b2 - b1)``.
    """
    if not b2 > b1 or b1 < 0:
        raise ConfigError(f"truncation caps need b2 > b1 >= 0, got b1={b1}, b2={b2}")
    s = (np.asarray(I_reg, dtype=float) - b1) / (b2 - b1)
    out = np.asarray(phi1_value, dtype=float) * smoothstep_blend(s)
    return float(out) if out.ndim == 0 else out


def truncation_lipschitz(b1, b2, phi1_value):
    return 1.5 * abs(phi1_value) / (b2 - b1)


def stress(p, eps, phi):
    e = eps.eps if isinstance(eps, StrainState) else np.asarray(eps, dtype=float)
    return -p * np.eye(e.shape[0]) + 2.0 * phi * e


def psi_derivative(closure, I, *rest):
    """d psi / d I: analytic if registered, else central differences."""
    I = np.asarray(I, dtype=float)
    if closure.deriv is not None:
        return np.asarray(closure.deriv(I, *rest), dtype=float)
    h = np.maximum(1e-6, 1e-6 * I)
    central = (closure(I + h, *rest) - closure(I - h, *rest)) / (2 * h)
    # one-sided second-order stencil where I - h leaves the domain
    forward = (-3 * closure(I, *rest) + 4 * closure(I + h, *rest) - closure(I + 2 * h, *rest)) / (2 * h)
    return np.where(I - h < 0, forward, central)


def monotone_constants(model, I_lift=0.0):
    """Lipschitz, monotonicity and coercivity constants of the flow operator.

    Returns ``(mu1, mu2, mu3, mu4)`` where ``I_lift`` is the integral of
    the shear invariant of the velocity lift.
    """
    if model.lam <= 0:
        raise ConfigError("monotone constants need lambda > 0")
    top = model.a0 / math.sqrt(model.lam)
    mu1 = 2 * model.a2 + 4 * (model.a4 + top)
    mu2 = min(2 * model.a1, 2 * model.a3)
    mu3 = 2 * model.a1
    mu4 = 2 * (top + model.a2) * math.sqrt(max(I_lift, 0.0))
    return mu1, mu2, mu3, mu4


# ---------------------------------------------------------------------------
# admissibility check


@dataclass
class ConditionRow:
    name: str
    passed: bool
    worst_margin: float
    worst_sample: dict


@dataclass
class ConditionReport:
    rows: list
    sample_count: int

    @property
    def passed(self):
        return all(r.passed for r in self.rows)

    def failures(self):
        return [r for r in self.rows if not r.passed]

    def as_dict(self):
        return {
            "passed": self.passed,
            "sample_count": self.sample_count,
            "rows": [
                {"name": r.name, "passed": r.passed, "worst_margin": r.worst_margin,
                 "worst_sample": r.worst_sample}
                for r in self.rows
            ],
        }


def _sample_arguments(sample_count, seed):
    """Tensor grid over (I, |E|, mu, tau) plus ``sample_count`` random points."""
    I_grid = np.concatenate([[0.0], np.logspace(-6, 4, 40)])
    E_grid = np.array([0.0, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 100.0])
    mu_grid = np.linspace(0.0, 1.0, 6)
    tau_grid = np.linspace(-5.0, 5.0, 11)
    grids = np.meshgrid(I_grid, E_grid, mu_grid, tau_grid, indexing="ij")
    cols = [g.ravel() for g in grids]
    rng = np.random.default_rng(seed)
    rand = [
        10.0 ** rng.uniform(-6, 4, sample_count),
        rng.uniform(0, 20, sample_count),
        rng.uniform(0, 1, sample_count),
        rng.uniform(-5, 5, sample_count),
    ]
    I, E, mu, tau = (np.concatenate([c, r]) for c, r in zip(cols, rand))
    x = np.stack([rng.uniform(0, 1, I.size), rng.uniform(0, 1, I.size)], axis=-1)
    return I, E, mu, tau, x


def model_condition_check(model, sample_count=1000, seed=0):
    """Sample the closures and test every admissibility inequality.

    Each row reports the smallest margin (negative means violated) and the
    argument tuple where it occurred.
    """
    if sample_count < 1:
        raise ConfigError("sample_count must be >= 1")
    I, E, mu, tau, x = _sample_arguments(sample_count, seed)
    m = model
    e = _safe_call(m.closure_e, "e", E, tau, x)
    b = _safe_call(m.closure_b, "b", E, mu, tau)
    psi1 = _safe_call(m.closure_psi1, "psi1", I, E, tau, x)
    psi = _safe_call(m.closure_psi, "psi", I, E, mu, tau)
    d1 = psi_derivative(m.closure_psi1, I, E, tau, x)
    d = psi_derivative(m.closure_psi, I, E, mu, tau)
    # finite differences carry truncation error; analytic derivatives only round-off
    tol1 = 1e-12 if m.closure_psi1.deriv is not None else 1e-6
    tol = 1e-12 if m.closure_psi.deriv is not None else 1e-6

    checks = [
        ("C1: 0 <= e <= a0", np.minimum(e, m.a0 - e), 1e-12),
        ("C2: a1 <= psi1 <= a2", np.minimum(psi1 - m.a1, m.a2 - psi1), 1e-12),
        ("C2: psi1 + 2 I dpsi1/dI >= a3", psi1 + 2 * d1 * I - m.a3, tol1),
        ("C2: |dpsi1/dI| I <= a4", m.a4 - np.abs(d1) * I, tol1),
        ("C1a: 0 <= b <= a0", np.minimum(b, m.a0 - b), 1e-12),
        ("C2a: a1 <= psi <= a2", np.minimum(psi - m.a1, m.a2 - psi), 1e-12),
        ("C2a: psi + 2 I dpsi/dI >= a3", psi + 2 * d * I - m.a3, tol),
        ("C2a: |dpsi/dI| I <= a4", m.a4 - np.abs(d) * I, tol),
    ]
    if m.lam > 0:
        top = m.a0 / math.sqrt(m.lam) + m.a2
        phi2 = e / np.sqrt(m.lam + I) + psi1
        phi1 = b / np.sqrt(m.lam + I) + psi
        checks.append(("a1 <= phi2 <= a0 lam^-1/2 + a2", np.minimum(phi2 - m.a1, top - phi2), 1e-12))
        checks.append(("a1 <= phi1 <= a0 lam^-1/2 + a2", np.minimum(phi1 - m.a1, top - phi1), 1e-12))

    rows = []
    for name, margin, rel_tol in checks:
        margin = np.broadcast_to(margin, I.shape)
        k = int(np.argmin(margin))
        worst = float(margin[k])
        sample = {"I": float(I[k]), "E": float(E[k]), "mu": float(mu[k]),
                  "tau": float(tau[k]), "x": [float(x[k, 0]), float(x[k, 1])]}
        rows.append(ConditionRow(name, worst >= -rel_tol * max(1.0, m.a2, m.a4), worst, sample))
    return ConditionReport(rows, int(I.size))
