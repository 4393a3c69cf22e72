"""Problem data: field strength, loads and boundary values as closed-form fields.

Every field is a callable of points ``x`` with shape ``(..., 2)``.  Named
fields are built from compact strings such as ``uniform:0,1`` so that they
fit in a flat config file.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class ProblemData:
    E_field: Callable
    body_force: Callable
    traction: Callable
    boundary_velocity: Callable
    boundary_temperature: Callable
    fields: dict = field(default_factory=dict)

    def with_(self, **changes):
        from dataclasses import replace

        return replace(self, **changes)


def _floats(args, n, name):
    try:
        vals = [float(a) for a in args]
    except ValueError:
        raise ConfigError(f"{name}: expected numbers, got {args}") from None
    if len(vals) != n:
        raise ConfigError(f"{name}: expected {n} parameters, got {len(vals)}")
    return vals


def constant_vector(vx, vy):
    v = np.array([vx, vy], dtype=float)
    return lambda x: np.broadcast_to(v, np.shape(x)).copy()


def constant_scalar(c):
    return lambda x: np.full(np.shape(x)[:-1], float(c))


def _split(text):
    kind, _, rest = text.strip().partition(":")
    args = [a for a in rest.replace(" ", "").split(",") if a]
    return kind.strip().lower(), args


def e_field(text):
    """``uniform:Ex,Ey`` | ``linear:Ex,Ey,gx,gy`` (magnitude grows along g) |
    ``radial:x0,y0,E0`` (pointing away from (x0, y0), magnitude E0) | ``zero``."""
    kind, args = _split(text)
    if kind == "zero":
        return constant_vector(0.0, 0.0)
    if kind == "uniform":
        return constant_vector(*_floats(args, 2, text))
    if kind == "linear":
        ex, ey, gx, gy = _floats(args, 4, text)
        base = np.array([ex, ey])

        def E(x):
            s = 1.0 + gx * x[..., 0] + gy * x[..., 1]
            return s[..., None] * base

        return E
    if kind == "radial":
        x0, y0, e0 = _floats(args, 3, text)

        def E(x):
            d = x - np.array([x0, y0])
            r = np.linalg.norm(d, axis=-1, keepdims=True)
            with np.errstate(invalid="ignore", divide="ignore"):
                out = np.where(r > 0, e0 * d / r, 0.0)
            return out

        return E
    raise ConfigError(f"unknown E field {text!r}")


def vector_field(text):
    """``zero`` | ``constant:vx,vy``."""
    kind, args = _split(text)
    if kind == "zero":
        return constant_vector(0.0, 0.0)
    if kind == "constant":
        return constant_vector(*_floats(args, 2, text))
    raise ConfigError(f"unknown vector field {text!r}")


def boundary_velocity(text, height=1.0):
    """``zero`` | ``translation:ux,uy`` | ``poiseuille:U`` (profile
    ``4 U y (H - y) / H^2`` along x, zero on y = 0 and y = H) |
    ``lid:U`` (u = (U, 0) on the top side y = H only)."""
    kind, args = _split(text)
    if kind == "zero":
        return constant_vector(0.0, 0.0)
    if kind == "translation":
        return constant_vector(*_floats(args, 2, text))
    if kind == "poiseuille":
        (U,) = _floats(args, 1, text)

        def u(x):
            y = x[..., 1]
            out = np.zeros(np.shape(x))
            out[..., 0] = 4.0 * U * y * (height - y) / height**2
            return out

        return u
    if kind == "lid":
        (U,) = _floats(args, 1, text)

        def u(x):
            out = np.zeros(np.shape(x))
            out[..., 0] = np.where(np.isclose(x[..., 1], height), U, 0.0)
            return out

        return u
    raise ConfigError(f"unknown boundary velocity {text!r}")


def scalar_field(text):
    """``constant:c`` | ``linear:gx,gy,c`` (value ``gx x + gy y + c``)."""
    kind, args = _split(text)
    if kind == "zero":
        return constant_scalar(0.0)
    if kind == "constant":
        return constant_scalar(*_floats(args, 1, text))
    if kind == "linear":
        gx, gy, c = _floats(args, 3, text)
        return lambda x: gx * x[..., 0] + gy * x[..., 1] + c
    raise ConfigError(f"unknown scalar field {text!r}")


def make_problem_data(E="zero", K="zero", F="zero", u_hat="zero", tau_hat="zero", height=1.0):
    """Build :class:`ProblemData` from named field strings."""
    return ProblemData(
        E_field=e_field(E),
        body_force=vector_field(K),
        traction=vector_field(F),
        boundary_velocity=boundary_velocity(u_hat, height=height),
        boundary_temperature=scalar_field(tau_hat),
        fields={"E": E, "K": K, "F": F, "u_hat": u_hat, "tau_hat": tau_hat},
    )


def zero_data():
    return make_problem_data()
