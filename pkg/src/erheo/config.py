"""Flat ``key = value`` run configuration.

Lines are ``section.key = value``; ``#`` starts a comment.  Every key is
checked against a schema so typos fail loudly instead of being ignored.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from . import constitutive as cm
from .errors import ConfigError
from .discretization import build_spaces
from .mesh import generate_rectangle, read_mesh
from .mollify import kernel_sequence, make_kernel
from .problem import make_problem_data
from .solver import SolverConfig


def _bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _pair(text):
    parts = [float(p) for p in text.replace(" ", "").split(",")]
    if len(parts) != 2:
        raise ValueError(f"expected two numbers, got {text!r}")
    return tuple(parts)


def _int_list(text):
    return [int(p) for p in text.replace(" ", "").split(",") if p]


def _optional_float(text):
    t = text.strip().lower()
    return None if t in ("", "none", "off") else float(t)


SCHEMA = {
    "mesh.source": (str, "generate"),
    "mesh.nx": (int, 32),
    "mesh.ny": (int, 16),
    "mesh.lx": (float, 2.0),
    "mesh.ly": (float, 1.0),
    "mesh.pattern": (str, "crossed"),
    "mesh.tags": (str, "left:S1,right:S2,top:S1,bottom:S1"),
    "quadrature.degree": (int, 8),
    "model.variant": (str, cm.PHI2),
    "model.lambda": (float, 1.0),
    "model.chi": (float, 1.0),
    "model.eps_heat": (float, 0.1),
    "model.a0": (float, 1.0),
    "model.a1": (float, 0.5),
    "model.a2": (float, 2.0),
    "model.a3": (float, 0.5),
    "model.a4": (float, 1.0),
    "model.alpha": (float, 1e-8),
    "model.u_frame": (_pair, (0.0, 0.0)),
    "model.e": (str, "default"),
    "model.psi1": (str, "carreau"),
    "model.b": (str, "default"),
    "model.psi": (str, "carreau"),
    "model.c_tau": (float, 1.0),
    "model.kappa": (float, 0.5),
    "model.psi_value": (_optional_float, None),
    "model.e_value": (_optional_float, None),
    "model.regularized_viscosity": (_bool, False),
    "data.E": (str, "uniform:0,1"),
    "data.K": (str, "zero"),
    "data.F": (str, "zero"),
    "data.u_hat": (str, "poiseuille:1"),
    "data.tau_hat": (str, "zero"),
    "mollifier.radius": (_optional_float, 0.2),
    "mollifier.sweep_factor": (float, 0.5),
    "mollifier.sweep_count": (int, 3),
    "solver.tol_flow": (float, 1e-10),
    "solver.tol_temp": (float, 1e-10),
    "solver.tol_coupled": (float, 1e-8),
    "solver.max_picard": (int, 200),
    "solver.max_outer": (int, 50),
    "solver.relax": (float, 0.7),
    "solver.b1": (_optional_float, None),
    "solver.b2": (_optional_float, None),
    "solver.pressure_gauge": (str, "MEAN_ZERO"),
    "infsup.levels": (_int_list, [8, 16, 32]),
    "infsup.report": (_bool, False),
    "check.samples": (int, 1000),
    "output.dir": (str, "erheo_out"),
    "output.vtk": (_bool, True),
    "output.csv": (_bool, True),
    "output.json": (_bool, True),
}


def parse_text(text, source="<config>"):
    """Parse config text into a dict of typed values (defaults filled in)."""
    seen = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in SCHEMA:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in seen:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        conv = SCHEMA[key][0]
        try:
            seen[key] = conv(value)
        except ValueError as exc:
            raise ConfigError(f"{source}:{lineno}: bad value for {key}: {exc}") from None
    values = {k: default for k, (_, default) in SCHEMA.items()}
    values.update(seen)
    return values


@dataclass
class RunConfig:
    values: dict
    base_dir: Path = field(default_factory=Path.cwd)

    def get(self, key):
        return self.values[key]

    @property
    def out_dir(self):
        return Path(self.values["output.dir"])

    def build_spaces(self, mesh):
        degree = self.values["quadrature.degree"]
        if degree < 2:
            raise ConfigError(f"quadrature.degree must be >= 2, got {degree}")
        return build_spaces(mesh, degree)

    def build_mesh(self, nx=None, ny=None):
        v = self.values
        if v["mesh.source"] == "generate":
            mesh = generate_rectangle(nx or v["mesh.nx"], ny or v["mesh.ny"], v["mesh.lx"], v["mesh.ly"],
                                      tag_rule=v["mesh.tags"], pattern=v["mesh.pattern"])
        else:
            path = Path(v["mesh.source"])
            if not path.is_absolute():
                path = self.base_dir / path
            mesh = read_mesh(path)
        return mesh.validate()

    def build_model(self):
        v = self.values
        params = {"c_tau": v["model.c_tau"], "kappa": v["model.kappa"]}
        if v["model.psi_value"] is not None:
            params["psi_value"] = v["model.psi_value"]
        if v["model.e_value"] is not None:
            params["e_value"] = v["model.e_value"]
        model = cm.make_model(
            closures={k: v[f"model.{k}"] for k in ("e", "psi1", "b", "psi")},
            params=params,
            lam=v["model.lambda"], chi=v["model.chi"], eps_heat=v["model.eps_heat"],
            a0=v["model.a0"], a1=v["model.a1"], a2=v["model.a2"], a3=v["model.a3"], a4=v["model.a4"],
            alpha=v["model.alpha"], u_frame=v["model.u_frame"], variant=v["model.variant"].upper(),
            regularized_viscosity=v["model.regularized_viscosity"],
        )
        return model

    def build_data(self, mesh):
        v = self.values
        lo, hi = mesh.nodes[:, 1].min(), mesh.nodes[:, 1].max()
        data = make_problem_data(v["data.E"], v["data.K"], v["data.F"], v["data.u_hat"], v["data.tau_hat"],
                                 height=float(hi - lo))
        if lo != 0.0:
            shift = lo
            bv = data.boundary_velocity
            data = data.with_(boundary_velocity=lambda x: bv(x - [0.0, shift]))
        return data

    def build_solver_config(self):
        v = self.values
        b1, b2 = v["solver.b1"], v["solver.b2"]
        if (b1 is None) != (b2 is None):
            raise ConfigError("solver.b1 and solver.b2 must be given together")
        return SolverConfig(
            tol_flow=v["solver.tol_flow"], tol_temp=v["solver.tol_temp"], tol_coupled=v["solver.tol_coupled"],
            max_picard=v["solver.max_picard"], max_outer=v["solver.max_outer"], relax=v["solver.relax"],
            variant=v["model.variant"].upper(), caps=None if b1 is None else (b1, b2),
            pressure_gauge=v["solver.pressure_gauge"].upper(),
        )

    def build_kernel(self):
        r = self.values["mollifier.radius"]
        return None if r is None or r == 0 else make_kernel(r)

    def build_kernels(self):
        r = self.values["mollifier.radius"]
        if r is None or r == 0:
            raise ConfigError("a sweep needs mollifier.radius > 0")
        return kernel_sequence(r, self.values["mollifier.sweep_factor"], self.values["mollifier.sweep_count"])


def load_config(path, out_dir=None):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    values = parse_text(text, str(path))
    if out_dir is not None:
        values["output.dir"] = str(out_dir)
    return RunConfig(values, path.parent)
