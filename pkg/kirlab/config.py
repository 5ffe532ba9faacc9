"""
experiment configuration read from TOML files.

    output = "runs/sublinear"
    threads = 1

    [domain]         shape = "disk" | "rectangle", radius | width, height, resolution
    [params]         a, b, alpha, p (dim = 2)
    [perturbation]   kind = "none" | "sublinear" (mu, q, q1) | "superlinear" (lam or lam_fraction, q)
    [tolerances]     cg, groundstate, root, fixed_point, residual
    [continuation]   t_schedule = [...] or steps = 11, method = "auto" | "picard" | "broyden"
    [sweep]          variable, values, resolutions, t0
    [branch]         S, variable, values, b_sequence

every section except [params] is optional; violations of all sections are collected into one error
"""

from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import List, Optional, Union

import tomli

from kirlab.branch import KirchhoffParams
from kirlab.exceptions import ConfigurationError, KirlabError
from kirlab.grid import DomainSpec, build_domain, smallest_eigenvalue
from kirlab.kirchhoff import PerturbationSpec, check_schedule, uniform_schedule
from kirlab.sweep import SWEEP_VARIABLES, SweepSpec

SECTIONS = ("domain", "params", "perturbation", "tolerances", "continuation", "sweep", "branch")
TOP_LEVEL = ("output", "threads")
METHODS = ("auto", "picard", "broyden")


@dataclass(frozen=True)
class Tolerances:
    cg: float = 1e-12
    groundstate: float = 1e-10
    root: float = 1e-10
    fixed_point: float = 1e-10
    residual: float = 1e-8

    def violations(self):
        return [f"tolerance {f.name} must be > 0, got {getattr(self, f.name)}"
                for f in fields(self) if not getattr(self, f.name) > 0]


@dataclass(frozen=True)
class BranchSection:
    """
    fixed S for the branch stage (skips the PDE solve), an optional bifurcation sweep and b ladder
    """
    S: Optional[float] = None
    variable: Optional[str] = None
    values: tuple = ()
    b_sequence: tuple = tuple(2.0 ** -k for k in range(13))


@dataclass
class ExperimentConfig:
    domain: DomainSpec
    params: KirchhoffParams
    perturbation: PerturbationSpec = field(default_factory=PerturbationSpec.none)
    tolerances: Tolerances = field(default_factory=Tolerances)
    t_schedule: Optional[List[float]] = None
    method: str = "auto"
    sweep: Optional[SweepSpec] = None
    branch: BranchSection = field(default_factory=BranchSection)
    output: str = "kirlab_run"
    threads: int = 1
    lam1: Optional[float] = None

    @property
    def schedule(self) -> List[float]:
        return uniform_schedule() if self.t_schedule is None else self.t_schedule

    def step_kwargs(self):
        """
        keyword arguments of homotopy_step fixed by the configuration
        """
        tol = self.tolerances
        return {"tol": tol.fixed_point, "residual_tol": tol.residual, "cg_tol": tol.cg, "method": self.method,
                "lam1": self.lam1}

    def to_dict(self):
        out = {"output": self.output,
               "threads": self.threads,
               "domain": self.domain.to_dict(),
               "params": self.params.to_dict(),
               "perturbation": self.perturbation.to_dict(),
               "tolerances": {f.name: getattr(self.tolerances, f.name) for f in fields(self.tolerances)},
               "continuation": {"t_schedule": self.schedule, "method": self.method},
               "branch": {"S": self.branch.S, "variable": self.branch.variable,
                          "values": list(self.branch.values), "b_sequence": list(self.branch.b_sequence)},
               "lam1": self.lam1}
        if self.sweep is not None:
            out["sweep"] = self.sweep.to_dict()
        return out


def _unknown(section, data, allowed, bad):
    for key in data:
        if key not in allowed:
            bad.append(f"unknown key {key!r} in [{section}]" if section else f"unknown top-level key {key!r}")


def _domain(data, bad, resolution=None):
    _unknown("domain", data, ("shape", "resolution", "width", "height", "radius"), bad)
    if resolution is not None:
        data = {**data, "resolution": int(resolution)}
    shape = data.get("shape", "rectangle")
    if shape == "disk":
        spec = DomainSpec.disk(data.get("radius", 1.0), data.get("resolution", 256))
    else:
        spec = DomainSpec(shape, int(data.get("resolution", 64)), width=float(data.get("width", 1.0)),
                          height=float(data.get("height", 1.0)))
    bad.extend(spec.violations())
    return spec


def _params(data, bad):
    _unknown("params", data, ("a", "b", "alpha", "p", "dim"), bad)
    missing = [k for k in ("a", "b", "alpha", "p") if k not in data]
    if missing:
        bad.append(f"[params] is missing {', '.join(missing)}")
        return None
    try:
        return KirchhoffParams(float(data["a"]), float(data["b"]), float(data["alpha"]), float(data["p"]),
                               int(data.get("dim", 2)))
    except ConfigurationError as err:
        bad.extend(err.violations)
    except KirlabError as err:
        bad.append(str(err))
    return None


def _perturbation(data, bad):
    _unknown("perturbation", data, ("kind", "mu", "lam", "lam_fraction", "q", "q1"), bad)
    pert = PerturbationSpec(data.get("kind", "none"), mu=float(data.get("mu", 0.0)), lam=data.get("lam"),
                            q=data.get("q"), q1=data.get("q1"), lam_fraction=data.get("lam_fraction"))
    if pert.kind == "superlinear" and pert.lam is not None and pert.lam_fraction is not None:
        bad.append("[perturbation] takes lam or lam_fraction, not both")
    return pert


def _continuation(data, bad):
    _unknown("continuation", data, ("t_schedule", "steps", "method"), bad)
    method = data.get("method", "auto")
    if method not in METHODS:
        bad.append(f"continuation method must be one of {METHODS}, got {method!r}")
    schedule = None
    if "t_schedule" in data:
        schedule = [float(t) for t in data["t_schedule"]]
    elif "steps" in data:
        schedule = uniform_schedule(int(data["steps"]))
    if schedule is not None:
        try:
            check_schedule(schedule)
        except ConfigurationError as err:
            bad.extend(err.violations)
    return schedule, method


def _sweep(data, params, bad):
    if data is None:
        return None
    _unknown("sweep", data, ("variable", "values", "resolutions", "t0"), bad)
    spec = SweepSpec(data.get("variable", ""), tuple(float(v) for v in data.get("values", ())),
                     tuple(int(r) for r in data.get("resolutions", (64, 128))), data.get("t0"))
    if params is not None:
        bad.extend(spec.violations(params))
    elif spec.variable not in SWEEP_VARIABLES:
        bad.append(f"sweep variable must be one of {SWEEP_VARIABLES}, got {spec.variable!r}")
    return spec


def _branch(data, bad):
    _unknown("branch", data, ("S", "variable", "values", "b_sequence"), bad)
    section = BranchSection(data.get("S"), data.get("variable"), tuple(float(v) for v in data.get("values", ())))
    if "b_sequence" in data:
        section = replace(section, b_sequence=tuple(float(b) for b in data["b_sequence"]))
    if section.S is not None and not section.S > 0:
        bad.append(f"[branch] S must be > 0, got {section.S}")
    if section.variable is not None and section.variable not in ("a", "b", "alpha", "p", "S"):
        bad.append(f"[branch] variable must be one of a, b, alpha, p, S; got {section.variable!r}")
    if any(not b > 0 for b in section.b_sequence):
        bad.append("[branch] b_sequence entries must be > 0")
    return section


def config_from_dict(data: dict, overrides: Optional[dict] = None, resolve: bool = True) -> ExperimentConfig:
    """
    build and validate an ExperimentConfig
    :param data: parsed TOML tree
    :param overrides: output, threads, resolution from the command line (None values are ignored)
    :param resolve: compute lambda_1 on the configured grid for the superlinear lam checks
    :raises ConfigurationError: listing every violated condition
    """
    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
    bad = []
    _unknown("", {k: v for k, v in data.items() if not isinstance(v, dict)}, TOP_LEVEL, bad)
    _unknown("", {k: v for k, v in data.items() if isinstance(v, dict)}, SECTIONS, bad)

    domain = _domain(data.get("domain", {}), bad, overrides.get("resolution"))
    params = _params(data.get("params", {}), bad)
    pert = _perturbation(data.get("perturbation", {}), bad)
    tol_data = data.get("tolerances", {})
    _unknown("tolerances", tol_data, [f.name for f in fields(Tolerances)], bad)
    tolerances = Tolerances(**{k: float(v) for k, v in tol_data.items() if k in {f.name for f in fields(Tolerances)}})
    bad.extend(tolerances.violations())
    schedule, method = _continuation(data.get("continuation", {}), bad)
    sweep = _sweep(data.get("sweep"), params, bad)
    branch = _branch(data.get("branch", {}), bad)
    threads = int(overrides.get("threads", data.get("threads", 1)))
    if threads < 1:
        bad.append(f"threads must be >= 1, got {threads}")

    lam1 = None
    if params is not None:
        bad.extend(pert.violations(params))
        if resolve and pert.kind == "superlinear" and not bad:
            lam1, _ = smallest_eigenvalue(build_domain(domain))
            bad.extend(pert.violations(params, lam1))
            pert = pert.resolve(params.a, lam1)
    if bad:
        raise ConfigurationError(bad)

    return ExperimentConfig(domain, params, pert, tolerances, schedule, method, sweep, branch,
                            str(overrides.get("output", data.get("output", "kirlab_run"))), threads, lam1)


def load_config(path: Union[str, Path], overrides: Optional[dict] = None, resolve: bool = True) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"config file {path} does not exist")
    try:
        data = tomli.loads(path.read_text())
    except tomli.TOMLDecodeError as err:
        raise ConfigurationError(f"config file {path} is not valid TOML: {err}") from err
    return config_from_dict(data, overrides, resolve)
