"""Scenario files: one JSON document describing a sampling problem, and
the lazily built pipeline objects derived from it.

Example::

    {
      "name": "classical",
      "dim": 1, "N": 1, "r": 1,
      "lattice": [[1]],
      "generators": ["hat"],
      "filters": [{"type": "point", "component": 0, "offset": [0]}]
    }

Generator entries are a profile name (used on every component and axis)
or ``{"components": [component, ...]}`` with one entry per component:
``{"profile": name, "degree": n, "shift": [...], "scale": c}``,
``{"file": "table.csv"}`` or ``{"zero": true}``. Filters are
``{"type": "point", "component": q, "offset": [...]}`` or
``{"type": "kernel", "kernels": [kernel or null, ...]}`` where a kernel is
``{"profile": "box", "width": w}``, any generator profile, or a file.
"""

import copy
import json
import os
from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources

import numpy as np

from .errors import ParseError, SamplingError, UnsupportedRegime, ValidationError
from .filters import FilterBank, KernelFilter, PointEvaluation, box_kernel, build_symbols
from .gridfn import GridFunction
from .lattice import SamplingLattice, check_regime
from .modulation import classify, completeness_test, refined_spectral_bounds
from .reconstruction import build_kernels, compute_duals, subcube_fields
from .sispace import (
    Generator,
    GeneratorSet,
    SeparableComponent,
    TabulatedComponent,
    ZeroComponent,
    riesz_bounds_estimate,
)

DEFAULT_PARAMS = {
    "R": 256,
    "K": 32,
    "K_sym": 8,
    "K_samp": None,
    "cell_resolution": 128,
    "space_resolution": 32,
    "filter_resolution": 256,
    "K_coeff": 6,
    "riesz_K_coeff": 8,
    "riesz_trials": 20,
    "patch_bandwidth": 3,
    "strict_l1": False,
}

DEFAULT_ENSEMBLES = {
    "identity": 50,
    "sampling": 30,
    "sandwich": 50,
    "bessel": 100,
    "stability": 50,
    "reconstruct": 20,
    "dual_identity": 20,
}

DEFAULT_TOLERANCES = {
    "tol_rank": 1e-8,
    "tol_identity": 1e-3,
    "tol_reconstruct": 1e-3,
    "tol_sampling": 1e-6,
    "tol_dual": 1e-8,
    "pinv_floor": 1e-8,
    "blowup_cap": 1e12,
    "riesz_cap": 1e8,
    "stable_floor": 1e-6,
    "null_ratio": 1e-6,
    "witness_error": 0.1,
    "sandwich_slack": 0.02,
    "bessel_slack": 1e-3,
    "probe_fraction": 0.9,
    "refinement_tol": 0.01,
    "envelope_slack": 0.05,
}

GOLDEN = ("classical", "oversampled", "averaging", "rank_deficient", "quincunx")
EXTRA = ("two_generators", "vector")


@dataclass
class Scenario:
    name: str
    dim: int
    N: int
    r: int
    lattice: list
    generators: list
    filters: list
    gammas: list = None
    params: dict = field(default_factory=dict)
    ensembles: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    seed: int = 0
    base_dir: str = "."

    def as_dict(self):
        """Resolved scenario (defaults filled), suitable for echoing."""
        return {
            "name": self.name,
            "dim": self.dim,
            "N": self.N,
            "r": self.r,
            "lattice": self.lattice,
            "gammas": self.gammas,
            "generators": self.generators,
            "filters": self.filters,
            "params": self.params,
            "ensembles": self.ensembles,
            "tolerances": self.tolerances,
            "seed": self.seed,
        }

    def with_overrides(self, **kw):
        """Copy with entries of params / tolerances / ensembles / seed replaced."""
        out = copy.deepcopy(self)
        for k, v in kw.items():
            if k == "seed":
                out.seed = int(v)
            elif k in out.tolerances:
                out.tolerances[k] = v
            elif k in out.ensembles:
                out.ensembles[k] = v
            elif k in out.params:
                out.params[k] = v
            else:
                raise KeyError(k)
        return out

    def build(self):
        return ScenarioRun(self)


def _require(doc, key, kind, path):
    if key not in doc:
        raise ParseError(f"{path}: missing required field '{key}'")
    v = doc[key]
    if not isinstance(v, kind) or isinstance(v, bool) and kind is not bool:
        raise ParseError(f"{path}: field '{key}' must be {getattr(kind, '__name__', kind)}, got {type(v).__name__}")
    return v


def _merge(defaults, given, what, path):
    given = given or {}
    if not isinstance(given, dict):
        raise ParseError(f"{path}: field '{what}' must be an object")
    unknown = sorted(set(given) - set(defaults))
    if unknown:
        raise ParseError(f"{path}: field '{what}' has unknown keys {unknown}")
    out = dict(defaults)
    out.update(given)
    return out


def parse_scenario(doc, path="<scenario>", base_dir="."):
    """Validate a decoded scenario document and fill defaults."""
    if not isinstance(doc, dict):
        raise ParseError(f"{path}: top level must be a JSON object")
    name = doc.get("name", os.path.splitext(os.path.basename(str(path)))[0])
    dim = _require(doc, "dim", int, path)
    N = int(doc.get("N", 1))
    r = int(doc.get("r", 1))
    lattice = _require(doc, "lattice", list, path)
    generators = _require(doc, "generators", list, path)
    filters = _require(doc, "filters", list, path)
    params = _merge(DEFAULT_PARAMS, doc.get("params"), "params", path)
    ensembles = _merge(DEFAULT_ENSEMBLES, doc.get("ensembles"), "ensembles", path)
    tolerances = _merge(DEFAULT_TOLERANCES, doc.get("tolerances"), "tolerances", path)
    seed = doc.get("seed", 0)
    if not isinstance(seed, int) or seed < 0:
        raise ParseError(f"{path}: field 'seed' must be a nonnegative integer")

    if dim < 1 or N < 1 or r < 1:
        raise ValidationError(f"{path}: dim, N and r must be positive", rule="positive parameters")
    try:
        check_regime(dim, N)
    except UnsupportedRegime as exc:
        raise ValidationError(f"{path}: {exc}", rule="UnsupportedRegime: d = 1 or N = 1") from exc
    if dim == 1 and lattice and not isinstance(lattice[0], list):
        lattice = [lattice]
    if len(lattice) != dim or any(not isinstance(row, list) or len(row) != dim for row in lattice):
        raise ValidationError(f"{path}: lattice must be a {dim}x{dim} integer matrix", rule="lattice shape")
    if any(not isinstance(v, int) or isinstance(v, bool) for row in lattice for v in row):
        raise ValidationError(f"{path}: lattice entries must be integers", rule="integer lattice")
    if len(generators) != N:
        raise ValidationError(f"{path}: expected N={N} generators, got {len(generators)}", rule="one generator per subcube")
    if not filters:
        raise ValidationError(f"{path}: at least one filter is required", rule="s >= 1")
    for key in ("R", "K", "K_sym", "cell_resolution", "space_resolution", "filter_resolution", "K_coeff",
                "riesz_K_coeff", "riesz_trials", "patch_bandwidth"):
        v = params[key]
        if not isinstance(v, int) or isinstance(v, bool) or v <= 0:
            raise ValidationError(f"{path}: parameter {key} must be a positive integer, got {v!r}", rule="parameters positive")
    if params["K_samp"] is not None and (not isinstance(params["K_samp"], int) or params["K_samp"] < 0):
        raise ValidationError(f"{path}: parameter K_samp must be null or a nonnegative integer", rule="parameters positive")
    if params["R"] % N:
        raise ValidationError(f"{path}: R={params['R']} must be divisible by N={N}", rule="R divisible by N")
    for key, v in ensembles.items():
        if not isinstance(v, int) or v < 1:
            raise ValidationError(f"{path}: ensemble size {key} must be a positive integer", rule="parameters positive")
    for key, v in tolerances.items():
        if not isinstance(v, (int, float)) or isinstance(v, bool) or v < 0:
            raise ValidationError(f"{path}: tolerance {key} must be a nonnegative number", rule="parameters positive")
    for ref in _file_refs(generators) + _file_refs(filters):
        full = os.path.join(base_dir, ref)
        if not os.path.isfile(full):
            raise ValidationError(f"{path}: referenced file not found: {full}", rule="referenced files exist")
    return Scenario(
        name=name,
        dim=dim,
        N=N,
        r=r,
        lattice=lattice,
        generators=generators,
        filters=filters,
        gammas=doc.get("gammas"),
        params=params,
        ensembles=ensembles,
        tolerances=tolerances,
        seed=seed,
        base_dir=base_dir,
    )


def _file_refs(obj):
    if isinstance(obj, dict):
        out = [obj["file"]] if isinstance(obj.get("file"), str) else []
        for v in obj.values():
            if isinstance(v, (dict, list)):
                out += _file_refs(v)
        return out
    if isinstance(obj, list):
        return [x for v in obj for x in _file_refs(v)]
    return []


def load_scenario(path):
    """Read, parse and validate a scenario file.

    Raises
    ------
    ParseError
        Malformed JSON (with line and column) or a missing / mistyped field.
    ValidationError
        A well-formed document that violates a rule; ``rule`` names it.
    """
    path = str(path)
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ValidationError(f"cannot read scenario {path}: {exc.strerror}", rule="scenario readable") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return parse_scenario(doc, path, os.path.dirname(os.path.abspath(path)))


def golden_path(name):
    """Path of a scenario shipped with the package."""
    return str(resources.files("sisampling") / "scenarios" / f"{name}.json")


def load_golden(name):
    return load_scenario(golden_path(name))


# ---------------------------------------------------------------------------
# construction of the numerical objects


def _component(spec, d, base_dir, where):
    if spec is None or isinstance(spec, dict) and spec.get("zero"):
        return ZeroComponent(d)
    if isinstance(spec, str):
        spec = {"profile": spec}
    if not isinstance(spec, dict):
        raise ValidationError(f"{where}: component must be a name or an object", rule="component spec")
    if "file" in spec:
        gf = GridFunction.from_csv(os.path.join(base_dir, spec["file"]))
        if gf.grid.dim != d:
            raise ValidationError(f"{where}: table {spec['file']} has dimension {gf.grid.dim}, expected {d}")
        return TabulatedComponent(gf)
    try:
        return SeparableComponent.named(
            spec["profile"], d, spec.get("degree"), spec.get("shift"), spec.get("scale", 1.0)
        )
    except (KeyError, ValueError) as exc:
        raise ValidationError(f"{where}: {exc}", rule="component spec") from exc


def build_generators(sc):
    gens = []
    for n, spec in enumerate(sc.generators):
        where = f"generator {n}"
        if isinstance(spec, str):
            comps = [spec] * sc.r
        elif isinstance(spec, dict) and "components" in spec:
            comps = spec["components"]
        else:
            comps = [spec]
        if len(comps) != sc.r:
            raise ValidationError(f"{where}: expected r={sc.r} components, got {len(comps)}", rule="r components")
        gens.append(Generator([_component(c, sc.dim, sc.base_dir, where) for c in comps]))
    return GeneratorSet(gens, sc.dim)


def _kernel(spec, d, base_dir, where):
    if spec is None:
        return None
    if isinstance(spec, dict) and spec.get("profile") == "box" and "width" in spec:
        return box_kernel(d, spec["width"])
    return _component(spec, d, base_dir, where)


def build_filters(sc):
    out = []
    for j, spec in enumerate(sc.filters):
        where = f"filter {j}"
        kind = spec.get("type") if isinstance(spec, dict) else None
        if kind == "point":
            offset = spec.get("offset", [0] * sc.dim)
            if len(np.atleast_1d(offset)) != sc.dim:
                raise ValidationError(f"{where}: offset must have {sc.dim} entries", rule="filter spec")
            out.append(PointEvaluation(int(spec.get("component", 0)), tuple(np.atleast_1d(offset))))
        elif kind == "kernel":
            kernels = spec.get("kernels", [])
            out.append(KernelFilter([_kernel(k, sc.dim, sc.base_dir, where) for k in kernels]))
        else:
            raise ValidationError(f"{where}: type must be 'point' or 'kernel'", rule="filter spec")
    return FilterBank(out, r=sc.r, strict_l1=bool(sc.params["strict_l1"]))


class ScenarioRun:
    """Numerical objects of a scenario, each built on first use."""

    def __init__(self, scenario):
        self.sc = scenario
        self.params = scenario.params
        self.tol = scenario.tolerances
        try:
            self.lat = SamplingLattice(scenario.lattice, scenario.N, scenario.gammas)
        except (ValueError, SamplingError) as exc:
            raise ValidationError(f"lattice: {exc}", rule="nonsingular integer lattice") from exc
        self.gens = build_generators(scenario)
        self.bank = build_filters(scenario)

    @property
    def m(self):
        return self.lat.m

    @property
    def s(self):
        return self.bank.s

    def rng(self, stream, member=0):
        """Independent generator for ensemble ``stream``, member ``member``."""
        tag = sum((i + 1) * ord(c) for i, c in enumerate(stream))
        return np.random.default_rng([self.sc.seed, tag, member])

    @cached_property
    def symbols(self):
        p = self.params
        return build_symbols(self.bank, self.gens, self.lat, p["K_sym"], p["filter_resolution"])

    @cached_property
    def _spectral(self):
        return refined_spectral_bounds(
            self.symbols, self.lat, self.params["cell_resolution"], self.tol["refinement_tol"]
        )

    @property
    def fields(self):
        return self._spectral[0]

    @property
    def bounds(self):
        return self._spectral[1]

    @cached_property
    def completeness(self):
        return completeness_test(self.fields, self.tol["tol_rank"])

    @cached_property
    def classification(self):
        return classify(self.bounds, self.s, self.m, self.completeness, self.tol["blowup_cap"], self.tol["pinv_floor"])

    @cached_property
    def riesz(self):
        p = self.params
        return riesz_bounds_estimate(
            self.gens,
            trials=p["riesz_trials"],
            K_coeff=p["riesz_K_coeff"],
            rng=self.rng("riesz"),
            resolution=p["space_resolution"],
            cap=self.tol["riesz_cap"],
        )

    @cached_property
    def subcube_fields(self):
        return subcube_fields(self.symbols, self.lat, self.params["R"])

    def duals(self, force=False):
        return compute_duals(self.subcube_fields, self.tol["pinv_floor"], force)

    def cell_duals(self, force=False):
        return compute_duals(self.fields, self.tol["pinv_floor"], force)

    def kernels(self, force=False):
        key = "_kernels_forced" if force else "_kernels"
        if key not in self.__dict__:
            self.__dict__[key] = build_kernels(self.duals(force), self.gens, self.lat, self.params["K"], self.params["R"])
        return self.__dict__[key]
