"""Scenario files (JSON, schema version 1).

Example (all units SI)::

    {
      "schema_version": 1,
      "name": "two_inclusions",
      "domain": {"edge_length": 1.0, "mesh_n": 10, "dirichlet_sides": ["zmin"]},
      "background": {"lambda": 6e5, "mu": 6e3, "rho": 3e3},
      "inclusions": [
        {"lo": [0.2, 0.2, 0.4], "hi": [0.4, 0.6, 0.8],
         "d_lambda": 1.4e6, "d_mu": 1.4e4, "d_rho": 2e3}
      ],
      "alpha": {"lambda": 1.4e6, "mu": 1.4e4, "rho": 2e3, "subsets": false},
      "loads": {"patches_per_edge": 5, "magnitude": 100.0, "directions": "normal"},
      "cover": {"blocks_per_axis": 5},
      "omegas": [0, 10, 50],
      "mtilde": {"0": 0, "10": 4},
      "rho_bound": null,
      "rel_tol": 1e-10,
      "zero_pivot_tol": 1e-12
    }

Inclusion corners are in meters and must lie on element planes of the mesh.
``d_rho`` is the density *decrease*; a negative value (density increase)
requires ``rho_bound`` >= every density in the phantom.
"""

from __future__ import annotations

import copy
import json
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .materials import Box, InclusionSpec, MaterialField, apply_inclusions, background
from .mesh import SIDE_NAMES, BoundaryLoadSet, Mesh, build_load_patches, build_structured_hex_mesh

SCHEMA_VERSION = 1
BUILTIN_PREFIX = "builtin:"

DEFAULTS = {
    "schema_version": SCHEMA_VERSION,
    "name": "unnamed",
    "description": "",
    "domain": {"edge_length": 1.0, "mesh_n": 10, "dirichlet_sides": ["zmin"]},
    "background": {"lambda": 6e5, "mu": 6e3, "rho": 3e3},
    "inclusions": [],
    "alpha": {"lambda": 1.4e6, "mu": 1.4e4, "rho": 2e3, "subsets": False},
    "loads": {"patches_per_edge": 5, "magnitude": 100.0, "directions": "normal"},
    "cover": {"blocks_per_axis": 5},
    "omegas": [0.0],
    "mtilde": {},
    "rho_bound": None,
    "rel_tol": 1e-10,
    "zero_pivot_tol": 1e-12,
}


class ScenarioError(ValueError):
    pass


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def _line_of(text: str, key: str) -> int | None:
    m = re.search(r'"%s"\s*:' % re.escape(key), text)
    return text.count("\n", 0, m.start()) + 1 if m else None


@dataclass
class Scenario:
    data: dict
    source: str = "<memory>"
    text: str = ""

    # -- parsing -----------------------------------------------------------
    @classmethod
    def from_text(cls, text: str, source: str = "<memory>") -> "Scenario":
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"{source}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
        if not isinstance(raw, dict):
            raise ScenarioError(f"{source}:1: scenario must be a JSON object")
        sc = cls(_merge(DEFAULTS, raw), source, text)
        sc._validate(raw)
        return sc

    @classmethod
    def load(cls, path) -> "Scenario":
        path = str(path)
        if path.startswith(BUILTIN_PREFIX):
            name = path[len(BUILTIN_PREFIX):]
            try:
                text = resources.files("elastomono.scenarios").joinpath(f"{name}.json").read_text()
            except FileNotFoundError as exc:
                raise ScenarioError(f"no built-in scenario {name!r}") from exc
            return cls.from_text(text, path)
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ScenarioError(f"cannot read scenario {path}: {exc}") from exc
        return cls.from_text(text, path)

    def _fail(self, key: str, msg: str):
        line = _line_of(self.text, key)
        where = f"{self.source}:{line}" if line else self.source
        raise ScenarioError(f"{where}: {key}: {msg}")

    def _validate(self, raw: dict) -> None:
        d = self.data
        if d["schema_version"] != SCHEMA_VERSION:
            self._fail("schema_version", f"unsupported version {d['schema_version']!r}")
        known = set(DEFAULTS)
        for k in raw:
            if k not in known:
                self._fail(k, "unknown key")
        dom = d["domain"]
        if not isinstance(dom["mesh_n"], int) or dom["mesh_n"] < 2:
            self._fail("mesh_n", "must be an integer >= 2")
        if not _positive(dom["edge_length"]):
            self._fail("edge_length", "must be positive")
        if any(s not in SIDE_NAMES for s in dom["dirichlet_sides"]):
            self._fail("dirichlet_sides", f"sides must be among {SIDE_NAMES}")
        for key in ("lambda", "mu", "rho"):
            if not _positive(d["background"].get(key)):
                self._fail(key, "background values must be positive numbers")
            if not _number(d["alpha"].get(key)) or d["alpha"][key] < 0:
                self._fail(key, "alpha bounds must be nonnegative numbers")
        if d["alpha"]["rho"] >= d["background"]["rho"]:
            self._fail("alpha", "alpha rho must stay below the background density")
        if d["loads"]["directions"] not in ("normal", "full"):
            self._fail("directions", "must be 'normal' or 'full'")
        for k in ("patches_per_edge",):
            if not isinstance(d["loads"][k], int) or d["loads"][k] < 1:
                self._fail(k, "must be a positive integer")
        if not isinstance(d["cover"]["blocks_per_axis"], int) or d["cover"]["blocks_per_axis"] < 1:
            self._fail("blocks_per_axis", "must be a positive integer")
        if not isinstance(d["omegas"], list) or not all(_number(w) and w >= 0 for w in d["omegas"]):
            self._fail("omegas", "must be a list of nonnegative numbers")
        for inc in d["inclusions"]:
            for k in ("lo", "hi"):
                if not (isinstance(inc.get(k), list) and len(inc[k]) == 3 and all(_number(x) for x in inc[k])):
                    self._fail("inclusions", f"each inclusion needs a 3-vector {k!r}")
            if min(inc.get("d_lambda", 0.0), inc.get("d_mu", 0.0)) < 0:
                self._fail("inclusions", "d_lambda and d_mu must be >= 0")
        rho_min = min([d["background"]["rho"] - inc.get("d_rho", 0.0) for inc in d["inclusions"]] or [1.0])
        if rho_min <= 0:
            self._fail("inclusions", "density would drop to zero or below")
        rho_max = max([d["background"]["rho"] - inc.get("d_rho", 0.0) for inc in d["inclusions"]]
                      + [d["background"]["rho"]])
        if rho_max > d["background"]["rho"]:
            rb = d["rho_bound"]
            if not _positive(rb) or rb < rho_max:
                self._fail("rho_bound", f"density increase needs rho_bound >= {rho_max}")
        for w, mt in d["mtilde"].items():
            try:
                float(w)
            except ValueError:
                self._fail("mtilde", f"key {w!r} is not a frequency")
            if not isinstance(mt, int) or mt < 0:
                self._fail("mtilde", "values must be nonnegative integers")

    # -- accessors ---------------------------------------------------------
    @property
    def name(self) -> str:
        return self.data["name"]

    @property
    def background_values(self) -> tuple[float, float, float]:
        b = self.data["background"]
        return float(b["lambda"]), float(b["mu"]), float(b["rho"])

    @property
    def reference_density(self) -> float:
        """Density entering M0: rho0, or the a-priori bound when one is given."""
        rb = self.data["rho_bound"]
        return float(rb) if rb is not None else self.background_values[2]

    @property
    def alpha(self) -> tuple[float, float, float]:
        a = self.data["alpha"]
        return float(a["lambda"]), float(a["mu"]), float(a["rho"])

    @property
    def alpha_subsets(self) -> bool:
        return bool(self.data["alpha"].get("subsets", False))

    @property
    def mesh_n(self) -> int:
        return self.data["domain"]["mesh_n"]

    @property
    def omegas(self) -> list[float]:
        return [float(w) for w in self.data["omegas"]]

    @property
    def rel_tol(self) -> float:
        return float(self.data["rel_tol"])

    @property
    def zero_pivot_tol(self) -> float:
        return float(self.data["zero_pivot_tol"])

    @property
    def blocks_per_axis(self) -> int:
        return self.data["cover"]["blocks_per_axis"]

    def mtilde_for(self, omega: float) -> int | None:
        for w, mt in self.data["mtilde"].items():
            if float(w) == float(omega):
                return int(mt)
        return None

    def build_mesh(self, n: int | None = None) -> Mesh:
        dom = self.data["domain"]
        return build_structured_hex_mesh(n or dom["mesh_n"], dom["edge_length"], dom["dirichlet_sides"])

    def inclusion_specs(self, mesh: Mesh) -> list[InclusionSpec]:
        out = []
        for inc in self.data["inclusions"]:
            box = Box.from_coords(mesh, inc["lo"], inc["hi"])
            box.check_inside(mesh)
            out.append(InclusionSpec(box, inc.get("d_lambda", 0.0), inc.get("d_mu", 0.0), inc.get("d_rho", 0.0)))
        return out

    def background_field(self, mesh: Mesh) -> MaterialField:
        return background(*self.background_values, mesh)

    def true_field(self, mesh: Mesh) -> MaterialField:
        return apply_inclusions(self.background_field(mesh), self.inclusion_specs(mesh), mesh)

    def reference_field(self, mesh: Mesh) -> MaterialField:
        lam, mu, _ = self.background_values
        return background(lam, mu, self.reference_density, mesh)

    def load_set(self, mesh: Mesh, patches: int | None = None, directions: str | None = None) -> BoundaryLoadSet:
        ld = self.data["loads"]
        return build_load_patches(mesh, patches or ld["patches_per_edge"], ld["magnitude"], directions or ld["directions"])

    def to_json(self) -> str:
        return json.dumps(self.data, indent=2, sort_keys=True)


def _number(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool)


def _positive(x) -> bool:
    return _number(x) and x > 0
