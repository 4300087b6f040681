"""Plain-text run configuration: `key = value` lines with dotted keys.

Grammar: one `key = value` pair per line, `#` starts a comment, blank
lines ignored.  Dotted prefixes group keys into sections (mesh.*, bc.*,
time.*, wave.*, observe.*, snapshot.*, quad.*, reference.*, output.*).
Unknown keys are rejected with the offending key named; so are missing
files and inconsistent time-grid parameters.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .cq import CQScheme
from .mesh import SurfaceMesh, load_mesh, make_icosphere
from .quadrature import QuadratureConfig
from .scattering import PlaneGaussianWave, SphericalGaussianWave
from .spaces import BoundarySpaces, build_spaces
from .transfer import CurvatureMode, TransferKind, TransferSpec


class ConfigError(ValueError):
    """Malformed or inconsistent run configuration."""


_KNOWN_KEYS = {
    "mesh.kind", "mesh.subdivisions", "mesh.radius", "mesh.path",
    "bc.kind", "bc.eps", "bc.m", "bc.alpha", "bc.k", "bc.curvature",
    "time.order", "time.final", "time.steps", "time.contour_radius",
    "wave.kind", "wave.amplitude", "wave.sharpness", "wave.center",
    "wave.radius_offset", "wave.direction", "wave.delay",
    "observe.points",
    "snapshot.axis", "snapshot.offset", "snapshot.extent",
    "snapshot.resolution", "snapshot.times",
    "quad.regular_order", "quad.singular_order", "quad.near_threshold",
    "reference.steps", "reference.radius",
    "output.dir",
}

_DEFAULTS = {
    "mesh.kind": "icosphere",
    "mesh.subdivisions": "2",
    "mesh.radius": "1.0",
    "bc.kind": "B2",
    "bc.eps": "0.01",
    "bc.m": "1.0",
    "bc.alpha": "1.0",
    "bc.k": "1.0",
    "bc.curvature": "analytic",
    "time.order": "2",
    "time.final": "4.0",
    "time.steps": "128",
    "wave.kind": "spherical",
    "wave.amplitude": "1.0",
    "wave.sharpness": "",    # kind-dependent: 5 (spherical) / 100 (plane)
    "wave.center": "0 0 0",
    "wave.radius_offset": "3.0",
    "wave.direction": "0 -1 0",
    "wave.delay": "1.0",
    "observe.points": "2 0 0",
    "snapshot.resolution": "33",
    "quad.regular_order": "3",
    "quad.singular_order": "4",
    "quad.near_threshold": "1.5",
    "reference.steps": "8192",
    "reference.radius": "2.0",
    "output.dir": "out",
}


def parse_config_text(text: str, source: str = "<config>") -> dict[str, str]:
    """Raw key -> value strings; unknown keys are an error."""
    values: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', "
                              f"got {body!r}")
        key, value = (part.strip() for part in body.split("=", 1))
        if key not in _KNOWN_KEYS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        values[key] = value
    return values


@dataclass
class RunConfig:
    """Parsed and validated configuration with resolved defaults.

    `raw` holds the merged key/value strings (every applied default
    included), which is what the run manifest records.
    """

    raw: dict[str, str]
    source: str = "<config>"
    applied_defaults: dict[str, str] = field(default_factory=dict)

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_text(fh.read(), source=str(path))

    @classmethod
    def from_text(cls, text: str, source: str = "<config>") -> "RunConfig":
        given = parse_config_text(text, source)
        merged = dict(_DEFAULTS)
        merged.update(given)
        defaults = {k: v for k, v in _DEFAULTS.items() if k not in given}
        cfg = cls(raw=merged, source=source, applied_defaults=defaults)
        cfg.validate()
        return cfg

    # -- typed accessors ----------------------------------------------------

    def _float(self, key) -> float:
        try:
            return float(self.raw[key])
        except ValueError as exc:
            raise ConfigError(f"{key}: not a number: {self.raw[key]!r}") from exc

    def _int(self, key) -> int:
        try:
            return int(self.raw[key])
        except ValueError as exc:
            raise ConfigError(f"{key}: not an integer: {self.raw[key]!r}") from exc

    def _vector(self, key) -> np.ndarray:
        parts = self.raw[key].split()
        if len(parts) != 3:
            raise ConfigError(f"{key}: expected three numbers, got "
                              f"{self.raw[key]!r}")
        try:
            return np.array([float(p) for p in parts])
        except ValueError as exc:
            raise ConfigError(f"{key}: not numbers: {self.raw[key]!r}") from exc

    def validate(self) -> None:
        if self.raw["mesh.kind"] not in ("icosphere", "file"):
            raise ConfigError("mesh.kind: must be 'icosphere' or 'file'")
        if self.raw["mesh.kind"] == "file":
            path = self.raw.get("mesh.path")
            if not path:
                raise ConfigError("mesh.path: required when mesh.kind = file")
            if not os.path.exists(path):
                raise ConfigError(f"mesh.path: file not found: {path}")
        if self.raw["bc.kind"] not in ("A", "B1", "B2", "C"):
            raise ConfigError("bc.kind: must be one of A, B1, B2, C")
        if self._int("time.order") not in (1, 2):
            raise ConfigError("time.order: BDF order must be 1 or 2")
        if self._int("time.steps") < 1:
            raise ConfigError("time.steps: must be positive")
        if self._float("time.final") <= 0:
            raise ConfigError("time.final: must be positive")
        if self.raw["wave.kind"] not in ("spherical", "plane"):
            raise ConfigError("wave.kind: must be 'spherical' or 'plane'")
        self.observation_points()

    # -- resolved objects ----------------------------------------------------

    def mesh(self) -> SurfaceMesh:
        if self.raw["mesh.kind"] == "icosphere":
            return make_icosphere(self._int("mesh.subdivisions"),
                                  self._float("mesh.radius"))
        return load_mesh(self.raw["mesh.path"])

    def spaces(self, mesh: Optional[SurfaceMesh] = None) -> BoundarySpaces:
        return build_spaces(self.mesh() if mesh is None else mesh)

    def transfer_spec(self) -> TransferSpec:
        kind = {"A": TransferKind.THIN_COATING, "B1": TransferKind.ABSORBING_1,
                "B2": TransferKind.ABSORBING_2, "C": TransferKind.ACOUSTIC}[
                    self.raw["bc.kind"]]
        mode = {"analytic": CurvatureMode.ANALYTIC,
                "estimate": CurvatureMode.DISCRETE_ESTIMATE}.get(
                    self.raw["bc.curvature"])
        if mode is None:
            raise ConfigError("bc.curvature: must be 'analytic' or 'estimate'")
        return TransferSpec(kind=kind, eps=self._float("bc.eps"),
                            m=self._float("bc.m"), alpha=self._float("bc.alpha"),
                            k=self._float("bc.k"), curvature_mode=mode)

    def scheme(self, steps: Optional[int] = None) -> CQScheme:
        n = self._int("time.steps") if steps is None else steps
        lam = 0.0
        if self.raw.get("time.contour_radius"):
            lam = self._float("time.contour_radius")
        return CQScheme(p=self._int("time.order"),
                        tau=self._float("time.final") / n, N=n, lam=lam)

    def wave(self):
        spherical = self.raw["wave.kind"] == "spherical"
        if self.raw["wave.sharpness"]:
            sharpness = self._float("wave.sharpness")
        else:
            sharpness = 5.0 if spherical else 100.0
        if spherical:
            return SphericalGaussianWave(
                amplitude=self._float("wave.amplitude"),
                sharpness=sharpness,
                center=tuple(self._vector("wave.center")),
                radius_offset=self._float("wave.radius_offset"))
        direction = self._vector("wave.direction")
        norm = np.linalg.norm(direction)
        if norm == 0:
            raise ConfigError("wave.direction: must be nonzero")
        return PlaneGaussianWave(direction=tuple(direction / norm),
                                 sharpness=sharpness,
                                 delay=self._float("wave.delay"),
                                 amplitude=self._float("wave.amplitude"))

    def quadrature(self) -> QuadratureConfig:
        try:
            return QuadratureConfig(
                regular_order=self._int("quad.regular_order"),
                singular_order=self._int("quad.singular_order"),
                near_threshold=self._float("quad.near_threshold"))
        except ValueError as exc:
            raise ConfigError(f"quad.*: {exc}") from exc

    def observation_points(self) -> np.ndarray:
        chunks = [c.strip() for c in self.raw["observe.points"].split(";")
                  if c.strip()]
        if not chunks:
            raise ConfigError("observe.points: need at least one point")
        pts = []
        for c in chunks:
            parts = c.split()
            if len(parts) != 3:
                raise ConfigError(
                    f"observe.points: expected triples, got {c!r}")
            try:
                pts.append([float(p) for p in parts])
            except ValueError as exc:
                raise ConfigError(
                    f"observe.points: not numbers: {c!r}") from exc
        return np.asarray(pts)

    def snapshot_plan(self) -> Optional[dict]:
        if "snapshot.axis" not in self.raw or not self.raw.get("snapshot.axis"):
            return None
        axis = self.raw["snapshot.axis"]
        if axis not in ("x", "y", "z"):
            raise ConfigError("snapshot.axis: must be x, y or z")
        if "snapshot.extent" not in self.raw:
            raise ConfigError("snapshot.extent: required with snapshot.axis")
        ext = self.raw["snapshot.extent"].split()
        if len(ext) != 4:
            raise ConfigError("snapshot.extent: expected 'umin umax vmin vmax'")
        times = [float(t) for t in self.raw.get("snapshot.times", "").split()]
        if not times:
            raise ConfigError("snapshot.times: required with snapshot.axis")
        return {
            "axis": axis,
            "offset": self._float("snapshot.offset"),
            "extent": [float(x) for x in ext],
            "resolution": self._int("snapshot.resolution"),
            "times": times,
        }

    def output_dir(self) -> str:
        return self.raw["output.dir"]
