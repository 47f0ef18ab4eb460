"""Flat ``section.key = value`` run configuration.

Lines are ``key = value``; ``#`` starts a comment; arrays are comma
separated. Unknown keys are errors. Every key has a default, so an empty file
describes the standard desk-scale problem.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import GeometrySpec, full_circle_angles, validate
from .sampler import HyperPriors, OffsetPrior, SamplerConfig
from .simulate import Disk, NoiseSpec, PhantomSpec, beads_phantom_spec

__all__ = ["ConfigError", "RunConfig", "parse_config", "load_config", "format_geometry", "parse_geometry"]


class ConfigError(ValueError):
    pass


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _floats(text: str) -> list[float]:
    text = text.strip()
    return [float(v) for v in text.split(",")] if text else []


def _opt_float(text: str):
    return None if text.strip().lower() in ("", "none") else float(text)


# key -> (parser, default); defaults are the standard desk-scale problem
SCHEMA = {
    "seed": (int, 0),
    "output.dir": (str, "out"),
    "geometry.source_to_center": (float, 250.0),
    "geometry.center_to_detector": (float, 250.0),
    "geometry.n_detector": (int, 80),
    "geometry.detector_pixel_size": (float, 2.0),
    "geometry.n_angles": (int, 180),
    "geometry.angular_range": (float, 360.0),
    "geometry.angles": (_floats, None),
    "geometry.image_size": (int, 64),
    "geometry.image_pixel_size": (float, 1.0),
    "phantom.kind": (str, "beads"),
    "phantom.n_beads": (int, 12),
    "phantom.bead_seed": (int, 7),
    "phantom.container_value": (float, 0.2),
    "phantom.bead_value": (float, 1.0),
    "phantom.disk_x": (_floats, []),
    "phantom.disk_y": (_floats, []),
    "phantom.disk_r": (_floats, []),
    "phantom.disk_value": (_floats, []),
    "phantom.background": (float, 0.0),
    "noise.enabled": (_bool, True),
    "noise.lambda_true": (_opt_float, None),
    "noise.relative_sigma": (float, 0.005),
    "simulate.c_true": (float, 3.0),
    "simulate.supersample": (int, 2),
    "solver.alpha": (float, 1.0),
    "solver.nonneg": (_bool, True),
    "solver.k_fista": (int, 200),
    "sampler.k_gibbs": (int, 800),
    "sampler.k_metro": (int, 10),
    "sampler.k_fista": (int, 20),
    "sampler.mh_step_size": (float, 0.5),
    "sampler.tune": (_bool, True),
    "sampler.n_pilot": (int, 10),
    "sampler.c0": (float, 0.0),
    "sampler.mu_c": (float, 0.0),
    "sampler.sigma_c": (float, 10.0),
    "sampler.alpha_lambda": (float, 1.0),
    "sampler.beta_lambda": (float, 1e-4),
    "sampler.alpha_delta": (float, 1.0),
    "sampler.beta_delta": (float, 1e-4),
    "sampler.burn_in": (int, 400),
    "sampler.nonneg": (_bool, True),
    "sampler.flush_every": (int, 50),
    "sampler.parallel": (_bool, False),
}


def parse_config(text: str, source: str = "<config>") -> dict:
    """Parse config text into ``{key: typed value}`` with defaults filled in."""
    values = {k: default for k, (_, default) in SCHEMA.items()}
    seen = set()
    errors = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            errors.append(f"{source}:{lineno}: expected 'key = value'")
            continue
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in SCHEMA:
            errors.append(f"{source}:{lineno}: unknown key {key!r}")
            continue
        if key in seen:
            errors.append(f"{source}:{lineno}: duplicate key {key!r}")
            continue
        seen.add(key)
        try:
            values[key] = SCHEMA[key][0](value)
        except ValueError as err:
            errors.append(f"{source}:{lineno}: bad value for {key}: {err}")
    if errors:
        raise ConfigError("\n".join(errors))
    return values


@dataclass
class RunConfig:
    values: dict = field(default_factory=lambda: parse_config(""))

    @classmethod
    def from_text(cls, text: str, source: str = "<config>") -> "RunConfig":
        rc = cls(parse_config(text, source))
        rc.validate()
        return rc

    def __getitem__(self, key):
        return self.values[key]

    def override(self, key, value):
        if key not in SCHEMA:
            raise ConfigError(f"unknown key {key!r}")
        self.values[key] = value

    def geometry(self) -> GeometrySpec:
        v = self.values
        if v["geometry.angles"]:
            angles = np.array(v["geometry.angles"], dtype=np.float64)
        else:
            if v["geometry.n_angles"] < 1:
                raise ConfigError("n_angles ≥ 1 violated")
            angles = full_circle_angles(v["geometry.n_angles"])
            rng = v["geometry.angular_range"]
            if rng < 360.0:
                angles = angles[np.rad2deg(angles) <= rng + 1e-9]
        return GeometrySpec(
            source_to_center=v["geometry.source_to_center"],
            center_to_detector=v["geometry.center_to_detector"],
            n_detector=v["geometry.n_detector"],
            detector_pixel_size=v["geometry.detector_pixel_size"],
            angles=angles,
            image_size=v["geometry.image_size"],
            image_pixel_size=v["geometry.image_pixel_size"],
        )

    def phantom_spec(self) -> PhantomSpec:
        v = self.values
        size = v["geometry.image_size"]
        if v["phantom.kind"] == "beads":
            return beads_phantom_spec(size, v["phantom.n_beads"], v["phantom.bead_seed"],
                                      v["phantom.container_value"], v["phantom.bead_value"])
        if v["phantom.kind"] == "disks":
            cols = [v["phantom.disk_x"], v["phantom.disk_y"], v["phantom.disk_r"], v["phantom.disk_value"]]
            if len({len(c) for c in cols}) != 1:
                raise ConfigError("phantom.disk_x/_y/_r/_value must have equal lengths")
            return PhantomSpec(size, tuple(Disk(*d) for d in zip(*cols)), v["phantom.background"])
        raise ConfigError(f"phantom.kind must be 'beads' or 'disks', got {v['phantom.kind']!r}")

    def noise_spec(self, clean_sinogram=None) -> NoiseSpec:
        v = self.values
        if not v["noise.enabled"]:
            return NoiseSpec(enabled=False, seed=v["seed"])
        lam = v["noise.lambda_true"]
        if lam is None:
            if clean_sinogram is None:
                raise ConfigError("noise.relative_sigma needs the clean sinogram")
            sigma = v["noise.relative_sigma"] * float(np.max(np.abs(clean_sinogram)))
            lam = 1.0 / sigma ** 2
        return NoiseSpec(lam, v["seed"])

    def sampler_config(self) -> SamplerConfig:
        v = self.values
        return SamplerConfig(
            k_gibbs=v["sampler.k_gibbs"],
            k_metro=v["sampler.k_metro"],
            k_fista=v["sampler.k_fista"],
            mh_step_size=v["sampler.mh_step_size"],
            nonneg=v["sampler.nonneg"],
            c0=v["sampler.c0"],
            hyperpriors=HyperPriors(v["sampler.alpha_lambda"], v["sampler.beta_lambda"],
                                    v["sampler.alpha_delta"], v["sampler.beta_delta"]),
            offset_prior=OffsetPrior(v["sampler.mu_c"], v["sampler.sigma_c"]),
            seed=v["seed"],
            burn_in=v["sampler.burn_in"],
            flush_every=v["sampler.flush_every"],
        )

    def validate(self) -> None:
        """Check every block; raises `ConfigError` listing all problems."""
        errors = []
        try:
            errors += validate(self.geometry())
        except (ConfigError, ValueError) as err:
            errors.append(str(err))
        for build in (self.phantom_spec, self.sampler_config):
            try:
                build()
            except (ConfigError, ValueError) as err:
                errors.append(str(err))
        v = self.values
        if v["simulate.supersample"] < 1:
            errors.append("simulate.supersample ≥ 1 violated")
        if not math.isfinite(v["simulate.c_true"]) or abs(v["simulate.c_true"]) >= v["geometry.image_size"] / 2:
            errors.append("|simulate.c_true| < image_size/2 violated")
        if v["solver.alpha"] < 0:
            errors.append("solver.alpha ≥ 0 violated")
        if v["solver.k_fista"] < 1:
            errors.append("solver.k_fista ≥ 1 violated")
        if v["noise.lambda_true"] is not None and not v["noise.lambda_true"] > 0:
            errors.append("noise.lambda_true > 0 violated")
        if not v["noise.relative_sigma"] > 0:
            errors.append("noise.relative_sigma > 0 violated")
        if errors:
            raise ConfigError("; ".join(errors))


def load_config(path) -> RunConfig:
    if path is None:
        return RunConfig.from_text("")
    with open(path) as fh:
        return RunConfig.from_text(fh.read(), str(path))


def format_geometry(geom: GeometrySpec) -> str:
    """Config text that reproduces `geom` exactly (explicit radian angles)."""
    lines = [
        f"geometry.source_to_center = {geom.source_to_center!r}",
        f"geometry.center_to_detector = {geom.center_to_detector!r}",
        f"geometry.n_detector = {geom.n_detector}",
        f"geometry.detector_pixel_size = {geom.detector_pixel_size!r}",
        f"geometry.n_angles = {geom.n_angles}",
        f"geometry.image_size = {geom.image_size}",
        f"geometry.image_pixel_size = {geom.image_pixel_size!r}",
        "geometry.angles = " + ",".join(repr(float(a)) for a in geom.angles),
    ]
    return "\n".join(lines) + "\n"


def parse_geometry(text: str) -> GeometrySpec:
    return RunConfig(parse_config(text)).geometry()
