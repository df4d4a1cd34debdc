"""INI run configuration.

Each section maps onto a dataclass; values are converted by the type of the
field's default.  Unknown sections or keys are rejected with the line they
appear on.
"""

import configparser
from dataclasses import dataclass, field, fields, replace
import io
from pathlib import Path
from typing import Optional

from .assembly import PhysicalParams
from .errors import ConfigError, ContractViolation, MeshError
from .geometry import DiscGeometry, DomainSpec
from .mesh import MeshParams
from .optimizer import OptimizerConfig, Problem
from .output import load_target
from .solvers import FunctionalSpec, TargetKind


@dataclass
class GeometrySection:
    center_x: float = 0.5
    center_y: float = 0.5
    radius: float = 0.2
    margin: float = 0.02
    target_x: Optional[float] = None
    target_y: Optional[float] = None


@dataclass
class DiscretizationSection:
    h: float = 0.02
    n_interface: int = 64
    n_steps: int = 50


@dataclass
class FunctionalSection:
    variant: str = "constant"
    target_file: str = ""


@dataclass
class VerificationSection:
    delta: float = 1e-3
    fd_mode: str = "remesh"
    tolerance: float = 0.05
    flip_density: bool = False


@dataclass
class OutputSection:
    directory: str = "out"
    dump_fields: bool = False
    deterministic: bool = True


SECTIONS = {
    "geometry": GeometrySection,
    "physics": PhysicalParams,
    "discretization": DiscretizationSection,
    "functional": FunctionalSection,
    "optimizer": OptimizerConfig,
    "verification": VerificationSection,
    "output": OutputSection,
}


@dataclass
class RunConfig:
    geometry: GeometrySection = field(default_factory=GeometrySection)
    physics: PhysicalParams = field(default_factory=PhysicalParams)
    discretization: DiscretizationSection = field(default_factory=DiscretizationSection)
    functional: FunctionalSection = field(default_factory=FunctionalSection)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    verification: VerificationSection = field(default_factory=VerificationSection)
    output: OutputSection = field(default_factory=OutputSection)

    def disc(self):
        return DiscGeometry((self.geometry.center_x, self.geometry.center_y),
                            self.geometry.radius)

    def domain(self):
        return DomainSpec(self.geometry.margin)

    def mesh_params(self):
        return MeshParams(self.discretization.h, self.discretization.n_interface)

    def target_center(self):
        g = self.geometry
        if g.target_x is None or g.target_y is None:
            return None
        return (g.target_x, g.target_y)

    def functional_spec(self):
        kind = TargetKind(self.functional.variant)
        if kind is not TargetKind.RECORDED:
            return FunctionalSpec(kind)
        try:
            return FunctionalSpec.from_recording(load_target(self.functional.target_file))
        except OSError as error:
            raise ConfigError(f"[functional] target_file: cannot read "
                              f"{self.functional.target_file!r}: {error}") from error

    def problem(self, spec=None):
        return Problem(
            params=self.physics,
            spec=spec if spec is not None else self.functional_spec(),
            mesh_params=self.mesh_params(),
            n_steps=self.discretization.n_steps,
            domain=self.domain(),
            density_sign=-1.0 if self.verification.flip_density else 1.0,
        )

    def validate(self):
        """Checks every cross-section invariant.

        Raises:
            ConfigError: for bad values.
            InfeasibleGeometryError: when the disc does not fit.
        """
        try:
            TargetKind(self.functional.variant)
        except ValueError:
            raise ConfigError(f"[functional] variant: unknown value {self.functional.variant!r}")
        if self.functional.variant == TargetKind.RECORDED.value and not self.functional.target_file:
            raise ConfigError("[functional] target_file: required for the recorded variant")
        if self.verification.fd_mode not in ("deform", "remesh"):
            raise ConfigError(f"[verification] fd_mode: unknown value {self.verification.fd_mode!r}")
        if self.discretization.n_steps < 1:
            raise ConfigError("[discretization] n_steps: must be at least 1")
        try:
            geom = self.disc()
            geom.check_interior(self.geometry.margin)
            self.mesh_params().check(geom)
        except MeshError as error:
            raise ConfigError(f"[discretization] {error}") from error
        return self


def _convert(raw, default, where):
    kind = float if default is None else type(default)
    try:
        if kind is bool:
            states = configparser.ConfigParser.BOOLEAN_STATES
            if raw.lower() not in states:
                raise ValueError(raw)
            return states[raw.lower()]
        return kind(raw)
    except ValueError:
        raise ConfigError(f"{where}: cannot read {raw!r} as {kind.__name__}") from None


def _line_of(text, section, key=None):
    current = None
    for number, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if stripped.startswith("[") and stripped.endswith("]"):
            current = stripped[1:-1].strip()
            if key is None and current == section:
                return number
        elif current == section and key is not None:
            name = stripped.split("=", 1)[0].split(":", 1)[0].strip()
            if name == key:
                return number
    return None


def parse_config(text, source="<config>"):
    """Builds a validated RunConfig from INI text."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.Error as error:
        raise ConfigError(f"{source}: {error}") from error

    sections = {}
    for name in parser.sections():
        if name not in SECTIONS:
            raise ConfigError(f"{source}:{_line_of(text, name)}: unknown section [{name}]")
        cls = SECTIONS[name]
        defaults = cls()
        known = {f.name for f in fields(cls)}
        values = {}
        for key, raw in parser.items(name):
            where = f"{source}:{_line_of(text, name, key)}: [{name}] {key}"
            if key not in known:
                raise ConfigError(f"{where}: unknown key")
            values[key] = _convert(raw.strip(), getattr(defaults, key), where)
        try:
            sections[name] = replace(defaults, **values)
        except (ContractViolation, ValueError) as error:
            raise ConfigError(f"{source}: [{name}] {error}") from error
    return RunConfig(**sections).validate()


def load_config(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as error:
        raise ConfigError(f"cannot read config {path}: {error}") from error
    return parse_config(text, source=str(path))


def dump_config(config):
    """The effective configuration as INI text; parse_config reads it back unchanged."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    for name in SECTIONS:
        section = getattr(config, name)
        parser[name] = {}
        for f in fields(section):
            value = getattr(section, f.name)
            if value is None:
                continue
            parser[name][f.name] = repr(value) if isinstance(value, float) else str(value)
    buffer = io.StringIO()
    parser.write(buffer)
    return buffer.getvalue()


__all__ = [
    "DiscretizationSection", "FunctionalSection", "GeometrySection", "OutputSection",
    "RunConfig", "VerificationSection", "dump_config", "load_config", "parse_config",
]
