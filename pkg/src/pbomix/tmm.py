"""Thin-film optics at normal incidence with the characteristic-matrix method.

Each layer is described by the unimodular matrix

    M = [[cos d, i sin d / eta], [i eta sin d, cos d]],   d = 2 pi n t / lambda

and a stack is the ordered product of its layer matrices (incidence side
first).  All indices are real and dispersion-free, so every stack is lossless
and ``R + T = 1``.

The module also holds the dielectric-mirror problem: decoding of a mixed
action into a stack and the two reflectance cost functions.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigurationError, DimensionError, DomainError, ParseError


@dataclass(frozen=True)
class Material:
    name: str
    n: float

    def __post_init__(self):
        if not self.n >= 1.0:
            raise DomainError(f"refractive index of {self.name!r} must be >= 1, got {self.n}")


TIO2 = Material("TiO2", 2.4)
MGF2 = Material("MgF2", 1.38)
AIR = 1.0
GLASS = 1.52

# index 0 = TiO2, 1 = MgF2
MIRROR_MATERIALS = (TIO2, MGF2)


@dataclass
class StackDesign:
    """Ordered layers ``(material index, thickness nm)`` from the incidence side."""

    layers: list[tuple[int, float]]
    materials: Sequence[Material] = MIRROR_MATERIALS
    ambient: float = AIR
    substrate: float = GLASS

    def __post_init__(self):
        for k, (idx, t) in enumerate(self.layers):
            if not 0 <= idx < len(self.materials):
                raise DomainError(f"layer {k}: material index {idx} out of range")
            if t < 0:
                raise DomainError(f"layer {k}: negative thickness {t}")
        for name, value in (("ambient", self.ambient), ("substrate", self.substrate)):
            if not value >= 1.0:
                raise DomainError(f"{name} index must be >= 1, got {value}")

    def __len__(self):
        return len(self.layers)

    def indices(self) -> np.ndarray:
        return np.array([self.materials[i].n for i, _ in self.layers], dtype=float)

    def thicknesses(self) -> np.ndarray:
        return np.array([t for _, t in self.layers], dtype=float)

    def collapsed(self) -> "StackDesign":
        """Copy with zero-thickness layers removed."""
        return StackDesign([(i, t) for i, t in self.layers if t > 0],
                           self.materials, self.ambient, self.substrate)


@dataclass(frozen=True)
class SpectrumGrid:
    lambda_min: float = 300.0
    lambda_max: float = 500.0
    samples: int = 101

    def __post_init__(self):
        if not self.lambda_min < self.lambda_max:
            raise DomainError("lambda_min must be smaller than lambda_max")
        if self.lambda_min <= 0:
            raise DomainError("wavelengths must be positive")
        if self.samples < 2:
            raise DomainError("a spectrum grid needs at least 2 samples")

    def wavelengths(self) -> np.ndarray:
        return np.linspace(self.lambda_min, self.lambda_max, self.samples)


def layer_matrix(n, t_nm, wavelength_nm) -> np.ndarray:
    """Characteristic matrix of one homogeneous layer.

    Broadcasts over ``n``, ``t_nm`` and ``wavelength_nm``; the two trailing
    axes of the result are the 2x2 matrix.
    """
    n = np.asarray(n, dtype=float)
    t_nm = np.asarray(t_nm, dtype=float)
    lam = np.asarray(wavelength_nm, dtype=float)
    if np.any(lam <= 0):
        raise DomainError("wavelength must be positive")
    if np.any(n < 1.0):
        raise DomainError("refractive index must be >= 1")
    if np.any(t_nm < 0):
        raise DomainError("thickness must be non-negative")
    delta = 2.0 * np.pi * n * t_nm / lam
    n, delta = np.broadcast_arrays(n, delta)
    c, s = np.cos(delta), np.sin(delta)
    m = np.empty(delta.shape + (2, 2), dtype=complex)
    m[..., 0, 0] = c
    m[..., 0, 1] = 1j * s / n
    m[..., 1, 0] = 1j * n * s
    m[..., 1, 1] = c
    return m


def _characteristic(n_layers: np.ndarray, t_layers: np.ndarray, lam: np.ndarray) -> np.ndarray:
    """Product of layer matrices, shape ``lam.shape + (2, 2)``.

    ``n_layers``/``t_layers`` have the layer axis last and may carry leading
    batch axes that broadcast against ``lam``.
    """
    lam = np.asarray(lam, dtype=float)
    n_layers = np.asarray(n_layers, dtype=float)
    t_layers = np.asarray(t_layers, dtype=float)
    shape = np.broadcast_shapes(n_layers.shape[:-1], t_layers.shape[:-1], lam.shape)
    # explicit element products: row results must not depend on batch shape
    a = np.ones(shape, dtype=complex)
    b = np.zeros(shape, dtype=complex)
    c = np.zeros(shape, dtype=complex)
    d = np.ones(shape, dtype=complex)
    for j in range(n_layers.shape[-1]):
        n = n_layers[..., j]
        delta = 2.0 * np.pi * n * t_layers[..., j] / lam
        cs, sn = np.cos(delta), np.sin(delta)
        m01 = 1j * sn / n
        m10 = 1j * n * sn
        a, b, c, d = a * cs + b * m10, a * m01 + b * cs, c * cs + d * m10, c * m01 + d * cs
    total = np.empty(shape + (2, 2), dtype=complex)
    total[..., 0, 0] = a
    total[..., 0, 1] = b
    total[..., 1, 0] = c
    total[..., 1, 1] = d
    return total


def _response_from_matrix(total: np.ndarray, n0: float, ns: float):
    b = total[..., 0, 0] + total[..., 0, 1] * ns
    c = total[..., 1, 0] + total[..., 1, 1] * ns
    denom = n0 * b + c
    r = (n0 * b - c) / denom
    rho = np.abs(r) ** 2
    tau = 4.0 * n0 * ns / np.abs(denom) ** 2
    return rho, tau


def stack_response(stack: StackDesign, wavelength_nm):
    """Reflectance and transmittance of ``stack`` at one or many wavelengths."""
    lam = np.asarray(wavelength_nm, dtype=float)
    if np.any(lam <= 0):
        raise DomainError("wavelength must be positive")
    s = stack.collapsed()
    total = _characteristic(s.indices(), s.thicknesses(), lam)
    rho, tau = _response_from_matrix(total, s.ambient, s.substrate)
    if lam.ndim == 0:
        return float(rho), float(tau)
    return rho, tau


def batch_reflectance(indices: np.ndarray, thicknesses: np.ndarray, wavelengths: np.ndarray,
                      ambient: float = AIR, substrate: float = GLASS) -> np.ndarray:
    """Reflectance spectra of a batch of stacks, shape ``(batch, n_lambda)``.

    Zero-thickness layers have identity matrices, so no collapsing is needed.
    """
    indices = np.asarray(indices, dtype=float)[:, None, :]
    thicknesses = np.asarray(thicknesses, dtype=float)[:, None, :]
    total = _characteristic(indices, thicknesses, np.asarray(wavelengths, dtype=float)[None, :])
    rho, _ = _response_from_matrix(total, ambient, substrate)
    return rho


def reflectance_spectrum(stack: StackDesign, grid: SpectrumGrid) -> np.ndarray:
    rho, _ = stack_response(stack, grid.wavelengths())
    return rho


def mean_reflectance(stack: StackDesign, grid: SpectrumGrid) -> float:
    return float(np.mean(reflectance_spectrum(stack, grid)))


@dataclass
class MirrorProblem:
    """The dielectric mirror design problem: material and thickness per layer.

    ``alpha`` weights the spectral range penalty; ``alpha = 0`` is the plain
    mean-reflectance objective.
    """

    n_layers: int = 20
    thickness_bounds: tuple[float, float] = (50.0, 150.0)
    grid: SpectrumGrid = field(default_factory=SpectrumGrid)
    alpha: float = 0.0
    materials: Sequence[Material] = MIRROR_MATERIALS
    ambient: float = AIR
    substrate: float = GLASS

    def __post_init__(self):
        if self.n_layers < 1:
            raise ConfigurationError("n_layers must be positive")
        lo, hi = self.thickness_bounds
        if not 0 <= lo < hi:
            raise ConfigurationError(f"invalid thickness bounds {self.thickness_bounds}")
        if self.alpha < 0:
            raise ConfigurationError("alpha must be non-negative")

    @property
    def space(self):
        from .policy import MixedSearchSpace
        return MixedSearchSpace(
            continuous_bounds=[self.thickness_bounds] * self.n_layers,
            categories=[len(self.materials)] * self.n_layers,
        )

    def decode(self, action) -> StackDesign:
        return decode_design(action, self)

    def spectrum(self, stack: StackDesign) -> np.ndarray:
        return reflectance_spectrum(stack, self.grid)

    def cost(self, x_physical: np.ndarray, materials: np.ndarray) -> float:
        """Cost of a decoded design (thicknesses in nm, material indices)."""
        return float(self.batch_cost(np.atleast_2d(x_physical), np.atleast_2d(materials))[0])

    def batch_cost(self, thicknesses: np.ndarray, materials: np.ndarray) -> np.ndarray:
        lut = np.array([m.n for m in self.materials])
        rho = batch_reflectance(lut[np.asarray(materials, dtype=int)], thicknesses,
                                self.grid.wavelengths(), self.ambient, self.substrate)
        cost = -rho.mean(axis=1)
        if self.alpha:
            cost = cost + self.alpha * (rho.max(axis=1) - rho.min(axis=1))
        return cost

    def __call__(self, x_physical: np.ndarray, materials: np.ndarray) -> float:
        return self.cost(x_physical, materials)


def decode_design(action, problem: MirrorProblem) -> StackDesign:
    """Layer ``j`` gets material ``a_d[j]`` and thickness mapped from ``a_c[j]``."""
    from .policy import map_to_physical

    a_c = np.asarray(action.a_c, dtype=float)
    a_d = np.asarray(action.a_d, dtype=int)
    if a_c.shape != (problem.n_layers,) or a_d.shape != (problem.n_layers,):
        raise ConfigurationError(
            f"mirror with {problem.n_layers} layers needs {problem.n_layers} continuous and "
            f"{problem.n_layers} discrete variables, got {a_c.size} and {a_d.size}")
    t = map_to_physical(a_c, problem.space)
    return StackDesign([(int(i), float(x)) for i, x in zip(a_d, t)],
                       problem.materials, problem.ambient, problem.substrate)


def cost_max(stack: StackDesign, grid: SpectrumGrid) -> float:
    """Negative mean reflectance over ``grid``."""
    return -mean_reflectance(stack, grid)


def cost_flat(stack: StackDesign, grid: SpectrumGrid, alpha: float = 0.1) -> float:
    """Negative mean reflectance plus ``alpha`` times the spectral range."""
    if alpha < 0:
        raise DomainError("alpha must be non-negative")
    rho = reflectance_spectrum(stack, grid)
    return float(-rho.mean() + alpha * (rho.max() - rho.min()))


# -- stack files -------------------------------------------------------------

def _material_lookup(materials: Sequence[Material]) -> dict[str, int]:
    return {m.name.lower(): i for i, m in enumerate(materials)}


def parse_stack(text: str, materials: Sequence[Material] = MIRROR_MATERIALS) -> StackDesign:
    """Parse the plain-text stack format.

    One ``<material-name> <thickness-nm>`` per line, ``#`` comments, and
    optional ``ambient <n>`` / ``substrate <n>`` header lines.
    """
    lookup = _material_lookup(materials)
    layers: list[tuple[int, float]] = []
    env = {"ambient": AIR, "substrate": GLASS}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ParseError(f"line {lineno}: expected '<name> <value>', got {raw!r}")
        key, value = parts
        try:
            number = float(value)
        except ValueError:
            raise ParseError(f"line {lineno}: {value!r} is not a number") from None
        if not np.isfinite(number):
            raise ParseError(f"line {lineno}: non-finite value {value!r}")
        if key.lower() in env:
            if layers:
                raise ParseError(f"line {lineno}: {key} must precede the layers")
            if number < 1.0:
                raise ParseError(f"line {lineno}: {key} index must be >= 1")
            env[key.lower()] = number
        elif key.lower() in lookup:
            if number < 0:
                raise ParseError(f"line {lineno}: negative thickness {number}")
            layers.append((lookup[key.lower()], number))
        else:
            raise ParseError(f"line {lineno}: unknown material {key!r}")
    return StackDesign(layers, materials, env["ambient"], env["substrate"])


def format_stack(stack: StackDesign, comment: str | None = None) -> str:
    lines = []
    if comment:
        lines += [f"# {c}" for c in comment.splitlines()]
    lines.append(f"ambient {stack.ambient!r}")
    lines.append(f"substrate {stack.substrate!r}")
    for idx, t in stack.layers:
        lines.append(f"{stack.materials[idx].name} {t!r}")
    return "\n".join(lines) + "\n"
