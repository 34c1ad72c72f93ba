"""Analytic data of the two control examples.

Both examples share the divergence-free state u = curl psi with
psi(x, y) = g(x) g(y), g(t) = t^4 (t - 1)^4, which vanishes together with its
gradient on the boundary of the unit square.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from typing import Callable, Optional

import numpy as np
from numpy.polynomial import Polynomial

from stokes_control.errors import ConfigError
from stokes_control.mesh import RegionTag

Field = Callable[[np.ndarray, np.ndarray], np.ndarray]

_G = Polynomial([0.0, 1.0]) ** 4 * Polynomial([-1.0, 1.0]) ** 4
_G1 = _G.deriv(1)
_G2 = _G.deriv(2)
_G3 = _G.deriv(3)

PERTURBATION_SHIFT = 0.6


class Example(IntEnum):
    EX1 = 1
    EX2 = 2


def stream_function(x, y):
    return _G(x) * _G(y)


def velocity(x, y):
    return np.stack([_G(x) * _G1(y), -_G1(x) * _G(y)], axis=-1)


def velocity_gradient(x, y):
    """[component, derivative] layout."""
    row1 = np.stack([_G1(x) * _G1(y), _G(x) * _G2(y)], axis=-1)
    row2 = np.stack([-_G2(x) * _G(y), -_G1(x) * _G1(y)], axis=-1)
    return np.stack([row1, row2], axis=-2)


def velocity_laplacian(x, y):
    return np.stack(
        [_G2(x) * _G1(y) + _G(x) * _G3(y), -_G3(x) * _G(y) - _G1(x) * _G2(y)], axis=-1
    )


def gradient_potential(x, y):
    """cos(x) sin(y), the potential of the Example 1 perturbation."""
    return np.cos(x) * np.sin(y)


def gradient_force(x, y):
    return np.stack([-np.sin(x) * np.sin(y), np.cos(x) * np.cos(y)], axis=-1)


def shifted_gradient_potential(x, y):
    return np.sin(x - PERTURBATION_SHIFT) * np.cos(y)


def shifted_gradient_force(x, y):
    """Gradient of sin(x - 0.6) cos(y)."""
    xs = x - PERTURBATION_SHIFT
    return np.stack([np.cos(xs) * np.cos(y), -np.sin(xs) * np.sin(y)], axis=-1)


def _zero_vector(x, y):
    return np.zeros(np.shape(x) + (2,))


@dataclass(frozen=True)
class ExampleData:
    example: Example
    nu: float
    body_force: Field
    perturbation: Field
    control_region: RegionTag
    observation_region: RegionTag
    # scalar psi with perturbation = grad psi
    perturbation_potential: Optional[Field] = None

    @property
    def u(self) -> Field:
        return velocity

    @property
    def grad_u(self) -> Field:
        return velocity_gradient

    def desired_state(self, eps: float) -> Field:
        def u_d(x, y):
            return velocity(x, y) + eps * self.perturbation(x, y)

        return u_d

    @property
    def requires_aligned_mesh(self) -> bool:
        return self.example is Example.EX2


def example_data(example, nu: float) -> ExampleData:
    try:
        example = Example(int(example))
    except ValueError as exc:
        raise ConfigError(f"unknown example {example!r}; expected 1 or 2") from exc
    if nu <= 0:
        raise ConfigError(f"viscosity must be positive, got nu={nu}")

    if example is Example.EX1:
        return ExampleData(
            example=example,
            nu=nu,
            body_force=_zero_vector,
            perturbation=gradient_force,
            perturbation_potential=gradient_potential,
            control_region=RegionTag.WHOLE,
            observation_region=RegionTag.WHOLE,
        )

    def body_force(x, y):
        return -nu * velocity_laplacian(x, y)

    return ExampleData(
        example=example,
        nu=nu,
        body_force=body_force,
        perturbation=shifted_gradient_force,
        perturbation_potential=shifted_gradient_potential,
        control_region=RegionTag.C,
        observation_region=RegionTag.O,
    )


def exact_control(data: ExampleData) -> Field:
    """Control reached at alpha = 0: -nu Laplace(u) in Example 1, zero in Example 2."""
    if data.example is Example.EX2:
        return _zero_vector
    nu = data.nu

    def control(x, y):
        return -nu * velocity_laplacian(x, y)

    return control
