"""Contact materials and pairwise mixing rules."""
from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Material:
    """Per-body surface material.

    young is the linear contact modulus used for the compliance mapping
    eps_n = 1/(E * r_char) with r_char a characteristic contact length.
    """

    name: str
    friction: float = 0.5
    restitution: float = 0.0
    rolling: float = 0.0
    young: float = 1.0e8

    def __post_init__(self):
        if self.friction < 0 or self.rolling < 0:
            raise ValueError("friction coefficients must be non-negative")
        if not 0.0 <= self.restitution <= 1.0:
            raise ValueError("restitution must lie in [0, 1]")
        if self.young <= 0:
            raise ValueError("young modulus must be positive")


@dataclass(frozen=True)
class ContactMaterial:
    """Effective parameters for one material pair."""

    friction: float
    restitution: float
    rolling: float
    young: float


def mix(a: Material, b: Material) -> ContactMaterial:
    """Default mixing: geometric-mean friction, series stiffness, min restitution."""
    return ContactMaterial(
        friction=(a.friction * b.friction) ** 0.5,
        restitution=min(a.restitution, b.restitution),
        rolling=(a.rolling * b.rolling) ** 0.5,
        young=2.0 / (1.0 / a.young + 1.0 / b.young),
    )


class MaterialTable:
    """Registry of materials plus explicit pair overrides."""

    def __init__(self):
        self._mats: dict[str, Material] = {}
        self._pairs: dict[tuple[str, str], ContactMaterial] = {}

    def add(self, mat: Material) -> Material:
        self._mats[mat.name] = mat
        return mat

    def get(self, name: str) -> Material:
        return self._mats[name]

    def __contains__(self, name: str) -> bool:
        return name in self._mats

    def set_pair(self, name_a: str, name_b: str, cm: ContactMaterial):
        self._pairs[_key(name_a, name_b)] = cm

    def pair(self, name_a: str, name_b: str) -> ContactMaterial:
        key = _key(name_a, name_b)
        cm = self._pairs.get(key)
        if cm is None:
            cm = mix(self._mats[name_a], self._mats[name_b])
            self._pairs[key] = cm
        return cm


def _key(a: str, b: str) -> tuple[str, str]:
    return (a, b) if a <= b else (b, a)
