"""Material identity: the material table and per-point volume-fraction sets."""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass

import numpy as np

from .errors import DesignError

SUM_EPS = 1e-9


@dataclass(frozen=True)
class Material:
    id: int
    name: str
    color: tuple[int, int, int, int]  # RGBA bytes


class MaterialTable:
    """Ordered material palette. Ids are dense 0..n-1, names unique."""

    def __init__(self, entries):
        mats = []
        for i, e in enumerate(entries):
            if isinstance(e, Material):
                m = e
            else:
                name, color = e
                m = Material(i, name, tuple(int(c) for c in color))
            if m.id != i:
                raise DesignError(f"material ids must be dense 0..n-1, got {m.id} at index {i}")
            if len(m.color) != 4 or any(not (0 <= c <= 255) for c in m.color):
                raise DesignError(f"material color must be 4 bytes, got {m.color}")
            mats.append(m)
        names = [m.name for m in mats]
        if len(set(names)) != len(names):
            raise DesignError("material names must be unique")
        self._materials = tuple(mats)
        self._by_name = {m.name: m.id for m in mats}

    def __len__(self) -> int:
        return len(self._materials)

    def __iter__(self):
        return iter(self._materials)

    def __getitem__(self, material_id: int) -> Material:
        return self._materials[material_id]

    def id(self, name: str) -> int:
        try:
            return self._by_name[name]
        except KeyError:
            raise DesignError(f"unknown material name {name!r}") from None

    def color(self, material_id: int) -> tuple[int, int, int, int]:
        return self._materials[material_id].color


def default_materials() -> MaterialTable:
    """Built-in palette covering the common base resins and display colors."""
    return MaterialTable(
        [
            ("gray", (128, 128, 128, 255)),
            ("red", (255, 0, 0, 255)),
            ("green", (0, 160, 0, 255)),
            ("blue", (0, 0, 255, 255)),
            ("cyan", (0, 200, 200, 255)),
            ("magenta", (230, 0, 230, 255)),
            ("yellow", (240, 220, 0, 255)),
            ("white", (250, 250, 250, 255)),
            ("black", (10, 10, 10, 255)),
            ("clear", (220, 220, 230, 60)),
            ("rigid", (235, 235, 235, 255)),
            ("soft", (40, 40, 40, 255)),
        ]
    )


class FractionSet(Mapping):
    """Volume fractions by material id at one point.

    Every fraction lies in [0, 1]; empty means exterior. ``normalized()``
    rescales so the fractions sum to 1 (an all-zero set stays empty).
    """

    __slots__ = ("_fractions",)

    def __init__(self, fractions: Mapping[int, float] | None = None):
        d = {}
        for mid, f in (fractions or {}).items():
            f = float(f)
            if not (0.0 - SUM_EPS <= f <= 1.0 + SUM_EPS):
                raise DesignError(f"fraction for material {mid} outside [0,1]: {f}")
            d[int(mid)] = min(max(f, 0.0), 1.0)
        if d and sum(d.values()) > 1.0 + SUM_EPS:
            raise DesignError(f"fractions sum to {sum(d.values())} > 1")
        self._fractions = d

    def __getitem__(self, mid: int) -> float:
        return self._fractions[mid]

    def __iter__(self):
        return iter(self._fractions)

    def __len__(self) -> int:
        return len(self._fractions)

    def __repr__(self) -> str:
        inner = ", ".join(f"{k}: {v:.6g}" for k, v in sorted(self._fractions.items()))
        return f"FractionSet({{{inner}}})"

    @property
    def empty(self) -> bool:
        return not self._fractions

    def total(self) -> float:
        return sum(self._fractions.values())

    def normalized(self) -> "FractionSet":
        t = self.total()
        if t <= 0.0:
            return FractionSet()
        return FractionSet({k: v / t for k, v in self._fractions.items()})


def field_total(field: dict[int, np.ndarray], n: int) -> np.ndarray:
    """Sum of a vectorized fraction field (dict material-id -> (N,) fractions)."""
    if not field:
        return np.zeros(n)
    return np.sum(np.stack(list(field.values())), axis=0)
