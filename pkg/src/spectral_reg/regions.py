"""Open disks and axis-aligned rectangles in the complex plane."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Disk:
    center: complex
    radius: float

    def contains(self, z):
        """Strict membership; boundary points are outside."""
        return np.abs(np.asarray(z) - self.center) < self.radius

    @property
    def area(self) -> float:
        return math.pi * self.radius**2

    def bounding_box(self) -> tuple[float, float, float, float]:
        c, r = self.center, self.radius
        return (c.real - r, c.real + r, c.imag - r, c.imag + r)

    def to_dict(self) -> dict:
        return {"disk": {"center": [self.center.real, self.center.imag], "radius": self.radius}}


@dataclass(frozen=True)
class Rect:
    z0: complex
    z1: complex

    def contains(self, z):
        z = np.asarray(z)
        lo_re, hi_re = sorted((self.z0.real, self.z1.real))
        lo_im, hi_im = sorted((self.z0.imag, self.z1.imag))
        return (z.real > lo_re) & (z.real < hi_re) & (z.imag > lo_im) & (z.imag < hi_im)

    @property
    def area(self) -> float:
        return abs(self.z1.real - self.z0.real) * abs(self.z1.imag - self.z0.imag)

    def bounding_box(self) -> tuple[float, float, float, float]:
        lo_re, hi_re = sorted((self.z0.real, self.z1.real))
        lo_im, hi_im = sorted((self.z0.imag, self.z1.imag))
        return (lo_re, hi_re, lo_im, hi_im)

    def to_dict(self) -> dict:
        return {"rect": {"z0": [self.z0.real, self.z0.imag], "z1": [self.z1.real, self.z1.imag]}}


Region = Disk | Rect


def region_from_dict(obj: dict) -> Region:
    if not isinstance(obj, dict) or len(obj) != 1:
        raise ValueError(f"region must be a single-key object, got {obj!r}")
    if "disk" in obj:
        d = obj["disk"]
        radius = float(d["radius"])
        if radius < 0:
            raise ValueError("disk radius must be nonnegative")
        return Disk(complex(*map(float, d["center"])), radius)
    if "rect" in obj:
        r = obj["rect"]
        return Rect(complex(*map(float, r["z0"])), complex(*map(float, r["z1"])))
    raise ValueError(f"unknown region kind {next(iter(obj))!r}")
