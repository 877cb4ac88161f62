"""Window schedule, rate normalizer and effective sample size.

With ``rho = beta / (2 beta + d)`` and natural logarithms throughout::

    h_1 = 1,        h_k = c1 * (ln k / k) ** rho     (k >= 2)
    B_1 = 1,        B_n = (n / ln n) ** rho          (n >= 2)
    V(n) = n * h_n

so that ``B_n * h_n == c1`` for every ``n >= 2``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

__all__ = ["BandwidthPlan"]


def _check_index(k, lower, name):
    arr = np.asarray(k)
    if np.any(arr < lower) or not np.all(arr == np.floor(arr)):
        raise ValueError(f"{name} must be an integer >= {lower}, got {k!r}")
    return arr.astype(float)


@dataclass(frozen=True)
class BandwidthPlan:
    beta: float
    d: int = 1
    c1: float = 1.0

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if int(self.d) != self.d or self.d < 1:
            raise ValueError(f"dimension must be a positive integer, got {self.d}")
        if not self.c1 > 0:
            raise ValueError(f"c1 must be positive, got {self.c1}")

    @property
    def rho(self) -> float:
        return self.beta / (2.0 * self.beta + self.d)

    def bandwidth_at(self, k):
        """Window h_k of the k-th observation; accepts scalars or arrays."""
        kf = _check_index(k, 1, "k")
        with np.errstate(divide="ignore", invalid="ignore"):
            h = np.where(kf == 1, 1.0, self.c1 * (np.log(kf) / kf) ** self.rho)
        return float(h) if h.ndim == 0 else h

    def pr_bandwidth(self, n) -> float:
        """Fixed Parzen-Rosenblatt window c1 * (ln n / n) ** rho, n >= 2."""
        nf = _check_index(n, 2, "n")
        h = self.c1 * (np.log(nf) / nf) ** self.rho
        return float(h) if h.ndim == 0 else h

    def normalizer(self, n):
        """Rate normalizer B_n."""
        nf = _check_index(n, 1, "n")
        with np.errstate(divide="ignore", invalid="ignore"):
            b = np.where(nf == 1, 1.0, (nf / np.log(nf)) ** self.rho)
        return float(b) if b.ndim == 0 else b

    def effective_sample(self, n):
        """V(n) = n h_n for n >= 2."""
        nf = _check_index(n, 2, "n")
        v = nf * self.bandwidth_at(nf)
        return float(v) if np.ndim(v) == 0 else v

    def to_dict(self) -> dict:
        return {"beta": self.beta, "d": self.d, "c1": self.c1}

    @classmethod
    def from_dict(cls, data: dict) -> "BandwidthPlan":
        return cls(float(data["beta"]), int(data.get("d", 1)), float(data.get("c1", 1.0)))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "BandwidthPlan":
        return cls.from_dict(json.loads(text))
