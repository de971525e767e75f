"""
Gauss-Legendre rules and the log-substituted scheme for the fractional power integral
"""

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Tuple

import numpy as np
from numpy.polynomial.legendre import leggauss

from app.core.config import settings
from app.core.exceptions import DomainError

logger = logging.getLogger(__name__)


@lru_cache(maxsize=64)
def gauss_legendre(n: int) -> Tuple[np.ndarray, np.ndarray]:
    """n-point Gauss-Legendre nodes and weights on [-1, 1]"""
    if n < 1:
        raise DomainError(f"Gauss-Legendre needs n >= 1, got {n}")
    nodes, weights = leggauss(n)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def composite_gauss_legendre(a: float, b: float, panels: int, nodes: int) -> Tuple[np.ndarray, np.ndarray]:
    """Composite rule with equal panels on [a, b]"""
    if panels < 1:
        raise DomainError(f"Need at least one panel, got {panels}")
    ref_nodes, ref_weights = gauss_legendre(nodes)
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    points = (mid[:, None] + half[:, None] * ref_nodes[None, :]).ravel()
    weights = (half[:, None] * ref_weights[None, :]).ravel()
    return points, weights


@dataclass(frozen=True)
class QuadratureScheme:
    """
    Composite Gauss-Legendre in y = log t over [y_min, y_max]; the measure
    dt/t becomes dy. Tails outside [exp(y_min), exp(y_max)] are closed in
    closed form by the power-integral routine.
    """

    y_min: float
    y_max: float
    panels: int
    nodes_per_panel: int

    @classmethod
    def for_spectrum(
        cls,
        lambda_min: float,
        lambda_max: float,
        tail_ratio: Optional[float] = None,
        panel_width: Optional[float] = None,
        nodes_per_panel: Optional[int] = None,
    ) -> "QuadratureScheme":
        """
        Truncation at [lambda_min * r, lambda_max / r] for the smallest positive
        and the largest eigenvalue
        """
        tail_ratio = tail_ratio or settings.QUAD_TAIL_RATIO
        panel_width = panel_width or settings.QUAD_PANEL_WIDTH
        nodes_per_panel = nodes_per_panel or settings.QUAD_NODES_PER_PANEL
        if not 0 < lambda_min <= lambda_max:
            raise DomainError(f"Invalid spectral range [{lambda_min}, {lambda_max}]")
        y_min = math.log(lambda_min * tail_ratio)
        y_max = math.log(lambda_max / tail_ratio)
        panels = max(1, math.ceil((y_max - y_min) / panel_width))
        return cls(y_min=y_min, y_max=y_max, panels=panels, nodes_per_panel=nodes_per_panel)

    @property
    def t_min(self) -> float:
        return math.exp(self.y_min)

    @property
    def t_max(self) -> float:
        return math.exp(self.y_max)

    def nodes_weights(self) -> Tuple[np.ndarray, np.ndarray]:
        """Nodes t_k and weights w_k with sum w_k g(t_k) ~ int g(t) dt/t"""
        y, w = composite_gauss_legendre(self.y_min, self.y_max, self.panels, self.nodes_per_panel)
        return np.exp(y), w

    def covers(self, lower: float, upper: float) -> bool:
        return self.t_min <= lower and self.t_max >= upper
