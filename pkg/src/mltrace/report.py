"""Result containers shared by the single-level and multilevel estimators."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np


@dataclass
class LevelSummary:
    """Statistics for the segment of terms ``(lo, hi]`` sampled at one level."""

    lo: int
    hi: int
    samples: int
    fresh_samples: int
    mean: float
    variance: float
    cost: int


@dataclass
class EstimateReport:
    estimate: float
    stderr: float
    matvecs: int
    levels: list = field(default_factory=list)
    plan: object = None
    allocation: object = None
    seed: int | None = None
    info: dict = field(default_factory=dict)

    def to_dict(self):
        def clean(x):
            if isinstance(x, dict):
                return {k: clean(v) for k, v in x.items()}
            if isinstance(x, (list, tuple)):
                return [clean(v) for v in x]
            if isinstance(x, np.ndarray):
                return x.tolist()
            if isinstance(x, np.generic):
                return x.item()
            return x

        out = {
            "estimate": self.estimate,
            "stderr": self.stderr,
            "matvecs": self.matvecs,
            "seed": self.seed,
            "levels": [asdict(lv) for lv in self.levels],
            "plan": asdict(self.plan) if self.plan is not None else None,
            "allocation": asdict(self.allocation) if self.allocation is not None else None,
            "info": self.info,
        }
        return clean(out)
