"""Run configuration and deterministic seed derivation.

All randomness flows from one 64-bit root seed.  Every consumer (demo
generation, sampling, planning, ...) gets its own child seed derived through
a counter-keyed splitting scheme, so each pipeline stage is independently
reproducible regardless of what ran before it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ParseError

# Stable stream ids; changing these changes every derived seed.
STREAMS = {
    "gen_demos": 0,
    "align": 1,
    "encode": 2,
    "condition": 3,
    "sample": 4,
    "fuse": 5,
    "plan": 6,
    "report": 7,
}


def child_seed(root_seed: int, stream: str) -> int:
    """Derive a 64-bit seed for one named consumer from the root seed."""
    if stream not in STREAMS:
        raise ParseError(f"unknown seed stream {stream!r}")
    ss = np.random.SeedSequence(entropy=int(root_seed), spawn_key=(STREAMS[stream],))
    lo, hi = ss.generate_state(2)
    return int(lo) | (int(hi) << 32)


@dataclass
class RunConfig:
    """Defaults for the pipeline; every field is overridable per command.

    Attributes:
        n_step: resampled trajectory length used by alignment.
        lambda_reg: covariance floor on relative-pose scatter.
        smooth_window: optional moving-average window on the alignment speed
            profile (0 disables it).
        space: "se3" or "pcg3".
        seed: root seed for all derived randomness.
        samples_per_joint: per-link draws for the workspace density.
        chain: path to a chain file (None uses the bundled 7-joint arm).
        scene: path to a scene file (None means an empty scene).
        stomp: planner parameter overrides, keyed by StompParams field name.
    """

    n_step: int = 50
    lambda_reg: float = 1e-6
    smooth_window: int = 0
    space: str = "se3"
    seed: int = 0
    samples_per_joint: int = 25
    chain: str | None = None
    scene: str | None = None
    stomp: dict = field(default_factory=dict)

    @staticmethod
    def from_obj(obj: dict) -> "RunConfig":
        known = set(RunConfig.__dataclass_fields__)
        unknown = set(obj) - known
        if unknown:
            raise ParseError(f"unknown config fields: {sorted(unknown)}")
        return RunConfig(**obj)

    def to_obj(self) -> dict:
        return {
            "n_step": self.n_step,
            "lambda_reg": self.lambda_reg,
            "smooth_window": self.smooth_window,
            "space": self.space,
            "seed": self.seed,
            "samples_per_joint": self.samples_per_joint,
            "chain": self.chain,
            "scene": self.scene,
            "stomp": dict(self.stomp),
        }
