"""Seeded emulation of a lossy, delayed communication link.

Frames carry a simplified measurement/command protocol: a kind, source,
destination, per-link sequence number, timestamp and a payload dict. There is
no link-layer framing; only delivery timing and loss matter to the
controllers and agents on either end.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .errors import ConfigError, ContractError

# Logical-time comparisons tolerate accumulated float error in t = k*dt.
TIME_EPS = 1e-9


@dataclass(frozen=True)
class NetProfile:
    delay: float = 0.0      # s
    jitter: float = 0.0     # s, uniform +/-
    loss: float = 0.0       # probability
    seed: int = 0

    def __post_init__(self):
        if not (self.delay >= 0 and math.isfinite(self.delay)):
            raise ConfigError(f"delay must be >= 0 (got {self.delay})")
        if not (self.jitter >= 0 and math.isfinite(self.jitter)):
            raise ConfigError(f"jitter must be >= 0 (got {self.jitter})")
        if not 0.0 <= self.loss <= 1.0:
            raise ConfigError(f"loss must lie in [0, 1] (got {self.loss})")

    @classmethod
    def from_dict(cls, d: dict | None) -> "NetProfile":
        d = d or {}
        unknown = set(d) - {"delay_ms", "jitter_ms", "loss", "seed"}
        if unknown:
            raise ConfigError(f"unknown link keys: {sorted(unknown)}")
        return cls(delay=float(d.get("delay_ms", 0.0)) / 1000.0,
                   jitter=float(d.get("jitter_ms", 0.0)) / 1000.0,
                   loss=float(d.get("loss", 0.0)), seed=int(d.get("seed", 0)))

    def to_dict(self) -> dict:
        return {"delay_ms": self.delay * 1000.0, "jitter_ms": self.jitter * 1000.0,
                "loss": self.loss, "seed": self.seed}


@dataclass
class Frame:
    kind: str                   # "measurement" | "command" | "event"
    source: str
    destination: str
    payload: dict[str, Any]
    send_time: float
    seq: int = -1
    deliver_time: float | None = None   # None once dropped

    @property
    def dropped(self) -> bool:
        return self.deliver_time is None


@dataclass
class ChannelStats:
    sent: int = 0
    delivered: int = 0
    dropped: int = 0
    total_delay: float = 0.0

    @property
    def mean_delay(self) -> float:
        return self.total_delay / self.delivered if self.delivered else 0.0


class Channel:
    """One directed link: a priority queue of frames keyed by delivery time."""

    def __init__(self, profile: NetProfile | None = None, name: str = "link"):
        self.profile = profile or NetProfile()
        self.name = name
        self._rng = np.random.default_rng(self.profile.seed)
        self._queue: list[tuple[float, int, Frame]] = []
        self._seq = 0
        self._last_poll = -math.inf
        self._stats = ChannelStats()
        self.drop_log: list[Frame] = []

    def send(self, frame: Frame) -> Frame:
        """Assign a sequence number and either schedule or drop ``frame``.

        Both random draws happen for every frame so that the schedule depends
        only on the seed and the number of frames sent.
        """
        p = self.profile
        frame.seq = self._seq
        self._seq += 1
        u_loss, u_jit = self._rng.random(2)
        self._stats.sent += 1
        if u_loss < p.loss:
            frame.deliver_time = None
            self._stats.dropped += 1
            self.drop_log.append(frame)
            return frame
        delay = p.delay + (2.0 * u_jit - 1.0) * p.jitter
        frame.deliver_time = frame.send_time + max(delay, 0.0)
        heapq.heappush(self._queue, (frame.deliver_time, frame.seq, frame))
        return frame

    def poll(self, now: float) -> list[Frame]:
        """Frames due by ``now``, ordered by (delivery time, sequence)."""
        if now < self._last_poll - TIME_EPS:
            raise ContractError(f"{self.name}: poll time went backwards ({now} < {self._last_poll})")
        self._last_poll = max(now, self._last_poll)
        due = []
        while self._queue and self._queue[0][0] <= now + TIME_EPS:
            _, _, frame = heapq.heappop(self._queue)
            self._stats.delivered += 1
            self._stats.total_delay += frame.deliver_time - frame.send_time
            due.append(frame)
        return due

    def pending(self) -> int:
        return len(self._queue)

    def stats(self) -> ChannelStats:
        return ChannelStats(**self._stats.__dict__)


@dataclass
class Links:
    """The directed links of one co-simulation run."""

    plant_to_ctrl: Channel = field(default_factory=lambda: Channel(name="plant->ctrl"))
    ctrl_to_plant: Channel = field(default_factory=lambda: Channel(name="ctrl->plant"))
    plant_to_attacker: Channel = field(default_factory=lambda: Channel(name="plant->attacker"))

    def all(self) -> dict[str, Channel]:
        return {"plant_to_ctrl": self.plant_to_ctrl, "ctrl_to_plant": self.ctrl_to_plant,
                "plant_to_attacker": self.plant_to_attacker}
