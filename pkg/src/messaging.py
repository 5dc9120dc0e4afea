"""
Messaging Module
Leader-to-follower channel carrying the leader's input and heading
"""

from collections import deque
from dataclasses import dataclass
from typing import Optional
import logging

try:
    from .geometry import ControlInput
except ImportError:
    from geometry import ControlInput

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class NeighborMessage:
    """What agent `sender` tells its follower each step"""
    sender: int
    u: ControlInput
    theta: float
    stamp: float


class MessageChannel:
    """
    Fixed-delay FIFO between one sender and its follower.

    The receiver sees the message published `delay_steps` publishes ago.
    Until that many messages exist, the initial message is delivered.
    """

    def __init__(self, delay_steps: int = 0, initial: Optional[NeighborMessage] = None):
        if delay_steps < 0:
            raise ValueError(f"delay_steps must be >= 0, got {delay_steps}")
        self.delay_steps = int(delay_steps)
        self._buffer = deque(maxlen=self.delay_steps + 1)
        if initial is not None:
            self._buffer.extend([initial] * self.delay_steps)

    def publish(self, msg: NeighborMessage):
        self._buffer.append(msg)

    def receive(self, now: Optional[float] = None) -> NeighborMessage:
        """
        Message due at the current step.

        Raises:
            RuntimeError: if nothing was published and no initial message was given
        """
        if not self._buffer:
            raise RuntimeError("Channel is empty: publish before receive or prime it with an initial message")
        msg = self._buffer[0]
        if now is not None and msg.stamp > now + 1e-12:
            raise RuntimeError(f"Message stamped {msg.stamp} delivered at t={now}")
        return msg
