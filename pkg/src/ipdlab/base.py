"""Strategy interface shared by the whole library.

A strategy instance is stateful and confined to a single match. Factories
(the registry, or the classes themselves) produce a fresh instance per
match, constructed with the match's noise level and payoff table.
"""

from __future__ import annotations

from abc import ABC, abstractmethod

import numpy as np

from ipdlab.engine import Action, PayoffParams, check_noise


class Strategy(ABC):
    """One side of a match.

    ``decide`` returns the intended action for the current round given
    everything observed so far; ``observe`` feeds back both players'
    actual (post-noise) actions once the round resolves. Implementations
    may draw from ``rng`` inside ``decide`` but nowhere else.
    """

    #: registry name, overridden per subclass
    name: str = "strategy"

    def __init__(self, p_noise: float, params: PayoffParams):
        check_noise(p_noise)
        self.p_noise = p_noise
        self.params = params
        self.spec_name = self.name

    @abstractmethod
    def decide(self, rng: np.random.Generator) -> Action:
        raise NotImplementedError

    @abstractmethod
    def observe(self, own_actual: Action, opp_actual: Action) -> None:
        raise NotImplementedError

    def __repr__(self) -> str:
        return f"<{type(self).__name__} {self.spec_name!r}>"
