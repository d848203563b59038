"""Named parameter sets used by the experiments and tests."""

import numpy as np

from .model import ModelParams

TWO_COMMUNITY_P = np.array([[0.2, 0.8], [0.6, 0.4]])
# asymmetric as published: Q0[a, b] applies to (earlier node in a, later node in b)
TWO_COMMUNITY_Q0 = np.array([[0.8, 0.2], [0.1, 0.3]])

FOUR_COMMUNITY_P = np.array(
    [
        [0.1, 0.3, 0.5, 0.1],
        [0.45, 0.15, 0.2, 0.2],
        [0.15, 0.3, 0.1, 0.45],
        [0.25, 0.3, 0.1, 0.35],
    ]
)
FOUR_COMMUNITY_Q = np.array(
    [
        [0.22, 0.48, 0.29, 0.44],
        [0.48, 0.61, 0.18, 0.15],
        [0.29, 0.18, 0.08, 0.87],
        [0.44, 0.15, 0.87, 0.27],
    ]
)

FIVE_COMMUNITY_P = np.array(
    [
        [0.1, 0.3, 0.5, 0.01, 0.09],
        [0.55, 0.15, 0.1, 0.05, 0.15],
        [0.15, 0.3, 0.1, 0.2, 0.25],
        [0.15, 0.05, 0.1, 0.5, 0.2],
        [0.2, 0.3, 0.1, 0.05, 0.35],
    ]
)
FIVE_COMMUNITY_Q = np.array(
    [
        [0.6, 0.1, 0.15, 0.1, 0.2],
        [0.2, 0.5, 0.35, 0.1, 0.4],
        [0.4, 0.15, 0.6, 0.25, 0.05],
        [0.4, 0.1, 0.1, 0.2, 0.55],
        [0.3, 0.35, 0.2, 0.1, 0.7],
    ]
)


def two_community(alpha: float = 1.0) -> ModelParams:
    return ModelParams.from_chain(TWO_COMMUNITY_P, TWO_COMMUNITY_Q0, alpha=alpha, ordered=True)


def four_community(alpha: float = 1.0) -> ModelParams:
    return ModelParams.from_chain(FOUR_COMMUNITY_P, FOUR_COMMUNITY_Q, alpha=alpha)


def five_community(alpha: float = 1.0) -> ModelParams:
    return ModelParams.from_chain(FIVE_COMMUNITY_P, FIVE_COMMUNITY_Q, alpha=alpha, ordered=True)


PRESETS = {
    "two-community": two_community,
    "four-community": four_community,
    "five-community": five_community,
}


def preset(name: str, alpha: float = 1.0) -> ModelParams:
    try:
        return PRESETS[name](alpha)
    except KeyError:
        from .errors import ConfigError

        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
