import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)


@pytest.fixture
def noisy_sine():
    """Synthetic series in [50, 350]: sine plus 1% uniform noise."""

    def build(n: int, seed: int = 99) -> np.ndarray:
        gen = np.random.default_rng(seed)
        t = np.linspace(0.0, 60.0 * np.pi, n)
        base = 200.0 + 150.0 * np.sin(t)
        return np.float32(base + gen.uniform(-0.01, 0.01, n) * base)

    return build
