import pytest

from feedbeam import NetworkConfig


@pytest.fixture
def make_config():
    """Config factory with small, fast defaults; override per test."""

    def _make(**overrides):
        base = dict(
            M=1,
            N=8,
            P=4.0,
            N_o=1.0,
            T_f=20,
            k_o=5.0,
            epsilon_o=0.1,
            delta=0.5,
            seed=1234,
            estimation_mode="perfect",
            trials=4,
        )
        base.update(overrides)
        return NetworkConfig(**base)

    return _make
