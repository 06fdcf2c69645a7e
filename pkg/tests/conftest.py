import hypothesis
import numpy as np
import pytest
import scipy.sparse as sp

from gliderdec.simulator import ScenarioSpec, generate
from gliderdec.sparse_lsq import LsqBlock

hypothesis.settings.register_profile("default", max_examples=40, deadline=None)
hypothesis.settings.register_profile("ci", max_examples=200, deadline=None)
hypothesis.settings.load_profile("default")


@pytest.fixture(scope="session")
def default_dive():
    return generate(ScenarioSpec())


@pytest.fixture(scope="session")
def noisy_dive():
    return generate(ScenarioSpec(noise_adcp=0.03, noise_ttw=0.05, seed=11))


@pytest.fixture(scope="session")
def zero_current_dive():
    return generate(ScenarioSpec(current_u=(0.0, 0.0), current_v=(0.0, 0.0)))


@pytest.fixture(scope="session")
def toy_dive():
    # short and shallow so dense checks stay cheap
    return generate(ScenarioSpec(dive_duration=900.0, max_depth=40.0, descent_rate=0.1, ascent_rate=0.1,
                                 current_depths=(0.0, 40.0), current_u=(0.1, -0.02), current_v=(0.0, 0.05),
                                 noise_adcp=0.01, noise_ttw=0.02, seed=5))


def covered_max_error(profile, truth):
    cov = profile.coverage > 0
    return float(max(np.max(np.abs(profile.u - truth.u)[cov]), np.max(np.abs(profile.v - truth.v)[cov])))


def random_blocks(seed: int, n: int, n_blocks: int = 3, density: float = 0.2, ncols_rhs=None):
    """Random well-posed stacked system: one dense-ish tall block plus sparse extras."""
    rng = np.random.default_rng(seed)
    blocks = []
    shape = (n,) if ncols_rhs is None else (n, ncols_rhs)
    for b in range(n_blocks):
        rows = n + int(rng.integers(0, n)) if b == 0 else int(rng.integers(1, n + 1))
        m = sp.random(rows, n, density=density, random_state=rng, format="csr")
        if b == 0:
            m = (m + sp.vstack([sp.identity(n), sp.csr_matrix((rows - n, n))])).tocsr()
        rhs = rng.normal(size=(rows,) + shape[1:])
        blocks.append(LsqBlock(m, rhs, float(10 ** rng.uniform(-2, 2)), f"b{b}"))
    return blocks
