"""
Shared fixtures.

Synthetic sessions are expensive to generate, so the cohort used by the
trajectory and pipeline tests is built once per test session.
"""
import json

import pytest

from cogplay.models.agents import AgentParams, CohortMember, CohortSpec
from cogplay.services.storage import LocalArtifactStore
from cogplay.services.synth_player import simulate_cohort, simulate_session

from tests.factories import build_nk_log

COHORT_SEED = 20240611


def cohort_spec(seed: int = COHORT_SEED) -> CohortSpec:
    """
    Ten NK players with two sessions each.

    Four players lean heavily on one trial type; the other six split between
    two types, so neighbouring players overlap.
    """
    dominant = [
        {"DG": 0.7, "IG": 0.1, "DN": 0.1, "IN": 0.1},
        {"DG": 0.1, "IG": 0.7, "DN": 0.1, "IN": 0.1},
        {"DG": 0.1, "IG": 0.1, "DN": 0.7, "IN": 0.1},
        {"DG": 0.1, "IG": 0.1, "DN": 0.1, "IN": 0.7},
    ]
    pairs = [("DG", "IG"), ("DG", "DN"), ("DG", "IN"), ("IG", "DN"), ("IG", "IN"), ("DN", "IN")]
    mixes = list(dominant)
    for first, second in pairs:
        mix = {t: 0.1 for t in ("DG", "IG", "DN", "IN")}
        mix[first] = mix[second] = 0.4
        mixes.append(mix)

    players = [
        CohortMember(player_id=f"P{i + 1:02d}", params=AgentParams(style_mix=mix), sessions=2)
        for i, mix in enumerate(mixes)
    ]
    return CohortSpec(players=players, seed=seed)


def write_cohort(path, players: int = 4, seed: int = COHORT_SEED):
    """Write the first `players` members of the test cohort as a cohort spec JSON."""
    spec = cohort_spec(seed)
    spec = spec.model_copy(update={"players": spec.players[:players]})
    path.write_text(json.dumps(spec.model_dump(mode="json"), indent=2))
    return path


@pytest.fixture
def store(tmp_path):
    """Artifact store rooted in a fresh temporary directory."""
    return LocalArtifactStore(tmp_path / "out")


@pytest.fixture
def nk_log():
    """One hand-built NK trial over [1000, 3000] ms with the player standing still."""
    return build_nk_log()


@pytest.fixture
def cohort_file(tmp_path):
    """Four players each favouring one trial type, two NK sessions each."""
    return write_cohort(tmp_path / "cohort.json")


@pytest.fixture(scope="session")
def nk_session():
    return simulate_session("NK", AgentParams(), seed=7, player="P01", session_id="P01-S1")


@pytest.fixture(scope="session")
def nk_cohort():
    """20 simulated NK sessions (10 players x 2)."""
    return simulate_cohort(cohort_spec())
