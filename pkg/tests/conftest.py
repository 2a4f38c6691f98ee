"""Shared fixtures: bundled asset paths and seeded generated corpora.

Corpora are session-scoped because generation is the expensive step; tests
must treat them as read-only and deepcopy before mutating.
"""

import os

import pytest

from dialogkit.generate import GenerationAssets, generate_corpus, load_assets

ASSETS = os.path.join(
    os.path.dirname(os.path.dirname(os.path.abspath(__file__))),
    "src", "dialogkit", "assets",
)
FIXTURES = os.path.join(os.path.dirname(os.path.abspath(__file__)), "fixtures")


def asset_path(*parts: str) -> str:
    return os.path.join(ASSETS, *parts)


def _load(scenarios: str, seed: int) -> GenerationAssets:
    return load_assets(
        asset_path("schemas"),
        asset_path("backends"),
        asset_path("scenarios", scenarios),
        asset_path("templates.json"),
        variations_file=asset_path("variations.json"),
        seed=seed,
    )


@pytest.fixture(scope="session")
def training_assets() -> GenerationAssets:
    return _load("training.json", seed=7)


@pytest.fixture(scope="session")
def schemas(training_assets):
    return training_assets.schemas


@pytest.fixture(scope="session")
def small_corpus(training_assets):
    """40 dialogues for cheap structural tests."""
    return generate_corpus(training_assets, num=40, seed=7, workers=8)


@pytest.fixture(scope="session")
def large_corpus(training_assets):
    """500 dialogues backing the validity, span, and training gates."""
    return generate_corpus(training_assets, num=500, seed=7, workers=8)


@pytest.fixture(scope="session")
def unseen_assets() -> GenerationAssets:
    return _load("zero_shot.json", seed=11)


@pytest.fixture(scope="session")
def unseen_corpus(unseen_assets):
    """100 dialogues over the service held out of every training scenario."""
    return generate_corpus(unseen_assets, num=100, seed=11, workers=8)
