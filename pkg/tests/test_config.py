"""Tests for pipeline configuration loading."""

import pytest

import scenex as sx
from scenex.core.errors import UsageError
from scenex.layout.constraints import ConstraintThresholds
from scenex.layout.placer import ScoringWeights
from scenex.perception.gateway import GatewaySettings
from scenex.perception.views import MaskSettings


@pytest.fixture(autouse=True)
def no_env_seed(monkeypatch):
    monkeypatch.delenv("SCENEX_SEED", raising=False)


def test_defaults_follow_library_defaults():
    """An empty room config maps to the library's default tunables."""
    config = sx.make_config({"room": {"extent": [4, 5]}})
    assert config.seed == 0
    assert config.caption == "a cozy living room"
    assert config.scoring.to_weights() == ScoringWeights()
    assert config.constraints.to_thresholds() == ConstraintThresholds()
    assert config.gateway.to_settings() == GatewaySettings()
    assert config.mask.to_settings() == MaskSettings()
    assert config.room.to_room() == sx.Room(extent=(4.0, 5.0))


def test_room_openings():
    """Openings in the config become room openings."""
    config = sx.make_config(
        {
            "room": {
                "extent": [4, 4],
                "wall_height": 2.6,
                "openings": [{"wall": 0, "offset": 1.0, "width": 0.9, "height": 2.0}],
            }
        }
    )
    room = config.room.to_room()
    assert room.wall_height == 2.6
    assert len(room.openings) == 1
    assert room.openings[0].kind == "door"
    assert room.openings[0].offset == 1.0


def test_exactly_one_room_source():
    """A config needs either a room or a scene file, not both."""
    with pytest.raises(UsageError):
        sx.make_config({})
    with pytest.raises(UsageError):
        sx.make_config({"room": {"extent": [4, 4]}, "scene_file": "a.scene.json"})
    assert sx.make_config({"scene_file": "a.scene.json"}).room is None


def test_unknown_keys_are_rejected():
    """Typos in section or field names are usage errors."""
    with pytest.raises(UsageError):
        sx.make_config({"room": {"extent": [4, 4]}, "scoring": {"w_rot": 2.0}})
    with pytest.raises(UsageError):
        sx.make_config({"room": {"extent": [4, 4]}, "search_options": {}})


def test_seed_from_environment(monkeypatch):
    """SCENEX_SEED fills in a missing seed; an explicit seed wins."""
    monkeypatch.setenv("SCENEX_SEED", "17")
    assert sx.make_config({"room": {"extent": [4, 4]}}).seed == 17
    assert sx.make_config({"room": {"extent": [4, 4]}, "seed": 3}).seed == 3
    monkeypatch.setenv("SCENEX_SEED", "seventeen")
    with pytest.raises(UsageError):
        sx.make_config({"room": {"extent": [4, 4]}})


def test_thresholds_are_checked_on_use():
    """Inconsistent thresholds pass loading but fail when converted."""
    config = sx.make_config({"room": {"extent": [4, 4]}, "constraints": {"edge_eps": 0.9}})
    with pytest.raises(ValueError):
        config.constraints.to_thresholds()


def test_load_config_resolves_relative_paths(tmp_path):
    """Relative file references resolve against the config's directory."""
    path = tmp_path / "configs" / "run.yaml"
    path.parent.mkdir()
    path.write_text(
        "scene_file: start.scene.json\n"
        "mock_script: mock.yaml\n"
        "seed: 5\n"
        "assets:\n"
        "  catalog: assets/catalog.jsonl\n"
        "views:\n"
        "  max_views: 1\n",
        encoding="utf-8",
    )
    config = sx.load_config(path)
    assert config.seed == 5
    assert config.views.max_views == 1
    assert config.scene_file == str(path.parent / "start.scene.json")
    assert config.mock_script == str(path.parent / "mock.yaml")
    assert config.assets.catalog == str(path.parent / "assets" / "catalog.jsonl")


def test_load_config_errors(tmp_path):
    """Missing files, bad YAML and non-mapping documents are usage errors."""
    with pytest.raises(UsageError):
        sx.load_config(tmp_path / "missing.yaml")
    bad = tmp_path / "bad.yaml"
    bad.write_text("room: [unclosed\n", encoding="utf-8")
    with pytest.raises(UsageError):
        sx.load_config(bad)
    listed = tmp_path / "list.yaml"
    listed.write_text("- 1\n- 2\n", encoding="utf-8")
    with pytest.raises(UsageError):
        sx.load_config(listed)
