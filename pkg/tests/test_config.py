import json

import numpy as np
import pytest

from temlink.config import load_config, parse_config
from temlink.errors import ConfigError


def test_defaults():
    cfg = parse_config({"schema_version": 1})
    assert cfg.constellation.M == 4 and cfg.pulse.kind == "rrc" and cfg.pulse.memory == 4
    assert cfg.frame.pilot_length == 12 and cfg.frame.data_length == 16
    assert cfg.detectors == ["zf", "spike_count"]
    assert cfg.noise_psd() == 0.0
    assert len(cfg.pilots()) == 12
    np.testing.assert_array_equal(cfg.pilots(), cfg.pilots())


def test_schema_version_required():
    with pytest.raises(ConfigError):
        parse_config({"trials": 3})
    with pytest.raises(ConfigError):
        parse_config({"schema_version": 2})


@pytest.mark.parametrize("bad", [
    "{not json",
    "[1, 2]",
    {"schema_version": 1, "unknown": 1},
    {"schema_version": 1, "constellation": {"M": 3}},
    {"schema_version": 1, "frame": {"pilot_length": 4}},  # L_p <= L_f
    {"schema_version": 1, "noise": {"snr_db": 10, "psd": 0.1}},
    {"schema_version": 1, "frame": {"pilot_length": 5, "pilots": [1, 1]}, "pulse": {"memory": 2}},
    {"schema_version": 1, "constellation": {"M": 2}, "frame": {"pilots": [0.5] * 12}},
    {"schema_version": 1, "detectors": ["mmse"]},
    {"schema_version": 1, "timing": {"mode": "fixed", "value": 0.7}},
    {"schema_version": 1, "tem": {"bias": -1}},
])
def test_invalid_configs(bad):
    with pytest.raises(ConfigError):
        parse_config(bad)


def test_snr_definition():
    cfg = parse_config({"schema_version": 1, "noise": {"snr_db": 10}})
    es = cfg.constellation.average_energy * cfg.build_pulse().energy
    assert cfg.symbol_energy() == pytest.approx(es)
    assert cfg.noise_psd() == pytest.approx(es / 10)
    assert parse_config({"schema_version": 1, "noise": {"psd": 0.3}}).noise_psd() == 0.3


def test_explicit_pilots():
    cfg = parse_config({"schema_version": 1, "constellation": {"M": 2},
                        "pulse": {"memory": 2}, "frame": {"pilot_length": 3, "pilots": [1, -1, 1]}})
    np.testing.assert_array_equal(cfg.pilots(), [1.0, -1.0, 1.0])


def test_updated_revalidates():
    cfg = parse_config({"schema_version": 1})
    new = cfg.updated(noise={"snr_db": 5.0}, trials=3)
    assert new.noise.snr_db == 5.0 and new.trials == 3 and cfg.trials == 100
    with pytest.raises(Exception):
        cfg.updated(frame={"pilot_length": 2})


def test_load_from_file(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"schema_version": 1, "seed": 9}))
    assert load_config(path).seed == 9
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.json")
