import json

import pytest

from stickyquake import config
from stickyquake.errors import ConfigError


def test_defaults_are_valid():
    cfg = config.load(None)
    assert cfg.network().n_vertices == 2
    assert cfg.wave_options().h_star == config.H_STAR_DEFAULT


@pytest.mark.parametrize("bad", [
    {"bogus": 1},
    {"model": {"nope": 1}},
    {"model": {"network": {"kind": "k_ary", "colour": 1}}},
])
def test_unknown_keys_rejected(bad):
    with pytest.raises(ConfigError):
        config.from_dict(bad)


@pytest.mark.parametrize("bad", [
    {"model": {"regions": [{"id": 0, "m": 0.0, "v": 1.0, "sigma": 1.0}]}},
    {"model": {"regions": [{"id": 0, "m": -1.0, "v": 1.0, "sigma": 1.0}]}},
    {"model": {"regions": [{"id": 0, "m": 1.0, "v": 1.0}]}},
    {"dt": 0},
    {"threads": 0},
    {"t_max": -1.0},
    {"model": {"c": -0.1}},
    {"validation": {"ks_alpha": 1.5}},
    {"model": {"network": {"kind": "torus"}}},
    {"model": {"network": {"kind": "k_ary", "k": 5, "depth": 1},
               "regions": [{"id": i, "m": 1.0, "v": 1.0, "sigma": 1.0} for i in range(3)]}},
])
def test_invalid_values_rejected(bad):
    with pytest.raises(ConfigError):
        config.from_dict(bad)


def test_digest_ignores_threads_and_output():
    a = config.from_dict({"threads": 1, "output": {"dir": "x"}})
    b = config.from_dict({"threads": 8, "output": {"dir": "y"}})
    c = config.from_dict({"seed": 1})
    assert a.digest() == b.digest() != c.digest()


def test_overrides_and_file_roundtrip(tmp_path):
    cfg = config.with_overrides(config.load(None), seed=5, dt=None, n_paths=10)
    assert cfg.seed == 5 and cfg.dt == config.RunConfig().dt and cfg.n_paths == 10
    path = tmp_path / "c.json"
    path.write_text(cfg.to_json())
    assert config.load(str(path)).digest() == cfg.digest()
    (tmp_path / "bad.json").write_text("{")
    with pytest.raises(ConfigError):
        config.load(str(tmp_path / "bad.json"))
    with pytest.raises(ConfigError):
        config.load(str(tmp_path / "missing.json"))


def test_k_ary_region_assignment():
    regs = [{"id": 0, "m": 2.0, "v": 1.0, "sigma": 1.0}, {"id": 1, "m": 1.0, "v": 1.0, "sigma": 1.0}]
    cfg = config.from_dict({"model": {"regions": regs,
                                      "network": {"kind": "k_ary", "k": 5, "depth": 1}}})
    net = cfg.network()
    assert sorted(r.id for r in net.regions.values()) == list(range(6))
    assert net.regions[0].m == 2.0 and all(net.regions[v].m == 1.0 for v in range(1, 6))


def test_root_rates_and_strict_magnitudes():
    cfg = config.from_dict({"model": {"network": {"kind": "star", "edges": 3,
                                                  "rates": [1.0, 0.0, 0.0]}}})
    assert list(cfg.network().stars[0].rates) == [1.0, 0.0, 0.0]
    with pytest.raises(ConfigError):
        config.from_dict({"model": {"network": {"kind": "star", "edges": 3, "rates": [1.0]}}})
    up = [{"id": 0, "m": 1.0, "v": 1.0, "sigma": 1.0}, {"id": 1, "m": 2.0, "v": 1.0, "sigma": 1.0}]
    config.from_dict({"model": {"regions": up}})
    with pytest.raises(ConfigError):
        config.from_dict({"model": {"regions": up, "strict_magnitudes": True}})


def test_key_help_lists_every_key():
    cfg = config.RunConfig().to_dict()

    def keys(d, prefix=""):
        for k, v in d.items():
            if isinstance(v, dict) and k not in ("graph",):
                yield from keys(v, f"{prefix}{k}.")
            else:
                yield prefix + k
    missing = [k for k in keys(cfg) if k not in config.KEY_HELP]
    assert missing == []
    json.loads(config.RunConfig().to_json())
