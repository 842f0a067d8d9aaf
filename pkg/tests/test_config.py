import json

import pytest

from ncricci.algebra import is_self_adjoint
from ncricci.config import (
    DEFAULT_TOLERANCES,
    ConfigError,
    build_config,
    config_hash,
    load_config_file,
    parse_tolerance,
    random_self_adjoint_matrix,
)


def test_defaults_describe_reference_setup():
    cfg = build_config()
    assert cfg.ctx.theta == 0.37 and cfg.ctx.tau == 1j
    assert cfg.grid_n == 16 and cfg.identity_n == 61
    assert [s.name for s in cfg.smearings] == ["identity", "random"]
    assert cfg.tolerances == DEFAULT_TOLERANCES


def test_hash_is_stable_and_sensitive():
    a, b = build_config(), build_config()
    assert a.config_hash == b.config_hash == config_hash(a.normalized)
    assert build_config(grid_n=12).config_hash != a.config_hash
    assert build_config(tolerances={"identity": 1e-9}).config_hash != a.config_hash


def test_key_order_does_not_change_hash():
    raw = {"theta": 0.1, "tau": [0.0, 1.5]}
    assert build_config(raw).config_hash == build_config(dict(reversed(list(raw.items())))).config_hash


@pytest.mark.parametrize("text,expected", [("identity=1e-9", ("identity", 1e-9)),
                                           (" spectral_rel = 0.1", ("spectral_rel", 0.1))])
def test_parse_tolerance(text, expected):
    assert parse_tolerance(text) == expected


@pytest.mark.parametrize("text", ["identity", "nope=1", "identity=abc", "identity=-1", "identity=nan", "=1"])
def test_parse_tolerance_rejects(text):
    with pytest.raises(ConfigError):
        parse_tolerance(text)


@pytest.mark.parametrize("raw", [
    {"unknown": 1},
    {"tau": [0.0, -1.0]},
    {"tau": [1.0]},
    {"theta": "x"},
    {"dilaton": [{"m": 1, "n": 0, "re": 0.3, "im": 0.0}]},
    {"smearing": [{"name": "custom"}]},
    {"smearing": [{"name": "identity"}, {"name": "identity"}]},
    {"grid": {"N": 0}},
    {"grid": {"N": 8, "guard": 0}},
    {"t_grid": [0.2, 0.1]},
    {"t_grid": [-1.0, 1.0]},
    {"spectrum_radius": 0},
    {"identity_grid": {"n": 1}},
    {"prune_tol": -1},
    {"tolerances": {"identity": 0}},
])
def test_invalid_configs(raw):
    with pytest.raises(ConfigError):
        build_config(raw)


def test_custom_smearing_round_trip(nc_ctx):
    from ncricci.algebra import matrix_to_records

    F = random_self_adjoint_matrix(nc_ctx, 7)
    cfg = build_config({"smearing": [{"name": "mine", "matrix": matrix_to_records(F)}]})
    G = cfg.smearings[0].matrix
    assert all(G[i, j].allclose(F[i, j], atol=1e-15) for i in range(2) for j in range(2))


def test_random_smearing_is_self_adjoint(nc_ctx):
    F = random_self_adjoint_matrix(nc_ctx, 3)
    assert is_self_adjoint(F[0, 0]) and is_self_adjoint(F[1, 1])
    assert F[0, 1].allclose(F[1, 0].adjoint(), atol=1e-15)


def test_load_config_file(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"theta": 0.2}))
    assert load_config_file(p) == {"theta": 0.2}
    p.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config_file(p)
    p.write_text("[1, 2]")
    with pytest.raises(ConfigError):
        load_config_file(p)
    with pytest.raises(ConfigError):
        load_config_file(tmp_path / "missing.json")
