import json
import math

import numpy as np
import pytest

from paneitz_reduce.driver import (PRESETS, SEMI, ConfigError, CriticalPointError, assemble_solution,
                                   build_config, config_hash, find_critical_point, lagrange_multipliers,
                                   landscape_rows, load_config, make_problem, multiplier_tolerance,
                                   parse_config_text, sweep, thread_cap, to_csv, to_json)
from paneitz_reduce.operator import DegenerateError

CHEAP_SPHERE = {"preset": "sphere6", "eps": [1e-3], "panels": 60, "landscape": False}


# -- configuration -----------------------------------------------------------------------

def test_parse_config_text_comments_and_aliases():
    text = """
    # a comment
    preset = torus5   # trailing comment
    h = 2.0
    regime = theorem1
    eps = 1e-3, 1e-4
    """
    values = parse_config_text(text)
    assert values == {"preset": "torus5", "c": "2.0", "variant": "theorem1", "eps": "1e-3, 1e-4"}
    cfg = build_config(values)
    assert cfg.c == 2.0 and cfg.eps == [1e-3, 1e-4] and cfg.n == 5


@pytest.mark.parametrize("text", ["n 5", "= 3", "n = 5\nn = 6"])
def test_parse_config_text_errors(text):
    with pytest.raises(ConfigError):
        parse_config_text(text)


@pytest.mark.parametrize("values", [
    {"preset": "nope"},
    {"colour": "blue"},
    {"n": "five"},
    {"preset": "torus5", "t_window": "1, 2, 3"},
    {"preset": "torus5", "t_window": "2, 1"},
    {"preset": "torus5", "eps": "0.5"},
    {"preset": "torus5", "eps": "0"},
    {"preset": "torus5", "mode": "fast"},
    {"model": "torus", "n": 8},
    {"model": "sphere", "n": 7, "b": 20},
    {"model": "klein", "n": 5},
    {"preset": "torus5", "c": "-1"},
    {"preset": "torus5", "panels": "5"},
    {"preset": "torus5", "landscape": "maybe"},
])
def test_build_config_errors(values):
    with pytest.raises(ConfigError):
        build_config(values)


def test_torus_high_dimension_allowed_in_semi_mode():
    assert build_config({"model": "torus", "n": 9, "b": 1, "mode": SEMI}).n == 9


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_presets_build(name):
    cfg = build_config({"preset": name})
    assert cfg.preset == name
    a, b = cfg.window()
    assert 0 < a < b


def test_default_window_brackets_t0():
    cfg = build_config({"preset": "torus5"})
    t0 = cfg.report().t0
    assert cfg.window() == pytest.approx((t0 / 5, 5 * t0))


def test_load_config_file_and_overrides(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("preset = sphere9  # detuned\neps = 1e-4\n", encoding="utf-8")
    cfg = load_config(str(path), {"eps": [1e-5], "mode": None})
    assert cfg.n == 9 and cfg.eps == [1e-5]


def test_load_config_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(str(tmp_path / "absent.cfg"))


def test_load_config_not_utf8(tmp_path):
    path = tmp_path / "bad.cfg"
    path.write_bytes(b"n = \xff\xfe\n")
    with pytest.raises(ConfigError):
        load_config(str(path))


def test_config_hash_ignores_output_path():
    a = build_config({"preset": "torus5", "out": "a.json"})
    b = build_config({"preset": "torus5", "out": "b.json"})
    c = build_config({"preset": "torus5", "eps": [1e-3]})
    assert config_hash(a) == config_hash(b) != config_hash(c)
    assert a.seed() == b.seed()


def test_exact_paneitz_sphere_is_refused():
    with pytest.raises(DegenerateError):
        make_problem(build_config({"preset": "sphere6-paneitz"}))


# -- critical points -------------------------------------------------------------------------

@pytest.mark.parametrize("values", [{"preset": "torus5", "mode": SEMI}, {"preset": "sphere10-thm2"},
                                    {"preset": "sphere9", "mode": SEMI}])
def test_semi_mode_finds_t0_exactly(values):
    cfg = build_config(values)
    cp = find_critical_point(cfg, 1e-4)
    assert cp.t == pytest.approx(cfg.report().t0, rel=1e-12)
    assert cp.certified


def test_window_too_small():
    cfg = build_config({"preset": "torus5", "mode": SEMI})
    t0 = cfg.report().t0
    narrow = build_config({"preset": "torus5", "mode": SEMI, "t_window": (2 * t0, 3 * t0)})
    with pytest.raises(CriticalPointError, match="window too small"):
        find_critical_point(narrow, 1e-4)


def test_full_mode_critical_point_on_sphere():
    cfg = build_config(CHEAP_SPHERE)
    problem = make_problem(cfg)
    cp = find_critical_point(cfg, 1e-3, problem)
    t0 = cfg.report().t0
    assert abs(cp.t - t0) / t0 < 0.05
    assert cp.certificate <= 1e-6
    rec, state = assemble_solution(cfg, 1e-3, cp.t, cp.xi, problem)
    assert abs(rec.multiplier) <= multiplier_tolerance(1e-3)
    assert rec.depth < 0 and rec.u_min <= rec.depth
    off, _ = assemble_solution(cfg, 1e-3, 2 * cp.t, cp.xi, problem)
    assert abs(off.multiplier) > 100 * abs(rec.multiplier)


# -- assembly ----------------------------------------------------------------------------------

def test_multiplier_tolerance():
    assert multiplier_tolerance(1e-4) == pytest.approx(10 * 1e-8 * math.log(1e-4) ** 2)
    assert multiplier_tolerance(1e-6) == 1e-7


def test_exact_case_residual(torus5_config, torus5):
    rec, state = assemble_solution(torus5_config, 0.0, 1.0, problem=torus5, bubble=False, delta=1e-2)
    assert rec.residual_norm <= 1e-9
    assert rec.norm_phi <= 1e-12
    assert rec.depth == pytest.approx(1.0, abs=1e-12)
    assert abs(lagrange_multipliers(state)[0]) <= 1e-9


def test_random_state_has_large_multiplier(torus5):
    state = torus5.state(1e-3, 1.0)
    c = state.perp(np.random.default_rng(0).standard_normal(state.space.dim))
    c *= 0.01 / np.linalg.norm(c)
    assert abs(lagrange_multipliers(state, c)[0]) > multiplier_tolerance(1e-3)


# -- landscape and sweep --------------------------------------------------------------------------

def test_semi_landscape_rows():
    cfg = build_config({"preset": "sphere10-thm2"})
    rows = landscape_rows(cfg, [1e-4], [0.5, 2.0])
    assert [r["t"] for r in rows] == [0.5, 1.0, 2.0]
    assert rows[1]["D"] == 0.0
    assert all(r["misfit"] == 0.0 for r in rows)


def test_sweep_empty_eps():
    cfg = build_config({"preset": "torus5", "eps": ""})
    report = sweep(cfg)
    assert report["rows"] == [] and not report["all_failed"] and report["failed"] == 0


def test_sweep_is_deterministic_and_thread_independent():
    cfg = build_config(CHEAP_SPHERE)
    a = to_json(sweep(cfg, threads=1))
    b = to_json(sweep(cfg, threads=3))
    assert a == b
    row = json.loads(a)["rows"][0]
    assert row["status"] == "ok"
    assert row["restart_distance"] <= 1e-7


def test_sweep_semi_rows_in_eps_order():
    cfg = build_config({"preset": "sphere10-thm2", "eps": "1e-3, 1e-5, 1e-4"})
    rows = sweep(cfg, threads=2)["rows"]
    assert [r["eps"] for r in rows] == [1e-3, 1e-5, 1e-4]


def test_sweep_failures_are_recorded():
    t0 = build_config({"preset": "torus5", "mode": SEMI}).report().t0
    cfg = build_config({"preset": "torus5", "mode": SEMI, "t_window": (2 * t0, 3 * t0), "eps": [1e-3, 1e-4]})
    report = sweep(cfg, threads=1)
    assert report["all_failed"] and report["failed"] == 2
    assert all("window too small" in r["reason"] for r in report["rows"])


def test_thread_cap(monkeypatch):
    monkeypatch.setenv("PR_THREADS", "3")
    assert thread_cap() == 3
    monkeypatch.setenv("PR_THREADS", "0")
    assert thread_cap() == 1
    monkeypatch.setenv("PR_THREADS", "many")
    with pytest.raises(ConfigError):
        thread_cap()
    monkeypatch.delenv("PR_THREADS")
    assert thread_cap() >= 1


# -- writers -------------------------------------------------------------------------------------

def test_json_is_strict():
    text = to_json({"b": float("nan"), "a": np.float64(1.5), "c": [np.int64(2), np.bool_(True)]})
    assert json.loads(text) == {"a": 1.5, "b": None, "c": [2, True]}
    assert text.index('"a"') < text.index('"b"')


def test_csv_has_header_and_blanks():
    text = to_csv([{"x": 1, "y": None}, {"x": 2.5}], ["x", "y"])
    assert text.splitlines() == ["x,y", "1,", "2.5,"]
    assert to_csv([], ["x"]) == "x\n"
