import json
import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from creator_econ.bench import (
    SUMMARY_HEADER,
    ConfigError,
    ExperimentConfig,
    fit_regret_slope,
    load_config,
    read_summary,
    run_experiment,
)
from creator_econ.cli import main
from creator_econ.economy import RejectedInput, ResponseMode, bundled_instance, make_instance, save_instance
from creator_econ.environment import TRACE_HEADER, read_trace_csv


def write_config(tmp_path, **overrides):
    doc = {
        "algorithm": "alg1",
        "instance_path": str(bundled_instance("desk_return")),
        "horizons": [100, 200, 400],
        "seeds": [0, 1],
        "output_dir": str(tmp_path / "out"),
    }
    doc.update(overrides)
    doc = {k: v for k, v in doc.items() if v is not None}
    p = tmp_path / "config.json"
    p.write_text(json.dumps(doc))
    return p


# load_config


def test_minimal_config_defaults(tmp_path):
    cfg = load_config(write_config(tmp_path))
    assert cfg.delta == 0.05
    assert cfg.horizons == (100, 200, 400) and cfg.seeds == (0, 1)


def test_output_dir_defaults_next_to_config(tmp_path):
    cfg = load_config(write_config(tmp_path, output_dir=None))
    assert cfg.output_dir == tmp_path / "results"


def test_relative_instance_path_resolves_against_config_dir(tmp_path):
    save_instance(make_instance([[0.5, 0.5]], [{}], S=1), tmp_path / "inst.json")
    cfg = load_config(write_config(tmp_path, instance_path="inst.json"))
    assert cfg.instance_path == tmp_path / "inst.json"


@pytest.mark.parametrize(
    "overrides,field",
    [
        ({"horizons": [100]}, "horizons"),
        ({"horizons": [300, 200, 400]}, "horizons"),
        ({"horizons": [100, 100, 200]}, "horizons"),
        ({"horizons": [100, -5, 400]}, "horizons"),
        ({"seeds": [1, 1]}, "seeds"),
        ({"seeds": []}, "seeds"),
        ({"delta": 1.5}, "delta"),
        ({"delta": 0}, "delta"),
        ({"algorithm": "alg3"}, "algorithm"),
        ({"instance_path": "nowhere.json"}, "instance_path"),
        ({"instance_path": 3}, "instance_path"),
        ({"seeds": None}, "seeds"),
        ({"colour": "blue"}, "colour"),
    ],
)
def test_config_rejections_name_field(tmp_path, overrides, field):
    with pytest.raises(ConfigError) as info:
        load_config(write_config(tmp_path, **overrides))
    assert info.value.field == field
    assert f"`{field}`" in str(info.value)


def test_missing_and_malformed_files(tmp_path):
    with pytest.raises(ConfigError, match="does not exist"):
        load_config(tmp_path / "absent.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError, match="malformed"):
        load_config(bad)


# run_experiment


def test_run_cardinality_and_summary(tmp_path):
    cfg = ExperimentConfig("alg1", bundled_instance("desk_return"), (100, 200), seeds=(0, 1, 2),
                           output_dir=tmp_path / "out")
    res = run_experiment(cfg)
    assert len(res.trace_paths) == 6 and len(set(res.trace_paths)) == 6
    assert res.summary_path.read_text().splitlines()[0] == ",".join(SUMMARY_HEADER)
    assert all(p.read_text().splitlines()[0] == ",".join(TRACE_HEADER) for p in res.trace_paths)
    summary = read_summary(res.summary_path)
    for T in (100, 200):
        finals = [read_trace_csv(p)[-1, 2] for p in res.trace_paths if f"_T{T}_" in p.name]
        mean, std, n = summary[T]
        assert n == 3
        assert abs(mean - np.mean(finals)) <= 1e-12
        assert std == pytest.approx(np.std(finals, ddof=1), abs=1e-12)
        assert len(read_trace_csv(res.trace_paths[0])) == 100


def test_rerun_byte_identical(tmp_path):
    a = load_config(write_config(tmp_path, output_dir=str(tmp_path / "a")))
    b = load_config(write_config(tmp_path, output_dir=str(tmp_path / "b")))
    ra, rb = run_experiment(a), run_experiment(b)
    for pa, pb in zip(ra.trace_paths + [ra.summary_path], rb.trace_paths + [rb.summary_path]):
        assert pa.name == pb.name and pa.read_bytes() == pb.read_bytes()


def test_threads_do_not_change_output(tmp_path, monkeypatch):
    seq = run_experiment(load_config(write_config(tmp_path, output_dir=str(tmp_path / "seq"))))
    monkeypatch.setenv("CREATOR_ECON_THREADS", "3")
    par = run_experiment(load_config(write_config(tmp_path, output_dir=str(tmp_path / "par"))))
    for pa, pb in zip(seq.trace_paths + [seq.summary_path], par.trace_paths + [par.summary_path]):
        assert pa.read_bytes() == pb.read_bytes()


def test_bad_thread_setting(tmp_path, monkeypatch):
    monkeypatch.setenv("CREATOR_ECON_THREADS", "many")
    with pytest.raises(RejectedInput):
        run_experiment(load_config(write_config(tmp_path)))


def test_full_return_on_partial_recommendation(tmp_path):
    cfg = load_config(write_config(tmp_path, algorithm="full_return"))
    with pytest.raises(RejectedInput, match=r"T=100, seed=0"):
        run_experiment(cfg)


def test_horizon_below_covering_names_cell(tmp_path):
    save_instance(make_instance([[0.5, 0.5]], [dict(mode=ResponseMode.QUADRATIC)], S=1), tmp_path / "q.json")
    cfg = load_config(write_config(tmp_path, algorithm="alg2", instance_path="q.json", horizons=[10, 2000, 3000]))
    with pytest.raises(RejectedInput, match=r"T=10, seed=0"):
        run_experiment(cfg)


@pytest.mark.parametrize("alg,inst", [("alg2", "desk_feature"), ("full_return", "desk_full"), ("full_feature", "desk_full")])
def test_every_algorithm_runs(tmp_path, alg, inst):
    cfg = load_config(write_config(tmp_path, algorithm=alg, instance_path=str(bundled_instance(inst)),
                                   horizons=[300, 400, 500], seeds=[0]))
    res = run_experiment(cfg)
    assert all(p.name.startswith(f"{alg}_{inst}_T") for p in res.trace_paths)


# slope fits


def test_exact_power_law():
    Ts = [1000, 2000, 5000, 10000, 50000]
    fit = fit_regret_slope({T: T ** (2 / 3) for T in Ts})
    assert fit.slope == pytest.approx(2 / 3, abs=1e-6)
    assert fit.r_squared == pytest.approx(1.0, abs=1e-12)
    assert len(fit.points) == 5


def test_linear_and_flat_regret():
    Ts = [100, 1000, 10000]
    assert fit_regret_slope({T: 3.0 * T for T in Ts}).slope == pytest.approx(1.0, abs=1e-12)
    assert fit_regret_slope({T: 7.0 for T in Ts}).slope == pytest.approx(0.0, abs=1e-12)


def test_fit_accepts_summary_rows():
    rows = {T: (T ** 0.5, 1.0, 4) for T in (10, 100, 1000)}
    assert fit_regret_slope(rows).slope == pytest.approx(0.5, abs=1e-12)


def test_fit_rejects_nonpositive_regret():
    with pytest.raises(RejectedInput, match="T=200"):
        fit_regret_slope({100: 1.0, 200: 0.0, 400: 2.0})
    with pytest.raises(RejectedInput):
        fit_regret_slope({100: 1.0, 200: 2.0})


@settings(max_examples=100, deadline=None)
@given(
    st.lists(st.floats(0.1, 1e4), min_size=3, max_size=6),
    st.floats(1e-3, 1e3),
)
def test_slope_scale_invariant(regrets, c):
    Ts = [100 * 2**i for i in range(len(regrets))]
    a = fit_regret_slope(dict(zip(Ts, regrets)))
    b = fit_regret_slope({T: c * r for T, r in zip(Ts, regrets)})
    assert abs(a.slope - b.slope) <= 1e-12 * max(1.0, abs(a.slope)) + 1e-12
    assert b.intercept == pytest.approx(a.intercept + math.log(c), abs=1e-9)
    assert 0.0 <= a.r_squared <= 1.0


# CLI


def test_cli_run_and_fit(tmp_path, capsys):
    cfg = write_config(tmp_path)
    assert main(["run", "--config", str(cfg)]) == 0
    assert main(["fit", "--summary", str(tmp_path / "out" / "summary.csv")]) == 0
    out = capsys.readouterr().out
    assert "slope=" in out and "r_squared=" in out


def test_cli_validation_failure(tmp_path, capsys):
    assert main(["run", "--config", str(write_config(tmp_path, seeds=[1, 1]))]) == 1
    assert "`seeds`" in capsys.readouterr().err
    assert main(["fit", "--summary", str(tmp_path / "missing.csv")]) == 1


def test_cli_runtime_error(tmp_path):
    blocker = tmp_path / "blocker"
    blocker.write_text("a file where the output directory should go")
    assert main(["run", "--config", str(write_config(tmp_path, output_dir=str(blocker)))]) == 2


def test_cli_check(capsys):
    assert main(["check", "--instance", str(bundled_instance("desk_full"))]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines and all(l.startswith("CHECK ") and " pass margin=" in l for l in lines)
    assert main(["check", "--instance", str(bundled_instance("desk_return"))]) == 1


def test_shipped_configs_load():
    root = Path(__file__).resolve().parents[1] / "configs"
    for p in sorted(root.glob("*.json")):
        cfg = load_config(p)
        assert cfg.instance_path.is_file()
