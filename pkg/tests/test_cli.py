"""Command-line behavior: pipelines, reports, exit codes, determinism."""

import numpy as np
import pytest
from conftest import CSV_HEADER, profile_rows

from errant import load
from errant.cli import main


def run_cli(argv):
    try:
        return main(argv)
    except SystemExit as exc:  # argparse usage failures
        return exc.code


def write_csv(path, rows):
    path.write_text("\n".join([CSV_HEADER] + rows) + "\n")


@pytest.fixture
def two_profile_csv(tmp_path):
    rows = profile_rows(150, seed=1, operator="telia") + profile_rows(
        120, seed=2, operator="ice"
    )
    path = tmp_path / "tests.csv"
    write_csv(path, rows)
    return path


def test_build_models_pipeline(tmp_path, two_profile_csv, capsys):
    out = tmp_path / "models.json"
    code = run_cli(["build-models", "--input", str(two_profile_csv), "--output", str(out)])
    assert code == 0
    bundle = load(out)
    keys = sorted(k.as_string() for k in bundle.models)
    assert keys == [
        "specific/norway/ice/4G/good",
        "specific/norway/telia/4G/good",
        "universal/any/any/4G/good",
    ]
    assert bundle.models[sorted(bundle.models, key=lambda k: k.as_string())[2]].n == 270
    stdout = capsys.readouterr().out
    assert "specific/norway/telia/4G/good: n=150" in stdout
    assert "saved 3 models" in stdout


def test_build_models_no_survivors(tmp_path, capsys):
    path = tmp_path / "tiny.csv"
    write_csv(path, profile_rows(30, seed=3))
    code = run_cli(["build-models", "--input", str(path), "--output", str(tmp_path / "m.json")])
    assert code == 2
    assert "no profiles survive filter" in capsys.readouterr().err


def test_build_models_min_samples_one(tmp_path):
    path = tmp_path / "tiny.csv"
    write_csv(path, profile_rows(10, seed=4))
    out = tmp_path / "m.json"
    code = run_cli(
        ["build-models", "--input", str(path), "--output", str(out), "--min-samples", "1"]
    )
    assert code == 0
    assert len(load(out).models) == 2  # the specific profile and its universal


def test_build_models_writes_rejects(tmp_path, capsys):
    path = tmp_path / "mixed.csv"
    rows = profile_rows(120, seed=5)
    rows.append("9,norway,telia,4G,-70,1000,500,-1")  # nonpositive latency
    write_csv(path, rows)
    code = run_cli(
        [
            "build-models",
            "--input",
            str(path),
            "--output",
            str(tmp_path / "m.json"),
            "--write-rejects",
        ]
    )
    assert code == 0
    rejects = (tmp_path / "mixed.csv.rejects.csv").read_text().splitlines()
    assert rejects[0].endswith(",reason")
    assert rejects[1].endswith(",nonpositive latency")
    assert "rejected 1 of 121 rows" in capsys.readouterr().err


def test_build_models_schema_mapping(tmp_path):
    path = tmp_path / "renamed.csv"
    path.write_text(
        "\n".join(
            ["ts,country,operator,rat,rssi,download_kbps,upload_kbps,latency_ms"]
            + profile_rows(5, seed=6)
        )
        + "\n"
    )
    code = run_cli(
        [
            "build-models",
            "--input",
            str(path),
            "--output",
            str(tmp_path / "m.json"),
            "--min-samples",
            "1",
            "--column",
            "timestamp=ts",
        ]
    )
    assert code == 0


def test_build_models_unreadable_input(tmp_path, capsys):
    code = run_cli(
        ["build-models", "--input", str(tmp_path / "ghost.csv"), "--output", str(tmp_path / "m.json")]
    )
    assert code == 2
    assert "ghost.csv" in capsys.readouterr().err


def test_list_profiles(small_bundle_path, capsys):
    assert run_cli(["list-profiles", "--models", str(small_bundle_path)]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "profile,n,median_download_kbps,median_upload_kbps,median_latency_ms"
    assert lines[1].startswith("specific/norway/telia/4G/good,400,")


def test_list_profiles_empty_bundle(tmp_path, capsys):
    from errant import ModelBundle, save

    path = tmp_path / "empty.json"
    save(ModelBundle(), path)
    assert run_cli(["list-profiles", "--models", str(path)]) == 0
    assert capsys.readouterr().out.splitlines() == [
        "profile,n,median_download_kbps,median_upload_kbps,median_latency_ms"
    ]


def test_run_dry_run_fixed(small_bundle_path, capsys):
    code = run_cli(
        [
            "run",
            "--models",
            str(small_bundle_path),
            "--profile",
            "specific/norway/telia/4G/good",
            "--duration",
            "10",
            "--seed",
            "3",
        ]
    )
    assert code == 0
    stdout = capsys.readouterr().out
    assert stdout.count(",apply,") == 1
    assert stdout.count(",clear,") == 1
    assert "# seed=3" in stdout
    assert "# $ ip link set dev ifb0 up" in stdout


def test_run_periodic_twenty_applies(small_bundle_path, capsys):
    code = run_cli(
        [
            "run",
            "--models",
            str(small_bundle_path),
            "--profile",
            "specific/norway/telia/4G/good",
            "--duration",
            "200",
            "--period",
            "10",
            "--seed",
            "4",
        ]
    )
    assert code == 0
    assert capsys.readouterr().out.count(",apply,") == 20


def test_run_simple_mode_renders_gaussian(small_bundle_path, capsys):
    code = run_cli(
        [
            "run",
            "--models",
            str(small_bundle_path),
            "--profile",
            "specific/norway/telia/4G/good",
            "--duration",
            "10",
            "--simple",
            "--seed",
            "5",
        ]
    )
    assert code == 0
    stdout = capsys.readouterr().out
    assert "distribution normal" in stdout
    assert "# mode=simple" in stdout


def test_run_preset(capsys):
    code = run_cli(["run", "--preset", "chrome:3G", "--duration", "5", "--seed", "1"])
    assert code == 0
    stdout = capsys.readouterr().out
    assert "rate 250kbit" in stdout
    assert "rate 750kbit" in stdout
    assert "# preset=chrome:3G" in stdout


def test_run_unknown_preset(capsys):
    code = run_cli(["run", "--preset", "chrome:5G", "--duration", "5"])
    assert code == 2
    assert "available" in capsys.readouterr().err


def test_run_flag_conflicts(small_bundle_path, capsys):
    assert (
        run_cli(
            [
                "run",
                "--preset",
                "chrome:3G",
                "--models",
                str(small_bundle_path),
                "--duration",
                "5",
            ]
        )
        == 1
    )
    assert run_cli(["run", "--duration", "5"]) == 1
    assert (
        run_cli(
            [
                "run",
                "--models",
                str(small_bundle_path),
                "--profile",
                "specific/norway/telia/4G/good",
                "--duration",
                "5",
                "--simple",
                "--period",
                "2",
            ]
        )
        == 1
    )


def test_run_missing_profile(small_bundle_path, capsys):
    code = run_cli(
        [
            "run",
            "--models",
            str(small_bundle_path),
            "--profile",
            "universal/any/any/3G/bad",
            "--duration",
            "5",
        ]
    )
    assert code == 2
    assert "available" in capsys.readouterr().err


def test_run_real_iface_needs_root(small_bundle_path, capsys, monkeypatch):
    monkeypatch.setattr("os.geteuid", lambda: 1000)
    code = run_cli(
        [
            "run",
            "--models",
            str(small_bundle_path),
            "--profile",
            "specific/norway/telia/4G/good",
            "--duration",
            "5",
            "--iface",
            "eth0",
        ]
    )
    assert code == 3
    assert "root" in capsys.readouterr().err


def test_run_entropy_seed_printed(small_bundle_path, capsys):
    code = run_cli(
        [
            "run",
            "--models",
            str(small_bundle_path),
            "--profile",
            "specific/norway/telia/4G/good",
            "--duration",
            "5",
        ]
    )
    assert code == 0
    assert "# seed=" in capsys.readouterr().out


def test_trace_run(small_bundle_path, tmp_path, capsys):
    scenario = tmp_path / "route.scenario"
    scenario.write_text(
        "# commute\n5,specific/norway/telia/4G/good,fixed\n"
        "10,specific/norway/telia/4G/good,periodic:5\n"
    )
    code = run_cli(
        [
            "trace-run",
            "--models",
            str(small_bundle_path),
            "--scenario",
            str(scenario),
            "--seed",
            "6",
        ]
    )
    assert code == 0
    stdout = capsys.readouterr().out
    assert stdout.count(",apply,") == 3
    assert stdout.count(",clear,") == 2


def test_trace_run_malformed_line(small_bundle_path, tmp_path, capsys):
    scenario = tmp_path / "bad.scenario"
    scenario.write_text("5,specific/norway/telia/4G/good,fixed\noops\n")
    code = run_cli(
        ["trace-run", "--models", str(small_bundle_path), "--scenario", str(scenario)]
    )
    assert code == 2
    assert "line 2" in capsys.readouterr().err


def test_validate_row_count_and_header(small_bundle_path, capsys):
    code = run_cli(
        [
            "validate",
            "--models",
            str(small_bundle_path),
            "--profile",
            "specific/norway/telia/4G/good",
            "--downloads",
            "10",
            "--seed",
            "7",
        ]
    )
    assert code == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "# seed=7 version=0.1.0"
    assert lines[1] == "download,download_kbps,upload_kbps,latency_ms,duration_s,avg_speed_kbps"
    data_lines = [line for line in lines if not line.startswith("#")]
    assert len(data_lines) == 11  # header + 10 downloads
    assert any(line.startswith("# metric,observed,emulated") for line in lines)


def test_validate_deterministic(small_bundle_path, tmp_path):
    outputs = []
    for name in ("a.csv", "b.csv"):
        out = tmp_path / name
        code = run_cli(
            [
                "validate",
                "--models",
                str(small_bundle_path),
                "--profile",
                "specific/norway/telia/4G/good",
                "--downloads",
                "10",
                "--seed",
                "7",
                "--output",
                str(out),
            ]
        )
        assert code == 0
        outputs.append(out.read_bytes())
    assert outputs[0] == outputs[1]


def test_validate_simple_constant_bandwidth(small_bundle_path, capsys):
    code = run_cli(
        [
            "validate",
            "--models",
            str(small_bundle_path),
            "--profile",
            "specific/norway/telia/4G/good",
            "--downloads",
            "8",
            "--simple",
            "--seed",
            "9",
        ]
    )
    assert code == 0
    lines = [
        line
        for line in capsys.readouterr().out.splitlines()
        if line and not line.startswith("#") and line[0].isdigit()
    ]
    downloads = {line.split(",")[1] for line in lines}
    speeds = {line.split(",")[5] for line in lines}
    assert len(downloads) == 1  # bandwidth identical across rows
    assert len(speeds) == 1


def test_subsample_deterministic(tmp_path, small_bundle_path):
    outputs = []
    for name in ("a.csv", "b.csv"):
        out = tmp_path / name
        code = run_cli(
            [
                "subsample",
                "--models",
                str(small_bundle_path),
                "--profile",
                "specific/norway/telia/4G/good",
                "--sizes",
                "10,50",
                "--reps",
                "5",
                "--cap",
                "300",
                "--seed",
                "11",
                "--output",
                str(out),
            ]
        )
        assert code == 0
        outputs.append(out.read_bytes())
    assert outputs[0] == outputs[1]
    text = outputs[0].decode()
    assert text.startswith("# seed=11 version=0.1.0\ndimension,n,repetition,D\n")


def test_subsample_from_raw_csv(tmp_path, capsys):
    path = tmp_path / "tests.csv"
    write_csv(path, profile_rows(250, seed=12))
    code = run_cli(
        [
            "subsample",
            "--input",
            str(path),
            "--profile",
            "specific/norway/telia/4G/good",
            "--sizes",
            "10",
            "--reps",
            "3",
            "--cap",
            "200",
            "--seed",
            "13",
        ]
    )
    assert code == 0
    assert "dimension,n,repetition,D" in capsys.readouterr().out


def test_subsample_requires_one_source(small_bundle_path, tmp_path, capsys):
    assert run_cli(["subsample", "--profile", "universal/any/any/4G/good"]) == 1
    both = run_cli(
        [
            "subsample",
            "--models",
            str(small_bundle_path),
            "--input",
            str(tmp_path / "x.csv"),
            "--profile",
            "universal/any/any/4G/good",
        ]
    )
    assert both == 1


def test_usage_errors_exit_one():
    assert run_cli([]) == 1
    assert run_cli(["run"]) == 1  # missing --duration
    assert run_cli(["no-such-command"]) == 1


def test_version_exits_zero(capsys):
    assert run_cli(["--version"]) == 0
    assert "errant" in capsys.readouterr().out
