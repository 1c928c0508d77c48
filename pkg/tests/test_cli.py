"""Exit codes and output shapes for the sapsense command."""

import json
import os
import signal
import socket
import subprocess
import sys
import time

import httpx
import pytest

from sapsense.chip import CHEMICAL_ORDER, ChemicalKind
from sapsense.cli import main
from sapsense.synth import (IlluminationRamp, TruthCase, WarpParams,
                            render_chip, save_png)


@pytest.fixture(scope="module")
def chip_image(tmp_path_factory, layout, scales):
    concentrations = {k: (7.0 if k is ChemicalKind.PH else 0.0)
                      for k in CHEMICAL_ORDER}
    case = TruthCase(concentrations=concentrations,
                     warp=WarpParams(3.0, 1.0, 0.0, (4.0, -2.0)),
                     noise_sigma=0.0, ramp=IlluminationRamp(0.0, 0.0),
                     seed=5)
    path = tmp_path_factory.mktemp("cli") / "chip.png"
    save_png(render_chip(layout, scales, case), path)
    return path


def test_analyze_json_happy_path(chip_image, capsys):
    assert main(["analyze", str(chip_image)]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert len(doc["reading"]["measurements"]) == 6
    assert doc["reading"]["status"] == "reacted"
    assert doc["report"]["overall"] in {"green", "yellow", "red"}
    assert len(doc["report"]["interpretations"]) == 6


def test_analyze_output_is_deterministic(chip_image, capsys):
    main(["analyze", str(chip_image)])
    first = capsys.readouterr().out
    main(["analyze", str(chip_image)])
    assert capsys.readouterr().out == first


def test_analyze_table_format(chip_image, capsys):
    assert main(["analyze", str(chip_image), "--format", "table"]) == 0
    out = capsys.readouterr().out
    assert "overall:" in out
    for chemical in CHEMICAL_ORDER:
        assert chemical.value in out


def test_analyze_gray_image_exits_1(tmp_path, capsys):
    import numpy as np
    blank = tmp_path / "blank.png"
    save_png(np.full((400, 400, 3), 190, dtype=np.uint8), blank)
    assert main(["analyze", str(blank)]) == 1
    err = capsys.readouterr().err
    assert "fiducials" in err


def test_analyze_missing_file_exits_2(tmp_path, capsys):
    assert main(["analyze", str(tmp_path / "nope.png")]) == 2


def test_analyze_bad_layout_exits_2(chip_image, tmp_path, capsys):
    bad = tmp_path / "layout.json"
    bad.write_text("{\"chip\": \"not a layout\"}")
    assert main(["analyze", str(chip_image), "--layout", str(bad)]) == 2


def test_generate_writes_corpus_and_reruns_identically(tmp_path, capsys):
    out_a = tmp_path / "a"
    out_b = tmp_path / "b"
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({
        "count": 3, "seed": 9,
        "rotation_deg": [0.0, 0.0], "scale": [1.0, 1.0],
        "shear": [0.0, 0.0], "translation_px": [0.0, 0.0],
        "noise_sigma": [0.0, 0.0], "ramp_amplitude": [0.0, 0.0],
    }))
    assert main(["generate", "--spec", str(spec), "--out", str(out_a)]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["count"] == 3
    assert len(list(out_a.glob("*.png"))) == 3
    assert main(["generate", "--spec", str(spec), "--out", str(out_b)]) == 0
    assert ((out_a / "manifest.json").read_bytes()
            == (out_b / "manifest.json").read_bytes())


def test_generate_count_flag_overrides_spec(tmp_path, capsys):
    out = tmp_path / "c"
    assert main(["generate", "--out", str(out), "--count", "2",
                 "--seed", "4"]) == 0
    assert json.loads(capsys.readouterr().out)["count"] == 2


def test_generate_count_zero_exits_2(tmp_path, capsys):
    assert main(["generate", "--out", str(tmp_path / "d"),
                 "--count", "0"]) == 2


def test_generate_bad_spec_exits_2(tmp_path, capsys):
    spec = tmp_path / "spec.json"
    spec.write_text("{not json")
    assert main(["generate", "--spec", str(spec),
                 "--out", str(tmp_path / "e")]) == 2


def test_simulate_missing_manifest_exits_2(tmp_path, capsys):
    assert main(["simulate", str(tmp_path / "missing.json")]) == 2


def test_simulate_unreachable_server_exits_3(tmp_path, capsys):
    out = tmp_path / "corpus"
    assert main(["generate", "--out", str(out), "--count", "1",
                 "--seed", "2"]) == 0
    capsys.readouterr()
    code = main(["simulate", str(out / "manifest.json"),
                 "--server", "http://127.0.0.1:9",
                 "--compression", "1000000"])
    assert code == 3


def test_serve_occupied_port_exits_3(tmp_path, capsys):
    blocker = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    blocker.bind(("127.0.0.1", 0))
    port = blocker.getsockname()[1]
    try:
        config = tmp_path / "relay.json"
        config.write_text(json.dumps({"port": port,
                                      "dataDir": str(tmp_path / "data")}))
        assert main(["serve", str(config)]) == 3
    finally:
        blocker.close()


def test_serve_bad_config_exits_2(tmp_path, capsys):
    config = tmp_path / "relay.json"
    config.write_text("[1, 2, 3]")
    assert main(["serve", str(config)]) == 2


def _free_port() -> int:
    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    probe.bind(("127.0.0.1", 0))
    port = probe.getsockname()[1]
    probe.close()
    return port


def test_serve_subprocess_healthz_and_graceful_stop(tmp_path):
    port = _free_port()
    config = tmp_path / "relay.json"
    config.write_text(json.dumps({"port": port,
                                  "dataDir": str(tmp_path / "data")}))
    proc = subprocess.Popen(
        [sys.executable, "-m", "sapsense.cli", "serve", str(config)],
        stdout=subprocess.PIPE, stderr=subprocess.PIPE)
    try:
        base = "http://127.0.0.1:%d" % port
        deadline = time.monotonic() + 20.0
        alive = False
        while time.monotonic() < deadline:
            try:
                if httpx.get(base + "/healthz", timeout=1.0).status_code == 200:
                    alive = True
                    break
            except httpx.HTTPError:
                time.sleep(0.1)
        assert alive, proc.stderr.read().decode() if proc.poll() else "timeout"
        created = httpx.post(base + "/api/v1/devices",
                             json={"label": "smoke"}, timeout=5.0)
        assert created.status_code == 201
    finally:
        proc.send_signal(signal.SIGTERM)
        code = proc.wait(timeout=15.0)
    # uvicorn re-raises the signal after draining, so either style is clean
    assert code in (0, -signal.SIGTERM, 128 + signal.SIGTERM)
    # registration survived the shutdown
    from sapsense.relay import RelayStore
    store = RelayStore(tmp_path / "data")
    assert len(store.list_devices()) == 1
