import math
import subprocess
import sys

import numpy as np
import pytest

from donorspin.io import (ManifestError, parse_keyvalues, parse_quantity,
                          parse_angle, load_params, format_params,
                          write_columns, read_columns, _FREQ_UNITS,
                          _EFIELD_UNITS)
from donorspin.model import TWO_PI, SystemParams
from donorspin.cli import Manifest, load_manifest, EXPERIMENTS, main

PARAM_TEXT = """
# reference device
hyperfine_A = 117 MHz
gamma_e = 27.97 GHz/T
gamma_n = 17.23 MHz/T
delta_gamma = -0.002
donor_depth_d = 15 nm
B0 = 0.2 T
Vt = auto
dE_idle = 1e4 V/m
"""


class TestParsing:
    def test_quantities(self):
        assert parse_quantity("117 MHz", _FREQ_UNITS, "f") == TWO_PI * 117e6
        assert parse_quantity("2.5", None, "x") == 2.5
        assert parse_quantity("3 kV/m", _EFIELD_UNITS, "e") == 3000.0

    def test_unknown_unit_names_field(self):
        with pytest.raises(ManifestError, match="'f'"):
            parse_quantity("1 parsec", _FREQ_UNITS, "f")

    def test_angles(self):
        assert parse_angle("pi", "a") == pytest.approx(math.pi)
        assert parse_angle("-pi/4", "a") == pytest.approx(-math.pi / 4)
        assert parse_angle("2pi", "a") == pytest.approx(2 * math.pi)
        assert parse_angle("0.75 pi", "a") == pytest.approx(0.75 * math.pi)
        assert parse_angle("90 deg", "a") == pytest.approx(math.pi / 2)
        assert parse_angle("1.25", "a") == 1.25

    def test_params_file_roundtrip(self):
        params = load_params(PARAM_TEXT)
        assert params.hyperfine_A == pytest.approx(TWO_PI * 117e6)
        assert params.Vt == pytest.approx(params.B0 *
                                          (params.gamma_e + params.gamma_n))
        # header view parses back to the same numbers
        view = format_params(params)
        text = "\n".join(f"{k} = {v}" for k, v in view.items())
        clone = load_params(text)
        assert clone.gamma_e == pytest.approx(params.gamma_e, rel=1e-9)
        assert clone.dE_idle == params.dE_idle

    def test_rejects_unknown_parameter(self):
        with pytest.raises(ManifestError, match="unknown parameter"):
            load_params("mystery_knob = 2")

    def test_keyvalue_bad_line(self):
        with pytest.raises(ManifestError, match="line 1"):
            parse_keyvalues("not a key value line")


class TestManifest:
    def test_unknown_kind(self):
        with pytest.raises(ManifestError, match="kind"):
            Manifest({"kind": "teleport", "output": "x"})

    def test_missing_required_field_named(self):
        with pytest.raises(ManifestError, match="'points'"):
            Manifest({"kind": "splitting-curve", "output": "x"})

    def test_unknown_field_named(self):
        with pytest.raises(ManifestError, match="'froop'"):
            Manifest({"kind": "splitting-curve", "output": "x",
                      "points": "5", "froop": "1"})

    def test_missing_output(self):
        with pytest.raises(ManifestError, match="output"):
            Manifest({"kind": "splitting-curve", "points": "5"})


class TestColumns:
    def test_roundtrip(self, tmp_path):
        path = tmp_path / "out.txt"
        rows = [(1.0, 2.5e-7), (3.0, -1.2e4)]
        write_columns(path, {"seed": 7, "kind": "demo"}, ("a", "b"), rows)
        prov, data = read_columns(path)
        assert prov["seed"] == "7"
        assert np.allclose(data, np.array(rows))


class TestCliRuns:
    def _run(self, args):
        return main(args)

    def test_list_experiments(self, capsys):
        assert self._run(["list-experiments"]) == 0
        out = capsys.readouterr().out
        for kind in EXPERIMENTS:
            assert kind in out

    def test_validate_and_run_splitting_curve(self, tmp_path, capsys):
        man = tmp_path / "m.txt"
        out = tmp_path / "curve.txt"
        man.write_text(f"kind = splitting-curve\npoints = 11\nseed = 3\n"
                       f"output = {out}\n")
        assert self._run(["validate", str(man)]) == 0
        assert self._run(["run", str(man)]) == 0
        prov, data = read_columns(out)
        assert prov["seed"] == "3"
        assert data.shape == (11, 3)
        # deterministic re-run produces identical bytes
        first = out.read_bytes()
        assert self._run(["run", str(man)]) == 0
        assert out.read_bytes() == first

    def test_header_reconstructs_manifest(self, tmp_path):
        man = tmp_path / "m.txt"
        out1 = tmp_path / "a.txt"
        out2 = tmp_path / "b.txt"
        man.write_text(f"kind = splitting-curve\npoints = 7\nseed = 9\n"
                       f"output = {out1}\n")
        assert main(["run", str(man)]) == 0
        prov, data1 = read_columns(out1)
        # rebuild a manifest from the recorded provenance
        keys = ("kind", "points", "seed")
        man2 = tmp_path / "m2.txt"
        man2.write_text("".join(f"{k} = {prov[k]}\n" for k in keys)
                        + f"output = {out2}\n")
        assert main(["run", str(man2)]) == 0
        _, data2 = read_columns(out2)
        assert np.array_equal(data1, data2)

    def test_invalid_manifest_exit_code(self, tmp_path, capsys):
        man = tmp_path / "bad.txt"
        man.write_text("kind = nonsense\noutput = x\n")
        assert self._run(["validate", str(man)]) == 2
        assert "manifest error" in capsys.readouterr().err

    def test_rz_angle_curve_runs(self, tmp_path):
        man = tmp_path / "m.txt"
        out = tmp_path / "rz.txt"
        man.write_text(f"kind = rz-angle-curve\npoints = 4\nt_min = 4 ns\n"
                       f"t_max = 14 ns\noutput = {out}\n")
        assert main(["run", str(man)]) == 0
        _, data = read_columns(out)
        assert data.shape == (4, 3)

    def test_hprime_dump_structure(self, tmp_path):
        out = tmp_path / "hp.txt"
        assert main(["dump-hprime", "--output", str(out)]) == 0
        text = out.read_text()
        assert "g.dn" not in text  # labels are joined words like gdnDn
        rows = [ln for ln in text.splitlines()
                if ln and not ln.startswith("#")]
        assert len(rows) == 8

    def test_cli_entrypoint_subprocess(self, tmp_path):
        out = tmp_path / "hp.txt"
        proc = subprocess.run(
            [sys.executable, "-m", "donorspin.cli", "dump-hprime",
             "--output", str(out)],
            capture_output=True, text=True)
        assert proc.returncode == 0
        assert out.exists()

    def test_rx_noise_tiny_grid(self, tmp_path):
        man = tmp_path / "m.txt"
        out = tmp_path / "rx.txt"
        man.write_text(f"kind = rx-noise\nthetas = pi/2\nsigmas = 100 V/m\n"
                       f"samples = 4\nvariants = sweep\nseed = 5\n"
                       f"output = {out}\n")
        assert main(["run", str(man)]) == 0
        _, data = read_columns(out)
        assert data.shape == (1, 4)
        assert 0 <= data[0, 3] < 0.5

    def test_cphase_curve_tiny_grid(self, tmp_path):
        man = tmp_path / "m.txt"
        out = tmp_path / "cp.txt"
        man.write_text(f"kind = cphase-curve\npoints = 3\nt_min = 200 ns\n"
                       f"t_max = 400 ns\noutput = {out}\n")
        assert main(["run", str(man)]) == 0
        _, data = read_columns(out)
        assert data.shape == (3, 3)
        assert (np.diff(data[:, 1]) > 0).all()
