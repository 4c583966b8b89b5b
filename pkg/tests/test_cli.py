import csv
import json

import numpy as np
import pytest
import scipy.sparse as sp

from conftest import HALDANE_TOPO, SHELL, uniform_flake
from nhloc.cli import EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK, main
from nhloc.errors import ConfigError
from nhloc.io import OUTPUT_ENV, load_config, parse_config
from nhloc.maps import evaluate_probe, flow_row, gap_map, index_map, ldos, reference_distance
from nhloc.model import HeterostructureSpec, heterostructure

SMALL = """
[model]
core_radius = 3.0
shell_radius = 4.5
outer_radius = 5.5

[model.core]
M = 0.0
t = 1.0
t_c = 0.5
phi = 1.5707963267948966

[model.shell]
M = 0.8660254037844386

[model.lossy_shell]
M = 0.8660254037844386
mu = 0.2

[localizer]
kappa = 0.2

[grid]
x_min = -8.0
x_max = 8.0
y_min = 0.0
y_max = 0.0
nx = 3
ny = 1

[ldos]
energy = 0.0

[flow]
x_start = 0.0
x_end = 8.0
steps = 33
"""

CHAIN = """
[model]
kind = "chain"
n_cells = 20
intra = [0.4, 0.3]
inter = [1.0, -0.2]

[localizer]
kappa = 0.5
"""


@pytest.fixture
def small_cfg(tmp_path):
    path = tmp_path / "small.toml"
    path.write_text(SMALL)
    return path


def read_rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


class TestConfig:
    def test_defaults_and_echo(self, small_cfg):
        cfg = load_config(small_cfg)
        assert cfg.rho is None and cfg.kappa == 0.2
        assert cfg.model.shell.t == 1.0
        echo = cfg.echo()
        assert echo["rho"] == "full" and echo["method"] == "eig"
        json.dumps(echo)

    def test_unknown_keys(self):
        with pytest.raises(ConfigError):
            parse_config({"model": {"core_radius": 1, "shell_radius": 2, "outer_radius": 3, "core": {}, "shell": {}, "lossy_shell": {}, "colour": 1}})
        with pytest.raises(ConfigError):
            parse_config({"model": {"kind": "chain"}, "grid": {"nz": 3}})
        with pytest.raises(ConfigError):
            parse_config({"model": {"kind": "chain"}, "plots": True})

    def test_bad_values(self):
        with pytest.raises(ConfigError):
            parse_config({"model": {"kind": "chain"}, "localizer": {"kappa": -1}})
        with pytest.raises(ConfigError):
            parse_config({"model": {"kind": "chain"}, "grid": {"x_min": 2, "x_max": 1}})
        with pytest.raises(ConfigError):
            parse_config({"model": {"kind": "chain"}, "localizer": {"method": "magic"}})
        with pytest.raises(ConfigError):
            parse_config({"model": {"kind": "chain", "intra": "x"}})

    def test_repo_configs_parse(self):
        from pathlib import Path

        root = Path(__file__).resolve().parents[1] / "configs"
        for path in root.glob("*.toml"):
            load_config(path)


class TestMaps:
    def test_center_and_outside(self, fig1):
        geom, H = fig1
        assert evaluate_probe(H, geom, 0.1, (0.0, 0.0)).half_signature == 1
        assert evaluate_probe(H, geom, 0.1, (25.0, 0.0)).half_signature == 0

    def test_reference_is_trivial(self, fig1):
        geom, H = fig1
        T = reference_distance(H, geom, 0.1)
        assert T >= 2 * geom.radius()
        assert evaluate_probe(H, geom, 0.1, (T, 0.0)).half_signature == 0

    def test_flow_row_matches_eigencount(self):
        geom, H = heterostructure(HeterostructureSpec(3.0, 4.5, 5.5, HALDANE_TOPO, SHELL, SHELL))
        xs = np.linspace(-7, 7, 8)
        _, res = flow_row(H, geom, 0.2, 0.4, xs)
        for r in res:
            assert r.half_signature == evaluate_probe(H, geom, 0.2, (r.x, r.y)).half_signature

    def test_gap_scaling(self):
        geom, H = uniform_flake(HALDANE_TOPO, 3.0)
        xs = ys = np.linspace(-2, 2, 3)
        g1 = gap_map(H, geom, 0.1, xs, ys, threads=1).line_gap
        g2 = gap_map(2 * H, geom, 0.2, xs, ys, threads=1).line_gap
        np.testing.assert_allclose(g2, 2 * g1, rtol=1e-10)

    def test_threads_do_not_change_results(self):
        geom, H = uniform_flake(HALDANE_TOPO, 3.0)
        xs = ys = np.linspace(-3, 3, 3)
        a = index_map(H, geom, 0.2, xs, ys, threads=1)
        b = index_map(H, geom, 0.2, xs, ys, threads=3)
        np.testing.assert_array_equal(a.half_signature, b.half_signature)
        np.testing.assert_array_equal(a.line_gap, b.line_gap)

    def test_ldos_scalar(self):
        np.testing.assert_allclose(ldos(sp.csr_matrix([[0.0]]), 0.0, 1.0), [1 / np.pi])

    def test_ldos_edge_states(self):
        _, Ht = uniform_flake(HALDANE_TOPO, 6.0)
        _, Hn = uniform_flake(SHELL.__class__(M=1.5, t=1.0, t_c=0.1, phi=np.pi / 2), 6.0)
        peak = ldos(Ht, 0.0, 0.05).max()
        assert ldos(Hn, 0.0, 0.05).max() < 0.1 * peak


class TestCommands:
    def test_index_map(self, small_cfg, tmp_path):
        out = tmp_path / "out"
        assert main(["index-map", "--config", str(small_cfg), "--out", str(out), "--threads", "1"]) == EXIT_OK
        rows = read_rows(out / "index_map.csv")
        assert list(rows[0]) == ["x", "y", "half_sig", "gap", "ms"]
        assert [r["half_sig"] for r in rows] == ["0", "1", "0"]
        summary = json.loads((out / "index_map.json").read_text())
        assert summary["points"] == 3 and summary["gap_closed"] == 0
        assert (out / "config_echo.json").exists()

    def test_methods_agree(self, small_cfg, tmp_path):
        cols = {}
        for method in ["eig", "rh", "flow"]:
            out = tmp_path / method
            assert main(["index-map", "--config", str(small_cfg), "--out", str(out), "--method", method]) == EXIT_OK
            cols[method] = [r["half_sig"] for r in read_rows(out / "index_map.csv")]
        assert cols["eig"] == cols["rh"] == cols["flow"]

    def test_deterministic(self, small_cfg, tmp_path):
        for name in ["a", "b"]:
            main(["spectrum", "--config", str(small_cfg), "--out", str(tmp_path / name)])
            main(["index-map", "--config", str(small_cfg), "--out", str(tmp_path / name)])
        a, b = tmp_path / "a", tmp_path / "b"
        assert (a / "spectrum_hamiltonian.csv").read_bytes() == (b / "spectrum_hamiltonian.csv").read_bytes()
        assert (a / "hamiltonian.txt").read_bytes() == (b / "hamiltonian.txt").read_bytes()
        strip = lambda p: [(r["x"], r["y"], r["half_sig"], r["gap"]) for r in read_rows(p / "index_map.csv")]
        assert strip(a) == strip(b)

    def test_env_output_dir(self, small_cfg, tmp_path, monkeypatch):
        monkeypatch.setenv(OUTPUT_ENV, str(tmp_path / "env"))
        assert main(["gap-map", "--config", str(small_cfg)]) == EXIT_OK
        assert (tmp_path / "env" / "gap_map.csv").exists()

    def test_spectrum_targets(self, small_cfg, tmp_path):
        out = tmp_path / "s"
        assert main(["spectrum", "--config", str(small_cfg), "--out", str(out), "--target", "localizer", "--probe", "20", "0"]) == EXIT_OK
        re = np.array([float(r["re"]) for r in read_rows(out / "spectrum_localizer.csv")])
        assert np.abs(re).min() > 0

    def test_flow(self, small_cfg, tmp_path):
        out = tmp_path / "f"
        assert main(["flow", "--config", str(small_cfg), "--out", str(out)]) == EXIT_OK
        summary = json.loads((out / "flow.json").read_text())
        assert summary["net_flow"] == -1 and summary["consistent"]
        assert len(summary["highlighted_tracks"]) >= 1
        assert (out / "flow_tracks_crossings.csv").exists() and (out / "flow_re.csv").exists()

    def test_ldos_and_certify(self, small_cfg, tmp_path):
        out = tmp_path / "l"
        assert main(["ldos", "--config", str(small_cfg), "--out", str(out)]) == EXIT_OK
        assert len(read_rows(out / "ldos.csv")) > 0
        assert main(["certify", "--config", str(small_cfg), "--out", str(out)]) == EXIT_OK
        cert = json.loads((out / "certificate.json").read_text())
        assert cert["ok"] is False and cert["kappa_max"] < 0.2

    def test_chiral(self, tmp_path):
        cfg = tmp_path / "chain.toml"
        cfg.write_text(CHAIN)
        assert main(["chiral", "--config", str(cfg), "--out", str(tmp_path / "c")]) == EXIT_OK
        payload = json.loads((tmp_path / "c" / "chiral.json").read_text())
        assert (payload["ind_A"], payload["ind_B"], payload["ind_V"]) == (-1, 1, -1)

    def test_config_errors_exit_2(self, tmp_path, small_cfg):
        bad = tmp_path / "bad.toml"
        bad.write_text("[model]\nkind = 'chain'\nwidth = 3\n")
        assert main(["chiral", "--config", str(bad), "--out", str(tmp_path)]) == EXIT_CONFIG
        assert main(["index-map", "--config", str(tmp_path / "missing.toml")]) == EXIT_CONFIG
        assert main(["index-map", "--config", str(small_cfg), "--kappa", "-1", "--out", str(tmp_path)]) == EXIT_CONFIG
        chain = tmp_path / "chain.toml"
        chain.write_text(CHAIN)
        assert main(["index-map", "--config", str(chain), "--out", str(tmp_path)]) == EXIT_CONFIG

    def test_numerical_failure_exit_3(self, tmp_path):
        # a chain at the transition has no line gap
        cfg = tmp_path / "critical.toml"
        cfg.write_text(CHAIN.replace("intra = [0.4, 0.3]", "intra = [1.0, 0.0]").replace("inter = [1.0, -0.2]", "inter = [1.0, 0.0]"))
        assert main(["chiral", "--config", str(cfg), "--out", str(tmp_path / "x")]) == EXIT_NUMERICAL
