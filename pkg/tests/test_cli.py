import json

import numpy as np
import pytest

from afpnav.acoustics import FieldRecord, write_field_records
from afpnav.cli import main, parse_config_text, to_pgm, UsageError
from afpnav.gridworld import load_map
from oracles import largest_component


def run(*args):
    return main([str(a) for a in args])


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    assert run("gen-maps", "--out", out, "--n-maps", 2, "--seed", 3) == 0
    assert run("gen-episodes", "--out", out, "--episodes-per-map", 4, "--seed", 3, "--spectra", "flat") == 0
    return out


class TestGenMaps:
    def test_same_seed_same_files(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        assert run("gen-maps", "--out", a, "--seed", 7, "--n-maps", 2) == 0
        assert run("gen-maps", "--out", b, "--seed", 7, "--n-maps", 2) == 0
        for f in sorted((a / "maps").iterdir()):
            assert f.read_bytes() == (b / "maps" / f.name).read_bytes()

    def test_one_room(self, tmp_path):
        assert run("gen-maps", "--out", tmp_path, "--rooms", 1, "--n-maps", 1) == 0
        g = load_map(tmp_path / "maps" / "map_000.txt")
        assert (~g.occupied)[1:-1, 1:-1].all()

    def test_four_rooms_connected(self, tmp_path):
        assert run("gen-maps", "--out", tmp_path, "--rooms", 4, "--n-maps", 3) == 0
        for f in (tmp_path / "maps").iterdir():
            free = ~load_map(f).occupied
            assert np.array_equal(largest_component(free), free)

    def test_unsatisfiable(self, tmp_path, capsys):
        assert run("gen-maps", "--out", tmp_path, "--rooms", 50) == 2
        assert "rooms" in capsys.readouterr().err


class TestCalibrate:
    def test_zero_noise_floor(self, workspace, tmp_path):
        out = tmp_path
        code = run(
            "calibrate", "--out", out, "--map-dir", workspace / "maps", "--episodes", workspace / "episodes.jsonl",
            "--sigma", "0,0,0,0,0", "--noise-floor", "0,0,0,0,0",
        )
        assert code == 0
        assert json.loads((out / "prior.json").read_text())["e"] == [1e-3] * 5
        rows = (out / "calibration.csv").read_text().splitlines()
        assert rows[0] == "band,mean_error_m,std_error_m,n_samples"
        assert len(rows) == 1 + 5

    def test_monotone_schedule(self, workspace, tmp_path):
        code = run(
            "calibrate", "--out", tmp_path, "--map-dir", workspace / "maps", "--episodes", workspace / "episodes.jsonl",
            "--sigma", "1.6,0.8,0.4,0.2,0.1", "--noise-floor", "0,0,0,0,0",
        )
        assert code == 0
        means = [float(r.split(",")[1]) for r in (tmp_path / "calibration.csv").read_text().splitlines()[1:]]
        assert means[0] > means[2] > means[4]


class TestEvaluate:
    def test_oracle_trivial_suite(self, workspace, tmp_path):
        code = run(
            "evaluate", "--out", tmp_path, "--map-dir", workspace / "maps", "--episodes", workspace / "episodes.jsonl",
            "--strategies", "oracle", "--mode", "navigation",
        )
        assert code == 0
        agg = (tmp_path / "aggregate.csv").read_text().splitlines()
        assert agg[0] == "strategy,sr,spl,soft_spl,angle_err,dist_err,n"
        assert agg[1].split(",")[:2] == ["oracle", "1.0"]
        assert (tmp_path / "results.csv").read_text().splitlines()[0] == "episode_id,strategy,S,l,p,steps,spl,soft_spl,status"

    def test_unknown_strategy(self, workspace, tmp_path, capsys):
        code = run("evaluate", "--out", tmp_path, "--map-dir", workspace / "maps", "--strategies", "loudest")
        assert code == 1
        err = capsys.readouterr().err
        assert "freq_adaptive" in err and "direction_follower" in err

    def test_rerun_identical(self, workspace, tmp_path):
        args = ["evaluate", "--map-dir", workspace / "maps", "--episodes", workspace / "episodes.jsonl",
                "--strategies", "oracle,all_freq", "--log-trajectories"]
        assert run(*args, "--out", tmp_path / "a") == 0
        assert run(*args, "--out", tmp_path / "b", "--workers", 2) == 0
        for name in ("results.csv", "aggregate.csv"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
        assert sorted(p.name for p in (tmp_path / "a" / "trajectories").iterdir())

    def test_missing_inputs(self, tmp_path):
        assert run("evaluate", "--out", tmp_path, "--strategies", "oracle") == 2

    def test_missing_prior(self, workspace, tmp_path):
        code = run("evaluate", "--out", tmp_path, "--map-dir", workspace / "maps",
                   "--episodes", workspace / "episodes.jsonl", "--strategies", "best_freq")
        assert code == 2


class TestRender:
    def test_single_peak_pgm(self, tmp_path):
        v = np.zeros((9, 9))
        v[6, 2] = 1.0
        data = to_pgm(v)
        header, pix = data[:12], np.frombuffer(data[len(b"P5\n9 9\n255\n"):], np.uint8).reshape(9, 9)
        assert header.startswith(b"P5\n9 9\n255\n")
        row, col = np.unravel_index(np.argmax(pix), pix.shape)
        assert (col, 8 - row) == (6, 2)

    def test_fields_and_idempotence(self, tmp_path):
        v = np.zeros((9, 9))
        v[1, 7] = 3.0
        f = tmp_path / "fields.csv"
        f.write_text(write_field_records([FieldRecord("s", (1.0, 1.0), (2.0, 2.0), 3, v)]))
        assert run("render", "--out", tmp_path / "a", "--fields", f) == 0
        assert run("render", "--out", tmp_path / "b", "--fields", f) == 0
        a = (tmp_path / "a" / "render" / "field_00000_b3.pgm").read_bytes()
        assert a == (tmp_path / "b" / "render" / "field_00000_b3.pgm").read_bytes()

    def test_empty_trajectory_is_map(self, workspace, tmp_path):
        traj = tmp_path / "t.jsonl"
        traj.write_text("")
        m = workspace / "maps" / "map_000.txt"
        assert run("render", "--out", tmp_path, "--map", m, "--trajectory", traj) == 0
        assert run("render", "--out", tmp_path, "--map", m) == 0
        assert (tmp_path / "render" / "t.txt").read_text() == (tmp_path / "render" / "map_000.txt").read_text()

    def test_trajectory_overlay(self, workspace, tmp_path):
        m = workspace / "maps" / "map_000.txt"
        traj = tmp_path / "t.jsonl"
        traj.write_text("\n".join(json.dumps({"pose": [1.0 + 0.25 * k, 1.0, 0.0], "goal": [3.0, 1.0]}) for k in range(4)))
        assert run("render", "--out", tmp_path, "--map", m, "--trajectory", traj) == 0
        text = (tmp_path / "render" / "t.txt").read_text()
        assert text.count("S") == 1 and text.count("E") == 1 and text.count("G") == 1

    def test_malformed_log(self, workspace, tmp_path):
        traj = tmp_path / "t.jsonl"
        traj.write_text('{"pose": "nope"}\n')
        assert run("render", "--out", tmp_path, "--map", workspace / "maps" / "map_000.txt", "--trajectory", traj) == 2


class TestConfig:
    def test_key_value_and_flags(self, workspace, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("# bundle\nn_maps = 1\nseed = 5\nrooms=2\n")
        assert run("gen-maps", "--config", cfg, "--out", tmp_path, "--seed", 9) == 0
        assert run("gen-maps", "--out", tmp_path / "direct", "--n-maps", 1, "--seed", 9, "--rooms", 2) == 0
        assert (tmp_path / "maps" / "map_000.txt").read_text() == (tmp_path / "direct" / "maps" / "map_000.txt").read_text()
        assert not (tmp_path / "maps" / "map_001.txt").exists()

    def test_json(self):
        assert parse_config_text('{"alpha": 2, "strategies": ["oracle"]}') == {"alpha": 2.0, "strategies": ["oracle"]}

    def test_unknown_key(self):
        with pytest.raises(UsageError):
            parse_config_text("colour = 3")

    def test_bad_flag(self, capsys):
        assert run("gen-maps", "--bogus") == 1

    def test_no_partial_files(self, tmp_path):
        run("gen-maps", "--out", tmp_path, "--n-maps", 1)
        assert not [p for p in (tmp_path / "maps").iterdir() if p.name.startswith(".")]

    def test_distance_field(self, workspace, tmp_path):
        m = workspace / "maps" / "map_000.txt"
        assert run("distance-field", "--out", tmp_path, "--map", m, "--source", "1.0,1.0") == 0
        rows = (tmp_path / "distance_map_000.csv").read_text().splitlines()
        assert rows
        assert run("distance-field", "--out", tmp_path, "--map", m, "--source", "0,0") == 2
