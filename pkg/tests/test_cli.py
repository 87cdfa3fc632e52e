"""End-to-end tests of the command-line entry point and its artifacts."""

import csv
import json
import math

import pytest

from mdqo import ProblemInstance, bitstring_to_index, feasible
from mdqo.cli import main
from mdqo.problems import Graph

G5_BLOCK = {
    "n": 5,
    "edges": [[1, 2], [2, 3], [3, 4], [1, 3], [2, 4], [2, 5]],
}


def write_config(tmp_path, payload, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return path


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_sweep_counts_maxcut(tmp_path):
    config = write_config(
        tmp_path,
        {
            "problem": {"kind": "maxcut", "graph": G5_BLOCK},
            "sweep": {
                "k0": [0, 50],
                "bounds": ["tight", "loose"],
                "surplus_grid": {"values": [30, 60, 120, 200]},
            },
        },
    )
    out = tmp_path / "out"
    assert main(["sweep-counts", "--config", str(config), "--out", str(out)]) == 0

    rows = read_csv(out / "sweep_counts.csv")
    assert [row["L"] for row in rows] == ["30", "60", "120", "200"]
    tight = [float(row["H_maxcut_tight_k0_0"]) for row in rows]
    loose = [float(row["H_maxcut_loose_k0_0"]) for row in rows]
    assert tight == sorted(tight)
    assert abs(5.0 - tight[-1]) < 0.05
    for t, l in zip(tight, loose):
        assert l >= t
    for row in rows:
        for key, value in row.items():
            if key.startswith("p1_"):
                assert 0.5 < float(value) <= 1.0
    assert "H_maxcut_loose_k0_50" in rows[0]

    sidecar = json.loads((out / "sweep_counts_config.json").read_text())
    epsilons = {e["name"]: e["epsilon"] for e in sidecar["resolved"]["rescalings"]}
    assert epsilons["tight"] == pytest.approx(math.pi / 20)
    assert epsilons["loose"] == pytest.approx(math.pi / 24)


def test_sweep_counts_mis_feasible_dominates_penalized(tmp_path):
    config = write_config(
        tmp_path,
        {
            "problem": {"kind": "mis", "graph": G5_BLOCK},
            "sweep": {
                "k0": [0],
                "bounds": ["tight"],
                "surplus_grid": [30, 200],
                "penalty_weights": [3],
            },
        },
    )
    out = tmp_path / "out"
    assert main(["sweep-counts", "--config", str(config), "--out", str(out)]) == 0

    rows = read_csv(out / "sweep_counts.csv")
    feasible_h = [float(row["H_feasible_tight_k0_0"]) for row in rows]
    penalized_h = [float(row["H_penalized_lam3_tight_k0_0"]) for row in rows]
    assert abs(3.0 - feasible_h[-1]) < 0.05
    for f, p in zip(feasible_h, penalized_h):
        assert f >= p
    assert all(float(row["P_penalized_lam3_tight_k0_0"]) >= 0.0 for row in rows)

    sidecar = json.loads((out / "sweep_counts_config.json").read_text())
    by_variant = {e["variant"]: e for e in sidecar["resolved"]["rescalings"]}
    assert by_variant["feasible"]["epsilon"] == pytest.approx(math.pi / 12)
    assert by_variant["penalized_lam3"]["s"] == 13.0
    assert by_variant["penalized_lam3"]["t"] == 3.0
    assert by_variant["penalized_lam3"]["epsilon"] == pytest.approx(math.pi / 64)


def test_postprocess_artifacts(tmp_path):
    config = write_config(
        tmp_path,
        {
            "problem": {"kind": "maxcut", "graph": G5_BLOCK},
            "postprocess": {"grid_resolution": 64},
        },
    )
    out = tmp_path / "out"
    assert main(["postprocess", "--config", str(config), "--out", str(out)]) == 0

    density = read_csv(out / "postprocess_density.csv")
    assert [row["cost"] for row in density] == ["0", "1", "2", "3", "4", "5"]
    assert float(density[0]["p_uniform"]) == pytest.approx(2 / 32)
    for label in ("p_uniform", "p_qaoa1", "p_qaoa1_k1_3"):
        assert sum(float(row[label]) for row in density) == pytest.approx(1.0)

    summary = {row["state"]: float(row["H"]) for row in read_csv(out / "postprocess_summary.csv")}
    assert summary["uniform"] == pytest.approx(3.0)
    assert summary["qaoa1"] > 3.0
    assert summary["qaoa1_k1_1"] > summary["qaoa1"]
    assert summary["qaoa1_k1_2"] > summary["qaoa1_k1_1"]
    assert summary["qaoa1_k1_3"] > summary["qaoa1_k1_2"]

    sidecar = json.loads((out / "postprocess_config.json").read_text())
    assert set(sidecar["resolved"]["qaoa1"]) == {"gamma", "beta", "grid_resolution"}


def test_scramble_study_artifacts(tmp_path):
    config = write_config(
        tmp_path,
        {
            "problem": {"kind": "maxcut", "graph": G5_BLOCK},
            "scramble": {
                "start_counts": [50, 160],
                "top": {"k1_grid": [0, 100]},
                "bottom": {"surplus_grid": [0, 50], "k0_tilde": [0, 1]},
            },
        },
    )
    out = tmp_path / "out"
    assert main(["scramble-study", "--config", str(config), "--out", str(out)]) == 0

    top = read_csv(out / "scramble_top.csv")
    assert [row["k1_tilde"] for row in top] == ["0", "100"]
    assert float(top[0]["H_baseline"]) == pytest.approx(2.0, abs=0.1)
    final = top[1]
    for ct in range(1, 7):
        assert float(final[f"H_chi_{ct}"]) > float(final["H_baseline"])

    bottom = read_csv(out / "scramble_bottom.csv")
    assert list(bottom[0]) == [
        "L_tilde", "H_k0_0", "H_baseline_k0_0", "H_k0_1", "H_baseline_k0_1",
    ]
    assert [row["L_tilde"] for row in bottom] == ["0", "50"]


def test_run_deterministic_zero_steps(tmp_path):
    config = write_config(
        tmp_path,
        {
            "problem": {"kind": "maxcut", "graph": G5_BLOCK},
            "rescaling": {"mode": "brute-force"},
            "criteria": {"ceiling_KT": 0},
            "initial_state": {"kind": "basis", "bitstring": "10011"},
            "run": {"algorithm": 1, "budget": {"max_trajectories": 3}},
            "seed": 4,
        },
    )
    out = tmp_path / "out"
    assert main(["run", "--config", str(config), "--out", str(out)]) == 0

    summary = json.loads((out / "run_summary.json").read_text())
    assert summary["best_cost"] == 5.0
    assert summary["best_bitstring"] == 25
    assert summary["best_bitstring_text"] == "10011"
    assert summary["total_steps"] == 0
    assert summary["trajectories_run"] == 3
    assert summary["cost_histogram"] == {"5": 3}
    assert summary["seed"] == 4


def test_run_rerun_is_byte_identical(tmp_path):
    payload = {
        "problem": {"kind": "maxcut", "graph": G5_BLOCK},
        "rescaling": {"mode": "brute-force"},
        "criteria": {"surplus_L": 10, "reset_R": 3},
        "run": {
            "algorithm": 1,
            "budget": {"max_trajectories": 5},
            "trajectory_csv": True,
        },
        "seed": 7,
    }
    config = write_config(tmp_path, payload)
    out_a = tmp_path / "a"
    out_b = tmp_path / "b"
    assert main(["run", "--config", str(config), "--out", str(out_a)]) == 0
    assert main(["run", "--config", str(config), "--out", str(out_b)]) == 0
    for name in ("run_summary.json", "trajectories.csv", "run_config.json"):
        assert (out_a / name).read_bytes() == (out_b / name).read_bytes()
    summary = json.loads((out_a / "run_summary.json").read_text())
    assert summary["trajectories_run"] == 5
    assert sum(summary["cost_histogram"].values()) == 5


def test_run_thread_count_does_not_change_output(tmp_path):
    payload = {
        "problem": {"kind": "maxcut", "graph": G5_BLOCK},
        "rescaling": {"mode": "brute-force"},
        "criteria": {"surplus_L": 12},
        "run": {"algorithm": 1, "budget": {"max_trajectories": 8}},
        "seed": 21,
    }
    config = write_config(tmp_path, payload)
    out_a = tmp_path / "serial"
    out_b = tmp_path / "parallel"
    assert main(["run", "--config", str(config), "--out", str(out_a)]) == 0
    assert main(
        ["run", "--config", str(config), "--out", str(out_b), "--threads", "2"]
    ) == 0
    assert (out_a / "run_summary.json").read_bytes() == (
        out_b / "run_summary.json"
    ).read_bytes()


def test_run_seed_flag_overrides_config(tmp_path):
    payload = {
        "problem": {"kind": "maxcut", "graph": G5_BLOCK},
        "rescaling": {"mode": "brute-force"},
        "criteria": {"surplus_L": 8},
        "run": {"algorithm": 1, "budget": {"max_trajectories": 2}},
        "seed": 1,
    }
    config = write_config(tmp_path, payload)
    out_a = tmp_path / "a"
    out_b = tmp_path / "b"
    assert main(["run", "--config", str(config), "--out", str(out_a)]) == 0
    assert (
        main(["run", "--config", str(config), "--out", str(out_b), "--seed", "2"]) == 0
    )
    a = json.loads((out_a / "run_summary.json").read_text())
    b = json.loads((out_b / "run_summary.json").read_text())
    assert a["seed"] == 1
    assert b["seed"] == 2


def test_run_feasible_mis_trajectories(tmp_path):
    config = write_config(
        tmp_path,
        {
            "problem": {"kind": "mis", "graph": G5_BLOCK},
            "rescaling": {"mode": "brute-force"},
            "criteria": {"threshold_T": 2.9, "ceiling_KT": 40, "min_steps_ell": 6},
            "initial_state": {"kind": "feasible-uniform"},
            "mixer": {"kind": "mis-controlled", "chi_tilde": 4},
            "run": {
                "algorithm": 2,
                "budget": {"max_trajectories": 50},
                "trajectory_csv": True,
            },
            "seed": 12,
        },
    )
    out = tmp_path / "out"
    assert main(["run", "--config", str(config), "--out", str(out)]) == 0

    instance = ProblemInstance(
        Graph.from_1indexed(5, [tuple(e) for e in G5_BLOCK["edges"]]), "mis"
    )
    rows = read_csv(out / "trajectories.csv")
    assert len(rows) == 50
    for row in rows:
        assert feasible(instance, bitstring_to_index(row["final_sample"]))
        assert int(row["final_cost"].split(".")[0]) <= 3

    sidecar = json.loads((out / "run_config.json").read_text())
    assert sidecar["resolved"]["rescaling"]["epsilon"] == pytest.approx(math.pi / 12)


def test_walk_artifacts(tmp_path):
    config = write_config(
        tmp_path,
        {
            "walk": {
                "p": [0.75, 0.5],
                "L": [2],
                "R": [1, None],
                "mc_trials": 5000,
                "mc_step_cap": 50000,
            },
            "seed": 3,
        },
    )
    out = tmp_path / "out"
    assert main(["walk", "--config", str(config), "--out", str(out)]) == 0

    rows = {(row["p"], row["R"]): row for row in read_csv(out / "walk.csv")}
    canonical = rows[("0.75", "1")]
    assert float(canonical["exact"]) == pytest.approx(28 / 9, abs=1e-9)
    assert float(canonical["closed_printed"]) == pytest.approx(12.0)
    assert float(canonical["closed_corrected"]) == pytest.approx(28 / 9, abs=1e-9)
    assert canonical["printed_matches"] == "false"
    assert canonical["corrected_matches"] == "true"
    assert canonical["mc_within_3sigma"] == "true"
    assert canonical["mc_capped"] == "0"

    no_reset = rows[("0.75", "")]
    assert float(no_reset["exact"]) == pytest.approx(4.0)
    assert float(no_reset["bound"]) == pytest.approx(4.0)
    assert no_reset["closed_printed"] == ""

    symmetric = rows[("0.5", "")]
    assert symmetric["exact"] == ""
    assert symmetric["bound"] == ""
    assert int(symmetric["mc_capped"]) > 0
    assert symmetric["mc_within_3sigma"] == ""

    runs = {row["p"]: row for row in read_csv(out / "walk_runs.csv")}
    assert float(runs["0.75"]["expected"]) == pytest.approx(28 / 9)
    assert float(runs["0.5"]["expected"]) == pytest.approx(6.0)
    assert runs["0.75"]["mc_within_3sigma"] == "true"


def test_walk_without_monte_carlo_needs_no_seed(tmp_path):
    config = write_config(tmp_path, {"walk": {"p": [0.8], "L": [3]}})
    out = tmp_path / "out"
    assert main(["walk", "--config", str(config), "--out", str(out)]) == 0
    rows = read_csv(out / "walk.csv")
    assert rows[0]["mc_mean"] == ""


def test_walk_monte_carlo_requires_seed(tmp_path):
    config = write_config(tmp_path, {"walk": {"p": [0.8], "L": [3], "mc_trials": 10}})
    assert main(["walk", "--config", str(config), "--out", str(tmp_path)]) == 2


def test_run_requires_seed(tmp_path):
    config = write_config(
        tmp_path,
        {
            "problem": {"kind": "maxcut", "graph": G5_BLOCK},
            "rescaling": {"mode": "brute-force"},
            "criteria": {"surplus_L": 5},
            "run": {"algorithm": 1, "budget": {"max_trajectories": 1}},
        },
    )
    assert main(["run", "--config", str(config), "--out", str(tmp_path)]) == 2


def test_unknown_key_rejected(tmp_path):
    config = write_config(
        tmp_path,
        {
            "problem": {"kind": "maxcut", "graph": G5_BLOCK},
            "sweep": {"k0": [0], "bounds": ["tight"], "surplus_grid": [1]},
            "typo_key": 1,
        },
    )
    assert main(["sweep-counts", "--config", str(config), "--out", str(tmp_path)]) == 2


def test_invalid_json_rejected(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    assert main(["sweep-counts", "--config", str(path), "--out", str(tmp_path)]) == 2


def test_missing_config_file_rejected(tmp_path):
    assert (
        main(["walk", "--config", str(tmp_path / "absent.json"), "--out", str(tmp_path)])
        == 2
    )


def test_unknown_bound_shorthand_rejected(tmp_path):
    config = write_config(
        tmp_path,
        {
            "problem": {"kind": "maxcut", "graph": G5_BLOCK},
            "sweep": {"k0": [0], "bounds": ["medium"], "surplus_grid": [1]},
        },
    )
    assert main(["sweep-counts", "--config", str(config), "--out", str(tmp_path)]) == 2


def test_mixer_chi_exclusivity_rejected(tmp_path):
    config = write_config(
        tmp_path,
        {
            "problem": {"kind": "maxcut", "graph": G5_BLOCK},
            "rescaling": {"mode": "brute-force"},
            "criteria": {"threshold_T": 2.0, "ceiling_KT": 10},
            "mixer": {"kind": "transverse-field", "chi": 0.3, "chi_tilde": 2},
            "run": {"algorithm": 2, "budget": {"max_trajectories": 1}},
            "seed": 0,
        },
    )
    assert main(["run", "--config", str(config), "--out", str(tmp_path)]) == 2


def test_threshold_incompatible_with_rescaling_rejected(tmp_path):
    config = write_config(
        tmp_path,
        {
            "problem": {"kind": "maxcut", "graph": G5_BLOCK},
            "rescaling": {"mode": "brute-force"},
            "criteria": {"threshold_T": 6.0},
            "run": {"algorithm": 1, "budget": {"max_trajectories": 1}},
            "seed": 0,
        },
    )
    assert main(["run", "--config", str(config), "--out", str(tmp_path)]) == 2


def test_oversized_instance_exits_with_capacity_code(tmp_path):
    edges = [[i, i + 1] for i in range(1, 30)]
    config = write_config(
        tmp_path,
        {
            "problem": {"kind": "maxcut", "graph": {"n": 30, "edges": edges}},
            "sweep": {"k0": [0], "bounds": ["loose"], "surplus_grid": [1]},
        },
    )
    assert main(["sweep-counts", "--config", str(config), "--out", str(tmp_path)]) == 3


def test_graph_file_input(tmp_path):
    graph_path = tmp_path / "graph.txt"
    graph_path.write_text(
        "n 5\n# benchmark graph\n1 2\n2 3\n3 4\n1 3\n2 4\n2 5\n"
    )
    config = write_config(
        tmp_path,
        {
            "problem": {"kind": "maxcut", "graph": {"path": str(graph_path)}},
            "postprocess": {"grid_resolution": 16, "k1": [1]},
        },
    )
    out = tmp_path / "out"
    assert main(["postprocess", "--config", str(config), "--out", str(out)]) == 0
    summary = {row["state"]: float(row["H"]) for row in read_csv(out / "postprocess_summary.csv")}
    assert summary["uniform"] == pytest.approx(3.0)
