from __future__ import annotations

import math
from pathlib import Path

import numpy as np
import pytest

from certirl import adversary, cli, harness
from certirl.envs import CartpoleEnv, CollisionAvoidanceEnv
from certirl.netio import load_network, save_network

from conftest import make_random_net


@pytest.fixture
def small_net(rng):
    return make_random_net(rng, input_dim=4, hidden_layers=2, max_width=6, num_actions=2)


def cartpole_episode(net, rule, eps_rob, pert, seed=0):
    env = CartpoleEnv()
    return harness.run_episode(
        env,
        net,
        rule,
        eps_rob * np.ones(4),
        math.inf,
        pert,
        np.random.SeedSequence((seed, 0)),
        np.random.default_rng(7),
    )


class TestRunEpisode:
    def test_zero_eps_no_attack_matches_nominal(self, small_net):
        none = adversary.PerturbationSpec(kind="none")
        carrl = cartpole_episode(small_net, "carrl", 0.0, none)
        nominal = cartpole_episode(small_net, "nominal", 0.0, none)
        assert carrl.actions == nominal.actions
        assert carrl.rewards == nominal.rewards
        np.testing.assert_array_equal(
            np.array(carrl.true_observations), np.array(nominal.true_observations)
        )

    def test_replay_is_bit_identical(self, small_net):
        pert = adversary.PerturbationSpec(kind="uniform_noise", sigma=0.05 * np.ones(4))
        a = cartpole_episode(small_net, "carrl", 0.1, pert, seed=3)
        b = cartpole_episode(small_net, "carrl", 0.1, pert, seed=3)
        assert a.actions == b.actions
        assert a.outcome == b.outcome
        np.testing.assert_array_equal(
            np.array(a.perturbed_observations), np.array(b.perturbed_observations)
        )

    def test_fixture_no_attack_reaches_cap(self, cartpole_fixture_path):
        net = load_network(cartpole_fixture_path)
        record = cartpole_episode(net, "carrl", 0.0, adversary.PerturbationSpec(kind="none"))
        assert record.total_reward == 200.0

    def test_certificates_nonnegative(self, small_net):
        pert = adversary.PerturbationSpec(kind="fgst", eps_adv=0.05 * np.ones(4))
        record = cartpole_episode(small_net, "carrl", 0.05, pert)
        assert all(c >= 0.0 for c in record.certificates)

    def test_unknown_rule(self, small_net):
        with pytest.raises(ValueError):
            cartpole_episode(small_net, "greedy", 0.0, adversary.PerturbationSpec(kind="none"))


class TestConfig:
    def test_ini_round_trip(self, tmp_path):
        ini = tmp_path / "exp.ini"
        ini.write_text(
            "[experiment]\n"
            "env = cartpole\n"
            "weights = w.json\n"
            "rule = carrl\n"
            "eps_rob = 0.0, 0.1\n"
            "p_rob = inf\n"
            "attack = fgst\n"
            "eps_adv = 0.05\n"
            "episodes = 3\n"
            "seeds = 0, 1\n"
            "lambda = -1.0, 0.0\n"
        )
        cfg = harness.load_config(ini)
        assert cfg.eps_rob == (0.0, 0.1)
        assert cfg.p_rob == math.inf
        assert cfg.lam == (-1.0, 0.0)
        assert cfg.seeds == (0, 1)

    def test_cli_overrides_win(self, tmp_path):
        ini = tmp_path / "exp.ini"
        ini.write_text("[experiment]\nenv = cartpole\nweights = w.json\nepisodes = 3\n")
        cfg = harness.load_config(ini, {"episodes": 7, "eps_rob": (0.2,)})
        assert cfg.episodes == 7
        assert cfg.eps_rob == (0.2,)

    def test_unknown_key_rejected(self, tmp_path):
        ini = tmp_path / "exp.ini"
        ini.write_text("[experiment]\nenv = cartpole\nbogus = 1\n")
        with pytest.raises(ValueError, match="bogus"):
            harness.load_config(ini)

    def test_empty_sweep_list_rejected(self):
        with pytest.raises(ValueError):
            harness.ExperimentConfig(eps_rob=())


class TestSigmaToEps:
    def test_confidence_multiplier(self):
        np.testing.assert_allclose(
            harness.sigma_to_eps(np.array([0.1, 0.2]), 2.0), [0.2, 0.4]
        )

    def test_zero_multiplier(self):
        np.testing.assert_array_equal(harness.sigma_to_eps(np.ones(3), 0.0), np.zeros(3))

    def test_linear_in_k(self, rng):
        sigma = np.abs(rng.normal(size=4))
        np.testing.assert_allclose(
            harness.sigma_to_eps(sigma, 3.0), 3.0 * harness.sigma_to_eps(sigma, 1.0)
        )

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            harness.sigma_to_eps(np.ones(2), -1.0)


class TestBestEpsRob:
    def _cell(self, eps_rob, magnitude, reward):
        return harness.CellStats(
            eps_rob=eps_rob,
            kind="fgst",
            magnitude=magnitude,
            lam=0.0,
            seed=None,
            mean_reward=reward,
            collision_rate=0.0,
            goal_rate=0.0,
            timeout_rate=0.0,
            mean_certificate=0.0,
        )

    def _sweep(self, cells):
        cfg = harness.ExperimentConfig(weights="x", attack="fgst")
        sweep = harness.SweepResult(config=cfg)
        sweep.cells = cells
        return sweep

    def test_single_cell(self):
        table = harness.best_eps_rob(self._sweep([self._cell(0.3, 0.1, 5.0)]))
        assert table == [(0.1, 0.0, 0.3, 5.0)]

    def test_recovers_planted_maximum(self):
        cells = [self._cell(e, 0.1, -((e - 0.15) ** 2)) for e in (0.0, 0.05, 0.15, 0.3)]
        table = harness.best_eps_rob(self._sweep(cells))
        assert table[0][2] == 0.15

    def test_tie_prefers_smaller_eps(self):
        cells = [self._cell(0.1, 0.2, 1.0), self._cell(0.3, 0.2, 1.0)]
        assert harness.best_eps_rob(self._sweep(cells))[0][2] == 0.1

    def test_best_eps_tracks_attack_magnitude(self, cartpole_fixture_path):
        # stronger attacks should favour larger robustness radii (rank
        # correlation over the sweep's best-eps table must be positive)
        cfg = harness.ExperimentConfig(
            env="cartpole",
            weights=str(cartpole_fixture_path),
            rule="carrl",
            p_rob=math.inf,
            episodes=1,
            seeds=tuple(range(30)),
            out="unused",
            no_plots=True,
            eps_rob=(0.0, 0.025, 0.05, 0.1, 0.15, 0.2),
            attack="fgst",
            eps_adv=(0.025, 0.075, 0.15),
        )
        table = harness.best_eps_rob(harness.run_sweep(cfg))
        magnitudes = [m for m, _, _, _ in table]
        best = [e for _, _, e, _ in table]
        assert _spearman(magnitudes, best) > 0.0


def _ranks(values):
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        avg = (i + j) / 2.0 + 1.0
        for k in range(i, j + 1):
            ranks[order[k]] = avg
        i = j + 1
    return ranks


def _spearman(x, y):
    rx, ry = np.array(_ranks(x)), np.array(_ranks(y))
    rx -= rx.mean()
    ry -= ry.mean()
    denom = math.sqrt(float((rx**2).sum() * (ry**2).sum()))
    return float((rx * ry).sum() / denom) if denom else 0.0


class TestSweepAndOutputs:
    def _config(self, tmp_path, weights_path, **kw):
        defaults = dict(
            env="cartpole",
            weights=str(weights_path),
            rule="carrl",
            eps_rob=(0.0, 0.1),
            attack="fgst",
            eps_adv=(0.05,),
            episodes=2,
            seeds=(0, 1),
            out=str(tmp_path / "out"),
            no_plots=True,
        )
        defaults.update(kw)
        return harness.ExperimentConfig(**defaults)

    def test_csv_deterministic_and_well_formed(self, tmp_path, small_net):
        weights = tmp_path / "net.json"
        save_network(small_net, weights)
        cfg = self._config(tmp_path, weights)
        blobs = []
        for run in range(2):
            sweep = harness.run_sweep(cfg)
            out = Path(cfg.out) / f"run{run}"
            harness.emit_outputs(sweep, out)
            blobs.append((out / "sweep.csv").read_bytes())
        assert blobs[0] == blobs[1]
        lines = blobs[0].decode().strip().split("\n")
        assert lines[0] == ",".join(harness.CSV_HEADER)
        assert len(lines) == 1 + 2 * 2  # header + eps_rob values x seeds
        for line in lines[1:]:
            cols = line.split(",")
            assert cols[0] == "cartpole"
            assert float(cols[13]) >= 0.0  # mean_certificate

    def test_eps_rob_zero_column_matches_nominal_run(self, tmp_path, small_net):
        weights = tmp_path / "net.json"
        save_network(small_net, weights)
        cfg = self._config(tmp_path, weights, eps_rob=(0.0,), attack="none", eps_adv=(0.0,))
        carrl = harness.run_sweep(cfg)
        nominal = harness.run_sweep(
            harness.ExperimentConfig(**{**cfg.__dict__, "rule": "nominal"})
        )
        for a, b in zip(carrl.rows, nominal.rows):
            assert a.mean_reward == b.mean_reward

    def test_plots_written(self, tmp_path, small_net):
        weights = tmp_path / "net.json"
        save_network(small_net, weights)
        cfg = self._config(tmp_path, weights, no_plots=False, episodes=1, seeds=(0,))
        sweep = harness.run_sweep(cfg)
        written = harness.emit_outputs(sweep, cfg.out)
        names = {p.name for p in written}
        assert "sweep.csv" in names
        assert "reward_vs_eps_rob.png" in names
        assert "best_eps_rob.png" in names
        for p in written:
            assert p.exists() and p.stat().st_size > 0

    def test_collision_rates_sum_to_one(self, tmp_path, rng):
        net = make_random_net(rng, input_dim=8, hidden_layers=1, max_width=8, num_actions=11)
        weights = tmp_path / "ca.json"
        save_network(net, weights)
        cfg = self._config(
            tmp_path,
            weights,
            env="collision_avoidance",
            attack="none",
            eps_adv=(0.0,),
            eps_rob=(0.0,),
            episodes=3,
            seeds=(0,),
        )
        sweep = harness.run_sweep(cfg)
        for row in sweep.rows:
            assert row.collision_rate + row.goal_rate + row.timeout_rate == pytest.approx(1.0)

    def test_layout_mismatch_rejected(self, tmp_path, small_net):
        from certirl.netio import NetworkSpec

        tagged = NetworkSpec(
            small_net.layers,
            small_net.input_dim,
            small_net.action_labels,
            meta={"observation_layout": "collision-avoidance/ego-frame-8d/v1"},
        )
        weights = tmp_path / "net.json"
        save_network(tagged, weights)
        cfg = self._config(tmp_path, weights)
        with pytest.raises(ValueError, match="observation_layout"):
            harness.run_sweep(cfg)


class TestCli:
    def test_run_from_config(self, tmp_path, small_net, capsys):
        weights = tmp_path / "net.json"
        save_network(small_net, weights)
        ini = tmp_path / "exp.ini"
        out = tmp_path / "results"
        ini.write_text(
            "[experiment]\n"
            f"weights = {weights}\n"
            "env = cartpole\n"
            "eps_rob = 0.0, 0.1\n"
            "attack = none\n"
            "episodes = 1\n"
            "seeds = 0\n"
            f"out = {out}\n"
            "no_plots = true\n"
        )
        assert cli.main(["run", "--config", str(ini)]) == 0
        assert (out / "sweep.csv").exists()
        assert "best eps_rob" in capsys.readouterr().out

    def test_certify_prints_bounds(self, tmp_path, small_net, capsys):
        weights = tmp_path / "net.json"
        save_network(small_net, weights)
        code = cli.main(
            [
                "certify",
                "--weights",
                str(weights),
                "--obs",
                "0.1,0.2,-0.1,0.0",
                "--eps-rob",
                "0.05",
                "--p-rob",
                "inf",
            ]
        )
        assert code == 0
        out = capsys.readouterr().out
        assert "Q_l=" in out and "certificate" in out and "chosen" in out

    def test_verify_bounds_passes(self, capsys):
        assert cli.main(["verify-bounds", "--trials", "5", "--seed", "3"]) == 0
        assert "sound" in capsys.readouterr().out

    def test_verify_bounds_failure_exit_code(self, capsys, monkeypatch):
        from certirl.oracle import OracleReport

        def broken_mc(net, ball, n, rng):
            huge = np.full(net.num_actions, 1e9)
            return OracleReport(-huge, huge, 0, n)

        monkeypatch.setattr(cli.oracle, "monte_carlo_extrema", broken_mc)
        assert cli.main(["verify-bounds", "--trials", "2", "--seed", "3"]) == 2
        assert "VIOLATION" in capsys.readouterr().out

    def test_validation_error_exit_code(self, tmp_path, capsys):
        assert cli.main(["run", "--weights", str(tmp_path / "absent.json")]) == 1

    def test_certify_bad_obs_length(self, tmp_path, small_net):
        weights = tmp_path / "net.json"
        save_network(small_net, weights)
        code = cli.main(
            ["certify", "--weights", str(weights), "--obs", "0.1", "--eps-rob", "0.05"]
        )
        assert code == 1
