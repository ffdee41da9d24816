import filecmp

import pytest

from crowdtypes import ExperimentConfig, InvalidParameterError, emit_csv, run_sweep, summarize, write_meta
from crowdtypes.harness import CSV_HEADER, DIAG_HEADER, parse_config_file


def tiny_config(**overrides):
    base = dict(
        d=3, p=0.9, q=0.6, m=300, n=24, budgets=(6, 12),
        algorithms=("mv", "alg1"), trials=2, r=60, seed=41,
    )
    base.update(overrides)
    return ExperimentConfig(**base)


class TestConfig:
    def test_validation(self):
        with pytest.raises(InvalidParameterError):
            tiny_config(trials=0)
        with pytest.raises(InvalidParameterError):
            tiny_config(budgets=())
        with pytest.raises(InvalidParameterError):
            tiny_config(algorithms=("mv", "em"))
        with pytest.raises(InvalidParameterError):
            tiny_config(budgets=(7,))  # not a multiple of d with clustered algs

    def test_uniform_only_budgets_free(self):
        cfg = tiny_config(budgets=(7,), algorithms=("mv",))
        assert cfg.budgets == (7,)

    def test_auto_probe_depth_capped(self):
        cfg = tiny_config(r=None)
        assert cfg.probe_depth() == 150  # m // 2 cap binds at desk scale

    def test_meta_flags_desk_scale(self):
        meta = tiny_config().meta()
        assert meta["asymptotic_regime"] is False
        assert meta["r_effective"] == 60


class TestRunSweep:
    def test_single_row(self):
        cfg = tiny_config(budgets=(6,), algorithms=("mv",), trials=1)
        rows = run_sweep(cfg)
        assert len(rows) == 1
        assert rows[0].algorithm == "mv"
        assert rows[0].result is not None
        assert 0.0 <= rows[0].result.error_fraction <= 1.0

    def test_row_count_and_order(self):
        rows = run_sweep(tiny_config())
        assert len(rows) == 2 * 2 * 2
        keys = [(r.algorithm, r.budget, r.trial) for r in rows]
        assert keys == sorted(keys, key=lambda k: (["mv", "alg1"].index(k[0]), k[1], k[2]))

    def test_shared_worlds_across_algorithms(self):
        rows = run_sweep(tiny_config())
        by_cell = {(r.algorithm, r.budget, r.trial): r.seed for r in rows}
        assert by_cell[("mv", 6, 0)] == by_cell[("alg1", 6, 0)]
        assert by_cell[("mv", 6, 0)] != by_cell[("mv", 12, 0)]

    def test_collapse_sweep_exact(self):
        # at q = 1/2 the prior and weighted rules agree label by label,
        # so their per-trial error fractions coincide exactly
        cfg = tiny_config(q=0.5, algorithms=("prior", "alg1"), trials=3, budgets=(6,))
        rows = run_sweep(cfg)
        errs = {}
        for row in rows:
            errs.setdefault(row.algorithm, []).append(row.result.error_fraction)
        assert errs["prior"] == errs["alg1"]

    def test_failure_recorded_not_raised(self):
        # probe depth >= m is invalid and must surface as a row failure
        cfg = tiny_config(r=300, m=300, budgets=(6,), algorithms=("alg1",), trials=1)
        rows = run_sweep(cfg)
        assert rows[0].result is None
        assert "probe depth" in rows[0].failure

    def test_summarize(self):
        rows = run_sweep(tiny_config())
        stats = summarize(rows)
        mean, se, count = stats[("mv", 6)]
        assert count == 2 and 0 <= mean <= 1 and se >= 0


class TestEmitCsv:
    def test_header_pinned(self, tmp_path):
        path = tmp_path / "out.csv"
        emit_csv([], path)
        lines = path.read_text().splitlines()
        assert lines == [
            "algorithm,budget_queries_per_task,trial,error_fraction,clustering_ok,p_hat,q_hat,seed"
        ]
        assert CSV_HEADER == lines[0]

    def test_rows_and_determinism(self, tmp_path):
        cfg = tiny_config()
        rows = run_sweep(cfg)
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        emit_csv(rows, a)
        emit_csv(run_sweep(cfg), b)
        assert filecmp.cmp(a, b, shallow=False)
        lines = a.read_text().splitlines()
        assert len(lines) == 1 + len(rows)
        first = lines[1].split(",")
        assert first[0] == "mv" and first[1] == "6" and first[2] == "0"
        # mv rows leave clustering and estimate columns empty
        assert first[4] == "" and first[5] == "" and first[6] == ""

    def test_diagnostics_companion(self, tmp_path):
        rows = run_sweep(tiny_config(algorithms=("alg1",), budgets=(6,), trials=1))
        path = tmp_path / "out.csv"
        emit_csv(rows, path)
        diag = (tmp_path / "out_diagnostics.csv").read_text().splitlines()
        assert diag[0] == DIAG_HEADER
        fields = diag[1].split(",")
        assert float(fields[3]) > 0  # amortized queries include the probe phase
        assert fields[8] == ""

    def test_meta_sidecar(self, tmp_path):
        cfg = tiny_config()
        path = tmp_path / "out.csv"
        write_meta(cfg, path)
        text = (tmp_path / "out.csv.meta").read_text()
        assert "q=0.6" in text
        assert "budgets=6,12" in text


class TestConfigFile:
    def test_parse(self, tmp_path):
        cfg_file = tmp_path / "sweep.cfg"
        cfg_file.write_text("# comment\nq=0.7\ntrials=4\nbudgets=6,12\n")
        values = parse_config_file(cfg_file)
        assert values == {"q": "0.7", "trials": "4", "budgets": "6,12"}

    def test_rejects_malformed(self, tmp_path):
        cfg_file = tmp_path / "bad.cfg"
        cfg_file.write_text("q 0.7\n")
        with pytest.raises(InvalidParameterError):
            parse_config_file(cfg_file)
