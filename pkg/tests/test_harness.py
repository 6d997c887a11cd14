import numpy as np
import pytest

from bbgrad import harness
from bbgrad.bb import StepRule


def spectral_spec(tmp_path, **overrides):
    base = dict(
        problem="spectral",
        rules=(StepRule.BB1,),
        betas=(1.5,),
        epsilons=(1e-2, 1e-6),
        levels=((None, 3), (None, 4)),
        out_dir=tmp_path,
        figures=False,
    )
    base.update(overrides)
    return harness.ExperimentSpec(**base)


class TestSpecValidation:
    def test_unknown_problem(self, tmp_path):
        with pytest.raises(ValueError):
            harness.ExperimentSpec(problem="heat", out_dir=tmp_path)

    def test_epsilons_must_decrease(self, tmp_path):
        with pytest.raises(ValueError):
            spectral_spec(tmp_path, epsilons=(1e-6, 1e-2))

    def test_defaults_fill_in(self, tmp_path):
        spec = harness.ExperimentSpec(problem="poisson", out_dir=tmp_path)
        assert spec.betas == (0.2, 0.05, 0.01)
        assert [l for _, l in spec.levels] == [5, 6, 7]

    def test_rules_accept_names(self, tmp_path):
        spec = harness.ExperimentSpec(problem="poisson", rules=("bb2",), out_dir=tmp_path)
        assert spec.rules == (StepRule.BB2,)


class TestRunSingle:
    def test_trace_csv_schema(self, tmp_path):
        spec = spectral_spec(tmp_path)
        trace, csv_path = harness.run_single(spec)
        lines = csv_path.read_text().strip().splitlines()
        assert lines[0] == "k,grad_norm,alpha"
        assert len(lines) == len(trace.records) + 1
        first = lines[1].split(",")
        assert int(first[0]) == 1
        assert float(first[1]) == trace.records[0].grad_norm
        assert (tmp_path / "manifest.txt").exists()

    def test_objective_column_optional(self, tmp_path):
        spec = spectral_spec(tmp_path, record_objective=True)
        trace, csv_path = harness.run_single(spec)
        lines = csv_path.read_text().strip().splitlines()
        assert lines[0] == "k,grad_norm,alpha,objective"
        assert all(len(l.split(",")) == 4 for l in lines[1:])

    def test_monotone_trace_in_sub_two_regime(self, tmp_path):
        spec = spectral_spec(tmp_path, betas=(1.5,), epsilons=(1e-2, 1e-10))
        trace, csv_path = harness.run_single(spec)
        norms = [float(l.split(",")[1]) for l in csv_path.read_text().strip().splitlines()[1:]]
        assert all(b < a for a, b in zip(norms, norms[1:]))

    def test_single_row_trace_when_start_optimal(self, tmp_path):
        # huge eps terminates at the first recorded iterate
        spec = spectral_spec(tmp_path, epsilons=(1e6,))
        trace, csv_path = harness.run_single(spec)
        assert len(csv_path.read_text().strip().splitlines()) == 2

    def test_figure_written_when_enabled(self, tmp_path):
        spec = spectral_spec(tmp_path, figures=True)
        harness.run_single(spec)
        assert list(tmp_path.glob("trace_*.png"))


class TestBuildTable:
    def test_row_grid_and_reasons(self, tmp_path):
        spec = spectral_spec(tmp_path, rules=(StepRule.BB1, StepRule.ABB))
        rows = harness.build_table(spec)
        assert len(rows) == 2 * 1 * 2 * 2  # rules x betas x levels x epsilons
        assert all(r.reason == "converged" for r in rows)
        assert all((r.k_star is not None) == (r.reason == "converged") for r in rows)

    def test_csv_bytes_deterministic(self, tmp_path):
        spec_a = spectral_spec(tmp_path / "a")
        spec_b = spectral_spec(tmp_path / "b")
        path_a = harness.write_table(spec_a, harness.build_table(spec_a))
        path_b = harness.write_table(spec_b, harness.build_table(spec_b))
        assert path_a.read_bytes() == path_b.read_bytes()

    def test_max_iter_rows_marked(self, tmp_path):
        spec = spectral_spec(
            tmp_path, betas=(0.05,), epsilons=(1e-2, 1e-12), max_iter=3
        )
        rows = harness.build_table(spec)
        deep = [r for r in rows if r.eps == 1e-12]
        assert all(r.reason == "max_iter" and r.k_star is None for r in deep)

    def test_roundtrip_through_csv(self, tmp_path):
        spec = spectral_spec(tmp_path)
        rows = harness.build_table(spec)
        path = harness.write_table(spec, rows)
        parsed = harness.read_table(path)
        assert parsed == rows


class TestSpread:
    def test_zero_spread_for_identical_counts(self):
        rows = [
            harness.TableRow("poisson", "BB1", 0.2, 1e-2, lvl, None, None, 3, "converged")
            for lvl in (5, 6, 7)
        ]
        report = harness.spread(rows)
        assert report[0].ell == 0 and report[0].status == "ok"

    def test_pairwise_max_difference(self):
        ks = {5: 12, 6: 13, 7: 13, 8: 13}
        rows = [
            harness.TableRow("poisson", "BB1", 0.2, 1e-8, lvl, None, None, k, "converged")
            for lvl, k in ks.items()
        ]
        assert harness.spread(rows)[0].ell == 1

    def test_wider_jitter(self):
        ks = [38, 39, 38, 40, 38, 39]
        rows = [
            harness.TableRow("poisson", "BB1", 0.01, 1e-8, lvl, None, None, k, "converged")
            for lvl, k in enumerate(ks)
        ]
        assert harness.spread(rows)[0].ell == 2

    def test_failed_run_marks_unavailable(self):
        rows = [
            harness.TableRow("poisson", "BB1", 0.2, 1e-8, 5, None, None, 12, "converged"),
            harness.TableRow("poisson", "BB1", 0.2, 1e-8, 6, None, None, None, "max_iter"),
        ]
        report = harness.spread(rows)
        assert report[0].ell is None and report[0].status == "unavailable"


class TestSandwich:
    def test_no_violation_within_band(self):
        rows = [
            harness.TableRow("poisson", "BB1", 0.2, 1e-8, lvl, None, None, k, "converged")
            for lvl, k in ((5, 12), (6, 13), (7, 13))
        ]
        report = harness.sandwich_check(rows, reference_level=7, slack=1, ell_bound=1)
        assert not any(r.violation for r in report)

    def test_violation_detected(self):
        rows = [
            harness.TableRow("poisson", "BB1", 0.2, 1e-8, lvl, None, None, k, "converged")
            for lvl, k in ((5, 5), (6, 5), (7, 9))
        ]
        report = harness.sandwich_check(rows, reference_level=7, slack=1, ell_bound=1)
        assert all(r.violation for r in report)

    def test_spectral_truncations_share_counts(self, tmp_path):
        # two truncation sizes with a shared dominant spectrum terminate at
        # the same iteration, so no violations at zero slack
        spec = spectral_spec(tmp_path, levels=((None, 4), (None, 6)), epsilons=(1e-2, 1e-8))
        rows = harness.build_table(spec)
        report = harness.sandwich_check(rows, reference_level=6, slack=0, ell_bound=0)
        assert not any(r.violation for r in report)


class TestSpectralSweep:
    def test_rows_and_invariants(self):
        rows = harness.spectral_sweep((1.5, 0.05), (8, 16), seed=0)
        assert len(rows) == 4
        for row in rows:
            assert row.kappa == pytest.approx((row.shift + 1.0) / row.shift, rel=1e-12)
            assert row.half_life is not None
            if row.kappa < 2.0:
                assert row.monotone
                assert row.half_life <= row.half_life_bound
            else:
                assert row.half_life_bound is None

    def test_csv_write(self, tmp_path):
        rows = harness.spectral_sweep((1.5,), (8,), seed=0)
        path = harness.write_sweep(rows, tmp_path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == harness.SWEEP_HEADER
        assert len(lines) == 2


class TestConfigFile:
    def test_parse_and_override(self, tmp_path):
        cfg = tmp_path / "exp.cfg"
        cfg.write_text(
            "# comment\n"
            "problem = wave\n"
            "rules = BB1, BB2\n"
            "betas = 0.5, 0.05\n"
            "epsilons = 1e-2, 1e-4\n"
            "dt_pairs = 0.01:4, 0.04:5\n"
            "seed = 3\n"
        )
        values = harness.parse_config_file(cfg)
        assert values["problem"] == "wave"
        assert values["rules"] == (StepRule.BB1, StepRule.BB2)
        assert values["levels"] == ((0.01, 4), (0.04, 5))
        assert values["seed"] == 3

    def test_levels_without_dt(self, tmp_path):
        cfg = tmp_path / "exp.cfg"
        cfg.write_text("problem = poisson\nlevels = 5,6\n")
        values = harness.parse_config_file(cfg)
        assert values["levels"] == ((None, 5), (None, 6))

    def test_malformed_line(self, tmp_path):
        cfg = tmp_path / "exp.cfg"
        cfg.write_text("problem poisson\n")
        with pytest.raises(ValueError):
            harness.parse_config_file(cfg)


class TestFloatFormat:
    def test_seventeen_significant_digits_round_trip(self):
        values = [0.1, 1e-8, np.pi, 2.0 / 3.0]
        for v in values:
            assert float(harness.fmt(v)) == v
