import math

import numpy as np
import pandas as pd
import pytest
from pydantic import ValidationError

import app
from harness import records
from harness.config import ExcitationMode, ExperimentConfig, default_output_dir, load_config, parse_config_file
from harness.report import fit_report, render_key_values, render_text, write_plot_data
from harness.runner import RunManifest, run_experiment
from observables import ObservationRecord
from utils.errors import ConfigMismatch, InsufficientData


def small_config(out, **changes) -> ExperimentConfig:
    values = dict(kinds=["Q"], sizes=[8], instances=10, mode="max", seed=3, out=out)
    values.update(changes)
    return ExperimentConfig(**values)


class TestConfig:
    def test_file_and_overrides(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("kinds=H,T\nsizes=8,16\ninstances=5\nmode=random\nseed=42\n")

        config = load_config(path, {"seed": 7, "workers": None})

        assert [str(k) for k in config.kinds] == ["H", "T"]
        assert config.sizes == [8, 16]
        assert config.mode is ExcitationMode.RANDOM
        assert config.seed == 7

    def test_preset_is_overridden_by_file(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("preset=desk\ninstances=3\n")

        config = load_config(path)

        assert config.sizes == [8, 16, 24, 32, 48, 64]
        assert config.instances == 3

    def test_unknown_key(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("colour=blue\n")

        with pytest.raises(ValueError):
            parse_config_file(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_config(tmp_path / "missing.cfg")

    @pytest.mark.parametrize(
        "changes",
        [{"sizes": [7]}, {"instances": 0}, {"epsilons": [0.2, 0.1]}, {"epsilons": [-0.1, 0.2]}, {"kinds": []}],
    )
    def test_invalid_values(self, tmp_path, changes):
        with pytest.raises(ValidationError):
            small_config(tmp_path, **changes)

    def test_hash_ignores_workers_and_out(self, tmp_path):
        a = small_config(tmp_path / "a", workers=1)
        b = small_config(tmp_path / "b", workers=4)

        assert a.config_hash() == b.config_hash()
        assert a.config_hash() != small_config(tmp_path, seed=4).config_hash()

    def test_output_dir_from_environment(self, monkeypatch, tmp_path):
        monkeypatch.setenv("DIMERLAB_OUTPUT_DIR", str(tmp_path / "env-runs"))

        assert default_output_dir() == tmp_path / "env-runs"


class TestRecords:
    def record(self, **changes):
        values = dict(kind="Q", L=8, instance=0, excitation="max", ground_cost=1.5, delta_e=0.25, S=6)
        values.update(changes)
        return ObservationRecord(**values)

    def test_row_format(self):
        row = records.format_row(self.record(loop_index=0, R2=0.1))
        fields = row.split(",")

        assert len(fields) == len(records.COLUMNS)
        assert fields[4] == ""
        assert fields[9] == "0.10000000000000001"

    def test_instance_rows_sort_after_loops(self):
        loop = records.format_row(self.record(loop_index=3))
        summary = records.format_row(self.record())

        assert sorted([summary, loop], key=records.sort_key) == [loop, summary]

    def test_torn_tail_is_dropped(self, tmp_path):
        path = tmp_path / records.PARTIAL_NAME
        records.append_rows(path, [self.record(loop_index=0), self.record()])
        with path.open("a") as handle:
            handle.write("Q,8,1,max,,1.")

        lines = records.read_partial(path)

        assert len(lines) == 2
        assert records.completed_tasks(lines, 1) == {("Q", 8, 0)}


class TestRunner:
    def test_identical_runs_give_identical_files(self, tmp_path):
        run_experiment(small_config(tmp_path / "a"), quiet=True)
        run_experiment(small_config(tmp_path / "b"), quiet=True)

        first = (tmp_path / "a" / records.FINAL_NAME).read_bytes()
        assert first == (tmp_path / "b" / records.FINAL_NAME).read_bytes()
        assert first.decode().splitlines()[0] == records.HEADER

    def test_worker_count_does_not_change_records(self, tmp_path):
        run_experiment(small_config(tmp_path / "one", workers=1), quiet=True)
        run_experiment(small_config(tmp_path / "two", workers=2), quiet=True)

        assert (tmp_path / "one" / records.FINAL_NAME).read_bytes() == (tmp_path / "two" / records.FINAL_NAME).read_bytes()

    def test_excited_cost_never_below_ground(self, tmp_path):
        manifest = run_experiment(small_config(tmp_path, sizes=[4], instances=30), quiet=True)
        frame = pd.read_csv(tmp_path / records.FINAL_NAME)

        assert manifest.completed == {"Q/4": 30}
        assert manifest.failures == []
        assert (frame["delta_e"] > 0).all()

    def test_resume_completes_only_missing_instances(self, tmp_path):
        reference = tmp_path / "reference"
        run_experiment(small_config(reference), quiet=True)

        resumed = tmp_path / "resumed"
        run_experiment(small_config(resumed, instances=10), quiet=True)
        partial = resumed / records.PARTIAL_NAME
        lines = partial.read_text().splitlines()
        # keep four instances and tear the next line in half
        kept = [line for line in lines[1:] if int(line.split(",")[2]) < 4]
        torn = next(line for line in lines[1:] if int(line.split(",")[2]) >= 4)
        partial.write_text("\n".join([records.HEADER, *kept]) + "\n" + torn[: len(torn) // 2])
        (resumed / records.FINAL_NAME).unlink()

        manifest = run_experiment(small_config(resumed), quiet=True)

        assert manifest.resumed_tasks == 4
        assert (resumed / records.FINAL_NAME).read_bytes() == (reference / records.FINAL_NAME).read_bytes()

    def test_other_config_in_same_directory_is_refused(self, tmp_path):
        run_experiment(small_config(tmp_path, instances=2), quiet=True)

        with pytest.raises(ConfigMismatch):
            run_experiment(small_config(tmp_path, instances=2, seed=99), quiet=True)

    def test_manifest_and_log_are_written(self, tmp_path):
        run_experiment(small_config(tmp_path, instances=2), quiet=True)
        manifest = RunManifest.model_validate_json((tmp_path / "manifest.json").read_text())

        assert manifest.finished
        assert manifest.expected == {"Q/8": 2}
        assert (tmp_path / "run.log").read_text()

    def test_manifest_counts_are_bounded(self):
        with pytest.raises(ValidationError):
            RunManifest(config_hash="x", version="0", expected={"Q/8": 1}, completed={"Q/8": 2})

    def test_epsilon_mode_rows(self, tmp_path):
        grid = [0.05, 0.1, 0.2, 0.4]
        run_experiment(small_config(tmp_path, sizes=[4], instances=3, mode="epsilon", epsilons=grid), quiet=True)
        lines = (tmp_path / records.FINAL_NAME).read_text().splitlines()[1:]
        summaries = [line for line in lines if records.is_instance_row(line)]

        assert len(summaries) == 3 * len(grid)
        for instance in range(3):
            overlaps = [float(s.split(",")[14]) for s in summaries if int(s.split(",")[2]) == instance]
            assert all(b <= a for a, b in zip(overlaps, overlaps[1:]))


def write_link_records(path, sizes=(8, 16, 32, 64, 128), instances=40):
    """Synthetic max-weight records with <S> ~ L, <R^2> ~ L^1.5 and <theta^2> = 0.25 + 0.5 ln L."""
    rows = []
    for L in sizes:
        for i in range(instances):
            offset = 0.01 * (i // 2 + 1) * (-1) ** i
            S = 2 * L * (1 + i % 3)
            common = dict(kind="Q", L=L, instance=i, excitation="max", ground_cost=0.36 * L * L / 2 + 0.01 * i, delta_e=0.7 + 0.01 * i)
            rows.append(ObservationRecord(
                **common,
                loop_index=0,
                S=S,
                R2=L**1.5 * (1 + 0.1 * (i % 5)),
                theta2_gauged=0.25 + 0.5 * math.log(L) + offset,
                theta2_raw=1.0,
                wx=1 if (i // 2) % 2 == 0 else 0,
                wy=0,
            ))
            rows.append(ObservationRecord(**common, S=S))
    records.write_final(path, [records.format_row(r) for r in rows])


def write_epsilon_records(path, L=20, instances=12, grid=np.geomspace(0.01, 0.9, 12)):
    rows = []
    for i in range(instances):
        scale = 0.5 + 0.04 * i
        for eps in grid:
            d = min(1.0, scale * eps**0.5)
            rows.append(ObservationRecord(
                kind="T", L=L, instance=i, excitation="epsilon", epsilon=float(eps),
                ground_cost=100.0, delta_e=(L * L / 2) * (1 + 0.05 * i) * eps**1.5 * scale**3, S=8,
                overlap=1 - d, distance=d,
            ))
    records.write_final(path, [records.format_row(r) for r in rows])


class TestReport:
    def test_synthetic_link_exponents(self, tmp_path):
        path = tmp_path / "records.csv"
        write_link_records(path)

        report = fit_report(path, n_boot=50)
        q = report.kinds[0]

        assert report.mode == "max"
        assert q.fits["alpha"].exponent == pytest.approx(1.0, abs=1e-9)
        assert q.fits["gamma"].exponent == pytest.approx(1.5, abs=1e-9)
        assert q.fits["kappa"].exponent == pytest.approx(2.0, abs=1e-9)
        assert q.fits["kappa_winding_only"].exponent == pytest.approx(2.0, abs=1e-9)
        assert q.consistency.exponents.d_f.value == pytest.approx(1.5, abs=1e-9)
        assert q.consistency.exponents.zeta_derived.value == pytest.approx(1 / 3, abs=1e-9)
        assert "zeta_fit" in q.missing
        assert q.densities[0].ground_cost_density.value == pytest.approx(0.36 + 0.01 * 19.5 / 32)
        assert q.densities[0].delta_e.value == pytest.approx(0.7 + 0.01 * 19.5)
        assert q.fits["stiffness"].exponent == pytest.approx(0.0, abs=1e-9)

    def test_report_renders_with_references(self, tmp_path):
        path = tmp_path / "records.csv"
        write_link_records(path)
        report = fit_report(tmp_path, n_boot=20)

        text = render_text(report)
        kv = render_key_values(report)

        assert "alpha" in text and "0.591" in text
        assert "skipped" in text
        assert "kind=Q mode=max name=alpha exponent=" in kv
        assert "name=d_f exponent=" in kv

    def test_synthetic_epsilon_exponents(self, tmp_path):
        path = tmp_path / "records.csv"
        write_epsilon_records(path)

        report = fit_report(path, n_boot=20)
        t = report.kinds[0]

        assert t.fits["beta"].exponent == pytest.approx(0.5, abs=1e-6)
        assert t.fits["tau"].exponent == pytest.approx(3.0, abs=1e-6)
        assert t.consistency.exponents.tau_from_beta.value == pytest.approx(3.0, abs=1e-5)
        assert t.departures[0].never == 0
        assert t.departures[0].threshold.value == pytest.approx(0.01)

    def test_empty_directory(self, tmp_path):
        with pytest.raises(InsufficientData):
            fit_report(tmp_path)

    def test_too_few_sizes_names_the_kind(self, tmp_path):
        path = tmp_path / "records.csv"
        write_link_records(path, sizes=(8, 16, 32))

        with pytest.raises(InsufficientData, match="Kind Q"):
            fit_report(path)

    def test_too_few_epsilons_names_the_stratum(self, tmp_path):
        path = tmp_path / "records.csv"
        write_epsilon_records(path, grid=np.geomspace(0.01, 0.9, 5))

        with pytest.raises(InsufficientData, match="T/20"):
            fit_report(path)

    def test_plot_data_files(self, tmp_path):
        path = tmp_path / "records.csv"
        write_link_records(path)

        written = write_plot_data(path, tmp_path / "plot")
        names = {p.name for p in written}

        assert {"ccdf_Q_L8.dat", "mean_S_Q.dat", "mean_R2_Q.dat", "theta2_Q.dat"} <= names
        data = np.loadtxt(tmp_path / "plot" / "mean_S_Q.dat")
        assert data.shape == (5, 2)


class TestCli:
    def test_count_prints_both_methods(self, capsys):
        assert app.main(["count", "8", "8"]) == 0

        lines = capsys.readouterr().out.splitlines()
        counts = [line for line in lines if "Z(8,8)" in line]
        assert len(counts) == 2
        assert all(line.endswith("12988816") for line in counts)

    def test_missing_config_is_a_usage_error(self, tmp_path):
        assert app.main(["run", "--config", str(tmp_path / "missing.cfg")]) == 2

    def test_unknown_flag_is_a_usage_error(self):
        assert app.main(["run", "--bogus"]) == 2

    def test_run_then_fit(self, tmp_path):
        out = tmp_path / "run"
        code = app.main(["--quiet", "run", "--kinds", "Q", "--sizes", "4,6,8,10", "--instances", "3", "--out", str(out)])

        assert code == 0
        assert (out / records.FINAL_NAME).exists()
        assert app.main(["fit", str(out), "--kv"]) == 0

    def test_fit_without_records_fails(self, tmp_path):
        assert app.main(["fit", str(tmp_path)]) == 1

    @pytest.mark.slow
    def test_validate_passes(self):
        assert app.main(["validate"]) == 0
