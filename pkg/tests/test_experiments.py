import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from modaldiv.experiments import (
    DESK_SWEEP_MM,
    OUTPUT_DIR_ENV,
    PlanValidationError,
    builtin_plan,
    crossing_r0,
    curve_csv,
    distance_gain_table,
    load_config,
    make_plan,
    read_curve_csv,
    render_plot_data,
    run_curve,
    run_sweep,
)
from modaldiv.modes import ModeSpec
from modaldiv.turbulence import AtmosphereModel

ATM = AtmosphereModel(1e-14, 660e-9)


def tiny(plan, bits=200, screens=4):
    return replace(plan, link=replace(plan.link, bits_per_screen=bits, n_screens=screens))


class TestPlans:
    @pytest.mark.parametrize("name,labels,egc", [("paper-n4", ["HG22", "LG21"], "EGC2221"),
                                                 ("paper-n8", ["HG44", "LG61"], "EGC4461")])
    def test_builtins(self, name, labels, egc):
        p = builtin_plan(name)
        p.validate()
        assert p.labels == labels and p.diversity_label == egc
        assert [round(r * 1e3, 6) for r in p.r0_sweep] == list(DESK_SWEEP_MM)
        assert (p.link.bits_per_screen, p.link.n_screens) == (10_000, 256)
        assert p.mode_pair[0].waist == p.mode_pair[1].waist

    def test_full_scale(self):
        p = builtin_plan("paper-n4", full_scale=True)
        assert p.r0_sweep[0] == pytest.approx(1e-4)
        assert (p.link.bits_per_screen, p.link.n_screens) == (1_000_000, 1024)

    def test_beam_diameter(self):
        assert builtin_plan("paper-n4").beam_diameter == pytest.approx(2.8e-3, rel=1e-12)

    def test_unknown(self):
        with pytest.raises(KeyError):
            builtin_plan("paper-n6")

    def test_rejects_non_orthogonal_pair(self):
        p = make_plan("bad", [ModeSpec.hg(2, 2), ModeSpec.lg(4, 0)])
        with pytest.raises(PlanValidationError, match="overlap"):
            p.validate()

    @pytest.mark.parametrize("sweep", [(2.0, 1.0), (1.0, 1.0), (0.05, 1.0), (1.0, 60.0)])
    def test_rejects_bad_sweeps(self, sweep):
        base = builtin_plan("paper-n4")
        with pytest.raises(PlanValidationError):
            replace(base, r0_sweep=tuple(x * 1e-3 for x in sweep)).validate()

    def test_rejects_mismatched_waist(self):
        base = builtin_plan("paper-n4")
        pair = (base.mode_pair[0], ModeSpec.lg(2, 1, 0.5e-3))
        with pytest.raises(PlanValidationError):
            replace(base, mode_pair=pair).validate()


class TestRunSweep:
    def test_single_point_one_row(self, tmp_path):
        p = tiny(replace(builtin_plan("paper-n4"), r0_sweep=(5e-3,)))
        run_sweep(p, csv_path=tmp_path / "one.csv")
        lines = (tmp_path / "one.csv").read_text().splitlines()
        assert lines[0] == "r0,SR,HG22,LG21,EGC,bits,screens"
        assert len(lines) == 2 and lines[1].startswith("5,")

    def test_reproducible_bytes(self, tmp_path):
        p = tiny(replace(builtin_plan("paper-n4"), r0_sweep=(1e-3, 4e-3, 1.7e-2)))
        run_sweep(p, csv_path=tmp_path / "a.csv")
        run_sweep(p, workers=2, csv_path=tmp_path / "b.csv")
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()

    def test_outputs_field_used(self, tmp_path):
        p = tiny(replace(builtin_plan("paper-n4"), r0_sweep=(5e-3,), outputs=(str(tmp_path / "o" / "x.csv"),)))
        run_sweep(p)
        assert (tmp_path / "o" / "x.csv").exists()

    def test_zero_ber_rendered_as_bound(self):
        p = tiny(replace(builtin_plan("paper-n4", noise_sigma=0.0), r0_sweep=(4e-2,)))
        text = curve_csv(p, run_curve(p))
        assert "<0.00125" in text.splitlines()[1]

    def test_invalid_plan_not_run(self):
        p = make_plan("bad", [ModeSpec.hg(2, 2), ModeSpec.lg(4, 0)])
        with pytest.raises(PlanValidationError):
            run_sweep(p)

    def test_csv_round_trip(self, tmp_path):
        p = tiny(replace(builtin_plan("paper-n4"), r0_sweep=(1e-3, 5e-3)))
        run_sweep(p, csv_path=tmp_path / "c.csv")
        r0, series = read_curve_csv(tmp_path / "c.csv")
        np.testing.assert_allclose(r0, [1e-3, 5e-3])
        assert list(series) == ["HG22", "LG21", "EGC"]


class TestDistanceGain:
    @pytest.mark.parametrize("siso,div,gain", [(16.6, 12.8, 54), (10.2, 7.4, 71), (4.5, 2.68, 137)])
    def test_table_pairs(self, siso, div, gain):
        # straight-line log-BER curves that cross 1e-2 at the given r0
        r0 = np.linspace(1, 20, 39) * 1e-3
        curve = lambda x0: (r0, 1e-2 * np.exp(-(r0 - x0 * 1e-3) / 2e-3))
        row = distance_gain_table(curve(siso), curve(div), [1e-2], ATM)[0]
        assert row.r0_siso == pytest.approx(siso * 1e-3, rel=1e-9)
        assert row.r0_div == pytest.approx(div * 1e-3, rel=1e-9)
        assert row.gain_percent == pytest.approx(gain, abs=1)

    def test_identical_curves(self):
        r0 = np.array([1, 2, 4, 8, 16]) * 1e-3
        ber = np.array([0.4, 0.3, 0.1, 0.03, 0.01])
        for row in distance_gain_table((r0, ber), (r0, ber), [0.35, 0.2, 0.05, 0.01], ATM):
            assert row.gain_percent == pytest.approx(0.0, abs=1e-9)

    def test_out_of_range_not_extrapolated(self):
        r0 = np.array([1, 2, 4]) * 1e-3
        ber = np.array([0.4, 0.2, 0.1])
        rows = distance_gain_table((r0, ber), (r0, ber), [0.45, 0.05, 0.0], ATM)
        assert not any(r.achievable for r in rows)
        assert all(r.gain_percent is None for r in rows)

    @settings(max_examples=30)
    @given(st.floats(1e-16, 1e-12), st.floats(400e-9, 2e-6))
    def test_scale_free(self, cn2, wavelength):
        r0 = np.array([1, 2, 4, 8]) * 1e-3
        a, b = np.array([0.4, 0.2, 0.1, 0.05]), np.array([0.3, 0.12, 0.06, 0.02])
        ref = distance_gain_table((r0, a), (r0, b), [0.1], ATM)[0].gain_percent
        got = distance_gain_table((r0, a), (r0, b), [0.1], AtmosphereModel(cn2, wavelength))[0].gain_percent
        assert got == pytest.approx(ref, rel=1e-9)


class TestCrossing:
    def test_nodes_and_log_interpolation(self):
        r0 = [1.0, 2.0, 3.0]
        ber = [0.4, 0.1, 0.025]
        assert crossing_r0(r0, ber, 0.1) == 2.0
        assert crossing_r0(r0, ber, 0.2) == pytest.approx(1.5)
        assert crossing_r0(r0, ber, 0.05) == pytest.approx(2.5)

    def test_monotone_envelope(self):
        # a Monte-Carlo bump back up is ignored
        assert crossing_r0([1, 2, 3, 4], [0.4, 0.1, 0.12, 0.05], 0.11) < 2.0

    def test_zero_points_dropped(self):
        assert crossing_r0([1, 2, 3], [0.1, 0.01, 0.0], 0.001) is None

    @given(st.lists(st.floats(1e-4, 0.5), min_size=2, max_size=12), st.floats(1e-4, 0.5))
    def test_result_within_sweep(self, bers, target):
        r0 = np.arange(1, len(bers) + 1, dtype=float)
        x = crossing_r0(r0, bers, target)
        if x is not None:
            assert r0[0] <= x <= r0[-1]


class TestPlotData:
    def test_rows_and_columns(self, tmp_path):
        p = tiny(replace(builtin_plan("paper-n4"), r0_sweep=(1e-3, 3e-3, 9e-3)))
        data, script = render_plot_data(p, run_curve(p), tmp_path / "plot.csv")
        lines = data.read_text().splitlines()
        assert len(lines) == 4
        assert lines[0].split(",")[:4] == ["r0", "HG22", "LG21", "EGC2221"]
        assert "logscale y" in script.read_text() and "plot.csv" in script.read_text()

    def test_empty_curve(self, tmp_path):
        with pytest.raises(ValueError):
            render_plot_data(builtin_plan("paper-n4"), [], tmp_path / "x.csv")


class TestConfig:
    def write(self, tmp_path, body):
        path = tmp_path / "plan.ini"
        path.write_text(body)
        return path

    def test_overrides(self, tmp_path, monkeypatch):
        monkeypatch.delenv(OUTPUT_DIR_ENV, raising=False)
        path = self.write(tmp_path, """
[plan]
name = paper-n8
workers = 2
output_dir = results

[overrides]
bits = 123
screens = 7
seed = 11
noise = 0.1
gamma = 0.4
grid = 128
r0_mm = 1, 2, 5
""")
        s = load_config(path)
        link = s.plan.link
        assert s.plan.name == "paper-n8" and s.workers == 2
        assert (link.bits_per_screen, link.n_screens, link.master_seed) == (123, 7, 11)
        assert link.noise_sigma == 0.1 and link.threshold_fraction == 0.4
        assert link.turbulence.grid.samples_per_axis == 128
        assert s.plan.r0_sweep == pytest.approx((1e-3, 2e-3, 5e-3))
        assert str(s.output_dir) == "results"
        s.plan.validate()

    def test_env_overrides_output_dir_only(self, tmp_path, monkeypatch):
        monkeypatch.setenv(OUTPUT_DIR_ENV, str(tmp_path / "env"))
        path = self.write(tmp_path, "[plan]\nname = paper-n4\noutput_dir = cfg\n[overrides]\nbits = 50\n")
        s = load_config(path)
        assert s.output_dir == tmp_path / "env"
        assert s.plan.link.bits_per_screen == 50

    def test_unknown_key(self, tmp_path):
        path = self.write(tmp_path, "[plan]\nname = paper-n4\n[overrides]\ncolour = blue\n")
        with pytest.raises(PlanValidationError, match="colour"):
            load_config(path)

    def test_missing_name(self, tmp_path):
        with pytest.raises(PlanValidationError):
            load_config(self.write(tmp_path, "[plan]\n"))


class TestHardwareExamples:
    """Qualitative claims from the hardware results, checked on the desk sweep."""

    @pytest.mark.xfail(strict=False, reason="diversity tracks the SISO arms in this channel model; see decisions ledger")
    def test_diversity_beats_lg_near_8_percent(self, n4_desk):
        curve, _, _ = n4_desk
        r = min(curve, key=lambda x: abs(x.ber(1) - 0.08))
        assert r.ber(2) < r.ber(1) - 3 * r.paired_stderr(2, 1)

    @pytest.mark.xfail(strict=False, reason="diversity tracks the SISO arms in this channel model; see decisions ledger")
    def test_average_improvement_over_lg(self, n4_desk):
        curve, _, _ = n4_desk
        gain = np.mean([(r.ber(1) - r.ber(2)) / r.ber(1) for r in curve])
        assert abs(100 * gain - 23) <= 15

    def test_sweep_shape(self, n4_desk):
        curve, text, _ = n4_desk
        assert len(text.splitlines()) == 13
        # strong turbulence saturates near 0.5; the weak end sits at the noise floor
        assert curve[0].ber(0) > 0.45 and curve[-1].ber(0) < 0.05
