import math

import numpy as np
import pytest

from deadtime_qkd import model, simulator, sweep
from deadtime_qkd._rng import derive_seed
from deadtime_qkd.errors import ParameterError
from deadtime_qkd.model import LinkParams
from deadtime_qkd.simulator import Mode, SimConfig, SweepCellError


def _run(loss, k, n, *, eps=0.0, mode=Mode.SECURE, seed=0):
    return simulator.run(SimConfig.from_loss(loss, k, eps, n_slots=n, seed=seed, mode=mode))


class TestSimConfig:
    @pytest.mark.parametrize("n", [0, -5, 1.5, 1 << 62])
    def test_bad_slot_counts(self, n):
        with pytest.raises(ParameterError):
            SimConfig(LinkParams(0.01, 3), n)

    def test_bad_seed(self):
        with pytest.raises(ParameterError):
            SimConfig(LinkParams(0.01, 3), 10, seed=-1)

    def test_mode_from_string(self):
        assert SimConfig(LinkParams(0.01, 3), 10, mode="naive").mode is Mode.NAIVE
        with pytest.raises(ValueError):
            SimConfig(LinkParams(0.01, 3), 10, mode="greedy")

    def test_unknown_backend(self):
        with pytest.raises(ParameterError):
            simulator.run(SimConfig(LinkParams(0.01, 3), 10), backend="gpu")


class TestAgainstModel:
    @pytest.mark.parametrize("loss,k", [(0.1, 100), (0.05, 30), (0.01, 500), (1.0, 3)])
    def test_secure_rate(self, loss, k):
        res = _run(loss, k, 20_000_000, seed=k)
        expected = model.sbr_norm(loss / 8, k)
        assert abs(res.sifted_per_slot - expected) < 4 * res.sifted_per_slot_stderr + 1e-4 * expected

    @pytest.mark.parametrize("loss,k,eps", [(0.1, 100, 0.0), (0.02, 200, 0.0), (0.1, 40, 1e-3), (0.05, 50, 0.01)])
    def test_idle_fraction(self, loss, k, eps):
        # photons arrive independently of the detector state, so the share
        # finding their basis idle estimates p00
        res = _run(loss, k, 5_000_000, eps=eps, seed=3)
        expected = model.p00_noisy(LinkParams.from_loss(loss, k, eps), "exact")
        assert abs(res.idle_fraction - expected) < 0.01 * expected

    @pytest.mark.parametrize("loss,k", [(0.1, 20), (0.5, 10)])
    def test_sequence_lengths(self, loss, k):
        res = _run(loss, k, 20_000_000, seed=8)
        dist = model.seq_len_dist(loss / 8, k, 6)
        n_seq = res.completed_sequences
        for n in range(1, 7):
            frac = res.seq_fraction(n)
            se = math.sqrt(dist[n] * (1 - dist[n]) / n_seq)
            assert abs(frac - dist[n]) < 5 * se + 1e-6

    def test_self_disabling_rate(self):
        # one detector per basis fires with L/2 while alive
        loss, k = 0.1, 60
        res = _run(loss, k, 20_000_000, mode=Mode.SELF_DISABLING, seed=4)
        expected = (loss / 2) / (1 + k * loss / 2)
        assert abs(res.sifted_per_slot - expected) < 5 * res.sifted_per_slot_stderr
        assert abs(res.p_trans - 0.5) < 0.01

    def test_noise_errors(self):
        res = _run(0.01, 10, 5_000_000, eps=0.01)
        assert res.noise_clicks > 0
        assert res.bit_errors > 0

    def test_stderr_tracks_seed_spread(self):
        rates = [_run(0.1, 100, 1_000_000, seed=s).sifted_per_slot for s in range(12)]
        se = _run(0.1, 100, 1_000_000, seed=99).sifted_per_slot_stderr
        spread = np.std(rates, ddof=1)
        assert 0.5 < se / spread < 2.0

    def test_batches_are_cumulative(self):
        res = _run(0.1, 10, 100_003)
        assert len(res.batch_sifted) == 32
        assert list(res.batch_sifted) == sorted(res.batch_sifted)
        assert res.batch_sifted[-1] == res.sifted

    def test_tiny_run(self):
        res = _run(0.1, 10, 5)
        assert len(res.batch_sifted) == 5
        assert res.sifted <= 5


class TestSweepRunner:
    def _configs(self):
        return [SimConfig.from_loss(0.1, k, n_slots=50_000, seed=derive_seed(3, i)) for i, k in enumerate([1, 10, 100])]

    def test_order_preserved_across_jobs(self):
        serial = simulator.run_sweep(self._configs(), jobs=1)
        parallel = simulator.run_sweep(self._configs(), jobs=2)
        assert [r.signature() for r in serial] == [r.signature() for r in parallel]
        assert [r.config.params.k for r in parallel] == [1, 10, 100]

    def test_failed_cell_reported(self):
        with pytest.raises(SweepCellError) as info:
            simulator.run_sweep(self._configs(), backend="bogus")
        assert info.value.index == 0
        out = simulator.run_sweep(self._configs(), backend="bogus", raise_errors=False)
        assert all(isinstance(r, SweepCellError) for r in out)

    def test_empty(self):
        with pytest.raises(ParameterError):
            simulator.run_sweep([])

    def test_reseeding(self):
        cfgs = simulator.seeded_configs(self._configs(), 42)
        assert [c.seed for c in cfgs] == [derive_seed(42, i) for i in range(3)]


class TestSweepSpec:
    def test_float_lists(self):
        assert sweep.parse_float_list("-30:-10:10") == [-30.0, -20.0, -10.0]
        assert sweep.parse_float_list("1, 2.5") == [1.0, 2.5]
        with pytest.raises(ParameterError):
            sweep.parse_float_list("1:2:0")

    def test_k_lists(self):
        assert sweep.parse_k_list("0,1,5") == [0, 1, 5]
        assert sweep.parse_k_list("0:10:5") == [0, 5, 10]
        geo = sweep.parse_k_list("geom:0.1:1000:25")
        assert geo == sorted(set(geo)) and geo[0] == 0 and geo[-1] == 1000
        with pytest.raises(ParameterError):
            sweep.parse_k_list("2.5")
        with pytest.raises(ParameterError):
            sweep.parse_k_list("-1")

    def test_dead_time_rounding(self):
        assert sweep.round_dead_time(100, 1e9) == (100, pytest.approx(100.0))
        k, raw = sweep.round_dead_time(47, 1e8)
        assert k == 5 and raw == pytest.approx(4.7)
        with pytest.raises(ParameterError):
            sweep.round_dead_time(0, 1e9)

    def test_rate_grid(self):
        spec = sweep.SweepSpec(loss_db=(-10.0,), dead_time_ns=50.0, rate_hz=(1e8, 1e9))
        assert [c.k for c in spec.cells()] == [5, 50]
        assert spec.cells()[0].k_raw == pytest.approx(5.0)

    def test_cell_order_and_seeds(self):
        spec = sweep.SweepSpec(loss_db=(-10.0, -20.0), k=(1, 2), modes=("naive", "secure"), seed=9)
        cells = spec.cells()
        assert [(round(c.loss_db), c.mode.value, c.k) for c in cells][:3] == [
            (-10, "naive", 1),
            (-10, "naive", 2),
            (-10, "secure", 1),
        ]
        assert [c.seed for c in spec.configs()] == [derive_seed(9, i) for i in range(8)]

    def test_min_sifted_sizes_cells(self):
        spec = sweep.SweepSpec(loss_db=(-20.0,), k=(100,), n_slots=10, min_sifted=10_000, mc=True)
        (cell,) = spec.cells()
        assert cell.n_slots * model.sbr_norm(0.00125, 100) >= 10_000

    @pytest.mark.parametrize(
        "kw",
        [
            dict(loss_db=(-10.0,), loss=(0.1,), k=(1,)),
            dict(loss_db=(-10.0,), k=(1,), rate_hz=(1e9,), dead_time_ns=10.0),
            dict(loss_db=(-10.0,), rate_hz=(1e9,)),
        ],
    )
    def test_conflicts(self, kw):
        with pytest.raises(ParameterError):
            sweep.SweepSpec(**kw)

    def test_empty_grid(self):
        with pytest.raises(ParameterError):
            sweep.SweepSpec(loss_db=(-10.0,)).cells()

    def test_presets(self):
        assert set(sweep.PRESETS) == {"fig1", "fig3", "fig4", "fig5"}
        assert sweep.PRESETS["fig1"].modes == (Mode.NAIVE,)
        assert sweep.PRESETS["fig5"].mc and not sweep.PRESETS["fig3"].mc

    def test_config_file(self, tmp_path):
        path = tmp_path / "grid.cfg"
        path.write_text("# grid\nloss-db = -10, -20\nk = 1:3:1  # inline\n\n")
        assert sweep.read_config_file(path) == {"loss_db": "-10, -20", "k": "1:3:1"}
        path.write_text("nonsense\n")
        with pytest.raises(ParameterError):
            sweep.read_config_file(path)


class TestRows:
    def test_model_row(self):
        cell = sweep.Cell(loss=0.1, k=100, eps=0.0, mode=Mode.SECURE, n_slots=1)
        row = sweep.model_row(cell)
        assert row.p00_model == pytest.approx(model.p00(0.0125, 100), rel=1e-12)
        assert row.sbr_norm_model == pytest.approx(model.sbr_norm(0.0125, 100), rel=1e-15)
        assert len(row.t) == 6
        assert row.sbr_norm_mc is None

    def test_csv(self):
        cell = sweep.Cell(loss=0.1, k=100, eps=0.0, mode=Mode.SECURE, n_slots=1000)
        res = simulator.run(SimConfig(cell.params, 1000, seed=1))
        text = sweep.rows_to_csv([sweep.result_row(cell, res), sweep.model_row(cell)])
        lines = text.splitlines()
        assert lines[0].split(",") == list(sweep.CSV_COLUMNS)
        first = dict(zip(sweep.CSV_COLUMNS, lines[1].split(",")))
        assert int(first["sifted_count"]) == res.sifted
        assert float(first["sbr_norm_model"]) == model.sbr_norm(0.0125, 100)
        second = dict(zip(sweep.CSV_COLUMNS, lines[2].split(",")))
        assert second["sbr_norm_mc"] == ""

    def test_error_row(self):
        cell = sweep.Cell(loss=0.1, k=1, eps=0.0, mode=Mode.SECURE, n_slots=10)
        row = sweep.result_row(cell, SweepCellError(4, RuntimeError("boom")))
        assert "boom" in row.error and row.sifted_count is None
