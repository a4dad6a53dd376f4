from types import SimpleNamespace

import numpy as np
import pytest

from convect_uq.errors import (
    BlowupError,
    ConfigError,
    DimensionError,
    EnsembleError,
    FieldFormatError,
)
from convect_uq.grid import make_grid, read_plane_csv, write_plane_csv
from convect_uq.sampling import SampleMatrix, normal_lhs
from convect_uq.solver.config import BoundarySpec, SolverConfig
from convect_uq.uq import CaseASpec, CaseBSpec, read_manifest, run_ensemble
from convect_uq.uq.ensemble import (
    FILE_KEYS,
    collect_planes,
    reference_outputs,
    sample_case,
    sample_outputs,
    write_manifest,
)


def fake_run(cfg, bc, grid):
    """Closed-form stand-in for the solver: conduction temperature profile
    (linear between the walls) plus smooth velocity fields keyed to the
    inputs, so outputs respond to (Ra, Pr) and to the strip values."""
    n = grid.n
    c = grid.cell_centers()
    x = c[:, None, None]
    hot = bc.hot_wall(grid)[None, :, :]
    theta = bc.cold_value + (hot - bc.cold_value) * x
    shape = np.sin(np.pi * c)[:, None, None] * np.ones((n, n, n))
    u = (cfg.ra / 1.0e6) * shape
    v = (cfg.pr / 7.5) * hot.mean() * shape
    w = np.zeros((n, n, n))
    return SimpleNamespace(u=u, v=v, w=w, theta=theta)


def case_b_spec():
    return CaseBSpec(strips=4, n_train=6, n_val=2, n_test=2, seed=3)


@pytest.fixture
def setup(tmp_path):
    grid = make_grid(8)
    cfg = SolverConfig(ra=1.0e6, pr=7.5)
    spec = case_b_spec()
    samples = normal_lhs(12, spec.means, spec.sigmas, seed=3)
    return SimpleNamespace(
        grid=grid, cfg=cfg, spec=spec, samples=samples, out=tmp_path / "ens"
    )


class TestSampleCase:
    def test_parameter_rows_set_ra_pr(self):
        spec = CaseASpec(mu_ra=1.0e5, level=4, order=3)
        cfg, bc = sample_case(spec, SolverConfig(), np.array([1.02e5, 7.31]))
        assert cfg.ra == 1.02e5 and cfg.pr == 7.31
        assert bc.strip_values is None
        assert bc.hot_value == 1.05 and bc.cold_value == 0.95

    def test_strip_rows_set_wall(self):
        cfg, bc = sample_case(
            case_b_spec(), SolverConfig(ra=1.0e4), np.array([1.0, 1.1, 1.0, 1.1])
        )
        assert cfg.ra == 1.0e6 and cfg.pr == 7.5  # pinned, not from base cfg
        assert np.array_equal(bc.strip_values, [1.0, 1.1, 1.0, 1.1])

    def test_unknown_spec_rejected(self):
        with pytest.raises(ConfigError):
            sample_case(object(), SolverConfig(), np.zeros(2))


class TestSampleOutputs:
    def test_conduction_profile_gives_unit_nusselt(self):
        grid = make_grid(8)
        bc = BoundarySpec()
        state = fake_run(SolverConfig(), bc, grid)
        planes, scalars = sample_outputs(state, bc, grid)
        assert np.allclose(planes["nu"], 1.0, atol=1e-12)
        assert scalars[0] == pytest.approx(1.0, abs=1e-12)
        # max |u| of the sine shape is its largest cell-center value
        assert scalars[3] == pytest.approx(
            (1.0e5 / 1.0e6) * np.sin(np.pi * grid.cell_centers()).max()
        )

    def test_midplane_slices_follow_z_and_keep_xy(self):
        grid = make_grid(8)
        bc = BoundarySpec()
        state = fake_run(SolverConfig(), bc, grid)
        planes, _ = sample_outputs(state, bc, grid)
        assert np.array_equal(planes["theta"], state.theta[:, :, 3])
        assert np.array_equal(planes["u"], state.u[:, :, 3])


class TestRunEnsemble:
    def test_fresh_sweep_completes(self, setup):
        man = run_ensemble(setup.spec, setup.samples, setup.cfg, setup.grid,
                           setup.out, run_fn=fake_run)
        assert man.n_samples == 12 and man.n_done == 12 and man.n_failed == 0
        assert [r.sample_id for r in man.rows] == list(range(12))
        assert (setup.out / "manifest.csv").exists()
        assert (setup.out / "samples.csv").exists()
        for row in man.rows:
            for name in row.files:
                assert (setup.out / name).exists()
            assert np.all(np.isfinite(row.scalars))

    def test_single_sample_matches_direct_run_bitwise(self, tmp_path):
        grid = make_grid(8)
        cfg = SolverConfig()
        spec = case_b_spec()
        sm = SampleMatrix(spec.means[None, :].copy(), seed=0,
                          means=spec.means, sigmas=spec.sigmas)
        man = run_ensemble(spec, sm, cfg, grid, tmp_path / "one",
                           run_fn=fake_run)
        run_cfg, bc = sample_case(spec, cfg, spec.means)
        planes, _ = sample_outputs(fake_run(run_cfg, bc, grid), bc, grid)
        write_plane_csv(tmp_path / "direct_nu.csv", planes["nu"], ("y", "z"), grid)
        ensemble_bytes = (tmp_path / "one" / man.rows[0].files[0]).read_bytes()
        assert ensemble_bytes == (tmp_path / "direct_nu.csv").read_bytes()

    def test_resume_skips_done_rows(self, setup):
        run_ensemble(setup.spec, setup.samples, setup.cfg, setup.grid,
                     setup.out, run_fn=fake_run)
        stamps = {
            p.name: p.stat().st_mtime_ns for p in setup.out.glob("sample_*.csv")
        }
        calls = []

        def counting(cfg, bc, grid):
            calls.append(1)
            return fake_run(cfg, bc, grid)

        man = run_ensemble(setup.spec, setup.samples, setup.cfg, setup.grid,
                           setup.out, run_fn=counting)
        assert calls == []
        assert man.n_done == 12
        after = {
            p.name: p.stat().st_mtime_ns for p in setup.out.glob("sample_*.csv")
        }
        assert after == stamps

    def test_resume_recomputes_only_deleted(self, setup):
        run_ensemble(setup.spec, setup.samples, setup.cfg, setup.grid,
                     setup.out, run_fn=fake_run)
        victim = setup.out / "sample_0002_theta.csv"
        victim.unlink()
        stamps = {
            p.name: p.stat().st_mtime_ns for p in setup.out.glob("sample_*.csv")
        }
        calls = []

        def counting(cfg, bc, grid):
            calls.append(1)
            return fake_run(cfg, bc, grid)

        man = run_ensemble(setup.spec, setup.samples, setup.cfg, setup.grid,
                           setup.out, run_fn=counting)
        assert len(calls) == 1
        assert man.n_done == 12
        assert victim.exists()
        for p in setup.out.glob("sample_*.csv"):
            if not p.name.startswith("sample_0002"):
                assert p.stat().st_mtime_ns == stamps[p.name]

    def test_corrupt_output_recomputed(self, setup):
        run_ensemble(setup.spec, setup.samples, setup.cfg, setup.grid,
                     setup.out, run_fn=fake_run)
        (setup.out / "sample_0005_u.csv").write_text("not,a,plane\n")
        calls = []

        def counting(cfg, bc, grid):
            calls.append(1)
            return fake_run(cfg, bc, grid)

        run_ensemble(setup.spec, setup.samples, setup.cfg, setup.grid,
                     setup.out, run_fn=counting)
        assert len(calls) == 1
        read_plane_csv(setup.out / "sample_0005_u.csv")

    def test_failed_sample_recorded_and_swept_on(self, setup):
        bad = setup.samples.values[7]

        def flaky(cfg, bc, grid):
            if np.array_equal(bc.strip_values, bad):
                raise BlowupError("synthetic divergence")
            return fake_run(cfg, bc, grid)

        man = run_ensemble(setup.spec, setup.samples, setup.cfg, setup.grid,
                           setup.out, run_fn=flaky)
        assert man.n_done == 11 and man.n_failed == 1
        row = man.rows[7]
        assert row.status == "failed"
        assert row.files == ("", "", "", "")
        assert np.all(np.isnan(row.scalars))

    def test_too_many_failures_aborts(self, setup):
        bad = {tuple(setup.samples.values[i]) for i in (1, 4)}

        def flaky(cfg, bc, grid):
            if tuple(bc.strip_values) in bad:
                raise BlowupError("synthetic divergence")
            return fake_run(cfg, bc, grid)

        with pytest.raises(EnsembleError):
            run_ensemble(setup.spec, setup.samples, setup.cfg, setup.grid,
                         setup.out, run_fn=flaky)
        # the sweep still finished and recorded everything before aborting
        man = read_manifest(setup.out / "manifest.csv")
        assert man.n_done == 10 and man.n_failed == 2

    def test_foreign_manifest_refused(self, setup):
        run_ensemble(setup.spec, setup.samples, setup.cfg, setup.grid,
                     setup.out, run_fn=fake_run)
        other = SolverConfig(ra=1.0e6, pr=7.5, steady_tol=1.0e-5)
        with pytest.raises(ConfigError):
            run_ensemble(setup.spec, setup.samples, other, setup.grid,
                         setup.out, run_fn=fake_run)

    def test_dimension_mismatch(self, setup):
        narrow = normal_lhs(4, [1.05] * 3, [0.003] * 3, seed=0)
        with pytest.raises(DimensionError):
            run_ensemble(setup.spec, narrow, setup.cfg, setup.grid, setup.out,
                         run_fn=fake_run)

    def test_worker_pool_matches_serial(self, setup, tmp_path):
        serial = run_ensemble(setup.spec, setup.samples, setup.cfg,
                              setup.grid, setup.out, run_fn=fake_run)
        pooled = run_ensemble(setup.spec, setup.samples, setup.cfg,
                              setup.grid, tmp_path / "pool", run_fn=fake_run,
                              workers=2)
        assert pooled.n_done == 12
        for a, b in zip(serial.rows, pooled.rows):
            assert np.array_equal(a.scalars, b.scalars)
            sa = (setup.out / a.files[0]).read_bytes()
            sb = (tmp_path / "pool" / b.files[0]).read_bytes()
            assert sa == sb


class TestManifestFormat:
    def test_round_trip(self, setup):
        man = run_ensemble(setup.spec, setup.samples, setup.cfg, setup.grid,
                           setup.out, run_fn=fake_run)
        back = read_manifest(setup.out / "manifest.csv")
        assert back.seed == man.seed and back.spec_hash == man.spec_hash
        for a, b in zip(man.rows, back.rows):
            assert a.sample_id == b.sample_id and a.status == b.status
            assert np.array_equal(a.inputs, b.inputs)
            assert np.array_equal(a.scalars, b.scalars)
            assert a.files == b.files

    def test_rows_keep_physical_units(self, setup):
        man = run_ensemble(setup.spec, setup.samples, setup.cfg, setup.grid,
                           setup.out, run_fn=fake_run)
        assert np.array_equal(man.inputs_matrix(), setup.samples.values)

    def test_rejects_gapped_ids(self, setup, tmp_path):
        man = run_ensemble(setup.spec, setup.samples, setup.cfg, setup.grid,
                           setup.out, run_fn=fake_run)
        man.rows[3].sample_id = 99
        bad = tmp_path / "bad.csv"
        write_manifest(bad, man)
        with pytest.raises(FieldFormatError):
            read_manifest(bad)

    def test_rejects_alien_files(self, tmp_path):
        p = tmp_path / "m.csv"
        p.write_text("sample_id,status\n")
        with pytest.raises(FieldFormatError):
            read_manifest(p)
        p.write_text("# seed=0 spec=ab\nsample_id,status,xi_1\n0,weird,1.0\n")
        with pytest.raises(FieldFormatError):
            read_manifest(p)


class TestCollectPlanes:
    def test_stacks_in_id_order(self, setup):
        man = run_ensemble(setup.spec, setup.samples, setup.cfg, setup.grid,
                           setup.out, run_fn=fake_run)
        nus = collect_planes(man, "nu")
        assert nus.shape == (12, 8, 8)
        direct, _ = read_plane_csv(setup.out / man.rows[4].files[0])
        assert np.array_equal(nus[4], direct)

    def test_unknown_key(self, setup):
        man = run_ensemble(setup.spec, setup.samples, setup.cfg, setup.grid,
                           setup.out, run_fn=fake_run)
        with pytest.raises(ConfigError):
            collect_planes(man, "pressure")


class TestReferenceOutputs:
    def test_strip_mean_is_uniform_wall(self):
        grid = make_grid(8)
        planes, scalars = reference_outputs(case_b_spec(), SolverConfig(),
                                            grid, run_fn=fake_run)
        # uniform 1.05 wall under the conduction profile: Nu = 1 exactly
        assert np.allclose(planes["nu"], 1.0, atol=1e-12)
        assert set(planes) == set(FILE_KEYS)
        assert scalars.shape == (6,)

    def test_parameter_mean(self):
        grid = make_grid(8)
        spec = CaseASpec(mu_ra=1.0e5, level=4, order=3)
        planes, _ = reference_outputs(spec, SolverConfig(), grid,
                                      run_fn=fake_run)
        assert planes["u"].max() == pytest.approx(
            0.1 * np.sin(np.pi * grid.cell_centers()).max()
        )
