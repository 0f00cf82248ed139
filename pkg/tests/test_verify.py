import json

import numpy as np
import pytest

from dilstab import verify as vf
from dilstab.model import ProcessSpec
from dilstab.simulate import SimGrid, parse_levy, path_sampler

FBM = ProcessSpec.fbm(0.7)
FLP = ProcessSpec.flp(0.75, parse_levy("cpois:rate=5,jumps=cexp:mu=1"))
MC = vf.McConfig(1500, SimGrid(1.0, 128, seed=5))


def wrong_process(other):
    return lambda grid: path_sampler(other, grid)


def test_mc_config_validation():
    with pytest.raises(ValueError):
        vf.McConfig(0)
    with pytest.raises(ValueError):
        vf.McConfig(10, tolerance_sigmas=0)


@pytest.mark.parametrize("spec", [FBM, FLP, ProcessSpec.deterministic("power", 0.5)])
def test_start_at_zero(spec):
    assert vf.verify_start_at_zero(spec, MC).passed


def test_start_at_zero_negative_control():
    r = vf.verify_start_at_zero(FBM, MC, vf.shifted_start_sampler(FBM))
    assert not r.passed and r.statistic == 1.0


def test_covariance_and_negative_control():
    pairs = [(0.25, 0.5), (1.0, 1.0)]
    assert vf.verify_covariance(FBM, pairs, MC).passed
    bad = vf.verify_covariance(FBM, pairs, MC, wrong_process(ProcessSpec.fbm(0.3)))
    assert not bad.passed and bad.statistic > 4


def test_covariance_off_grid_probe_is_added():
    r = vf.verify_covariance(ProcessSpec.fbm(0.5), [(0.3, 0.7)], MC)
    assert r.details["pairs"][0]["expected"] == pytest.approx(0.3)


def test_cumulant_scaling_fbm_and_negative_control():
    r = vf.verify_cumulant_scaling(ProcessSpec.fbm(0.6), [2, 4], [0.25, 0.5, 1.0], MC)
    assert r.passed
    assert r.details["orders"][1]["skipped"]  # Gaussian: no fourth cumulant to regress
    bad = vf.verify_cumulant_scaling(ProcessSpec.fbm(0.6), [2], [0.25, 0.5, 1.0], MC,
                                     wrong_process(ProcessSpec.fbm(0.2)))
    assert not bad.passed


def test_cumulant_scaling_nonpositive_kstat_fails():
    # FLP expects a positive fourth cumulant; Gaussian paths give ~0, often negative
    mc = vf.McConfig(400, SimGrid(1.0, 64, seed=3))
    gauss = wrong_process(ProcessSpec.fbm(0.75))
    r = vf.verify_cumulant_scaling(FLP, [4], [0.25, 0.5, 1.0], mc, gauss)
    assert not r.passed
    with pytest.raises(ValueError):
        vf.verify_cumulant_scaling(FLP, [5], [0.5, 1.0], mc)


def test_stationary_increments_and_negative_control():
    assert vf.verify_stationary_increments(FBM, [0.125], [0.0, 0.25, 0.5], MC).passed
    bad = vf.verify_stationary_increments(None, [0.125], [0.0, 0.25, 0.5], MC, vf.time_changed_bm_sampler)
    assert not bad.passed and bad.statistic > 10


def test_stationary_increments_flp():
    mc = vf.McConfig(3000, SimGrid(1.0, 64, seed=9))
    assert vf.verify_stationary_increments(FLP, [0.25], [0.0, 0.5], mc).passed


def test_kolmogorov_and_negative_control():
    r = vf.verify_kolmogorov_bound(ProcessSpec.fbm(0.6), 2, [0.25, 0.5], MC)
    assert r.passed and r.details["dominance"]["ok"]
    assert r.details["lags"][0]["expected"] == pytest.approx(0.25**1.2)
    bad = vf.verify_kolmogorov_bound(ProcessSpec.fbm(0.6), 2, [0.25, 0.5], MC,
                                     wrong_process(ProcessSpec.fbm(0.6, var1=1.5)))
    assert not bad.passed
    with pytest.raises(ValueError):
        vf.verify_kolmogorov_bound(FBM, 3, [0.5], MC)


def test_dominance_grid_flp():
    d = vf.dominance_grid(FLP, 4)
    assert d["ok"] and len(d["h"]) == 999 and d["max_ratio"] <= 1


def test_reports_are_reproducible_and_json_ready():
    a = vf.verify_covariance(FBM, [(0.5, 1.0)], MC).to_dict()
    b = vf.verify_covariance(FBM, [(0.5, 1.0)], vf.McConfig(1500, MC.grid, workers=3)).to_dict()
    assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)
    assert set(a) >= {"check_id", "statistic", "expected", "tolerance", "pass", "sample_size", "seed", "notes"}


def test_doubling_paths_does_not_flip_clear_passes():
    """Flakiness guard: a pass with a wide margin survives doubling the sample."""
    checked = 0
    for seed in range(10):
        small = vf.verify_covariance(FBM, [(0.5, 1.0), (1.0, 1.0)], vf.McConfig(500, SimGrid(1.0, 64, seed=seed)))
        if small.passed and small.statistic <= small.tolerance / 2:
            checked += 1
            big = vf.verify_covariance(FBM, [(0.5, 1.0), (1.0, 1.0)],
                                       vf.McConfig(1000, SimGrid(1.0, 64, seed=seed + 1000)))
            assert big.passed
    assert checked >= 5


def test_discrimination_power_is_exact():
    mc = vf.McConfig(5, SimGrid(1.0, 2**14, seed=1))
    r = vf.discrimination_experiment(0.6, 0.8, "power", mc)
    assert r.passed and r.statistic == 1.0 and r.details["undecided_rate"] == 0.0
    assert r.details["labels"] == [["first"] * 5, ["second"] * 5]


def test_discrimination_null_control_never_passes():
    mc = vf.McConfig(40, SimGrid(1.0, 2**12, seed=1))
    grids = vf.default_design("fbm", steps=2**12, anchors=8)
    r = vf.discrimination_experiment(0.7, 0.7, "fbm", mc, grids)
    assert not r.passed and "null control" in r.notes
    assert len(r.details["labels"][0]) == 40


def test_default_design():
    fan = vf.default_design("fbm")
    assert len(fan) == 64 and fan[0].count == 27 and fan[-1].anchor < 0.3
    single = vf.default_design("power")
    assert len(single) == 1 and single[0].anchor == 0.0
    with pytest.raises(ValueError):
        vf.default_design("fbm", span=0.5)
    with pytest.raises(ValueError):
        vf.family_spec("nope", 0.5)


def test_side_seeds_differ():
    assert vf.side_seed(1, 0) != vf.side_seed(1, 1) != vf.side_seed(2, 1)
    assert vf.side_seed(1, 0) == vf.side_seed(1, 0)
