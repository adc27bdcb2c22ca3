import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qrange.errors import InvalidGridError, InvalidParameterError, UnboundedOptimumError
from qrange.snr import (
    CONSTANT_TERMS,
    INVERSE_TERMS,
    TERM_LABELS,
    SystemParams,
    all_pairings_params,
    noise_breakdown,
    optimal_channels,
    signal_count,
    snr,
    snr_sweep,
)

FIG4 = SystemParams(
    pair_rate=5e5,
    dark_rate=500.0,
    background_density=1e5,
    bandwidth=200.0,
    gain=1e-3,
    bin_width=0.5e-9,
    integration_time=1.0,
)


def oracle_terms(cp, cs, cd, B0, dl, Q, dt, T):
    # written out term by term, independent of the package code
    return {
        "N_dd": cd * cd * dt * T,
        "N_dc": cd * Q * cp * dt * T,
        "N_ds": cd * Q * cs * dt * T,
        "N_dB": cd * B0 * dl * dt * T,
        "N_cd": cd * cp * dt * T,
        "N_sd": cd * cs * dt * T,
        "N_Bd": 0.0,
        "N_cB": cp * B0 * dl * dt * T,
        "N_sB": cs * B0 * dl * dt * T,
        "N_BB": 0.0,
        "N_Bs": 0.0,
        "N_Bc": 0.0,
        "N_cs": cp * Q * cs * dt * T,
        "N_sc": cs * Q * cp * dt * T,
        "N_ss": Q * cs * cs * dt * T,
    }


def rate(hi, lo=1e-3):
    # zero or a physical magnitude; subnormal rates only test float underflow
    return st.one_of(st.just(0.0), st.floats(lo, hi))


params_st = st.builds(
    SystemParams,
    pair_rate=rate(1e7),
    unpaired_rate=rate(1e7),
    dark_rate=rate(1e5),
    background_density=rate(1e9),
    bandwidth=rate(500),
    gain=rate(1.0, 1e-9),
    bin_width=st.floats(1e-12, 1e-6),
    integration_time=st.floats(1e-3, 100),
    channels=st.integers(1, 10_000),
)


def test_signal_count_examples():
    assert signal_count(FIG4) == pytest.approx(500.0, rel=1e-15)
    assert signal_count(FIG4.replace(gain=0.0)) == 0.0
    assert signal_count(FIG4.replace(pair_rate=0.0)) == 0.0


def test_noise_examples():
    nb = noise_breakdown(FIG4)
    assert nb.per_term["N_dd"] == pytest.approx(1.25e-4, rel=1e-12)
    assert nb.per_term["N_cB"] == pytest.approx(5e3, rel=1e-12)
    zero = noise_breakdown(SystemParams(pair_rate=0.0))
    assert all(v == 0.0 for v in zero.per_term.values())


def test_term_labels_complete():
    assert set(noise_breakdown(FIG4).per_term) == set(TERM_LABELS)


@settings(max_examples=200, deadline=None)
@given(params_st)
def test_terms_match_oracle(p):
    nb = noise_breakdown(p)
    ref = oracle_terms(
        p.pair_rate, p.unpaired_rate, p.dark_rate, p.background_density, p.bandwidth, p.gain, p.bin_width,
        p.integration_time,
    )
    for k, v in ref.items():
        assert nb.per_term[k] == pytest.approx(v, rel=1e-12, abs=0.0)
        assert nb.per_term[k] >= 0
    assert nb.N_c == pytest.approx(sum(ref[k] for k in CONSTANT_TERMS), rel=1e-12)
    assert nb.N_i == pytest.approx(sum(ref[k] for k in INVERSE_TERMS), rel=1e-12)
    assert nb.N_p == pytest.approx(ref["N_dd"], rel=1e-12)


def test_inverse_scaling_with_channels():
    nb = noise_breakdown(FIG4)
    for n in (1, 3, 17.5, 1000):
        assert nb.noise(n) - nb.N_c - n * nb.N_p == pytest.approx(nb.N_i / n, rel=1e-12)


@pytest.mark.parametrize(
    "bad",
    [dict(pair_rate=-1.0), dict(pair_rate=1.0, gain=1.5), dict(pair_rate=1.0, gain=-0.1),
     dict(pair_rate=1.0, bin_width=0.0), dict(pair_rate=1.0, integration_time=0.0),
     dict(pair_rate=1.0, channels=0), dict(pair_rate=1.0, channels=2.5), dict(pair_rate=float("nan"))],
)  # fmt: skip
def test_invalid_params_rejected(bad):
    with pytest.raises(InvalidParameterError):
        SystemParams(**bad)


def test_heralding_efficiency_roundtrip():
    p = SystemParams.with_heralding_efficiency(5e4, 0.25)
    assert p.unpaired_rate == pytest.approx(1.5e5)
    assert p.heralding_efficiency == pytest.approx(0.25)
    with pytest.raises(InvalidParameterError):
        SystemParams.with_heralding_efficiency(5e4, 0.0)


def test_snr_zero_cases():
    assert snr(FIG4.replace(gain=0.0)) == 0.0
    assert snr(SystemParams(pair_rate=0.0)) == 0.0


def test_snr_fig4_ordering_at_reference_point():
    vals = [snr(FIG4, n) for n in (1, 5, 25, 125, 625)]
    assert all(a < b for a, b in zip(vals, vals[1:]))


def test_optimal_channels_fig4():
    assert optimal_channels(FIG4) == pytest.approx(math.sqrt(5e5 * 1e5 * 200 / 500**2), rel=1e-12)
    assert optimal_channels(FIG4) == pytest.approx(6324.555, abs=1e-3)


def test_optimal_channels_unit_when_balanced():
    # only dark counts and background: N_i = c_p B dl dt T, N_p = c_d^2 dt T
    p = SystemParams(pair_rate=100.0, dark_rate=10.0, background_density=1.0, bandwidth=1.0, gain=0.0)
    assert optimal_channels(p) == pytest.approx(1.0)


def test_optimal_channels_unbounded():
    with pytest.raises(UnboundedOptimumError):
        optimal_channels(FIG4.replace(dark_rate=0.0))


def test_optimum_is_scan_maximum():
    n = np.arange(1, 100_001)
    nb = noise_breakdown(FIG4)
    vals = nb.S / np.sqrt(nb.S + nb.N_c + n * nb.N_p + nb.N_i / n)
    assert abs(int(n[np.argmax(vals)]) - optimal_channels(FIG4)) < 1


@settings(max_examples=100, deadline=None)
@given(params_st)
def test_unimodal_in_channels(p):
    nb = noise_breakdown(p)
    if nb.N_p <= 0 or nb.N_i <= 0 or nb.S <= 0:
        return
    n_opt = optimal_channels(p)
    below = np.unique(np.clip(np.geomspace(1, max(n_opt, 1.0), 20), 1, None))
    above = np.geomspace(max(n_opt, 1.0), max(n_opt, 1.0) * 1e3, 20)
    sb = [snr(p, n) for n in below]
    sa = [snr(p, n) for n in above]
    # tiny relative slack: near n_opt the curve is flat to rounding
    assert all(b >= a * (1 - 1e-12) for a, b in zip(sb, sb[1:]))
    assert all(b <= a * (1 + 1e-12) for a, b in zip(sa, sa[1:]))


def test_noise_free_limit_is_sqrt_signal():
    p = SystemParams(pair_rate=1e4, gain=0.5)
    assert snr(p) == pytest.approx(math.sqrt(5e3), rel=1e-15)


def test_doubling_integration_time():
    p = FIG4.replace(background_density=0.0, dark_rate=1e-3, gain=0.5)
    q = p.replace(integration_time=2.0)
    a, b = noise_breakdown(p), noise_breakdown(q)
    for k in TERM_LABELS:
        assert b.per_term[k] == pytest.approx(2 * a.per_term[k], rel=1e-12)
    # S dominates here, so SNR scales like sqrt(T)
    assert snr(q) / snr(p) == pytest.approx(math.sqrt(2), rel=1e-9)


def test_all_pairings_equivalent_noise():
    p = FIG4.replace(unpaired_rate=1e5, channels=4)
    cp, cs, cd, q = p.pair_rate, p.unpaired_rate, p.dark_rate, p.gain
    bg = p.background_rate
    dtt = p.bin_width * p.integration_time
    n = p.channels
    # every signal click times every idler click, minus the true pairs
    expected = (cp + cs + n * cd) * (q * (cp + cs) + bg + n * cd) * dtt - q * cp * cp * dtt
    nb = noise_breakdown(all_pairings_params(p))
    assert nb.noise(1) == pytest.approx(expected, rel=1e-12)


def test_sweep_rows_and_opt_curve():
    grid = np.logspace(-5, -1, 7)
    rows = snr_sweep(FIG4, "gain", grid, channels=625)
    assert [r.value for r in rows] == pytest.approx(list(grid))
    assert all(r.axis == "gain" for r in rows)
    for r in rows:
        assert r.snr == pytest.approx(snr(FIG4.replace(gain=r.value), 625), rel=1e-15)
    opt = snr_sweep(FIG4, "gain", grid, channels="opt")
    assert all(o.snr >= r.snr for o, r in zip(opt, rows))


def test_sweep_single_point_matches_snr():
    (row,) = snr_sweep(FIG4, "background", [1e5])
    assert row.snr == snr(FIG4)


def test_sweep_gain_curves_fig4a_shape():
    grid = np.logspace(-5, -1, 50)
    one = [r.snr for r in snr_sweep(FIG4, "gain", grid, channels=1)]
    many = [r.snr for r in snr_sweep(FIG4, "gain", grid, channels=625)]
    assert all(a < b for a, b in zip(one, one[1:]))
    assert all(a < b for a, b in zip(many, many[1:]))
    assert all(m > o for m, o in zip(many, one))


@pytest.mark.parametrize("grid", [[], [1.0, 1.0], [1.0, 3.0, 2.0], [1.0, float("inf")]])
def test_sweep_bad_grids(grid):
    with pytest.raises(InvalidGridError):
        snr_sweep(FIG4, "gain", grid)


def test_sweep_bad_axis():
    with pytest.raises(InvalidGridError):
        snr_sweep(FIG4, "temperature", [1.0])


def test_sweep_deterministic():
    grid = np.linspace(1e2, 1e6, 11)
    assert snr_sweep(FIG4, "background", grid, 25) == snr_sweep(FIG4, "background", grid, 25)
