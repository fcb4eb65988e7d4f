import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from uecomimo.composite import (
    PhaseConfig,
    RelayParams,
    Structure,
    build_h2,
    build_h2_structure1,
    build_h2_structure2,
    phases,
    quantize,
    ris_additive_channel,
    ris_channel,
    stack_channel,
    structure2_scale,
)
from uecomimo.metrics import spectral_efficiency
from uecomimo.optimize import effective_first_hop


def test_phases_levels():
    np.testing.assert_allclose(phases([0, 1, 2, 3], 4), [1, 1j, -1, -1j], atol=1e-15)


def test_config_validation():
    with pytest.raises(ValueError):
        PhaseConfig.structure1([0, 4], 4)
    with pytest.raises(ValueError):
        PhaseConfig.structure2([0, 1], [0], 4)
    with pytest.raises(ValueError):
        PhaseConfig(Structure.S1, 4, r_levels=(0,), t_levels=(0,))
    with pytest.raises(ValueError):
        PhaseConfig.structure1([0], 0)


@given(st.integers(1, 9), st.integers(1, 5), st.data())
def test_label_round_trip(q, nc, data):
    levels = data.draw(st.lists(st.integers(0, q - 1), min_size=2 * nc, max_size=2 * nc))
    for cfg in (PhaseConfig.structure1(levels[:nc], q), PhaseConfig.from_levels(Structure.S2, levels, q)):
        assert PhaseConfig.from_label(cfg.label(), q) == cfg
        np.testing.assert_array_equal(PhaseConfig.from_levels(cfg.kind, cfg.as_levels(), q).as_levels(),
                                      cfg.as_levels())


def test_structure_parse():
    assert Structure.parse("S2") is Structure.S2
    assert Structure.parse("structure1") is Structure.S1
    with pytest.raises(ValueError):
        Structure.parse("s3")


def test_structure1_zero_phase_is_plain_product(cgauss):
    hp, hc = cgauss(4, 3), cgauss(3, 4)
    cfg = PhaseConfig.zeros(Structure.S1, 3, 8)
    np.testing.assert_allclose(build_h2_structure1(hp, hc, cfg, RelayParams(rho=4.0)), 2.0 * hp @ hc)


def test_structure2_is_rank_one(cgauss):
    hp, hc = cgauss(4, 4), cgauss(4, 4)
    cfg = PhaseConfig.structure2([1, 2, 3, 0], [3, 3, 1, 0], 4)
    s = np.linalg.svd(build_h2_structure2(hp, hc, cfg, RelayParams()), compute_uv=False)
    assert s[1] < 1e-12 * s[0]


def test_structure2_power_normalization():
    nc = 5
    cfg = PhaseConfig.structure2([1, 2, 0, 3, 1], [0, 0, 2, 1, 3], 4)
    core = build_h2_structure2(np.eye(nc), np.eye(nc), cfg, RelayParams())
    assert np.linalg.norm(core) == pytest.approx(math.sqrt(nc))
    assert structure2_scale(nc, RelayParams(power_normalization=False)) == 1.0


def test_structure2_se_is_separable(cgauss):
    h1, hp, hc = cgauss(4, 4), cgauss(4, 3), cgauss(3, 4)
    params = RelayParams(rho=2.0)
    cfg = PhaseConfig.structure2([1, 0, 2], [3, 1, 1], 4)
    se = spectral_efficiency(stack_channel(h1, build_h2(hp, hc, cfg, params)))
    phi_t, phi_r = phases(cfg.t_levels, 4), phases(cfg.r_levels, 4)
    eta = np.linalg.norm(hp @ phi_t) ** 2
    zeta = np.linalg.norm(phi_r.conj() @ effective_first_hop(hc, h1)) ** 2
    expected = spectral_efficiency(h1) + math.log2(1 + params.rho / 3 * eta * zeta)
    assert se == pytest.approx(expected, rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 3), st.integers(0, 3), st.integers(0, 2**32 - 1))
def test_block_phase_offset_leaves_se_unchanged(shift_r, shift_t, seed):
    rng = np.random.default_rng(seed)
    h1, hp, hc = (rng.normal(size=s) + 1j * rng.normal(size=s) for s in ((3, 4), (2, 3), (3, 4)))
    r = rng.integers(0, 4, 3)
    t = rng.integers(0, 4, 3)
    a = PhaseConfig.structure2(r, t, 4)
    b = PhaseConfig.structure2((r + shift_r) % 4, (t + shift_t) % 4, 4)
    se_a = spectral_efficiency(stack_channel(h1, build_h2(hp, hc, a, RelayParams())))
    se_b = spectral_efficiency(stack_channel(h1, build_h2(hp, hc, b, RelayParams())))
    assert abs(se_a - se_b) < 1e-12 * max(1.0, se_a)


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        build_h2_structure1(np.zeros((2, 3)), np.zeros((3, 4)), PhaseConfig.zeros(Structure.S1, 2, 4), RelayParams())
    with pytest.raises(ValueError):
        build_h2_structure2(np.zeros((2, 3)), np.zeros((3, 4)), PhaseConfig.zeros(Structure.S1, 3, 4), RelayParams())
    with pytest.raises(ValueError):
        stack_channel(np.zeros((2, 3)), np.zeros((2, 4)))
    with pytest.raises(ValueError):
        RelayParams(rho=0.0)


def test_stack_empty_relay():
    h1 = np.ones((2, 3))
    np.testing.assert_array_equal(stack_channel(h1, np.zeros((0, 3))), h1)


def test_quantize_nearest_level():
    q = 8
    levels = np.arange(q)
    phi = phases(levels, q) * np.exp(1j * 0.3 * 2 * np.pi / q)
    np.testing.assert_array_equal(quantize(phi, q), levels)


def test_ris_is_sum_of_rank_one_terms(cgauss):
    h1, g, hc = cgauss(4, 4), cgauss(4, 3), cgauss(3, 4)
    cfg = PhaseConfig.structure1([1, 3, 2], 4)
    phi = phases(cfg.s1_levels, 4)
    expected = h1
    for n in range(3):
        expected = ris_additive_channel(expected, g[:, n] * phi[n] * 3.0, hc[n])
    np.testing.assert_allclose(ris_channel(h1, g, hc, cfg, rho=9.0), expected)
    with pytest.raises(ValueError):
        ris_channel(h1, g, hc, PhaseConfig.zeros(Structure.S2, 3, 4))
    with pytest.raises(ValueError):
        ris_additive_channel(h1, np.ones(3), np.ones(4))


def _naive_s1(hp, hc, phi, rho):
    n2, nc = hp.shape
    m = hc.shape[1]
    out = np.zeros((n2, m), dtype=complex)
    for i in range(n2):
        for j in range(m):
            out[i, j] = math.sqrt(rho) * sum(hp[i, k] * phi[k] * hc[k, j] for k in range(nc))
    return out


def _naive_s2(hp, hc, phi_r, phi_t, rho, c):
    n2, nc = hp.shape
    m = hc.shape[1]
    out = np.zeros((n2, m), dtype=complex)
    for i in range(n2):
        for j in range(m):
            left = sum(hp[i, k] * phi_t[k] for k in range(nc))
            right = sum(np.conj(phi_r[k]) * hc[k, j] for k in range(nc))
            out[i, j] = math.sqrt(rho) * c * left * right
    return out


def test_structure1_matches_naive_loop(cgauss):
    hp, hc = cgauss(2, 2), cgauss(2, 2)
    cfg = PhaseConfig.structure1([1, 3], 4)
    got = build_h2_structure1(hp, hc, cfg, RelayParams(rho=3.0))
    np.testing.assert_allclose(got, _naive_s1(hp, hc, phases(cfg.s1_levels, 4), 3.0), atol=1e-13)


def test_structure2_matches_naive_loop(cgauss):
    hp, hc = cgauss(3, 4), cgauss(4, 2)
    cfg = PhaseConfig.structure2([1, 3, 0, 2], [2, 2, 1, 0], 4)
    got = build_h2_structure2(hp, hc, cfg, RelayParams(rho=2.0))
    expected = _naive_s2(hp, hc, phases(cfg.r_levels, 4), phases(cfg.t_levels, 4), 2.0, 0.5)
    np.testing.assert_allclose(got, expected, atol=1e-13)


def test_single_chain_structures_coincide(cgauss):
    hp, hc = cgauss(3, 1), cgauss(1, 4)
    s1 = build_h2_structure1(hp, hc, PhaseConfig.structure1([3], 8), RelayParams())
    s2 = build_h2_structure2(hp, hc, PhaseConfig.structure2([0], [3], 8), RelayParams())
    np.testing.assert_allclose(s1, s2 / structure2_scale(1, RelayParams()), atol=1e-14)
    h1 = cgauss(2, 4)
    se0 = spectral_efficiency(stack_channel(h1, build_h2_structure1(hp, hc, PhaseConfig.structure1([0], 8),
                                                                     RelayParams())))
    assert spectral_efficiency(stack_channel(h1, s1)) == pytest.approx(se0, rel=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 7), st.integers(0, 2**32 - 1))
def test_structure1_common_offset(shift, seed):
    rng = np.random.default_rng(seed)
    hp, hc = (rng.normal(size=s) + 1j * rng.normal(size=s) for s in ((3, 4), (4, 4)))
    levels = rng.integers(0, 8, 4)
    a = build_h2_structure1(hp, hc, PhaseConfig.structure1(levels, 8), RelayParams())
    b = build_h2_structure1(hp, hc, PhaseConfig.structure1((levels + shift) % 8, 8), RelayParams())
    np.testing.assert_allclose(np.linalg.svd(a, compute_uv=False), np.linalg.svd(b, compute_uv=False),
                               rtol=1e-12, atol=1e-12)
    assert np.abs(np.diag(np.diag(phases(levels, 8)))).sum() == pytest.approx(4.0)


def test_stack_rows_in_order_and_zero_block():
    h1 = np.arange(8.0).reshape(2, 4)
    h2 = -np.arange(8.0).reshape(2, 4)
    stacked = stack_channel(h1, h2)
    np.testing.assert_array_equal(stacked[:2], h1)
    np.testing.assert_array_equal(stacked[2:], h2)
    s = np.linalg.svd(stack_channel(h1, np.zeros((2, 4))), compute_uv=False)
    s1 = np.linalg.svd(h1, compute_uv=False)
    np.testing.assert_allclose(s[:2], s1, atol=1e-12)
    np.testing.assert_allclose(s[2:], 0, atol=1e-12)


def test_ris_zero_vector_and_lower_bound(rng):
    h1 = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    np.testing.assert_array_equal(ris_additive_channel(h1, np.zeros(4), np.ones(4)), h1)
    for _ in range(200):
        a = rng.normal(size=4) + 1j * rng.normal(size=4)
        h = rng.normal(size=4) + 1j * rng.normal(size=4)
        new = np.linalg.svd(ris_additive_channel(h1, a, h), compute_uv=False)
        old = np.linalg.svd(h1, compute_uv=False)
        assert np.all(new >= old - np.linalg.norm(a) * np.linalg.norm(h) - 1e-12)
