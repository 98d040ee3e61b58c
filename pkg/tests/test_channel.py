import numpy as np
import pytest

from conftest import within_sigmas
from ghzqsdc.channel import (
    NoiseModel,
    SweepConfig,
    apply_noise,
    choose_test_groups,
    detection_statistics,
    intercept_resend,
    verify_channel,
)
from ghzqsdc.protocol import distribute
from ghzqsdc.quantum import (
    Pauli,
    apply_single_qubit,
    ghz_stabilizers,
    make_basis_state,
    make_ghz,
    stabilizer_expectation,
    tensor,
)


def groups(n=1, m=3, seed=0):
    return distribute(n, m, np.random.default_rng(seed))


def half_expectations(group, half=0):
    n = group.half_size
    return [stabilizer_expectation(group.state, s.embed(half * n, 2 * n)) for s in ghz_stabilizers(n)]


# -- noise ------------------------------------------------------------------------


@pytest.mark.parametrize("probs", [(-0.1, 0, 0), (0.5, 0.4, 0.2), (1.1, 0, 0)])
def test_noise_model_validation(probs):
    with pytest.raises(ValueError):
        NoiseModel(*probs)


def test_zero_noise_is_identity(rng):
    (g,) = groups()
    out = apply_noise(g, NoiseModel(), rng)
    assert np.max(np.abs(out.state.amplitudes - g.state.amplitudes)) < 1e-12


def test_certain_x_on_qubit_2_flips_s2(rng):
    (g,) = groups()
    out = apply_noise(g, NoiseModel(p_x=1.0, qubits={2}), rng)
    values = half_expectations(out)
    assert abs(values[1] + 1) < 1e-12
    assert abs(values[0] - 1) < 1e-12


def test_noise_sampling_proportions(rng):
    model = NoiseModel(0.1, 0.2, 0.3)
    n = 20000
    draws = [model.sample(rng) for _ in range(n)]
    for p, prob in [(Pauli.X, 0.1), (Pauli.Y, 0.2), (Pauli.Z, 0.3), (Pauli.I, 0.4)]:
        assert within_sigmas(draws.count(p), n, prob)


def test_bit_flip_noise_detection_fraction(rng):
    """X errors on a GHZ(4) half are undetected only if none or all four qubits flip."""
    model = NoiseModel(p_x=0.1, qubits={1, 2, 3, 4})
    n = 2000
    hits = 0
    for g in groups(n):
        out = apply_noise(g, model, rng)
        hits += any(v < 0 for v in half_expectations(out))
    expected = 1 - 0.9**4 - 0.1**4
    assert within_sigmas(hits, n, expected)


# -- interception -----------------------------------------------------------------------


def test_intercept_collapses_ghz_half(rng):
    counts = {0: 0, 1: 0}
    n = 2000
    for g in groups(n):
        out = intercept_resend(g, [1], rng)
        zeros = tensor(make_basis_state(4, "0000"), make_ghz(4))
        ones = tensor(make_basis_state(4, "1111"), make_ghz(4))
        if out.state.allclose(zeros):
            counts[0] += 1
        else:
            assert out.state.allclose(ones)
            counts[1] += 1
    assert within_sigmas(counts[0], n, 0.5)


def test_intercept_zeroes_all_x_stabilizer(rng):
    (g,) = groups()
    out = intercept_resend(g, [1], rng)
    values = half_expectations(out)
    assert abs(values[0]) < 1e-12
    assert all(abs(v - 1) < 1e-12 for v in values[1:])


def test_intercept_nothing_is_noop(rng):
    (g,) = groups()
    assert intercept_resend(g, [], rng).state.allclose(g.state)


# -- verification ---------------------------------------------------------------------------


@pytest.mark.parametrize("mode", ["expectation", "sampled"])
def test_clean_groups_pass(mode, rng):
    report = verify_channel(groups(20), mode, rng)
    assert report.passed
    assert report.groups_tested == list(range(20))
    per_group = 2 * 4 if mode == "expectation" else 2
    assert len(report.stabilizers_checked) == 20 * per_group


def test_x_error_fails_at_s2():
    (g,) = groups()
    bad = g.with_state(apply_single_qubit(g.state, 2, Pauli.X))
    report = verify_channel([bad], "expectation")
    assert not report.passed
    assert report.failure_positions == [(0, 0, 2)]


def test_verification_rejects_empty_and_bad_mode():
    with pytest.raises(ValueError):
        verify_channel([], "expectation")
    with pytest.raises(ValueError):
        verify_channel(groups(), "tomography")
    with pytest.raises(ValueError):
        verify_channel(groups(), "sampled", None)


def test_sampled_mode_detects_intercept(rng):
    attacked = [intercept_resend(g, [1], rng) for g in groups(500)]
    report = verify_channel(attacked, "sampled", rng)
    assert not report.passed
    failed_groups = {g for g, _, _ in report.failure_positions}
    # one of four stabilizers is S1, which then fails with probability 1/2
    assert within_sigmas(len(failed_groups), 500, 1 / 8)


@pytest.mark.parametrize("m", [3])
def test_expectation_mode_sound_for_every_single_error(m):
    (g,) = groups(m=m)
    n = 2 * (m + 1)
    for q in range(1, n + 1):
        for p in (Pauli.X, Pauli.Y, Pauli.Z):
            bad = g.with_state(apply_single_qubit(g.state, q, p))
            assert not verify_channel([bad], "expectation").passed, (q, p)


@pytest.mark.parametrize("m", range(2, 7))
def test_single_errors_flip_some_stabilizer(m):
    (g,) = groups(m=m)
    half = g.half_size
    for q in range(1, 2 * half + 1):
        for p in (Pauli.X, Pauli.Y, Pauli.Z):
            bad = g.with_state(apply_single_qubit(g.state, q, p))
            values = half_expectations(bad, (q - 1) // half)
            assert any(abs(v + 1) < 1e-12 for v in values)


def test_choose_test_groups(rng):
    ids = choose_test_groups(1000, 0.1, rng)
    assert len(ids) == 100 and len(set(ids)) == 100
    assert choose_test_groups(10, 0.0, rng) == []
    with pytest.raises(ValueError):
        choose_test_groups(10, 1.0, rng)


# -- sweeps ----------------------------------------------------------------------------


def test_sweep_zero_points_and_certain_flip():
    cfg = SweepConfig(
        groups_per_point=50, noise_kind="x", noise_levels=(0.0, 1.0), noise_qubits=(2,), attack_fractions=(0.0,)
    )
    points = detection_statistics(cfg, np.random.default_rng(0))
    assert [(p.kind, p.strength, p.rate) for p in points] == [
        ("noise", 0.0, 0.0),
        ("noise", 1.0, 1.0),
        ("attack", 0.0, 0.0),
    ]
    assert points[0].ci_low == 0.0 and 0 < points[0].ci_high < 0.1


def test_sweep_is_deterministic():
    cfg = SweepConfig(groups_per_point=30)
    a = detection_statistics(cfg, np.random.default_rng(9))
    b = detection_statistics(cfg, np.random.default_rng(9))
    assert a == b


def test_sampled_intercept_rate_consistent_across_seed_sets():
    cfg = SweepConfig(
        groups_per_point=600,
        mode="sampled",
        noise_levels=(),
        attack_fractions=(1.0,),
        attack_targets=(1, 5),
    )
    (a,) = detection_statistics(cfg, np.random.default_rng(1000))
    (b,) = detection_statistics(cfg, np.random.default_rng(2000))
    pooled = (a.detections + b.detections) / (a.trials + b.trials)
    for p in (a, b):
        assert within_sigmas(p.detections, p.trials, pooled)
    assert 0 < pooled < 1
