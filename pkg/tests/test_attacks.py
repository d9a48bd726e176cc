"""Poisoning payload formulas and the vote-tampering modes."""

import numpy as np
import pytest
from scipy.stats import norm

from ddfed.attacks import (
    AdversaryView,
    AttackSpec,
    alie_update,
    alie_z,
    honest_selection,
    ipm_update,
    scaling_update,
    tamper_vote,
)
from ddfed.errors import AttackError, ParameterError, ShapeError
from ddfed.model import ParamVector


def _pv(values):
    values = np.asarray(values, dtype=float)
    return ParamVector(values, [(0, values.size, "fc0.weight")])


def _view(*vecs, rnd=10):
    return AdversaryView([_pv(v) for v in vecs], rnd)


# ---- parameter validation ------------------------------------------------------

def test_attack_spec_validation():
    with pytest.raises(ParameterError):
        AttackSpec(kind="bogus")
    with pytest.raises(ParameterError):
        AttackSpec(start_round=-1)
    with pytest.raises(ParameterError):
        AttackSpec(ipm_eps=0.0)
    with pytest.raises(ParameterError):
        AttackSpec(scaling_gamma=1.0)
    with pytest.raises(ParameterError):
        AttackSpec(vote_tamper="loud")


def test_attack_activation_window():
    spec = AttackSpec(kind="ipm", start_round=5)
    assert not spec.active(4)
    assert spec.active(5)
    assert not AttackSpec(kind="none").active(100)


# ---- ipm ----------------------------------------------------------------------

def test_ipm_single_colluder():
    u = np.array([1.0, -2.0, 3.0])
    out = ipm_update(_view(u), eps=0.5)
    assert np.allclose(out.values, -0.5 * u)


def test_ipm_cancellation():
    u = np.array([1.0, 2.0])
    out = ipm_update(_view(u, -u), eps=1.0)
    assert np.allclose(out.values, 0.0)


def test_ipm_opposes_colluder_mean():
    rng = np.random.default_rng(0)
    for _ in range(50):
        vecs = [rng.normal(size=6) for _ in range(3)]
        mean = np.mean(vecs, axis=0)
        out = ipm_update(_view(*vecs), eps=float(rng.uniform(0.1, 5)))
        assert out.values @ mean <= 0


def test_ipm_empty_view():
    with pytest.raises(AttackError):
        ipm_update(AdversaryView([], 10), eps=0.5)


# ---- alie ----------------------------------------------------------------------

def test_alie_z_frozen_oracle():
    # inverse-CDF oracle at (10, 3): Phi^-1(1 - 4/7) = -0.1800124, clamped
    raw = float(norm.ppf(1 - (10 - (10 // 2 + 1)) / (10 - 3)))
    assert raw == pytest.approx(-0.18001236979270496, abs=1e-12)
    assert alie_z(10, 3) == 0.0


def test_alie_identical_colluders_gives_mean():
    u = np.array([0.5, -1.5, 2.0])
    out = alie_update(_view(u, u, u), n_total=10, n_corrupt=3,
                      z_override=2.0)
    assert np.array_equal(out.values, u)


def test_alie_zero_override_gives_mean():
    a, b = np.array([1.0, 2.0]), np.array([3.0, 6.0])
    out = alie_update(_view(a, b), n_total=10, n_corrupt=2, z_override=0.0)
    assert np.allclose(out.values, (a + b) / 2)


def test_alie_override_shifts_by_std():
    a, b = np.array([0.0, 0.0]), np.array([2.0, 4.0])
    out = alie_update(_view(a, b), n_total=10, n_corrupt=2, z_override=1.5)
    mu, sd = np.array([1.0, 2.0]), np.array([1.0, 2.0])
    assert np.allclose(out.values, mu - 1.5 * sd)


def test_alie_rejects_corrupted_majority():
    with pytest.raises(AttackError):
        alie_update(_view(np.ones(2)), n_total=4, n_corrupt=2)


def test_alie_empty_view():
    with pytest.raises(AttackError):
        alie_update(AdversaryView([], 1), n_total=10, n_corrupt=3)


# ---- scaling --------------------------------------------------------------------

def test_scaling_gamma_one_is_identity():
    h, p = _pv([1.0, 2.0]), _pv([0.5, 0.5])
    assert np.allclose(scaling_update(h, p, 1.0).values, h.values)


def test_scaling_fixed_point_at_global():
    p = _pv([0.5, -0.5])
    assert np.allclose(scaling_update(_pv([0.5, -0.5]), p, 10.0).values,
                       p.values)


def test_scaling_delta_norm_ratio():
    rng = np.random.default_rng(1)
    for _ in range(30):
        h, p = _pv(rng.normal(size=5)), _pv(rng.normal(size=5))
        gamma = float(rng.uniform(1.5, 40))
        out = scaling_update(h, p, gamma)
        assert np.isclose(
            np.linalg.norm(out.values - p.values),
            gamma * np.linalg.norm(h.values - p.values),
        )


def test_scaling_shape_error():
    with pytest.raises(ShapeError):
        scaling_update(_pv([1.0]), _pv([1.0, 2.0]), 10.0)


# ---- vote tampering -----------------------------------------------------------

def test_invert_complements_threshold_selection():
    scores = [0.9, 0.9, -0.5]
    assert honest_selection(scores) == {0, 1}
    assert tamper_vote(scores, {2}, {2}, "invert") == {2}


def test_honest_mode_matches_benign_rule():
    scores = [0.1, 0.9, 0.5, 0.2]
    assert tamper_vote(scores, {0}, {0}, "honest") == honest_selection(scores)


def test_promote_self_always_includes_malicious():
    rng = np.random.default_rng(2)
    for _ in range(20):
        scores = rng.normal(size=6)
        mal = {0, 3}
        out = tamper_vote(scores, {0}, mal, "promote_self")
        assert mal <= out
        assert honest_selection(scores) <= out
