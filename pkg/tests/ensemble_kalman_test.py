from collections.abc import Callable

import numpy as np
import pytest

from filterlab.application.filters.ensemble_kalman import (
    Ensemble,
    GainVariant,
    JointEnsemble,
    enkf_filter,
    enkf_forecast,
    enkf_gain,
    enkf_step,
    lift_gaussian,
    mf_enkf_gaussian_filter,
    transport_apply,
)
from filterlab.application.filters.kalman import KalmanState, kalman_filter, kalman_predict, kalman_update
from filterlab.exceptions import DegenerateEnsembleError, UnsupportedModelError
from filterlab.models.measures import EmpiricalMeasure, GaussianMeasure, RngStream, empirical_moments, gaussian_project, sample
from filterlab.models.state_space import DataRecord, StateSpaceModel, simulate


def test_two_member_analysis_by_hand(identity_model: StateSpaceModel, rng: RngStream) -> None:
    ensemble = Ensemble(members=np.array([[0.0], [2.0]]), step=0)
    analysed = enkf_step(
        ensemble,
        np.array([1.0]),
        identity_model,
        GainVariant.DIRECT_GAMMA,
        rng,
        state_noise=np.zeros((2, 1)),
        observation_noise=np.zeros((2, 1)),
    )
    np.testing.assert_allclose(analysed.members[:, 0], [0.5, 1.5])
    assert analysed.step == 1


def test_gain_of_two_member_forecast(identity_model: StateSpaceModel) -> None:
    joint = JointEnsemble(states=np.array([[0.0], [2.0]]), observations=np.array([[0.0], [2.0]]))
    gain_spec = enkf_gain(joint, identity_model, "direct-gamma")
    assert gain_spec.c_vy[0, 0] == pytest.approx(1.0)
    assert gain_spec.c_yy[0, 0] == pytest.approx(2.0)
    assert gain_spec.gain[0, 0] == pytest.approx(0.5)


def test_constant_observation_map_leaves_forecast(make_scalar_model: Callable[..., StateSpaceModel], rng: RngStream) -> None:
    model = make_scalar_model(h_b=0.0)
    joint = enkf_forecast(Ensemble(members=np.linspace(-1.0, 1.0, 8), step=0), model, rng)
    gain_spec = enkf_gain(joint, model, GainVariant.DIRECT_GAMMA)
    assert np.all(gain_spec.gain == 0.0)
    analysed = enkf_step(Ensemble(members=np.linspace(-1.0, 1.0, 8), step=0), np.array([3.0]), model, "direct-gamma", rng)
    np.testing.assert_array_equal(analysed.members, joint.states)


@pytest.mark.parametrize("variant", list(GainVariant))
def test_analysis_mean_moves_by_the_gain(linear1d: StateSpaceModel, rng: RngStream, variant: GainVariant) -> None:
    ensemble = Ensemble(members=sample(linear1d.init, 200, rng.child(0)).particles, step=0)
    joint = enkf_forecast(ensemble, linear1d, rng.child(1))
    gain_spec = enkf_gain(joint, linear1d, variant)
    analysed = enkf_step(ensemble, np.array([0.4]), linear1d, variant, rng.child(1))
    expected = joint.states.mean(axis=0) + gain_spec.gain @ (np.array([0.4]) - joint.observations.mean(axis=0))
    np.testing.assert_allclose(analysed.members.mean(axis=0), expected, atol=1e-12)


def test_gain_is_permutation_invariant(linear_nd: StateSpaceModel, rng: RngStream) -> None:
    ensemble = Ensemble(members=sample(linear_nd.init, 64, rng.child(0)).particles, step=0)
    joint = enkf_forecast(ensemble, linear_nd, rng.child(1))
    order = np.random.default_rng(1).permutation(64)
    shuffled = JointEnsemble(states=joint.states[order], observations=joint.observations[order])
    for variant in GainVariant:
        np.testing.assert_allclose(enkf_gain(joint, linear_nd, variant).gain, enkf_gain(shuffled, linear_nd, variant).gain, atol=1e-12)


def test_ensemble_needs_two_members() -> None:
    with pytest.raises(DegenerateEnsembleError):
        Ensemble(members=np.zeros((1, 2)), step=0)


def test_enkf_filter_rejects_single_member(linear1d: StateSpaceModel, linear1d_data: DataRecord, rng: RngStream) -> None:
    with pytest.raises(DegenerateEnsembleError):
        enkf_filter(linear1d, linear1d_data, 1, "direct-gamma", rng)


def test_enkf_filter_is_reproducible(linear_nd: StateSpaceModel) -> None:
    data = simulate(linear_nd, 5, RngStream(2))
    first = enkf_filter(linear_nd, data, 30, "empirical-noise", RngStream(9))
    second = enkf_filter(linear_nd, data, 30, "empirical-noise", RngStream(9))
    assert [e.step for e in first] == list(range(6))
    for a, b in zip(first, second):
        np.testing.assert_array_equal(a.members, b.members)


@pytest.mark.parametrize("variant", list(GainVariant))
def test_large_ensemble_gain_matches_kalman_gain(linear1d: StateSpaceModel, variant: GainVariant) -> None:
    ensemble = Ensemble(members=sample(linear1d.init, 100_000, RngStream(3, (0,))).particles, step=0)
    joint = enkf_forecast(ensemble, linear1d, RngStream(3, (1,)))
    predicted_var = 0.81 + 0.01
    assert enkf_gain(joint, linear1d, variant).gain[0, 0] == pytest.approx(predicted_var / (predicted_var + 0.01), abs=0.01)


def test_gain_variants_converge_together(linear1d: StateSpaceModel) -> None:
    def variant_gap(size: int, seed: int) -> float:
        ensemble = Ensemble(members=sample(linear1d.init, size, RngStream(seed, (size, 0))).particles, step=0)
        y = np.array([0.5])
        a = enkf_step(ensemble, y, linear1d, GainVariant.EMPIRICAL_NOISE, RngStream(seed, (size, 1)))
        b = enkf_step(ensemble, y, linear1d, GainVariant.DIRECT_GAMMA, RngStream(seed, (size, 1)))
        mean_a, cov_a = empirical_moments(a.as_measure())
        mean_b, cov_b = empirical_moments(b.as_measure())
        return float(np.linalg.norm(mean_a - mean_b) + np.linalg.norm(cov_a - cov_b))

    small = np.mean([variant_gap(100, seed) for seed in range(10)])
    large = np.mean([variant_gap(10_000, seed) for seed in range(10)])
    assert large < small


def test_transport_of_gaussian_is_conditioning(linear_nd: StateSpaceModel) -> None:
    prior = GaussianMeasure(np.array([0.5, -0.2, 0.1, 0.0]), np.diag([1.0, 2.0, 0.5, 1.5]))
    y = np.array([0.3, -1.0])
    transported = transport_apply(lift_gaussian(prior, linear_nd), y, linear_nd.dim_state)
    exact = kalman_update(KalmanState.from_gaussian(prior), y, linear_nd)
    assert isinstance(transported, GaussianMeasure)
    np.testing.assert_allclose(transported.mean, exact.mean, atol=1e-10)
    np.testing.assert_allclose(transported.cov, exact.cov, atol=1e-10)


def test_transport_of_samples_moves_their_moments(linear1d: StateSpaceModel, rng: RngStream) -> None:
    joint = sample(lift_gaussian(GaussianMeasure([0.0], [[1.0]]), linear1d), 500, rng)
    y = np.array([0.7])
    moved = transport_apply(joint, y, 1)
    projected = transport_apply(gaussian_project(joint), y, 1)
    assert isinstance(moved, EmpiricalMeasure)
    mean, cov = empirical_moments(moved)
    np.testing.assert_allclose(mean, projected.mean, atol=1e-10)
    np.testing.assert_allclose(cov, projected.cov, atol=1e-10)


def test_transport_accepts_joint_ensembles(identity_model: StateSpaceModel) -> None:
    joint = JointEnsemble(states=np.array([[0.0], [2.0]]), observations=np.array([[0.0], [2.0]]))
    moved = transport_apply(joint, np.array([1.0]), 1)
    assert isinstance(moved, EmpiricalMeasure)
    np.testing.assert_allclose(moved.particles[:, 0], [1.0, 1.0])


def test_mean_field_matches_kalman_linear1d(linear1d: StateSpaceModel, linear1d_data: DataRecord) -> None:
    for mf, exact in zip(mf_enkf_gaussian_filter(linear1d, linear1d_data), kalman_filter(linear1d, linear1d_data)):
        np.testing.assert_allclose(mf.mean, exact.mean, atol=1e-10)
        np.testing.assert_allclose(mf.cov, exact.cov, atol=1e-10)


def test_mean_field_matches_kalman_linear_nd(linear_nd: StateSpaceModel) -> None:
    data = simulate(linear_nd, 20, RngStream(17))
    for mf, exact in zip(mf_enkf_gaussian_filter(linear_nd, data), kalman_filter(linear_nd, data)):
        np.testing.assert_allclose(mf.mean, exact.mean, atol=1e-10)
        np.testing.assert_allclose(mf.cov, exact.cov, atol=1e-10)


def test_mean_field_needs_linear_model() -> None:
    from filterlab.application.model_suite import builtin_model

    model = builtin_model("sin-tanh")
    with pytest.raises(UnsupportedModelError):
        mf_enkf_gaussian_filter(model, simulate(model, 2, RngStream(0)))


def test_predicted_joint_has_the_lifted_covariance(linear1d: StateSpaceModel) -> None:
    predicted = kalman_predict(KalmanState(mean=[0.0], cov=[[1.0]]), linear1d).as_gaussian()
    joint = lift_gaussian(predicted, linear1d)
    np.testing.assert_allclose(joint.cov, [[0.82, 0.82], [0.82, 0.83]])


@pytest.mark.parametrize("variant", list(GainVariant))
def test_analysis_is_translation_equivariant(linear_nd: StateSpaceModel, variant: GainVariant) -> None:
    generator = np.random.default_rng(12)
    members = generator.standard_normal((50, 4))
    y = generator.standard_normal(2)
    shift = np.array([0.7, -1.2, 0.4, 2.0])
    assert linear_nd.psi_matrix is not None and linear_nd.h_matrix is not None
    moved_shift = linear_nd.psi_matrix @ shift
    plain = enkf_step(Ensemble(members=members, step=0), y, linear_nd, variant, RngStream(5))
    moved = enkf_step(
        Ensemble(members=members + shift, step=0), y + linear_nd.h_matrix @ moved_shift, linear_nd, variant, RngStream(5),
    )
    np.testing.assert_allclose(moved.members, plain.members + moved_shift, atol=1e-10)
