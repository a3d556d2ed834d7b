import math

import numpy as np
import pytest

from coilpilot.anchors import (
    PHASE_EDGES,
    AnchorSpec,
    CalibrationMap,
    DeploymentState,
    MediumModel,
    Phase,
    TorqueSensor,
    TorqueSensorSpec,
    couple_to_robot,
    ef30_medium,
    fit_calibration,
    load_anchor,
    loading_torque,
    rotate_driver,
    sense_torque,
    signal_from_torque,
    tissue_medium,
    torque_from_signal_exact,
)
from coilpilot.errors import (
    DoubleLoadError,
    InvalidSpecError,
    NonMonotoneDataError,
    PhaseError,
    SaturatedError,
)

SPEC = AnchorSpec()
PHASE_ORDER = [Phase.UNLOADED, Phase.LOADED, Phase.COUPLED, Phase.INSERTING, Phase.HEAD_CONTACT, Phase.RELEASED]


def deploy_to_release(medium, spec=SPEC, dtheta=0.05, force=0.6):
    state = couple_to_robot(load_anchor(spec, medium))
    trace = [state]
    for _ in range(100_000):
        state = rotate_driver(state, dtheta, True, force, medium, spec)
        trace.append(state)
        if state.phase == Phase.RELEASED:
            return state, trace
    raise AssertionError("release never fired")


class TestLoading:
    def test_ef30_preload(self):
        state = load_anchor(SPEC, ef30_medium())
        assert state.phase == Phase.LOADED
        assert state.holding_torque == pytest.approx(2.5)

    def test_tissue_preload(self):
        state = load_anchor(SPEC, tissue_medium())
        assert state.holding_torque == pytest.approx(4.2)

    def test_double_load(self):
        state = load_anchor(SPEC, ef30_medium())
        with pytest.raises(DoubleLoadError):
            load_anchor(SPEC, ef30_medium(), state)

    def test_reload_after_release(self):
        state, _ = deploy_to_release(ef30_medium())
        fresh = load_anchor(SPEC, ef30_medium(), state)
        assert fresh.phase == Phase.LOADED
        assert fresh.depth == 0.0

    def test_loading_trace_monotone_to_preload(self):
        medium = tissue_medium()
        taus = [loading_torque(r, medium) for r in np.linspace(0, 4 * math.pi, 200)]
        assert all(b >= a for a, b in zip(taus, taus[1:]))
        assert taus[-1] == pytest.approx(medium.preload_torque)

    def test_medium_invariant(self):
        with pytest.raises(InvalidSpecError):
            # insertion torque at full depth must stay below the release threshold
            MediumModel(preload_torque=2.5, insertion_torque_at_full_depth=1.3, release_ratio_eta=0.492)


class TestRotateDriver:
    def test_rotation_without_contact_is_free(self):
        state = couple_to_robot(load_anchor(SPEC, ef30_medium()))
        out = rotate_driver(state, 1.0, False, 0.0, ef30_medium(), SPEC)
        assert out.depth == 0.0
        assert out.phase == Phase.COUPLED
        assert out.driver_torque == 0.0
        assert out.total_rotation == pytest.approx(1.0)

    def test_insufficient_force_is_free(self):
        state = couple_to_robot(load_anchor(SPEC, ef30_medium()))
        out = rotate_driver(state, 1.0, True, 0.3, ef30_medium(), SPEC)
        assert out.depth == 0.0 and out.driver_torque == 0.0

    def test_depth_advances_with_pitch(self):
        state = couple_to_robot(load_anchor(SPEC, ef30_medium()))
        out = rotate_driver(state, 2 * math.pi, True, 0.6, ef30_medium(), SPEC)
        assert out.depth == pytest.approx(1.0)  # 1 mm/rev pitch
        assert out.phase == Phase.INSERTING

    def test_ef30_release_torque(self):
        # eta fitted as (mean deployment)/(preload) = 1.23/2.5
        state, trace = deploy_to_release(ef30_medium())
        assert state.release_torque == pytest.approx(1.23, rel=1e-12)
        assert state.depth == pytest.approx(5.0)

    def test_tissue_release_torque(self):
        state, _ = deploy_to_release(tissue_medium())
        assert state.release_torque == pytest.approx(2.55, rel=1e-12)

    def test_strict_max_at_release(self):
        for medium in (ef30_medium(), tissue_medium()):
            state, trace = deploy_to_release(medium)
            torques = [s.driver_torque for s in trace]
            assert max(torques) == torques[-1]
            assert all(t < torques[-1] for t in torques[:-1])

    def test_torque_nondecreasing_during_insertion(self):
        _, trace = deploy_to_release(ef30_medium(), dtheta=0.02)
        torques = [s.driver_torque for s in trace]
        assert all(b >= a - 1e-12 for a, b in zip(torques, torques[1:]))

    def test_rotate_wrong_phase(self):
        with pytest.raises(PhaseError):
            rotate_driver(DeploymentState(), 0.1, True, 1.0, ef30_medium(), SPEC)
        state, _ = deploy_to_release(ef30_medium())
        with pytest.raises(PhaseError):
            rotate_driver(state, 0.1, True, 1.0, ef30_medium(), SPEC)

    def test_all_phases_observed_with_fine_steps(self):
        _, trace = deploy_to_release(ef30_medium(), dtheta=0.005)
        seen = [s.phase for s in trace]
        order = [p for i, p in enumerate(seen) if i == 0 or p != seen[i - 1]]
        assert order == [Phase.COUPLED, Phase.INSERTING, Phase.HEAD_CONTACT, Phase.RELEASED]


class TestStateMachineProperties:
    def test_random_scripts_soundness(self):
        rng = np.random.default_rng(2024)
        idx = {p: i for i, p in enumerate(PHASE_ORDER)}
        for script in range(300):
            medium = ef30_medium() if script % 2 == 0 else tissue_medium()
            state = couple_to_robot(load_anchor(SPEC, medium))
            prev = state
            for _ in range(rng.integers(10, 120)):
                if state.phase == Phase.RELEASED:
                    break
                dtheta = float(rng.uniform(0, 0.3))
                contact = bool(rng.random() < 0.8)
                force = float(rng.uniform(0, 1.2))
                state = rotate_driver(state, dtheta, contact, force, medium, SPEC)
                # forward-only motion along the phase chain
                assert idx[state.phase] >= idx[prev.phase]
                assert 0.0 <= state.depth <= SPEC.target_depth + 1e-12
                assert state.driver_torque >= 0.0
                assert state.total_rotation >= prev.total_rotation
                if state.phase == Phase.RELEASED:
                    assert state.depth == pytest.approx(SPEC.target_depth)
                    assert state.release_torque == pytest.approx(
                        medium.release_ratio_eta * medium.preload_torque
                    )
                prev = state

    def test_release_always_fires_over_config_grid(self):
        # bounded rotation suffices for every valid medium configuration
        for preload in (2.0, 2.5, 4.2):
            for eta in (0.35, 0.492, 0.61):
                for ins_frac in (0.4, 0.9):
                    for pitch in (0.5, 1.0):
                        medium = MediumModel(
                            preload_torque=preload,
                            insertion_torque_at_full_depth=ins_frac * eta * preload,
                            release_ratio_eta=eta,
                        )
                        spec = AnchorSpec(coil_pitch=pitch)
                        bound = 2 * math.pi * spec.target_depth / pitch + (
                            eta * preload / medium.head_contact_stiffness
                        ) + 1.0
                        state = couple_to_robot(load_anchor(spec, medium))
                        state = rotate_driver(state, bound, True, 0.6, medium, spec)
                        assert state.phase == Phase.RELEASED

    def test_phase_edges_table(self):
        assert PHASE_EDGES[Phase.RELEASED] == ()
        assert PHASE_EDGES[Phase.UNLOADED] == (Phase.LOADED,)


class TestTorqueSensing:
    SENSOR = TorqueSensorSpec()

    def test_zero_torque_reads_zero(self):
        assert sense_torque(0.0, self.SENSOR, seed=5) == pytest.approx(0.0, abs=1e-12)

    def test_forward_chain_monotone(self):
        taus = np.linspace(0, 4.2, 80)
        sigs = [signal_from_torque(t, self.SENSOR) for t in taus]
        assert all(b > a for a, b in zip(sigs, sigs[1:]))

    def test_exact_inverse_round_trip(self):
        for tau in (0.3, 1.7, 4.2):
            sig = signal_from_torque(tau, self.SENSOR)
            assert torque_from_signal_exact(sig, self.SENSOR) == pytest.approx(tau, rel=1e-12)

    def test_saturation(self):
        with pytest.raises(SaturatedError):
            signal_from_torque(self.SENSOR.saturation_torque + 0.5, self.SENSOR)

    def test_session_error_bound(self):
        taus = np.arange(0.5, 4.2001, 0.1)
        errors = []
        for seed in range(1000):
            sensor = TorqueSensor(self.SENSOR, seed=seed)
            for tau in taus:
                errors.append(abs(sensor.read(float(tau)) - tau) / tau)
        assert np.mean(errors) <= 0.05

    def test_quantization(self):
        sensor = TorqueSensor(self.SENSOR, seed=1)
        reading = sensor.read(2.0)
        assert abs(reading / 0.07 - round(reading / 0.07)) < 1e-9
        # sub-resolution torques can alias to the same reading
        collisions = sum(
            sensor.read(t) == sensor.read(t + 0.03) for t in np.linspace(0.5, 4.0, 50)
        )
        assert collisions > 0

    def test_reading_monotone_per_session(self):
        for seed in (0, 7, 99):
            sensor = TorqueSensor(self.SENSOR, seed=seed)
            readings = [sensor.read(float(t)) for t in np.linspace(0, 4.2, 100)]
            assert all(b >= a for a, b in zip(readings, readings[1:]))


class TestCalibrationFit:
    def test_clean_round_trip(self):
        spec = TorqueSensorSpec()
        taus = np.linspace(0, 5.0, 30)
        samples = [(signal_from_torque(t, spec), t) for t in taus]
        cal = fit_calibration(samples)
        for tau in np.linspace(0.1, 4.9, 25):
            sig = signal_from_torque(tau, spec)
            assert cal(sig) == pytest.approx(tau, rel=1e-3)

    def test_too_few_samples(self):
        with pytest.raises(NonMonotoneDataError):
            fit_calibration([(1.0, 0.1), (2.0, 0.2)])

    def test_non_monotone(self):
        with pytest.raises(NonMonotoneDataError):
            fit_calibration([(1, 0.1), (2, 0.2), (1.5, 0.3), (3, 0.4), (4, 0.5)])

    def test_noisy_fit_residual(self):
        # Monte-Carlo: 1% multiplicative signal noise keeps the fitted map
        # within 5% of full scale against the clean chain
        spec = TorqueSensorSpec()
        rng = np.random.default_rng(17)
        full_scale = 4.2
        taus = np.linspace(0.0, 5.0, 25)
        for _ in range(20):
            sigs = np.array([signal_from_torque(t, spec) for t in taus])
            noisy = sigs * (1 + rng.normal(0, 0.01, sigs.shape))
            order = np.argsort(noisy)
            noisy, tts = noisy[order], taus[order]
            if np.any(np.diff(noisy) <= 0) or np.any(np.diff(tts) <= 0):
                continue
            cal = fit_calibration(list(zip(noisy, tts)))
            check = np.linspace(0.3, 4.2, 30)
            errs = [cal(signal_from_torque(t, spec)) - t for t in check]
            rms = float(np.sqrt(np.mean(np.square(errs))))
            assert rms <= 0.05 * full_scale
