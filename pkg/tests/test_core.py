"""Unit tests for the single-frequency noise algebra.

Expected values are frozen from direct hand evaluation of the closed forms;
the no-feedback reduction is checked against an independently coded
expression.
"""

import math

import numpy as np
import pytest

from detlim import (
    DetectorNoiseModel,
    LoopGains,
    LoopSingularityError,
    PoleError,
    Susceptibility,
    UnphysicalModelError,
    added_noise_spectrum,
    analytic_optimum_bound,
    bound_coefficients,
    displacement_sensitivity,
    force_sensitivity,
    is_physical,
    mech_susceptibility,
    sql_displacement,
    sql_force,
    uncertainty_matrix,
    uql_displacement,
    uql_force,
)

OMEGA_M = 0.1
GAMMA_M = 0.1


def no_feedback_added_noise(g, noise, chi_qq):
    """Independent oracle: added noise of the loop-free estimator.

    Ports F and Z only: g*chi*F + (Z/g)*(1 - g^2*chi*chi_ff).
    """
    kappa0 = 1.0 - g * g * chi_qq * noise.chi_ff
    return (
        abs(g * chi_qq) ** 2 * noise.s_ff
        + abs(kappa0 / g) ** 2 * noise.s_zz
        + 2.0 * ((g * chi_qq) * (kappa0 / g).conjugate() * noise.s_zf.conjugate()).real
    )


class TestMechSusceptibility:
    def test_static_value(self):
        # 0.1 / (0.05^2 + 0.01) = 8
        assert mech_susceptibility(OMEGA_M, GAMMA_M, 0.0) == pytest.approx(8.0, rel=1e-12)

    def test_resonant_value(self):
        # denominator 0.0025 - 0.01j, |den|^2 = 1.0625e-4
        chi = mech_susceptibility(OMEGA_M, GAMMA_M, 0.1)
        assert chi.real == pytest.approx(0.1 * 0.0025 / 1.0625e-4, rel=1e-12)
        assert chi.imag == pytest.approx(9.411764705882353, rel=1e-12)

    def test_undamped_pole(self):
        with pytest.raises(PoleError):
            mech_susceptibility(1.0, 0.0, 1.0)
        with pytest.raises(PoleError):
            mech_susceptibility(1.0, 0.0, -1.0)

    def test_undamped_off_resonance_is_finite(self):
        chi = mech_susceptibility(1.0, 0.0, 0.5)
        assert chi == pytest.approx(1.0 / 0.75)

    def test_reality_symmetry(self):
        rng = np.random.default_rng(11)
        for w in rng.uniform(-5, 5, size=50):
            chi_p = mech_susceptibility(OMEGA_M, GAMMA_M, w)
            chi_m = mech_susceptibility(OMEGA_M, GAMMA_M, -w)
            assert chi_m == pytest.approx(chi_p.conjugate(), rel=1e-14)

    def test_positive_imaginary_part_for_positive_frequency(self):
        rng = np.random.default_rng(12)
        for w in rng.uniform(1e-4, 10, size=50):
            assert mech_susceptibility(OMEGA_M, GAMMA_M, w).imag > 0

    def test_precondition_errors(self):
        with pytest.raises(ValueError):
            mech_susceptibility(0.0, 0.1, 1.0)
        with pytest.raises(ValueError):
            mech_susceptibility(0.1, -0.1, 1.0)


class TestLimits:
    def test_uql_force_paper_value(self):
        assert uql_force(OMEGA_M, GAMMA_M, 0.2) == pytest.approx(0.2, rel=1e-12)

    def test_uql_force_zero_frequency(self):
        assert uql_force(OMEGA_M, GAMMA_M, 0.0) == 0.0

    def test_uql_force_matches_inverse_susceptibility(self):
        for w in (0.03, 0.1, 1.0, 7.7):
            chi = mech_susceptibility(OMEGA_M, GAMMA_M, w)
            assert uql_force(OMEGA_M, GAMMA_M, w) == pytest.approx(
                abs((1.0 / chi).imag), abs=1e-12
            )

    def test_uql_displacement_values(self):
        assert uql_displacement(OMEGA_M, GAMMA_M, 0.1) == pytest.approx(
            9.411764705882353, rel=1e-12
        )
        assert uql_displacement(OMEGA_M, GAMMA_M, 0.0) == 0.0
        assert uql_displacement(OMEGA_M, GAMMA_M, -0.1) == pytest.approx(
            9.411764705882353, rel=1e-12
        )

    def test_sql_static_values(self):
        assert sql_force(OMEGA_M, GAMMA_M, 0.0) == pytest.approx(0.125, rel=1e-12)
        assert sql_displacement(OMEGA_M, GAMMA_M, 0.0) == pytest.approx(8.0, rel=1e-12)

    def test_sql_dominates_uql(self):
        for w in np.geomspace(1e-3, 30, 80):
            assert sql_force(OMEGA_M, GAMMA_M, w) >= uql_force(OMEGA_M, GAMMA_M, w)
            assert sql_displacement(OMEGA_M, GAMMA_M, w) >= uql_displacement(
                OMEGA_M, GAMMA_M, w
            )

    def test_limits_even_in_frequency(self):
        for w in (0.02, 0.44, 3.1):
            assert uql_force(OMEGA_M, GAMMA_M, w) == uql_force(OMEGA_M, GAMMA_M, -w)
            assert uql_displacement(OMEGA_M, GAMMA_M, w) == pytest.approx(
                uql_displacement(OMEGA_M, GAMMA_M, -w), rel=1e-14
            )


class TestSusceptibilityType:
    def test_oscillator_matches_function(self):
        chi = Susceptibility.oscillator(OMEGA_M, GAMMA_M)
        for w in (0.0, 0.1, -2.5):
            assert chi(w) == mech_susceptibility(OMEGA_M, GAMMA_M, w)

    def test_oscillator_validation(self):
        with pytest.raises(ValueError):
            Susceptibility.oscillator(-1.0, 0.1)
        with pytest.raises(ValueError):
            Susceptibility.oscillator(1.0, -0.1)

    def test_tabulated_interpolation(self):
        ws = np.linspace(-2, 2, 81)
        pts = [(w, mech_susceptibility(OMEGA_M, GAMMA_M, w)) for w in ws]
        chi = Susceptibility.tabulated(pts)
        assert chi(0.5) == pytest.approx(mech_susceptibility(OMEGA_M, GAMMA_M, 0.5), rel=1e-3)
        assert chi(-2.0) == pts[0][1]

    def test_tabulated_rejects_broken_reality_symmetry(self):
        with pytest.raises(ValueError, match="conj"):
            Susceptibility.tabulated([(-1.0, 1.0 + 1.0j), (1.0, 1.0 + 1.0j)])

    def test_tabulated_rejects_extrapolation(self):
        chi = Susceptibility.tabulated([(-1.0, 1 - 1j), (1.0, 1 + 1j)])
        with pytest.raises(ValueError, match="range"):
            chi(2.0)

    def test_tabulated_rejects_duplicates(self):
        with pytest.raises(ValueError, match="duplicate"):
            Susceptibility.tabulated([(1.0, 1j), (1.0, 2j), (2.0, 0j)])


class TestAddedNoise:
    def test_no_noise_in_no_noise_out(self):
        noise = DetectorNoiseModel(0.0, 0.0, 0.0)
        gains = LoopGains(1.0, 0j)
        assert added_noise_spectrum(gains, noise, 0.3 + 0.7j) == 0.0

    def test_vacuum_shot_plus_backaction(self):
        noise = DetectorNoiseModel(0.0, 0.5, 0.5)
        gains = LoopGains(1.0, 0j)
        assert added_noise_spectrum(gains, noise, 1j) == pytest.approx(1.0, rel=1e-14)

    def test_pure_feedback_noise(self):
        noise = DetectorNoiseModel(1.0, 0.0, 0.0)
        gains = LoopGains(1.0, 1.0 + 0j)
        assert added_noise_spectrum(gains, noise, 1j) == pytest.approx(1.0, rel=1e-14)

    def test_reduces_to_no_feedback_expression(self):
        rng = np.random.default_rng(21)
        for _ in range(50):
            noise = DetectorNoiseModel(
                rng.uniform(0, 2), rng.uniform(0, 2), rng.uniform(0, 2),
                complex(rng.normal(), rng.normal()),
                complex(rng.normal(), rng.normal()),
                0j,
                complex(rng.normal(), rng.normal()),
            )
            g = 10.0 ** rng.uniform(-1, 1)
            chi = complex(rng.normal(), rng.normal())
            assert added_noise_spectrum(LoopGains(g, 0j), noise, chi) == pytest.approx(
                no_feedback_added_noise(g, noise, chi), rel=1e-13, abs=1e-15
            )

    def test_identified_ports_cancel_the_feedback(self):
        # when the monitor and readout are the same operator the transfer
        # value drops out and the loop-free expression is recovered
        rng = np.random.default_rng(22)
        for _ in range(25):
            s = rng.uniform(0.1, 2)
            cross = complex(rng.normal(), rng.normal())
            noise = DetectorNoiseModel(
                s, s, rng.uniform(0, 5), cross, cross, s,
                complex(rng.normal(), rng.normal()),
            )
            g = 10.0 ** rng.uniform(-1, 1)
            chi = complex(rng.normal(), rng.normal())
            expected = no_feedback_added_noise(g, noise, chi)
            for _ in range(5):
                lam = complex(rng.normal(), rng.normal())
                got = added_noise_spectrum(LoopGains(g, lam), noise, chi, include_yz=True)
                assert got == pytest.approx(expected, rel=1e-10, abs=1e-12)

    def test_yz_term_off_by_default(self):
        noise = DetectorNoiseModel(1.0, 1.0, 1.0, s_yz=0.8 + 0.1j)
        gains = LoopGains(1.0, 0.5 + 0.2j)
        on = added_noise_spectrum(gains, noise, 1j, include_yz=True)
        off = added_noise_spectrum(gains, noise, 1j)
        assert on != off
        kappa_over_g = 1.0 - gains.g * gains.lam
        expected_extra = 2.0 * (gains.lam * kappa_over_g.conjugate() * noise.s_yz).real
        assert on - off == pytest.approx(expected_extra, rel=1e-12)

    def test_rejects_nonpositive_coupling(self):
        with pytest.raises(ValueError):
            LoopGains(0.0, 0j)
        with pytest.raises(ValueError):
            LoopGains(-1.0, 0j)

    def test_rejects_negative_spectra(self):
        with pytest.raises(ValueError):
            DetectorNoiseModel(-0.1, 0.5, 0.5)


class TestSensitivityConversions:
    def test_force_unit_susceptibility(self):
        assert force_sensitivity(1.0, 1j) == 1.0

    def test_force_static(self):
        assert force_sensitivity(2.0, 8.0 + 0j) == pytest.approx(0.03125)

    def test_force_zero_added(self):
        assert force_sensitivity(0.0, 0.3 - 0.4j) == 0.0

    def test_force_rejects_zero_susceptibility(self):
        with pytest.raises(UnphysicalModelError):
            force_sensitivity(1.0, 0j)

    def test_displacement_open_loop(self):
        assert displacement_sensitivity(1.0, LoopGains(1.0, 0j), 1j, 0j) == 1.0

    def test_displacement_half_gain(self):
        got = displacement_sensitivity(1.0, LoopGains(1.0, 0.5 + 0j), 0.2 + 0.3j, 0j)
        assert got == pytest.approx(4.0, rel=1e-12)

    def test_displacement_loop_singularity(self):
        with pytest.raises(LoopSingularityError):
            displacement_sensitivity(1.0, LoopGains(1.0, 1.0 + 0j), 1j, 0j)


class TestAnalyticBound:
    def test_boundary_model_saturates(self):
        noise = DetectorNoiseModel(0.5, 0.5, 1.0)
        a, b, c = bound_coefficients(noise)
        assert a == 0.0
        assert b == 0.0
        assert c == pytest.approx(0.25, rel=1e-14)
        assert analytic_optimum_bound(noise, 1j) == pytest.approx(1.0, rel=1e-14)

    def test_real_susceptibility_drops_the_middle_term(self):
        noise = DetectorNoiseModel(0.4, 0.9, 3.0, 0.2 + 0.1j, -0.3 + 0.2j, 0j, 0.5 - 0.25j)
        a, b, c = bound_coefficients(noise)
        chi = 1.7 + 0j
        expected = 2.0 * (a * chi.real + abs(chi) * math.sqrt(c)) / (noise.s_yy + noise.s_zz)
        assert analytic_optimum_bound(noise, chi) == pytest.approx(expected, rel=1e-14)

    def test_rejects_zero_port_spectra(self):
        with pytest.raises(UnphysicalModelError):
            analytic_optimum_bound(DetectorNoiseModel(0.0, 0.0, 1.0), 1j)

    def test_rejects_negative_discriminant(self):
        # large cross-spectra with no backaction spectrum push c below zero
        noise = DetectorNoiseModel(1.0, 1.0, 0.0, 5.0 + 0j, -5.0 + 0j)
        assert bound_coefficients(noise)[2] < 0
        with pytest.raises(UnphysicalModelError):
            analytic_optimum_bound(noise, 1j)


class TestUncertaintyMatrix:
    def test_vacuum_triple_rejected(self):
        noise = DetectorNoiseModel(0.5, 0.5, 0.5)
        for sign in (1, -1):
            det = np.linalg.det(uncertainty_matrix(noise, sign)).real
            assert det == pytest.approx(-0.125, rel=1e-12)
        assert not is_physical(noise)

    def test_boundary_triple_accepted(self):
        noise = DetectorNoiseModel(0.5, 0.5, 1.0)
        for sign in (1, -1):
            m = uncertainty_matrix(noise, sign)
            assert np.linalg.det(m).real == pytest.approx(0.0, abs=1e-14)
            assert abs(np.linalg.eigvalsh(m).min()) < 1e-12
        assert is_physical(noise)

    def test_interior_triple_strictly_positive(self):
        noise = DetectorNoiseModel(0.5, 0.5, 2.0)
        for sign in (1, -1):
            assert np.linalg.eigvalsh(uncertainty_matrix(noise, sign)).min() > 0
        assert is_physical(noise)

    def test_matrix_layout(self):
        noise = DetectorNoiseModel(1.0, 2.0, 3.0, 0.1 + 0.2j, 0.3 - 0.4j, 0j, 0.5 + 0.6j)
        m = uncertainty_matrix(noise, 1)
        assert m[0, 0] == 1.0 and m[1, 1] == 2.0
        assert m[0, 1] == 0.0 and m[1, 0] == 0.0
        assert m[0, 2] == noise.s_yf + 0.5j
        assert m[1, 2] == noise.s_zf + 0.5j
        assert m[2, 0] == noise.s_yf.conjugate() - 0.5j
        assert m[2, 2] == noise.s_ff - noise.chi_ff.imag
        m_minus = uncertainty_matrix(noise, -1)
        assert m_minus[0, 2] == noise.s_yf - 0.5j
        assert m_minus[2, 2] == noise.s_ff + noise.chi_ff.imag

    def test_hermitian_both_signs(self):
        noise = DetectorNoiseModel(1.0, 2.0, 3.0, 0.1 + 0.2j, 0.3 - 0.4j, 0j, 0.5 + 0.6j)
        for sign in (1, -1):
            m = uncertainty_matrix(noise, sign)
            assert np.allclose(m, m.conj().T)

    def test_rejects_bad_sign(self):
        with pytest.raises(ValueError):
            uncertainty_matrix(DetectorNoiseModel(1, 1, 1), 2)
