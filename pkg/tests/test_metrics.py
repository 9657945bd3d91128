import math

import numpy as np
import pytest

from sqm.errors import CalibrationError, DomainError, ShapeMismatchError
from sqm.image import PlanarImage
from sqm.metrics import (DisplayedSpectra, MetricCalibration, QualityLoss,
                         VariantDescriptor, acutance, calibrate_k1, cpiq_score,
                         displayed_spectra, log_neq, minkowski_combine, pic, sqrin,
                         texture_quality_loss, visual_log_neq, visual_noise_omega)
from sqm.spectral import NoiseImage, Provenance, ReplicateSet, Spectrum1D
from sqm.sysperf import MtfCurve, NeqCurve
from sqm.vision import BartenCsf, ViewingEnvironment, jf_csf, normalized

from conftest import flat_spectrum


def mtf_flat(value=1.0, n=32, unit="cycles/pixel"):
    sp = flat_spectrum(value, n=n, unit=unit, variant="analytic")
    return MtfCurve(sp, variant="analytic")


def neq_flat(value, n=32, mu=0.5, unit="cycles/degree", lo=0.5, hi=18.0):
    f = np.linspace(lo, hi, n)
    sp = Spectrum1D(f, np.full(n, float(value)), unit=unit, variant="analytic")
    return NeqCurve(sp, mu_a=mu)


def flat_ds(s, nvals, lo=0.5, hi=18.0, n=64, u_max=18.0):
    f = np.linspace(lo, hi, n)
    return DisplayedSpectra(f, np.full(n, float(s)), np.full(n, float(nvals)), u_max)


class TestDisplayedSpectra:
    # spectra already in cycles/degree far below the huge far_env Nyquist,
    # so the display MTF is 1 to machine precision

    def test_identity_display(self, far_env):
        ps = flat_spectrum(3.0, unit="cycles/degree")
        nps = flat_spectrum(0.2, unit="cycles/degree")
        ds = displayed_spectra(ps, mtf_flat(1.0, unit="cycles/degree"), nps, far_env)
        np.testing.assert_allclose(ds.signal, 3.0, rtol=1e-12)
        np.testing.assert_allclose(ds.noise, 0.2, rtol=1e-12)

    def test_gamma_square_law(self, far_env):
        ps = flat_spectrum(3.0, unit="cycles/degree")
        nps = flat_spectrum(0.2, unit="cycles/degree")
        mtf = mtf_flat(unit="cycles/degree")
        base = displayed_spectra(ps, mtf, nps, far_env)
        doubled_env = ViewingEnvironment(distance_cm=1e9, display_gamma=2.0)
        doubled = displayed_spectra(ps, mtf, nps, doubled_env)
        np.testing.assert_allclose(doubled.signal, 4 * base.signal, rtol=1e-12)
        np.testing.assert_allclose(doubled.noise, 4 * base.noise, rtol=1e-12)

    def test_display_nps_additive(self):
        env = ViewingEnvironment(distance_cm=1e9, display_gamma=1.0,
                                 display_nps=flat_spectrum(0.07, lo=1e-4, hi=1e9,
                                                           unit="cycles/degree"))
        ds = displayed_spectra(flat_spectrum(1.0), mtf_flat(), flat_spectrum(0.0), env)
        np.testing.assert_allclose(ds.noise, 0.07, rtol=1e-6)

    def test_inverse_display_reading(self, env):
        ps, nps = flat_spectrum(1.0), flat_spectrum(0.0)
        mult = displayed_spectra(ps, mtf_flat(), nps, env)
        inv = displayed_spectra(ps, mtf_flat(), nps, env, inverse_display_on_signal=True)
        # the two readings differ by MTF_disp^4 on the signal path
        ratio = mult.signal / inv.signal
        from sqm.vision import display_mtf
        np.testing.assert_allclose(ratio, display_mtf(mult.frequencies, env) ** 4,
                                   rtol=1e-9)

    def test_grid_mismatch(self, env):
        with pytest.raises(ShapeMismatchError):
            displayed_spectra(flat_spectrum(1.0, n=16), mtf_flat(n=32),
                              flat_spectrum(0.0, n=16), env)


def const_csf(value):
    return lambda u: np.full_like(np.asarray(u, dtype=float), value)


class TestPic:
    def test_zero_signal_gives_offset(self):
        ds = flat_ds(0.0, 1.0)
        cal = MetricCalibration(k1=2.0, k2=5.0)
        assert pic(ds, const_csf(1.0), 1e-8, cal).score == pytest.approx(5.0)

    def test_huge_noise_limit(self):
        ds = flat_ds(1.0, 1e12)
        cal = MetricCalibration(k1=1.0, k2=3.0)
        assert pic(ds, const_csf(1.0), 0.0, cal).score == pytest.approx(3.0, abs=1e-5)

    def test_flat_ratio_closed_form(self):
        # S / (N + visual/CSF^2) = c everywhere: the integrand is constant,
        # so PIC = k1 * sqrt(ln(1+c) * ln(umax/u1))
        c, kappa, nvis = 4.0, 2.0, 1e-3
        noise = 0.05
        s = c * (noise + nvis / kappa ** 2)
        ds = flat_ds(s, noise, lo=0.4, hi=16.0, u_max=16.0)
        got = pic(ds, const_csf(kappa), nvis).score
        want = math.sqrt(math.log(1 + c) * math.log(16.0 / 0.4))
        assert got == pytest.approx(want, rel=1e-3)

    def test_zero_denominator_domain_error(self):
        ds = flat_ds(1.0, 0.0)
        with pytest.raises(DomainError):
            pic(ds, const_csf(1.0), 0.0)

    def test_monotone_in_signal_and_noise(self, rng):
        csf = const_csf(1.5)
        for metric in (pic, sqrin):
            for _ in range(20):
                f = np.sort(rng.uniform(0.3, 18.0, 24))
                f[0] = 0.3
                s = rng.uniform(0.5, 4.0, 24)
                n = rng.uniform(0.01, 0.2, 24)
                base = metric(DisplayedSpectra(f, s, n, 18.0), csf, 1e-6).score
                up = metric(DisplayedSpectra(f, s * 1.3, n, 18.0), csf, 1e-6).score
                noisier = metric(DisplayedSpectra(f, s, n * 1.7, 18.0), csf, 1e-6).score
                assert up >= base >= noisier


class TestSqrin:
    def test_zero_signal(self):
        cal = MetricCalibration(k1=1.5, k2=7.0)
        assert sqrin(flat_ds(0.0, 1.0), const_csf(1.0), 1e-9, cal).score == pytest.approx(7.0)

    def test_flat_ratio_closed_form(self):
        c, kappa, nvis = 16.0, 1.0, 2e-3
        noise = 0.1
        s = c * (noise + nvis / kappa ** 2)
        ds = flat_ds(s, noise, lo=0.4, hi=16.0, u_max=16.0)
        got = sqrin(ds, const_csf(kappa), nvis).score
        want = (c ** 0.25) * math.log(16.0 / 0.4) / math.log(2.0)
        assert got == pytest.approx(want, rel=1e-3)

    def test_fourth_root_law_with_zero_noise(self):
        nvis = 1e-4
        a = sqrin(flat_ds(1.0, 0.0), const_csf(1.0), nvis).score
        b = sqrin(flat_ds(16.0, 0.0), const_csf(1.0), nvis).score
        assert b == pytest.approx(2 * a, rel=1e-9)


class TestAcutance:
    def test_transparent_system_is_unity(self, far_env):
        u = np.linspace(0.02, 80.0, 4000)
        mtf = MtfCurve(Spectrum1D(u, np.ones_like(u), unit="cycles/degree",
                                  variant="analytic"), variant="analytic")
        q = acutance(mtf, far_env, jf_csf, u_max=80.0)
        assert q == pytest.approx(1.0, abs=2e-3)

    def test_zero_system_is_zero(self, env):
        u = np.linspace(0.02, 40.0, 500)
        mtf = MtfCurve.__new__(MtfCurve)  # bypass the low-frequency warning
        object.__setattr__(mtf, "spectrum", Spectrum1D(u, np.zeros_like(u),
                                                       unit="cycles/degree"))
        object.__setattr__(mtf, "variant", "analytic")
        object.__setattr__(mtf, "clamp_count", 0)
        assert acutance(mtf, env, jf_csf) == 0.0

    def test_gaussian_against_quadrature_oracle(self, env):
        from scipy.integrate import quad
        sigma = 0.04  # in degrees-equivalent units on the cpd axis
        u = np.linspace(0.01, 40.0, 3000)
        vals = np.exp(-2 * np.pi ** 2 * sigma ** 2 * u ** 2)
        mtf = MtfCurve(Spectrum1D(u, vals, unit="cycles/degree", variant="analytic"),
                       variant="analytic")
        got = acutance(mtf, env, jf_csf)
        from sqm.vision import display_mtf

        def integrand(x):
            return (math.exp(-2 * np.pi ** 2 * sigma ** 2 * x ** 2)
                    * float(display_mtf(x, env)) * float(jf_csf(x)))

        num = quad(integrand, 0.0, env.u_max, limit=400)[0]
        den = quad(lambda x: float(jf_csf(x)), 0.0, 80.0, limit=400)[0]
        assert got == pytest.approx(num / den, rel=5e-3)

    def test_texture_loss_direction(self, env):
        sharp = mtf_flat(1.0, unit="cycles/pixel")
        soft_vals = np.exp(-6.0 * sharp.frequencies)
        soft = MtfCurve(Spectrum1D(sharp.frequencies, soft_vals, variant="analytic"),
                        variant="analytic")
        assert texture_quality_loss(sharp, env, jf_csf) == pytest.approx(0.0, abs=1e-12)
        assert texture_quality_loss(soft, env, jf_csf) > 0.0


def noise_set(rng, sigma, n=6, size=64):
    imgs = tuple(PlanarImage(rng.normal(0.5, sigma, (size, size))) for _ in range(n))
    return ReplicateSet(imgs, Provenance(target_type="uniform"))


class TestVisualNoiseOmega:
    def test_zero_noise(self, env):
        ni = NoiseImage(np.zeros((64, 64)), n_replicates=4)
        assert visual_noise_omega(ni, env, jf_csf) == 0.0

    def test_monotone_in_amplitude(self, env, rng):
        field = rng.standard_normal((64, 64)) * 0.02
        small = visual_noise_omega(NoiseImage(field, 4), env, jf_csf)
        big = visual_noise_omega(NoiseImage(2 * field, 4), env, jf_csf)
        assert big > small > 0.0

    def test_distance_reduces_white_noise_omega(self, rng):
        # the passband shrinks in cycles/pixel as the viewer steps back
        field = rng.standard_normal((64, 64)) * 0.03
        near = visual_noise_omega(NoiseImage(field, 4), ViewingEnvironment(), jf_csf)
        far = visual_noise_omega(NoiseImage(field, 4),
                                 ViewingEnvironment(distance_cm=120.0), jf_csf)
        assert far <= near

    def test_replicate_set_input(self, env, rng):
        om = visual_noise_omega(noise_set(rng, 0.05), env, jf_csf)
        assert om > 0.0


class TestMinkowski:
    def test_zero_max_reduces_to_sum(self):
        assert minkowski_combine([1.0, 2.0, 3.0], ql_max=0.0) == pytest.approx(6.0)

    def test_single_attribute_identity(self):
        for qmax in (0.0, 4.0, 30.0):
            assert minkowski_combine([5.0], ql_max=qmax) == pytest.approx(5.0)

    def test_two_attribute_value(self):
        n = 1 + 2 * math.tanh(4.0 / 16.9)
        want = (3.0 ** n + 4.0 ** n) ** (1 / n)
        assert minkowski_combine([3.0, 4.0], ql_max=4.0) == pytest.approx(want, rel=1e-12)
        assert minkowski_combine([3.0, 4.0]) == pytest.approx(want, rel=1e-12)

    def test_bounds_random_vectors(self, rng):
        for _ in range(1000):
            k = rng.integers(1, 6)
            losses = rng.uniform(0.0, 25.0, k)
            qlm = minkowski_combine(losses)
            assert qlm >= np.max(losses) - 1e-9
            assert qlm <= np.sum(losses) + 1e-9

    def test_negative_rejected(self):
        with pytest.raises(DomainError):
            minkowski_combine([1.0, -0.1])
        with pytest.raises(DomainError):
            QualityLoss((1.0, -2.0))

    def test_quality_loss_dataclass(self):
        ql = QualityLoss((3.0, 4.0), ql_max=4.0)
        assert ql.combined == pytest.approx(minkowski_combine([3.0, 4.0], 4.0))


class TestCpiqScore:
    def test_zero_losses(self):
        assert cpiq_score(0.0, 0.0).score == pytest.approx(23.0)

    def test_full_texture_loss(self):
        assert cpiq_score(23.0, 0.0).score == pytest.approx(0.0)

    def test_two_loss_value(self):
        want = 23.0 - minkowski_combine([3.0, 4.0], 4.0)
        assert cpiq_score(3.0, 4.0).score == pytest.approx(want, rel=1e-12)

    def test_score_bounded_above(self, rng):
        for _ in range(100):
            t, n = rng.uniform(0, 30, 2)
            assert cpiq_score(t, n).score <= 23.0


class TestLogNeq:
    def test_flat_closed_form(self, far_env):
        q = 250.0
        curve = neq_flat(q, lo=0.5, hi=16.0)
        cal = MetricCalibration(k1=3.0, k2=1.0)
        got = log_neq(curve, far_env, cal, u_max=16.0).score
        want = 3.0 * math.log10(q * math.log(16.0 / 0.5)) + 1.0
        assert got == pytest.approx(want, rel=1e-9)

    def test_log_law(self, far_env):
        a = log_neq(neq_flat(100.0), far_env, u_max=18.0).score
        b = log_neq(neq_flat(1000.0), far_env, u_max=18.0).score
        assert b - a == pytest.approx(1.0, rel=1e-9)

    def test_degenerate_domain_error(self, far_env):
        with pytest.raises(DomainError):
            log_neq(neq_flat(0.0), far_env)

    def test_strictly_increasing_in_neq(self, far_env, rng):
        f = np.sort(rng.uniform(0.5, 18.0, 16))
        vals = rng.uniform(10.0, 100.0, 16)
        a = log_neq(NeqCurve(Spectrum1D(f, vals, unit="cycles/degree"), 0.5),
                    far_env, u_max=18.0).score
        b = log_neq(NeqCurve(Spectrum1D(f, vals * 1.2, unit="cycles/degree"), 0.5),
                    far_env, u_max=18.0).score
        assert b > a


class TestVisualLogNeq:
    def test_unit_csf_reduces_to_log_neq(self, far_env):
        curve = neq_flat(123.0)
        a = log_neq(curve, far_env, u_max=16.0).score
        b = visual_log_neq(curve, far_env, const_csf(1.0), u_max=16.0).score
        assert a == pytest.approx(b, rel=1e-12)

    def test_csf_scale_shifts_by_2log10c(self, far_env):
        curve = neq_flat(123.0)
        a = visual_log_neq(curve, far_env, const_csf(1.0), u_max=16.0).score
        b = visual_log_neq(curve, far_env, const_csf(10.0), u_max=16.0).score
        assert b - a == pytest.approx(2.0, rel=1e-9)

    def test_normalization_cancels_magnitude(self, env):
        # a contextual model that is a scaled Barten collapses onto Barten
        # once area-normalized: only shape changes can move the score
        curve = neq_flat(200.0, lo=0.5, hi=18.0)
        barten = BartenCsf(env)
        grid = np.linspace(0.05, 80.0, 2000)
        scaled = normalized(lambda u: 3.7 * np.asarray(barten(u)), barten, grid)
        a = visual_log_neq(curve, env, barten).score
        b = visual_log_neq(curve, env, scaled).score
        assert a == pytest.approx(b, rel=1e-9)


class TestCalibration:
    def test_identity_when_mean_matches(self):
        cal = calibrate_k1([10.0, 14.0], 12.0)
        assert cal.k1 == pytest.approx(1.0)
        assert cal.k2 == 0.0

    def test_half_gain(self):
        cal = calibrate_k1([20.0, 28.0], 12.0)
        assert cal.k1 == pytest.approx(0.5)

    def test_postcondition(self, rng):
        raws = rng.uniform(5.0, 25.0, 40)
        target = 23.0
        cal = calibrate_k1(raws, target)
        assert np.mean([cal.apply(r) for r in raws]) == pytest.approx(target, abs=1e-9)

    def test_zero_mean_rejected(self):
        with pytest.raises(CalibrationError):
            calibrate_k1([1.0, -1.0], 12.0)

    def test_gain_must_be_positive(self):
        with pytest.raises(CalibrationError):
            calibrate_k1([-4.0, -2.0], 12.0)
        with pytest.raises(CalibrationError):
            MetricCalibration(k1=0.0)


class TestVariantDescriptor:
    def test_valid(self):
        v = VariantDescriptor("uniform-patch", "direct-dead-leaves", "barten", "linear")
        assert v.csf == "barten"

    def test_rejects_unknown(self):
        with pytest.raises(DomainError):
            VariantDescriptor(nps_variant="bogus")
        with pytest.raises(DomainError):
            VariantDescriptor(mtf_variant="bogus")
        with pytest.raises(DomainError):
            VariantDescriptor(csf="bogus")
