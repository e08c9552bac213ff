import numpy as np
import pytest

from echosim.classical import (
    NO_FORK,
    InitialGaussianDensity,
    PhaseSpaceBox,
    PhaseSpacePoint,
    StretchedGaussianParams,
    SupportEscapeError,
    classical_overlap,
    classical_overlap_with_convergence,
    density_at,
    estimate_support_box,
    flow_map,
    flow_map_batch,
    lyapunov_estimate,
    overlap_from_backward_maps,
    poincare_section,
    stretch_drift_backward_map,
    stretched_gaussian_overlap,
)
from echosim.hamiltonian import DrivenHamiltonian, potential_value

HBAR = 0.1
PAPER = DrivenHamiltonian()
HARMONIC = DrivenHamiltonian(kappa=0.0, a=0.01)
OMEGA = np.sqrt(HARMONIC.a / HARMONIC.m)


class TestFlowMap:
    def test_harmonic_closed_orbit(self):
        period = 2 * np.pi / OMEGA
        z0 = PhaseSpacePoint(1.5, 0.0)
        z1 = flow_map(z0, 0.0, period, HARMONIC, dt=0.005)
        assert abs(z1.x - z0.x) < 1e-6
        assert abs(z1.p - z0.p) < 1e-6

    def test_reversibility(self):
        z0 = PhaseSpacePoint(1.2, 0.4)
        z1 = flow_map(z0, 0.0, 10.0, PAPER, dt=0.005)
        z2 = flow_map(z1, 10.0, 0.0, PAPER, dt=0.005)
        assert abs(z2.x - z0.x) < 1e-10
        assert abs(z2.p - z0.p) < 1e-10

    def test_autonomous_energy_drift(self):
        # static potential (l=0): energy must stay within the symplectic
        # bound, with no secular growth over t=100
        h = DrivenHamiltonian(l=0.0)

        def energy(zz):
            return 0.5 * zz.p**2 / h.m + float(potential_value(h, zz.x, 0.0))

        z = PhaseSpacePoint(0.1, 0.05)
        e0 = energy(z)
        worst = 0.0
        for k in range(400):
            z = flow_map(z, k * 0.25, (k + 1) * 0.25, h, dt=0.005)
            worst = max(worst, abs(energy(z) - e0))
        assert worst < 1e-8

        # a large orbit oscillates at O(dt^2) but stays bounded: the late-time
        # excursion must not exceed the early-time one by any trend
        z = PhaseSpacePoint(2.0, 0.3)
        e0 = energy(z)
        devs = []
        for k in range(400):
            z = flow_map(z, k * 0.25, (k + 1) * 0.25, h, dt=0.005)
            devs.append(abs(energy(z) - e0))
        assert max(devs[200:]) < 2.0 * max(devs[:200])

    def test_zero_span_returns_input(self):
        z0 = PhaseSpacePoint(1.0, -0.5)
        assert flow_map(z0, 3.0, 3.0, PAPER) is z0

    def test_batch_matches_serial(self):
        xs = np.array([1.2, -0.7, 4.0])
        ps = np.array([0.4, 0.1, -0.2])
        bx, bp = flow_map_batch(xs, ps, 0.0, 7.0, PAPER, dt=0.005)
        for i in range(3):
            z = flow_map(PhaseSpacePoint(xs[i], ps[i]), 0.0, 7.0, PAPER, dt=0.005)
            assert abs(bx[i] - z.x) < 1e-12
            assert abs(bp[i] - z.p) < 1e-12

    def test_bad_dt_rejected(self):
        with pytest.raises(ValueError):
            flow_map(PhaseSpacePoint(0, 0), 0.0, 1.0, PAPER, dt=0.0)


class TestDensityAt:
    def test_time_zero_identity(self):
        dens = InitialGaussianDensity(1.0, -0.2, 0.3, 0.4)
        z = PhaseSpacePoint(1.3, 0.1)
        assert density_at(z, 0.0, PAPER, dens) == pytest.approx(dens.value(1.3, 0.1))

    def test_harmonic_origin_fixed_point(self):
        sigma = np.sqrt(HBAR / (2 * OMEGA))
        dens = InitialGaussianDensity(0.0, 0.0, sigma, OMEGA * sigma)
        v0 = dens.value(0.0, 0.0)
        for t in (3.0, 11.0, 40.0):
            assert density_at(PhaseSpacePoint(0.0, 0.0), t, HARMONIC, dens) == pytest.approx(v0, rel=1e-9)

    def test_harmonic_rigid_rotation(self):
        sigma = np.sqrt(HBAR / (2 * OMEGA))
        dens = InitialGaussianDensity(1.0, 0.0, sigma, OMEGA * sigma)
        t = 12.0
        pts_x = np.array([0.4, 1.1, -0.6])
        pts_p = np.array([0.02, -0.05, 0.1])
        got = density_at((pts_x, pts_p), t, HARMONIC, dens)
        # exact backward rotation of the harmonic flow
        x0 = pts_x * np.cos(OMEGA * t) - pts_p * np.sin(OMEGA * t) / OMEGA
        p0 = OMEGA * pts_x * np.sin(OMEGA * t) + pts_p * np.cos(OMEGA * t)
        assert np.allclose(got, dens.value(x0, p0), rtol=1e-4)


def matched_density(x0=0.0, p0=0.0, omega=OMEGA):
    # sigma_x*sigma_p = hbar/2 so the overlap normalization gives O(0)=1,
    # and the aspect ratio makes the harmonic flow a rigid rotation
    sx = np.sqrt(HBAR / (2 * omega))
    return InitialGaussianDensity(x0, p0, sx, omega * sx)


class TestClassicalOverlap:
    def box(self, half_x=6.0, half_p=0.6):
        return PhaseSpaceBox(-half_x, half_x, -half_p, half_p)

    def test_time_zero_unity(self):
        hp, hm = PAPER.with_branch("plus"), PAPER.with_branch("minus")
        dens = matched_density(omega=1.0)  # isotropic sqrt(hbar/2)
        box = PhaseSpaceBox(-2, 2, -2, 2)
        val = classical_overlap(box, 256, 0.0, hp, hm, dens, HBAR)
        assert val == pytest.approx(1.0, abs=1e-8)

    def test_identical_branches_stay_unity(self):
        h0 = DrivenHamiltonian(epsilon=0.0)
        hp, hm = h0.with_branch("plus"), h0.with_branch("minus")
        dens = matched_density(omega=1.0)
        for t in (2.0, 5.0):
            box = estimate_support_box(hp, hm, dens, t, rng=np.random.default_rng(0))
            val = classical_overlap(box, 256, t, hp, hm, dens, HBAR)
            assert val == pytest.approx(1.0, abs=1e-3)

    def test_harmonic_drift_toy_matches_closed_form(self):
        # kappa = 0 branches: two rigidly rotating Gaussians whose centers
        # separate as d(t) = 2*eps*(1 - cos wt, m w sin wt); Gaussian product
        # integral gives the expected overlap exactly
        h = DrivenHamiltonian(kappa=0.0, a=0.01, epsilon=0.5)
        hp, hm = h.with_branch("plus"), h.with_branch("minus")
        dens = matched_density()
        eps, m, w = h.epsilon, h.m, OMEGA
        sx = dens.sigma_x
        sp = dens.sigma_p
        for t in (5.0, 10.0, 15.0):
            dx = 2 * eps * (1 - np.cos(w * t))
            dp = 2 * eps * m * w * np.sin(w * t)
            want = np.exp(-(dx**2) / (4 * sx**2)) * np.exp(-(dp**2) / (4 * sp**2))
            box = estimate_support_box(hp, hm, dens, t, rng=np.random.default_rng(1))
            got = classical_overlap(box, 512, t, hp, hm, dens, HBAR)
            assert got == pytest.approx(want, abs=2e-5)

    def test_branch_exchange_symmetry(self):
        hp, hm = PAPER.with_branch("plus"), PAPER.with_branch("minus")
        dens = matched_density(omega=1.0)
        t = 3.0
        box = estimate_support_box(hp, hm, dens, t, rng=np.random.default_rng(2))
        a = classical_overlap(box, 256, t, hp, hm, dens, HBAR)
        b = classical_overlap(box, 256, t, hm, hp, dens, HBAR)
        assert abs(a - b) < 1e-12

    def test_support_escape_raises(self):
        hp, hm = PAPER.with_branch("plus"), PAPER.with_branch("minus")
        dens = matched_density(omega=1.0)
        with pytest.raises(SupportEscapeError):
            classical_overlap(PhaseSpaceBox(-0.1, 0.1, -0.1, 0.1), 128, 1.0, hp, hm, dens, HBAR)

    def test_convergence_flag(self):
        hp, hm = PAPER.with_branch("plus"), PAPER.with_branch("minus")
        dens = matched_density(omega=1.0)
        box = estimate_support_box(hp, hm, dens, 2.0, rng=np.random.default_rng(3))
        _, ok = classical_overlap_with_convergence(box, 256, 2.0, hp, hm, dens, HBAR)
        assert ok


class TestLiouvilleConservation:
    def test_mass_conserved_at_t20(self):
        dens = matched_density(x0=10.3, omega=1.0)
        box = estimate_support_box(PAPER, PAPER, dens, 20.0, rng=np.random.default_rng(4))
        xs, ps = box.cell_centers(512)
        X, P = np.broadcast_arrays(xs, ps)
        vals = density_at((X.ravel(), P.ravel()), 20.0, PAPER, dens)
        mass = vals.sum() * box.cell_area(512)
        assert mass == pytest.approx(1.0, abs=1e-4)


class TestStretchedGaussian:
    def test_time_zero(self):
        p = StretchedGaussianParams(lam=1.0, sigma=1.0, v=(0.1, 0.2))
        assert stretched_gaussian_overlap(p, 0.0) == 1.0

    def test_no_drift(self):
        p = StretchedGaussianParams(lam=2.0, sigma=0.5, v=(0.0, 0.0))
        for t in (0.5, 5.0, 50.0):
            assert stretched_gaussian_overlap(p, t) == 1.0

    def test_reference_value(self):
        p = StretchedGaussianParams(lam=1.0, sigma=1.0, v=(0.01, 0.0))
        assert stretched_gaussian_overlap(p, 5.0) == pytest.approx(1.05e-6, rel=0.005)

    def test_machinery_agreement(self):
        hbar = 2.0  # sigma^2 = hbar/2 with sigma = 1
        params = StretchedGaussianParams(lam=1.0, sigma=1.0, v=(0.01, 0.0))
        dens = InitialGaussianDensity(0.0, 0.0, 1.0, 1.0)
        for t in (0.0, 2.5, 5.0):
            ex = np.exp(params.lam * t)
            cx = params.v[0] * t
            box = PhaseSpaceBox(min(0, cx) - 7 / ex, max(0, cx) + 7 / ex, -7 * ex, 7 * ex)
            got = overlap_from_backward_maps(
                stretch_drift_backward_map(params, t, drifting=False),
                stretch_drift_backward_map(params, t, drifting=True),
                dens, box, 512, hbar,
            )
            assert got == pytest.approx(stretched_gaussian_overlap(params, t), abs=1e-6)

    def test_invalid_params_rejected(self):
        with pytest.raises(ValueError):
            StretchedGaussianParams(lam=-1.0, sigma=1.0, v=(0, 0))
        with pytest.raises(ValueError):
            StretchedGaussianParams(lam=1.0, sigma=0.0, v=(0, 0))


class TestPoincare:
    def test_zero_periods_returns_seeds(self):
        seeds = [(1.0, 0.2), (-2.0, 0.1)]
        cloud = poincare_section(seeds, 0, PAPER)
        assert np.array_equal(cloud.x, [1.0, -2.0])
        assert np.array_equal(cloud.p, [0.2, 0.1])
        assert np.array_equal(cloud.n, [0, 0])

    def test_island_seed_stays_bounded(self):
        # island center near (3, 0) from the calibration scan
        cloud = poincare_section([(3.0, 0.0)], 200, PAPER, dt=0.005)
        r = np.sqrt((cloud.x - 3.0) ** 2 + cloud.p**2)
        assert r.max() < 1.0

    def test_sampling_is_stroboscopic(self):
        # one period of the drive must return the drive phase to zero:
        # check against a direct integration to t = 2*pi
        cloud = poincare_section([(1.0, 0.5)], 1, PAPER, dt=0.005)
        spp = round(2 * np.pi / 0.005)
        z = flow_map(PhaseSpacePoint(1.0, 0.5), 0.0, 2 * np.pi, PAPER, dt=2 * np.pi / spp)
        assert cloud.x[1] == pytest.approx(z.x, abs=1e-10)
        assert cloud.p[1] == pytest.approx(z.p, abs=1e-10)


class TestLyapunov:
    def test_harmonic_is_regular(self):
        lam = lyapunov_estimate(PhaseSpacePoint(1.0, 0.0), 500.0, HARMONIC, dt=0.005)
        assert abs(lam) < 0.01

    def test_island_is_regular(self):
        lam = lyapunov_estimate(PhaseSpacePoint(3.0, 0.0), 1000.0, PAPER, dt=0.005)
        assert abs(lam) < 0.02

    def test_sea_is_chaotic(self):
        lam = lyapunov_estimate(PhaseSpacePoint(0.0, 0.5), 1500.0, PAPER, dt=0.005)
        assert lam > 0.03
