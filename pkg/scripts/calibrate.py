"""Phase-space calibration scan for the driven Hamiltonian defaults.

Maps out where the islands of stability sit, measures Lyapunov exponents of
candidate seeds, and reports the bounding box of a chaotic-sea cloud.  The
numbers frozen into the package defaults came from this scan: islands near
(+-3, 0) and (+-9, 0); sea Lyapunov exponent ~ 0.07 - 0.10; default packet
center (9.9, 0.35) chosen just outside the outermost island, in the chaotic
layer.

Run:  python scripts/calibrate.py
"""
import numpy as np

from echosim.classical import PhaseSpacePoint, lyapunov_estimate, poincare_section
from echosim.hamiltonian import DrivenHamiltonian


def dispersion_scan(h, xs, ps, n_periods=200):
    """Stroboscopic cloud RMS radius per seed; small radius marks an island."""
    seeds = [(x, p) for x in xs for p in ps]
    cloud = poincare_section(seeds, n_periods, h, dt=0.01)
    out = []
    for i, (x0, p0) in enumerate(seeds):
        sel = cloud.seed_id == i
        cx, cp = cloud.x[sel], cloud.p[sel]
        r = np.sqrt((cx - cx.mean()) ** 2 + (cp - cp.mean()) ** 2)
        out.append((x0, p0, r.mean(), np.abs(cx - x0).max()))
    return out


def main():
    h = DrivenHamiltonian()
    print("== coarse island scan (dispersion of 200-period clouds) ==")
    xs = np.arange(-14.0, 14.01, 1.0)
    ps = np.arange(-1.5, 1.51, 0.5)
    rows = dispersion_scan(h, xs, ps)
    compact = [r for r in rows if r[2] < 1.5]
    for x0, p0, rmean, xdrift in sorted(compact, key=lambda r: r[2])[:30]:
        print(f"  seed ({x0:+6.2f}, {p0:+5.2f})  rms radius {rmean:7.3f}  max|x-x0| {xdrift:7.3f}")

    print("== Lyapunov exponents ==")
    for label, z in [
        ("sea (0, 0.5)", PhaseSpacePoint(0.0, 0.5)),
        ("sea (0, 1.0)", PhaseSpacePoint(0.0, 1.0)),
        ("sea (6.5, 0)", PhaseSpacePoint(6.5, 0.0)),
        ("sea (0, -1.0)", PhaseSpacePoint(0.0, -1.0)),
        ("cand island (pi, 0)", PhaseSpacePoint(np.pi, 0.0)),
        ("cand island (-pi, 0)", PhaseSpacePoint(-np.pi, 0.0)),
        ("cand island (3pi, 0)", PhaseSpacePoint(3 * np.pi, 0.0)),
    ]:
        for tmax in (2000.0, 4000.0):
            lam = lyapunov_estimate(z, tmax, h, dt=0.01)
            print(f"  {label:22s} t_max={tmax:6.0f}  lambda = {lam:+.4f}")

    print("== sea cloud bounding box (seed (0,0.5), 2000 periods) ==")
    cloud = poincare_section([(0.0, 0.5)], 2000, h, dt=0.005)
    print(f"  x in [{cloud.x.min():.2f}, {cloud.x.max():.2f}]  p in [{cloud.p.min():.2f}, {cloud.p.max():.2f}]")


if __name__ == "__main__":
    main()
