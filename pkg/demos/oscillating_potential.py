# One-dimensional measure exp(-|x|^p (1 + eps cos x)) / Z.
# The Muckenhoupt quantity B_+ at the radii r_n = 2 n pi + pi/2 grows
# without bound, so no Poincare inequality can hold; the finite-difference
# spectral gap on [-R, R] collapses as R grows.  The Gaussian (no
# oscillation) keeps a gap of 2.
from coercive import muckenhoupt as MU

rows = MU.counterexample_series(beta=1.0, p=2.0, eps=0.5, n_max=4)
for r in rows:
    print(f"n={r.n}  r={r.r_n:7.3f}  log B_+={r.logB:9.4f}  lower={r.log_lower_bound:9.4f}")
print("slope of log B_+ against (2 n pi)^2:", MU.growth_slope(rows))

osc = MU.oscillating_potential(1.0, 1.0, 0.5)
gauss = MU.power_potential(1.0, 2.0)
for R in (8.0, 16.0):
    print(f"R={R:4.1f}  gap(osc)={MU.fd_spectral_gap(osc, R, grid_n=1024):.3e}"
          f"  gap(gauss)={MU.fd_spectral_gap(gauss, R / 2, grid_n=1024):.4f}")
