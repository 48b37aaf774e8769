# Entropy/energy ratio of dilated plateau functions on H_1 under
# exp(-N^2)/Z.  With N the Kaplan norm the ratio keeps growing along
# the dilation family, so there is no log-Sobolev inequality; with N the
# CC distance the same family stays inside a bounded band.
from coercive import counterexamples as CX

exp = CX.NoLSExperiment(t_grid=(4.0, 16.0, 64.0), n_samples=20_000, seed=0)
table = CX.no_ls_contrast(exp)
for name, rows in (("kaplan", table.kaplan), ("cc", table.cc)):
    print(name)
    for r in rows:
        print(f"  t={r.t:5.1f}  ratio={r.ratio.value:10.3f} +- {r.ratio.std_error:.3f}  ess={r.ess:.0f}")
print(table.checks)
