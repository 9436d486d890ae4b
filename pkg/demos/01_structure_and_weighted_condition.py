# The n=3, N=2 example tensor: certify its constants by sampling, then watch
# the y/|y|-weighted structure condition fail along y = (k+1, k).
import numpy as np

from quasilinear_lab import analysis, coefficients

T = coefficients.build_example_tensor()

# %% entries at a few anchors; a^{12}_{11} = b(y), a^{21}_{12} = w(y)
for y in [(0, 0), (2, 3), (3, 2), (2.5, 2.5)]:
    E = T(np.zeros(3), np.array(y, float))
    print(f"y={y}: b={E[0, 1, 0, 0] + 0.0:5.2f}  w={E[1, 0, 0, 1] + 0.0:6.2f}")

# %% sample the (x, y) box; every anchor inside it is added to the grid
spec = coefficients.example_sample_spec(y_half_width=10.0)
report = coefficients.check_structure(T, spec)
print(f"\nc = {report.c}, nu = {report.nu:.12f}, L0 = {report.L0}")

# the same check on a tensor whose coupling never switches off
bad = coefficients.check_structure(coefficients.constant_offdiag_tensor(), spec)
w = bad.witnesses[0]
print(f"constant coupling: staircase fails, first witness y={w.y} at L={w.L}")

# %% coefficient of |t|^2 in the weighted form, closed form vs direct evaluation
print("\n k   closed form     direct sum     below -12/5")
for k in range(2, 9):
    y, p = analysis.condition19_example_data(k)
    direct = analysis.condition19_lhs(T, np.zeros(3), y, p)
    r = analysis.condition19_example_ratio(k)
    print(f"{k:2d}  {r:12.8f}  {direct:12.8f}   {r < analysis.VIOLATION_THRESHOLD}")
print(f"k = 1e6: {analysis.condition19_example_ratio(10**6):.8f}  (tends to -3)")

# %% with |t| scaled up the left side drops below the right side for every delta
for delta, lhs, rhs, violated in analysis.condition19_delta_scan(T, 4, lambda_19=1.0, d_x=1.0, g_x=1.0)[::5]:
    print(f"delta={delta:.2e}  lhs={lhs:.4e}  rhs={rhs:.4e}  violated={violated}")
