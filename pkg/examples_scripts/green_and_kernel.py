"""Print a few Green-function and kernel values next to their bounds."""

import numpy as np

from fracshe.kernel_k import h_closed_form, kernel_lower_bound, kernel_series, kernel_upper_bound
from fracshe.model import GridSpec, ModelParams
from fracshe.stable_green import green_values, lambda_const, tail_asymptote

params = ModelParams(1.5, 0.1)
print(f"Lambda = {lambda_const(params):.10f}")
for x in (-3.0, 0.0, 3.0, 100.0):
    line = f"G(1, {x:6.1f}) = {float(green_values(params, 1.0, x)):.6e}"
    if abs(x) >= 50:
        line += f"   tail asymptote {tail_asymptote(params, x, 3):.6e}"
    print(line)

grid = GridSpec(1.0, 1.0, 1, 3.0, 7)
est = kernel_series(params, grid, 1.0)
print(f"\nkernel series at t=1 truncated after N={est.trunc_index} terms")
for x, k in zip(grid.x, est.field.values[0]):
    lo = kernel_lower_bound(params, 1.0, x, 1.0)
    up = kernel_upper_bound(params, 1.0, x, 1.0)
    print(f"x={x:5.1f}  lower {lo:.4e}  K {k:.4e}  upper {up:.4e}")

t = np.array([0.5, 1.0, 2.0])
print("\nH(t) =", np.array2string(h_closed_form(params, t, 1.0), precision=6))
