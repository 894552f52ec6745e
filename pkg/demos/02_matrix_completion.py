# # Filling in a low-rank matrix
#
# A rank-2 matrix loses a share of its entries at random. Singular value
# thresholding recovers them from what is left.

import numpy as np

from clustmiss import (
    CompletionConfig,
    complete,
    frobenius_norm,
    random_low_rank,
    relative_frobenius,
    remove_entries,
    shrink_singular_values,
    spectral_norm,
)

# The building block is the shrink operator: subtract tau from every
# singular value and drop the ones that go negative.

print(shrink_singular_values(np.diag([3.0, 1.0]), 2.0))

m = random_low_rank(300, 100, 2, rng=1)
for missing in (0.2, 0.5, 0.8):
    masked = remove_entries(m, missing, rng=2)
    res = complete(masked)
    err = m - res.completed
    print(
        f"missing {missing:.0%}: {res.iterations} iterations, rank {res.rank}, "
        f"Frobenius {frobenius_norm(err):.3g}, relative {relative_frobenius(m, res.completed):.2e}, "
        f"spectral {spectral_norm(err):.3g}"
    )

# At 80% missing on a matrix this small some rows keep only ten entries.
# The thresholded problem then sits measurably away from the true matrix
# and the default step overshoots, so the run ends at the iteration cap.
# Larger matrices at the same missing rate have many more entries per row
# and recover to about 1e-4.

# The residual on observed entries is the stopping rule. A tighter
# tolerance costs more iterations and buys a smaller error.

masked = remove_entries(m, 0.5, rng=3)
for tol in (1e-2, 1e-3, 1e-4):
    res = complete(masked, CompletionConfig(tol=tol))
    print(f"tol {tol:g}: {res.iterations} iterations, relative error {relative_frobenius(m, res.completed):.2e}")

# Hitting the iteration cap is reported, not raised.

res = complete(masked, CompletionConfig(max_iter=5))
print("converged:", res.converged, "residual:", round(res.final_residual, 4))
