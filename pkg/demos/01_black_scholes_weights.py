# %% [markdown]
# # Malliavin weights in the Black-Scholes limit
#
# With a constant volatility the tangent fields collapse: `L_t = sigma0`,
# `J = K = 0` and the Delta weight is `W_T / (x sigma0 T)`.  This is the one
# setting where every estimator has a closed form to compare against, so it
# is the first thing to look at.

# %%
import numpy as np

from svgreeks import Payoff, TimeGrid, bs_closed_form, evaluate, preset
from svgreeks.estimators import delta_weights, estimate_from

model = preset("black_scholes", sigma0=0.2, r=0.05)
call = Payoff("call", 100.0)
grid = TimeGrid(1.0, 64)

F = evaluate(model, grid, n_paths=200_000, seed=1, order=3, params=("rho_rate", "vega_scale"))
print("I on every path:", np.unique(F.I.round(12)))

# %% [markdown]
# One simulation feeds every Greek.  The closed forms use the scale
# convention for Vega, `dC/d eps` under `sigma -> (1 + eps) sigma`.

# %%
print(f"{'greek':6s} {'estimate':>11s} {'std err':>9s} {'closed form':>12s} {'z':>6s}")
for greek in ("price", "delta", "gamma", "rho", "vega"):
    e = estimate_from(F, call, greek)
    ref = bs_closed_form(100.0, 100.0, 0.05, 0.2, 1.0, greek)
    print(f"{greek:6s} {e.value:11.5f} {e.std_error:9.5f} {ref:12.5f} {(e.value - ref) / e.std_error:6.2f}")

# %% [markdown]
# ## The extra `X_T` factor
#
# Transcribing the published Delta display literally keeps an `X_T` inside
# the integration-by-parts step.  The result is off by
# `(disc / x) E[f(X_T) X_T]`, which is large for a call.

# %%
c = estimate_from(F, call, "delta", "corrected")
v = estimate_from(F, call, "delta", "paper_verbatim")
gap = F.discount / F.x0 * np.mean(call(F.X_T) * F.X_T)
print(f"corrected {c.value:.5f}   verbatim {v.value:.5f}   corrected - gap {c.value - gap:.5f}")

w_gap = delta_weights(F, "paper_verbatim") - delta_weights(F, "corrected")
print("per-path gap equals -X_T / x:", np.allclose(w_gap, -F.X_T / F.x0, rtol=1e-14))
