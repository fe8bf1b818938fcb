"""
The asymmetric extreme-band loss
================================

Squared error treats a 2 degree miss the same everywhere.  The improved
loss scales the squared residual by a per-sample coefficient that depends
on the band of the true temperature and on the side of the miss.  This
script prints the loss on a grid around one hot, one mild and one cold
target, so the asymmetry can be read straight off the numbers.
"""
import numpy as np

from extremeloss.loss import LossConfig, coefficients, grad_hess, sample_losses

# Band weights normally come from the training split (|normal| / |extreme|).
# Here they are set by hand.
cfg = LossConfig(a=0.9, w_high=4.0, w_low=4.0)
residuals = np.array([-3.0, -1.0, 0.0, 1.0, 3.0])

for y in (35.0, 20.0, 5.0):
    y_hat = y + residuals
    targets = np.full_like(y_hat, y)
    loss = sample_losses(y_hat, targets, cfg)
    coef = coefficients(y_hat, targets, cfg)
    print(f"target {y:5.1f}")
    for r, c, value in zip(residuals, coef, loss):
        print(f"   pred - truth {r:+.0f}: coefficient {c:4.2f}  loss {value:6.2f}")

# %%
# In the hot band, running cold costs ``w_high * a`` and running warm only
# ``w_high * (1 - a)``.  The cold band mirrors this.  At ``a = 0.5`` with
# unit weights the extreme bands reduce to half the squared error.
half = LossConfig(a=0.5, w_high=1.0, w_low=1.0)
print(sample_losses(np.array([33.0, 18.0, 7.0]), np.array([35.0, 20.0, 5.0]), half))

# %%
# Gradient and hessian are what the boosting trainer sees.  The hessian is
# the constant ``2 c`` on each side of the kink.
g, h = grad_hess(np.array([33.0, 37.0]), np.array([35.0, 35.0]), cfg)
print("grad", g, "hess", h)
