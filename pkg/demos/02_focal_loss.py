# %% [markdown]
# # Focal loss against cross-entropy
#
# Preictal windows are scarce (about 8 per 100 interictal). The focal term
# `(1 - p)**gamma` down-weights examples the model already gets right.
# `alpha` shifts weight between the two classes.

# %%
import numpy as np

from seizsim.nn import BCE, FocalLossConfig, cross_entropy, focal_loss, focal_loss_grad

p = np.array([0.05, 0.2, 0.5, 0.8, 0.95, 0.99])
tuned = FocalLossConfig(alpha=0.2, gamma=2.0)
for y in (1, 0):
    print(f"label {y}")
    print("  p      CE        focal     focal/CE")
    for pi, ce, fl in zip(p, cross_entropy(p, y), focal_loss(p, y, tuned)):
        print(f"  {pi:.2f}  {ce:8.4f}  {fl:8.5f}  {fl / ce:.4f}")

# %% [markdown]
# With gamma = 0 and alpha = 0.5 the focal loss is exactly half the
# cross-entropy. The factor of one half does not change where training
# converges.

# %%
print(np.max(np.abs(focal_loss(p, 1, BCE) - 0.5 * cross_entropy(p, 1))))
print("FL(0.5; y=1) =", focal_loss(0.5, 1, tuned))

# %% [markdown]
# The gradient is smallest for confident, correct predictions. That is how
# the loss keeps the easy interictal majority from dominating training.

# %%
print(focal_loss_grad(p, 0, tuned))
