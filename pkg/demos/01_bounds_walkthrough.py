"""Closed-form security quantities, end to end.

Walks the derived parameters for a bitcoin-like setting (6 blocks/hour,
2-second propagation bound), evaluates the interval event bounds and the
confirmation-depth bound, and prints the voting-protocol confirmation
formulas for a 100-chain deployment.
"""

import math

from chainlab import admissible, depth_bound, derive, event_bounds, prism_leader_time, prism_tx_time
from chainlab.bounds import reference_notes

alpha = 6.0            # honest blocks per hour
delta_net = 1 / 1800   # 2 seconds, in hours
delta_typ = 0.3285
beta = 2.0             # adversarial bound: 25% of total mining power

d = derive(alpha, delta_net, delta_typ)
print("derived quantities")
print(f"  propagation discount g = {d.g:.9f}")
print(f"  exponent rate eta      = {d.eta:.9f}")
print(f"  typicality prefactor   = {d.mu:.6g}")
print(f"  growth coefficient     = {d.growth_coeff:.6f}")

adm = admissible(alpha, beta, delta_net, delta_typ)
print(f"\nrate condition: (1 - 81d/40) g^2 alpha = {adm.lhs:.6f} "
      f"{'>' if adm.ok else '<='} beta = {beta}")

for note in reference_notes(alpha, beta, delta_net, delta_typ):
    print(f"  note: {note}")

print("\ninterval event bounds (failure probabilities)")
for dt in (100.0, 500.0, 2000.0):
    ev = event_bounds(d, 0.0, dt)
    print(f"  length {dt:6.0f}h: good <= {ev.good:.3e}   typical <= {ev.typical:.3e}"
          + ("  (vacuous)" if ev.typical_vacuous else ""))

print("\nconfirmation-depth bound")
for k in (6, 600, 6000, 26000):
    b = depth_bound(d, alpha, k, delta_net)
    print(f"  k = {k:6d}: failure <= {b:.3e}")

print("\nvoting-protocol confirmation (m = 100 voter chains)")
for eps in (1e-6, 1e-9):
    wait = prism_leader_time(0.0, eps, 100, d, alpha, delta_net)
    k, t = prism_tx_time(0.0, eps, 100, d, alpha, delta_net)
    print(f"  eps = {eps:g}: leader-prefix wait {wait:,.0f}h; "
          f"tx depth {k} with wait {t:,.0f}h")
print("\n(the waits are loose worst-case bounds; the simulator below shows the"
      "\n protocols settling far faster in typical runs)")
