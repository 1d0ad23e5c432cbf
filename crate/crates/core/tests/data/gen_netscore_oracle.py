"""Regenerates netscore_oracle.json: random (a, p, r, kappa, beta, gamma)
tuples with the score evaluated in 60-digit arithmetic."""
import json
import random

from mpmath import mp, mpf, log10

mp.dps = 60
rng = random.Random(20181207)
cases = []
for _ in range(100):
    a = rng.uniform(0.01, 100.0)
    p = 10 ** rng.uniform(-2, 3)
    r = 10 ** rng.uniform(-4, 2)
    k, b, g = (rng.uniform(0.0, 2.0) for _ in range(3))
    ratio = mpf(a) ** mpf(k) / (mpf(p) ** mpf(b) * mpf(r) ** mpf(g))
    cases.append({
        "accuracy": a, "params_m": p, "runtime_s": r,
        "kappa": k, "beta": b, "gamma": g,
        "expected": mp.nstr(20 * log10(ratio), 30),
    })
print(json.dumps(cases, indent=1))
