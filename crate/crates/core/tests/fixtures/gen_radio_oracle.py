"""Writes radio_oracle.json: random access and backhaul configurations with
reference values evaluated in 60-digit arithmetic.

Run from this directory: python3 gen_radio_oracle.py
"""

import itertools
import json
import random

from mpmath import mp, mpf, log

mp.dps = 60
rng = random.Random(20240611)


def log2_1p(x):
    return log(1 + x) / log(2)


def rate(bw, snr):
    return mpf(bw) / 1000 * log2_1p(snr)


def access_case():
    rx = [rng.uniform(0, 500), rng.uniform(0, 500), rng.uniform(10, 300)]
    tx = [rng.uniform(0, 500), rng.uniform(0, 500), 0.0]
    beta0 = 10 ** rng.uniform(-7, -3)
    rho = 10 ** rng.uniform(-3, 0)
    noise = 10 ** rng.uniform(-15, -10)
    bw = 10 ** rng.uniform(5, 8)
    d2 = sum((mpf(a) - mpf(b)) ** 2 for a, b in zip(rx, tx))
    gain = mpf(beta0) / d2
    return {
        "rx": rx,
        "tx": tx,
        "beta0": beta0,
        "rho": rho,
        "noise": noise,
        "bandwidth": bw,
        "gain": float(gain),
        "rate": float(rate(bw, mpf(rho) * gain / mpf(noise))),
    }


def decode_order(members, gains):
    """The unique permutation in which every UAV precedes those with a
    smaller gain, and ties go to the lower index, found by enumeration."""
    valid = []
    for perm in itertools.permutations(members):
        ok = True
        for i, a in enumerate(perm):
            for b in perm[i + 1:]:
                if gains[a] < gains[b] or (gains[a] == gains[b] and a > b):
                    ok = False
        if ok:
            valid.append(perm)
    assert len(valid) == 1
    return valid[0]


def backhaul_case():
    m_n = rng.randint(1, 4)
    l_n = rng.randint(1, 3)
    sic = rng.choice(["interferer", "interferer", "literal"])
    noise = 10 ** rng.uniform(-14, -11)
    bw = 10 ** rng.uniform(5, 7.5)
    base = [10 ** rng.uniform(-11, -7) for _ in range(m_n)]
    gain = [[base[m] * rng.uniform(0.05, 3.0) for _ in range(l_n)] for m in range(m_n)]
    # Force some exact ties to exercise the index rule.
    if m_n > 1 and rng.random() < 0.3:
        l = rng.randrange(l_n)
        a, b = rng.sample(range(m_n), 2)
        gain[b][l] = gain[a][l]
    zeta = [[rng.random() < 0.6 for _ in range(l_n)] for _ in range(m_n)]
    power = [[rng.uniform(0.0, 0.5) if zeta[m][l] else 0.0 for l in range(l_n)] for m in range(m_n)]
    interferers = [[[] for _ in range(l_n)] for _ in range(m_n)]
    sinr = [[0.0] * l_n for _ in range(m_n)]
    for l in range(l_n):
        members = [m for m in range(m_n) if zeta[m][l]]
        col = {m: gain[m][l] for m in members}
        order = decode_order(members, col) if members else ()
        for i, m in enumerate(order):
            later = sorted(order[i + 1:])
            interferers[m][l] = later
            if sic == "interferer":
                i_pow = sum(mpf(gain[o][l]) * mpf(power[o][l]) for o in later)
            else:
                i_pow = sum(mpf(gain[o][l]) * mpf(power[m][l]) for o in later)
            sinr[m][l] = mpf(gain[m][l]) * mpf(power[m][l]) / (i_pow + mpf(noise))
    sum_rate = [float(sum(rate(bw, sinr[m][l]) for l in range(l_n))) for m in range(m_n)]
    return {
        "sic": sic,
        "noise": noise,
        "bandwidth": bw,
        "gain": gain,
        "zeta": zeta,
        "power": power,
        "interferers": interferers,
        "sinr": [[float(v) for v in row] for row in sinr],
        "sum_rate": sum_rate,
    }


cases = {
    "access": [access_case() for _ in range(1000)],
    "backhaul": [backhaul_case() for _ in range(1000)],
}
with open("radio_oracle.json", "w") as f:
    json.dump(cases, f, separators=(",", ":"))
    f.write("\n")
