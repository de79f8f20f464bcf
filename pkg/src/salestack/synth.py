"""Synthetic home-sale data with a known logistic ground truth.

Generative model
----------------
* Sale months run from 2010-01 to 2019-11. A monthly latent index ``L`` mixes
  a smooth random walk with month-level shocks and is standardised; ``hpi``
  is an affine image of ``L``, the other socio series trend with time.
* Each of ``N_NBHD`` neighbourhoods has a random effect; zip code and market
  area are functions of the neighbourhood. Living area, bedrooms, build year,
  homestead flag and land-use class follow simple documented distributions,
  and the appraisal columns derive from them with noise.
* ``logit = scale * strength * (W_SOCIO * L + W_MARKET * M)`` where ``M`` is a
  standardised combination of the neighbourhood effect, the homestead flag,
  a land-use effect and two steps (living area above ``SFLA_STEP``, age at
  least ``AGE_STEP``); ``y ~ Bernoulli(sigmoid(logit))``.
* ``price`` is ``aprtot`` scaled above (y = 1) or at/below (y = 0) it, so the
  derived target reproduces ``y`` exactly.

``scale`` is set so that a standard-normal logit core gives Bayes accuracy
``TARGET_BAYES`` at strength 1; the realised Bayes accuracy
``mean(max(p, 1 - p))`` is reported alongside the data.
"""
import json
import os

import numpy as np

from ._rng import rng_for
from .frame import MARKET_SCHEMA, Frame, SocioTable, atomic_write, frame_to_csv_text, month_key

FIRST_MONTH = month_key(2010, 1)
LAST_MONTH = month_key(2019, 11)
N_NBHD = 20
TARGET_BAYES = 0.945
W_SOCIO = 0.6
W_MARKET = 0.8
MARKET_WEIGHTS = {"nbhd": 0.75, "sfla": 0.35, "hx_flag": 0.3, "luc": 0.3, "age": 0.25}
SFLA_STEP = 2000.0
AGE_STEP = 40
LUC_CODES = np.array([100, 101, 104, 200, 400])
LUC_PROBS = np.array([0.7, 0.1, 0.08, 0.07, 0.05])
LUC_EFFECT = np.array([0.0, 0.5, -0.8, 1.0, -1.2])


def bayes_accuracy_normal(sigma, n_nodes=80):
    """``E[max(p, 1-p)]`` for ``p = sigmoid(sigma * Z)``, ``Z`` standard normal (Gauss-Hermite)."""
    x, w = np.polynomial.hermite_e.hermegauss(n_nodes)
    return float(np.sum(w / (1.0 + np.exp(-sigma * np.abs(x)))) / np.sqrt(2.0 * np.pi))


def logit_scale(target=TARGET_BAYES):
    """Standard deviation of a normal logit achieving Bayes accuracy ``target`` (bisection)."""
    lo, hi = 0.0, 100.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if bayes_accuracy_normal(mid) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _standardize(v):
    sd = v.std()
    return (v - v.mean()) / sd if sd > 0 else v - v.mean()


def _socio(rng):
    months = np.arange(FIRST_MONTH, LAST_MONTH + 1)
    m = months.size
    t = np.arange(m) / (m - 1)
    walk = np.cumsum(rng.normal(size=m))
    walk = _standardize(walk - np.linspace(walk[0], walk[-1], m))
    latent = _standardize(0.5 * walk + 0.87 * rng.normal(size=m))
    values = {
        "gdp": 15000.0 + 6000.0 * t + rng.normal(0, 60.0, m),
        "cpi": 255.0 + 70.0 * t + rng.normal(0, 1.0, m),
        "ppi": 190.0 + 12.0 * np.sin(6.0 * t) + rng.normal(0, 1.5, m),
        "hpi": 377.0 + 72.0 * latent,
        "effr": np.round(np.clip(2.4 * t ** 3 + rng.normal(0, 0.02, m), 0.05, None), 2),
    }
    return SocioTable(months, values), latent


def generate(n_rows=10000, seed=0, strength=1.0):
    """Draw a market frame (raw schema), its socio table and a ground-truth record.

    Returns ``(frame, socio, info)``; ``info`` holds the true probabilities
    under key ``"p"`` and summary numbers (Bayes accuracy, prevalence).
    """
    if n_rows < 1:
        raise ValueError("n_rows must be >= 1")
    if strength < 0:
        raise ValueError("strength must be nonnegative")
    rng = rng_for(seed, "synth")
    socio, latent = _socio(rng)
    n = n_rows
    n_months = socio.months.size
    # sales grow over the period and are thin in the final partial year
    w = np.linspace(0.5, 1.5, n_months)
    mi = rng.choice(n_months, size=n, p=w / w.sum())
    sale_month = socio.months[mi]
    sale_year = sale_month // 12

    nb_codes = np.sort(rng.choice(np.arange(1000, 9000), size=N_NBHD, replace=False))
    nb_effect = _standardize(rng.normal(size=N_NBHD))
    nb_zip = rng.choice(np.arange(32100, 32800, 25), size=N_NBHD)
    nb_area = rng.integers(1, 21, size=N_NBHD)
    nb_land = np.exp(rng.normal(10.4, 0.5, size=N_NBHD))
    nb = rng.integers(0, N_NBHD, size=n)

    sfla = np.round(np.exp(rng.normal(np.log(1650.0), 0.35, size=n)))
    rmbed = np.clip(np.round(sfla / 600.0 + rng.normal(0, 0.6, n)), 1, 7)
    total_area = np.round(sfla * rng.uniform(1.25, 1.65, n))
    yrblt = np.minimum(np.round(rng.uniform(1940, 2020, n)), sale_year).astype(float)
    age = sale_year - yrblt
    misc_area = np.where(rng.random(n) < 0.55, 0.0, np.round(rng.exponential(350.0, n)))
    hx = (rng.random(n) < 0.6).astype(np.int64)
    li = rng.choice(LUC_CODES.size, size=n, p=LUC_PROBS)

    aprland = np.round(nb_land[nb] * np.exp(rng.normal(0, 0.25, n)))
    aprblgd = np.round(95.0 * sfla * np.exp(0.15 * nb_effect[nb] + rng.normal(0, 0.12, n))
                       * (1.0 - 0.002 * age))
    aprtot = aprland + aprblgd
    sasd = np.round(aprtot * rng.uniform(0.85, 0.95, n))
    nsasd = np.round(sasd * rng.uniform(0.98, 1.0, n))
    exempt = hx * 50000.0
    stxbl = np.maximum(sasd - exempt * 0.5, 0.0)
    nstxbl = np.maximum(nsasd - exempt, 0.0)
    cotxbl = np.maximum(nstxbl - rng.uniform(0, 2000, n), 0.0).round()
    city = rng.random(n) < 0.7
    citxbl = np.where(city, cotxbl, 0.0)

    # step effects: the planted market signal is exactly representable by trees
    market = (MARKET_WEIGHTS["nbhd"] * nb_effect[nb]
              + MARKET_WEIGHTS["sfla"] * _standardize((sfla > SFLA_STEP).astype(float))
              + MARKET_WEIGHTS["hx_flag"] * _standardize(hx.astype(float))
              + MARKET_WEIGHTS["luc"] * _standardize(LUC_EFFECT[li])
              - MARKET_WEIGHTS["age"] * _standardize((age >= AGE_STEP).astype(float)))
    market_z = _standardize(market)
    scale = logit_scale()
    logit = scale * strength * (W_SOCIO * latent[mi] + W_MARKET * market_z)
    p = 1.0 / (1.0 + np.exp(-logit))
    y = (rng.random(n) < p).astype(np.int64)

    u = rng.uniform(0.005, 0.25, n)
    price = np.where(y == 1, np.round(aprtot * (1.0 + u)) + 1.0, np.round(aprtot * (1.0 - u)))
    price = np.where((y == 0) & (price > aprtot), aprtot, price)

    day = rng.integers(1, 29, size=n)
    cols = {
        "parid": 1000000 + rng.permutation(9000000)[:n],
        "price": price, "aprtot": aprtot, "sale_date": sale_month,
        "aprland": aprland, "aprblgd": aprblgd, "nbhd": nb_codes[nb], "rmbed": rmbed,
        "sfla": sfla, "total_area": total_area, "yrblt": yrblt, "misc_area": misc_area,
        "zip21": nb_zip[nb], "sasd": sasd, "nsasd": nsasd, "stxbl": stxbl,
        "nstxbl": nstxbl, "cotxbl": cotxbl, "citxbl": citxbl, "hx_flag": hx,
        "luc": LUC_CODES[li], "mararea": nb_area[nb],
    }
    kinds = {c.name: c.kind for c in MARKET_SCHEMA.columns}
    frame = Frame(cols, kinds)
    info = {
        "n_rows": int(n), "seed": int(seed), "strength": float(strength),
        "logit_scale": float(scale), "bayes_accuracy": float(np.mean(np.maximum(p, 1.0 - p))),
        "prevalence": float(y.mean()), "weights": {"socio": W_SOCIO, "market": W_MARKET,
                                                   **MARKET_WEIGHTS},
        "p": p, "day": day,
    }
    return frame, socio, info


def write_synth(out_dir, n_rows=10000, seed=0, strength=1.0):
    """Write ``market.csv``, ``socio.csv`` and ``truth.json``; returns the sidecar dict."""
    frame, socio, info = generate(n_rows, seed, strength)
    text = frame_to_csv_text(frame)
    # full ISO dates in the market file, as an export would carry them
    lines = text.splitlines()
    header = lines[0].split(",")
    j = header.index("sale_date")
    out = [lines[0]]
    for line, d in zip(lines[1:], info["day"]):
        cells = line.split(",")
        cells[j] = f"{cells[j]}-{int(d):02d}"
        out.append(",".join(cells))
    os.makedirs(out_dir, exist_ok=True)
    atomic_write(os.path.join(out_dir, "market.csv"), "\n".join(out) + "\n")
    atomic_write(os.path.join(out_dir, "socio.csv"), frame_to_csv_text(socio.to_frame()))
    side = {k: v for k, v in info.items() if k not in ("p", "day")}
    atomic_write(os.path.join(out_dir, "truth.json"), json.dumps(side, indent=2, sort_keys=True) + "\n")
    return side


__all__ = ["generate", "write_synth", "bayes_accuracy_normal", "logit_scale"]
