"""Generates data/demo_countries.csv: a synthetic 124-row dataset shaped like
a cross-country study of the share of nonbelievers. Every value is simulated;
no real country data is included."""
import numpy as np

rng = np.random.default_rng(20240611)
n = 124
iq = rng.uniform(62.0, 108.0, n)
musl = (rng.uniform(size=n) < 0.3).astype(float)
income = np.exp(rng.normal(1.8, 1.0, n))
log_open = rng.normal(-0.3, 0.45, n)
population = np.exp(rng.normal(2.5, 1.4, n))

def ao_inverse(eta, lam):
    return 1.0 - (1.0 + lam * np.exp(eta)) ** (-1.0 / lam)

eta1 = 25.183 - 0.881 * iq + 0.006 * iq**2 + 0.029 * income - 0.761 * musl + 0.481 * log_open
eta2 = -8.817 + 0.059 * iq - 1.608 * musl + 0.548 * log_open + 0.118 * musl * income
mu = ao_inverse(eta1, 9.255)
sigma = np.clip(ao_inverse(eta2, 0.853), 1e-3, 0.9)
pf = (1.0 - sigma**2) / sigma**2
y = rng.beta(mu * pf, (1.0 - mu) * pf)
y = np.clip(y, 5e-5, 1 - 5e-5)

with open("demo_countries.csv", "w") as f:
    f.write("country,nonbelievers,iq,musl,income,log_open,population\n")
    for t in range(n):
        f.write(f"S{t + 1:03d},{100 * y[t]:.4f},{iq[t]:.1f},{musl[t]:.0f},{income[t]:.3f},{log_open[t]:.4f},{population[t]:.2f}\n")
