import numpy as np

# acceptance criteria report here; conftest prints one line each at the end
ACCEPTANCE_RESULTS: dict = {}


def record(name: str, ok: bool, detail: str = ""):
    ACCEPTANCE_RESULTS[name] = (bool(ok), detail)
    print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    return ok


def within_se(est, truth, se, k=3.0):
    return abs(est - truth) <= k * se


def mc_mean_se(v):
    v = np.asarray(v, dtype=float)
    return float(v.mean()), float(v.std(ddof=1) / np.sqrt(v.size))
