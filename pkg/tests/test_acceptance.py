"""Acceptance suite: one test per headline criterion, each printing a PASS/FAIL line.

Thresholds are the contract values. Several of them are not met by the
faithful implementation; those tests fail on purpose and the analysis lives in
the project's decisions ledger (see the README).
"""

import time

import numpy as np
import pytest
from conftest import ACCEPTANCE_LINES, oracle_corpus

from cgscore.analysis import detection_curve, inverse_identity_diagnostic, partial_sign_split, spearman
from cgscore.cli import main
from cgscore.dataset import inject_label_noise, save_binary, synth_gaussian, synth_gaussian_multiclass
from cgscore.kernel import BinaryView, gram, gram_from_features, relu_kernel
from cgscore.linalg import direct_cg_oracle, invert_spd, loo_inverse
from cgscore.multiclass import StochasticConfig, score_all
from cgscore.scoring import cg_all, score_arrays

SYNTH_SEEDS = (0, 1, 2)
SCALES = {"full": 1000, "reduced": 200}
SYNTH_DIM = 3000


def criterion(name, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'}  {name}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


# ---------------------------------------------------------------- oracle corpus


@pytest.fixture(scope="module")
def corpus():
    out = []
    start = time.perf_counter()
    for _, h, y in oracle_corpus():
        inv = invert_spd(h)
        arr = score_arrays(h, y, inv=inv)
        oracle = np.array([direct_cg_oracle(h, y, i) for i in range(y.size)])
        out.append((h, y, inv, arr, oracle))
    return out, time.perf_counter() - start


def test_oracle_equivalence(corpus):
    data, elapsed = corpus
    worst = max(float(np.max(np.abs(arr.cg - oracle) / (1 + np.abs(oracle)))) for _, _, _, arr, oracle in data)
    ok = worst <= 1e-6 and elapsed < 60
    criterion("oracle equivalence", ok, f"{len(data)} datasets, worst rel err {worst:.2e} (<=1e-6), {elapsed:.1f}s (<60s)")


def test_schur_identity(corpus):
    data, _ = corpus
    worst = 0.0
    for h, _, inv, _, _ in data:
        m = h.shape[0]
        for i in range(m):
            direct = np.linalg.inv(np.delete(np.delete(h, i, 0), i, 1))
            err = np.linalg.norm(loo_inverse(h, inv, i) - direct) / np.linalg.norm(direct)
            worst = max(worst, float(err))
    criterion("Schur identity", worst <= 1e-8, f"worst relative Frobenius error {worst:.2e} (<=1e-8)")


def test_gram_invariants():
    rng = np.random.default_rng(77)
    # 142 rows give 10011 distinct pairs; a few near-duplicates stress the clamp
    x = rng.standard_normal((142, 12))
    x[1] = x[0] + 1e-9 * rng.standard_normal(12)
    x[3] = -x[2]
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    h = gram_from_features(x)
    pairs = 142 * 141 // 2
    spots = {1.0: 0.5, 0.0: 0.0, -1.0: 0.0, 0.5: 1 / 6}
    spot_err = max(abs(relu_kernel(r) - v) for r, v in spots.items())
    ok = (
        pairs >= 10_000
        and np.array_equal(h, h.T)
        and np.all(np.abs(np.diagonal(h) - 0.5) <= 1e-12)
        and np.all(np.abs(h) <= 0.5)
        and spot_err <= 1e-15
    )
    criterion("Gram invariants", ok, f"{pairs} pairs symmetric, diag 0.5, |H|<=0.5; spot err {spot_err:.1e}")


def test_nonnegativity_and_decomposition(corpus):
    data, _ = corpus
    min_cg = min(float(arr.cg.min()) for *_, arr, _ in data)
    rel = 0.0
    for *_, arr, _ in data:
        total = arr.partial_sq + arr.partial_cross + arr.partial_diag
        rel = max(rel, float(np.max(np.abs(total - arr.cg) / np.maximum(np.abs(arr.cg), 1.0))))
    ok = min_cg >= -1e-9 and rel <= 1e-8
    criterion("non-negativity + decomposition", ok, f"min cg {min_cg:.3e} (>=-1e-9), decomposition rel err {rel:.2e} (<=1e-8)")


# ---------------------------------------------------------------- synthetic benchmark


def _score_binary(ds):
    # a 1:1 ratio on two equal classes covers every negative: the full view
    table = score_all(ds, StochasticConfig(neg_ratio=1, runs=1, seed=0))
    return table


@pytest.fixture(scope="module", params=list(SCALES))
def synthetic(request):
    n_per_class = SCALES[request.param]
    start = time.perf_counter()
    runs = []
    for seed in SYNTH_SEEDS:
        clean, raw = synth_gaussian(n_per_class, SYNTH_DIM, seed=seed, return_raw=True)
        noisy, mask = inject_label_noise(clean, 0.1, seed=seed + 100)
        y = np.where(clean.labels == 0, 1.0, -1.0)
        h = gram(clean, BinaryView(np.arange(clean.n), y))
        runs.append(
            dict(
                clean=_score_binary(clean),
                noisy=_score_binary(noisy),
                mask=mask,
                x1=np.abs(raw[:, 0]),
                identity=inverse_identity_diagnostic(invert_spd(h)),
            )
        )
    return request.param, runs, time.perf_counter() - start


def test_synthetic_noise_detection(synthetic):
    scale, runs, elapsed = synthetic
    medians, recalls = [], []
    for r in runs:
        cg = r["noisy"]["cg"]
        flipped = r["mask"].flipped
        medians.append(bool(np.median(cg[flipped]) > np.median(cg[~flipped])))
        recalls.append(float(detection_curve(cg, r["mask"], grid=[0.2]).recall[0]))
    limit = 600 if scale == "full" else 60
    ok = all(medians) and min(recalls) >= 0.95 and elapsed < limit
    criterion(
        f"synthetic noise detection [{scale}]",
        ok,
        f"median noisy>clean {medians}, recall(0.2) {[round(v, 3) for v in recalls]} (>=0.95), "
        f"{elapsed:.0f}s (<{limit}s)",
    )


def test_synthetic_boundary_effect(synthetic):
    scale, runs, _ = synthetic
    rhos = [spearman(r["clean"]["cg"], r["x1"]) for r in runs]
    criterion(f"synthetic boundary effect [{scale}]", max(rhos) <= -0.3, f"Spearman(cg,|x1|) {[round(v, 3) for v in rhos]} (<=-0.3)")


def test_synthetic_inverse_identity(synthetic):
    scale, runs, _ = synthetic
    diag = [r["identity"]["mean_diag"] for r in runs]
    ratio = [r["identity"]["ratio"] for r in runs]
    ok = all(1.8 <= v <= 2.2 for v in diag) and max(ratio) <= 0.1
    criterion(
        f"synthetic inverse ~ 2I [{scale}]",
        ok,
        f"mean_diag {[round(v, 3) for v in diag]} (in [1.8,2.2]), ratio {[round(v, 4) for v in ratio]} (<=0.1)",
    )


def test_partial_sign_separation(synthetic):
    scale, runs, _ = synthetic
    noisy_pos, clean_neg = [], []
    for r in runs:
        split = partial_sign_split(r["noisy"]["partial_cross"], r["mask"])
        noisy_pos.append(split["pos_noisy"] / (split["pos_noisy"] + split["neg_noisy"]))
        clean_neg.append(split["neg_clean"] / (split["pos_clean"] + split["neg_clean"]))
    ok = min(noisy_pos) >= 0.9 and min(clean_neg) >= 0.9
    criterion(
        f"partial-sign separation [{scale}]",
        ok,
        f"noisy with partial_cross>0 {[round(v, 3) for v in noisy_pos]}, "
        f"clean with partial_cross<0 {[round(v, 3) for v in clean_neg]} (both >=0.9)",
    )


def test_dominant_term_correlation(synthetic):
    scale, runs, _ = synthetic
    rhos = [spearman(r["noisy"]["cg"], r["noisy"]["partial_cross"]) for r in runs]
    criterion(f"dominant-term correlation [{scale}]", min(rhos) >= 0.9, f"Spearman(cg,partial_cross) {[round(v, 3) for v in rhos]} (>=0.9)")


# ---------------------------------------------------------------- stochastic scoring


def test_stochastic_convergence():
    # 5 equal classes: the pool is 4x the positives, so ratios 1..4 cover 25..100%
    coverages = (0.25, 0.5, 0.75, 1.0)
    per_seed = []
    for seed in range(5):
        ds = synth_gaussian_multiclass(5, 100, 500, seed=seed)
        full = score_all(ds, StochasticConfig(neg_ratio=4, runs=1, seed=seed))["cg"]
        row = []
        for ratio in (1, 2, 3):
            sub = score_all(ds, StochasticConfig(neg_ratio=ratio, runs=3, seed=seed + 1000))["cg"]
            row.append(spearman(sub, full))
        sub = score_all(ds, StochasticConfig(neg_ratio=4, runs=1, seed=seed + 1000))["cg"]
        row.append(spearman(sub, full))
        per_seed.append(row)
    mean = np.mean(per_seed, axis=0)
    ok = bool(np.all(np.diff(mean) >= 0)) and abs(mean[-1] - 1.0) <= 1e-12
    detail = ", ".join(f"{int(c * 100)}%: {v:.4f}" for c, v in zip(coverages, mean))
    criterion("stochastic convergence", ok, f"mean Spearman vs full {detail} (non-decreasing, 1.0 at 100%)")


def test_determinism_across_threads(tmp_path):
    ds = synth_gaussian_multiclass(4, 60, 150, seed=0)
    noisy, _ = inject_label_noise(ds, 0.1, seed=1)
    save_binary(noisy, tmp_path / "d.cgm1")
    outs = []
    for threads in ("1", "8"):
        out = tmp_path / f"s{threads}.csv"
        args = ["score", "--input", str(tmp_path / "d.cgm1"), "--seed", "5", "--ratio", "1", "--runs", "4"]
        assert main(args + ["--threads", threads, "--out", str(out)]) == 0
        outs.append(out.read_bytes())
    criterion("determinism across threads", outs[0] == outs[1], f"score CSV at --threads 1 vs 8 byte-identical: {outs[0] == outs[1]}")


def test_complexity():
    rng = np.random.default_rng(3)
    sizes = (200, 400, 800)
    times = []
    for n in sizes:
        x = rng.standard_normal((n, 1000))
        x /= np.linalg.norm(x, axis=1, keepdims=True)
        h = gram_from_features(x)
        y = rng.choice([-1.0, 1.0], size=n)
        best = np.inf
        for _ in range(5):
            t0 = time.perf_counter()
            cg_all(h, y)
            best = min(best, time.perf_counter() - t0)
        times.append(best)
    slope = float(np.polyfit(np.log(sizes), np.log(times), 1)[0])
    detail = ", ".join(f"n={n}: {t * 1e3:.1f}ms" for n, t in zip(sizes, times))
    criterion("complexity sanity", 2.5 <= slope <= 3.5, f"{detail}; fitted exponent {slope:.2f} (in [2.5,3.5])")
