"""Acceptance criteria, one test (and one printed PASS/FAIL line) per criterion.

Criteria 6 and 7 run on the public corpora when FEDCHAIN_NSLKDD / FEDCHAIN_PARKINSONS
point at them, and are skipped otherwise; their surrogate-data variants always run.
"""

import itertools
import json
import time
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from fedchain import delm, ledger, synthetic
from fedchain.dataset import load
from fedchain.delm import NetworkConfig, NetworkWeights, TrainingHyper
from fedchain.federation import ClientUpdate, RoundConfig, aggregate, run_federation
from fedchain.harness import ExperimentConfig, emit_report, prepare_clients, run_experiment
from fedchain.metrics import ConfusionCounts, compute_metrics, confusion
from fedchain.schemas import NSL_KDD, PARKINSONS

from conftest import (NSLKDD_ENV, PARKINSONS_ENV, field_mutations, honest_chain, max_rel_error, real_corpus,
                      record, separable_2d)

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def config_for(name: str, data_path: Path, **over) -> ExperimentConfig:
    d = json.loads((CONFIGS / f"{name}.json").read_text())
    d["data_path"] = str(data_path)
    d.update(over)
    return ExperimentConfig.from_dict(d)


# -- 1 ---------------------------------------------------------------------

def test_gradient_fidelity():
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    worst = 0.0
    for i in range(100):
        depth = (1, 2, 6)[i % 3]
        cfg = NetworkConfig(int(rng.integers(1, 7)), tuple(int(v) for v in rng.integers(1, 7, depth)),
                            int(rng.integers(1, 7)), seed=int(rng.integers(2 ** 63)))
        w = delm.init_network(cfg)
        # random biases so no layer sits exactly at the symmetric point
        w = NetworkWeights(w.weights, [rng.uniform(-1, 1, b.shape) for b in w.biases], cfg)
        worst = max(worst, max_rel_error(w, rng.uniform(size=cfg.input_dim), rng.uniform(size=cfg.output_dim)))
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-4 and elapsed < 10
    record("1", ok, f"100 random networks, max relative error {worst:.2e} (< 1e-4), {elapsed:.2f}s (< 10s)")
    assert ok


# -- 2 ---------------------------------------------------------------------

VALUES = (-0.3, 0.1, 0.7)
SIZES = (1, 100, 300)


def _update(cid, value, n):
    cfg = NetworkConfig(1, (1,), 1)
    v = np.array([[value]])
    return ClientUpdate(cid, NetworkWeights([v, v.copy()], [v[0].copy(), v[0].copy()], cfg), n)


def test_aggregation_algebra():
    checked = 0
    failures = []
    for n in range(1, 5):
        for assignment in itertools.product(itertools.product(VALUES, SIZES), repeat=n):
            ups = [_update(f"c{i}", v, s) for i, (v, s) in enumerate(assignment)]
            ref = aggregate(ups)
            got = ref.weights[0][0, 0]
            vals = [v for v, _ in assignment]
            exact = sum(Fraction(v) * s for v, s in assignment) / sum(s for _, s in assignment)
            if n == 1 and not ref.equals(ups[0].weights):
                failures.append(("singleton", assignment))
            if not min(vals) <= got <= max(vals):
                failures.append(("convexity", assignment))
            if abs(Fraction(got) - exact) > Fraction(1, 2 ** 50):
                failures.append(("weighted mean", assignment))
            for perm in itertools.permutations(ups):
                if not aggregate(list(perm)).equals(ref):
                    failures.append(("permutation", assignment))
                    break
            checked += 1
    hand = [
        aggregate([_update("a", 0.0, 100), _update("b", 1.0, 300)]).weights[0][0, 0] == 0.75,
        aggregate([_update("a", 0.2, 5), _update("b", 0.4, 5)]).weights[0][0, 0] == pytest.approx(0.3, abs=1e-15),
        aggregate([_update(f"c{i}", 0.1, i + 1) for i in range(4)]).weights[0][0, 0] == 0.1,
    ]
    ok = not failures and all(hand)
    record("2", ok, f"{checked} client/value/size assignments (<=4 clients x 3 values x 3 sizes, all orderings), "
                    f"{len(failures)} violations; hand cases {sum(hand)}/{len(hand)}")
    assert ok, failures[:5]


# -- 3 ---------------------------------------------------------------------

def test_one_client_equivalence(kdd_path):
    cfg = config_for("ids", kdd_path, partition={"seed": 5, "stratify": True, "clients": [["H1", 400, 200]]})
    roster, data = prepare_clients(cfg)
    net = NetworkConfig(data.dim, (20, 20), 1, seed=1)
    hyper = TrainingHyper(learning_rate=0.1, max_epochs=5, shuffle_seed=2)
    model, *_ = run_federation(roster, net, RoundConfig(1.0, hyper=hyper, noise_stddev=0.0), 1)
    alone, _ = delm.train_client(delm.init_network(net), roster.clients[0].train, hyper)
    ok = model.weights.canonical_bytes() == alone.canonical_bytes()
    record("3", ok, f"one client, K=1: federated digest {model.weights.digest().hex()[:16]} "
                    f"{'==' if ok else '!='} stand-alone {alone.digest().hex()[:16]}")
    assert ok


# -- 4 ---------------------------------------------------------------------

def test_ledger_tamper_evidence():
    mutants = accepted = 0
    honest_ok = True
    mine_times = []
    for length in range(1, 6):
        chain = honest_chain(length, difficulty=8)
        honest_ok &= bool(ledger.verify_chain(chain))
        honest_ok &= ledger.loads(ledger.dumps(chain)) == chain
        for _, mutated in field_mutations(chain):
            mutants += 1
            accepted += bool(ledger.verify_chain(mutated))
    rng = np.random.default_rng(0)
    chain = ledger.new_chain(8)
    for k in range(1, 21):
        t0 = time.perf_counter()
        chain = ledger.append_model_update(chain, k, rng.bytes(32), k)
        mine_times.append(time.perf_counter() - t0)
    difficulty_ok = all(ledger.leading_zero_bits(b.block_hash) >= 8 for b in chain.blocks)
    honest_ok &= bool(ledger.verify_chain(chain))
    ok = accepted == 0 and honest_ok and difficulty_ok and max(mine_times) < 1.0
    record("4", ok, f"{mutants} single-byte field mutations over chains of length 1-5, {accepted} accepted; "
                    f"honest chains verify={honest_ok}; 20 blocks at difficulty 8, slowest {max(mine_times):.3f}s")
    assert ok


# -- 5 ---------------------------------------------------------------------

def test_metric_identities():
    rng = np.random.default_rng(5)
    worst = 0.0
    n = 0
    while n < 10_000:
        tp, tn, fp, fn = (int(v) for v in rng.integers(0, 1000, 4))
        if 0 in (tp + fn, tn + fp, tp + fp):
            continue
        m = compute_metrics(ConfusionCounts(tp, tn, fp, fn))
        worst = max(worst, abs(m.tpr + m.fnr - 1), abs(m.tnr + m.fpr - 1), abs(m.ppv + m.fdr - 1),
                    abs(m.accuracy + m.miss_rate - 1))
        n += 1
    mismatches = 0
    for _ in range(1000):
        k = int(rng.integers(1, 200))
        p, a = rng.integers(0, 2, k), rng.integers(0, 2, k)
        cells = [0, 0, 0, 0]
        for x, y in zip(p.tolist(), a.tolist()):
            cells[{(1, 1): 0, (0, 0): 1, (1, 0): 2, (0, 1): 3}[(x, y)]] += 1
        mismatches += confusion(p, a) != ConfusionCounts(*cells)
    ok = worst <= 1e-12 and mismatches == 0
    record("5", ok, f"10000 random matrices, max identity deviation {worst:.1e} (<= 1e-12); "
                    f"1000 brute-force recounts, {mismatches} mismatches")
    assert ok


# -- 6 and 7 ---------------------------------------------------------------

@pytest.fixture(scope="module")
def surrogate_corpora(tmp_path_factory):
    d = tmp_path_factory.mktemp("acceptance")
    return {
        "ids": synthetic.write_nsl_kdd(d / "nsl_kdd.csv", n_rows=10000, seed=0),
        "disease": synthetic.write_parkinsons(d / "parkinsons.csv", seed=0),
    }


@pytest.fixture(scope="module")
def ids_surrogate_run(surrogate_corpora, tmp_path_factory):
    bundle = run_experiment(config_for("ids", surrogate_corpora["ids"]))
    files = emit_report(bundle, tmp_path_factory.mktemp("ids_run"), figures=False)
    return bundle, files


def _ids_band(bundle, label):
    accs = [m.accuracy for m in bundle.validation.values()]
    mean = sum(accs) / len(accs)
    ok = (len(accs) == 4 and all(m.counts.total == 200 for m in bundle.validation.values())
          and mean >= 0.90 and bundle.duration_s < 300 and bundle.ledger_summary["verified"])
    record(f"6 ({label})", ok, f"4 clients x 400/200, mean validation accuracy {mean:.4f} (>= 0.90), "
                               f"per client {[round(a, 4) for a in accs]}, {bundle.duration_s:.1f}s (< 300s)")
    return ok


def _disease_band(bundle, label):
    ok = bundle.server.accuracy >= 0.85 and bundle.duration_s < 120 and bundle.ledger_summary["verified"]
    record(f"7 ({label})", ok, f"server validation accuracy {bundle.server.accuracy:.4f} (>= 0.85) on "
                               f"{bundle.server.counts.total} pooled records, {bundle.duration_s:.1f}s (< 120s)")
    return ok


@pytest.mark.slow
def test_ids_band_real_corpus():
    path = real_corpus(NSLKDD_ENV)
    if path is None:
        record("6 (NSL-KDD)", None, f"not run: set {NSLKDD_ENV} to a KDDTrain+ CSV")
        pytest.skip(f"{NSLKDD_ENV} not set; the public corpus is not bundled")
    arity = len(path.open().readline().split(","))
    schema = "nsl-kdd-difficulty" if arity == NSL_KDD.arity + 1 else "nsl-kdd"
    assert _ids_band(run_experiment(config_for("ids", path, schema=schema)), "NSL-KDD")


@pytest.mark.slow
def test_ids_band_surrogate(ids_surrogate_run):
    assert _ids_band(ids_surrogate_run[0], "surrogate")


@pytest.mark.slow
def test_disease_band_real_corpus():
    path = real_corpus(PARKINSONS_ENV)
    if path is None:
        record("7 (Parkinson's)", None, f"not run: set {PARKINSONS_ENV} to parkinsons.data")
        pytest.skip(f"{PARKINSONS_ENV} not set; the public corpus is not bundled")
    assert len(load(path, PARKINSONS)) == 195
    assert _disease_band(run_experiment(config_for("disease", path)), "Parkinson's")


@pytest.mark.slow
def test_disease_band_surrogate(surrogate_corpora):
    assert _disease_band(run_experiment(config_for("disease", surrogate_corpora["disease"])), "surrogate")


# -- 8 ---------------------------------------------------------------------

@pytest.mark.slow
def test_end_to_end_determinism(ids_surrogate_run, surrogate_corpora, tmp_path):
    _, first = ids_surrogate_run
    second = emit_report(run_experiment(config_for("ids", surrogate_corpora["ids"])), tmp_path, figures=False)
    same = {k: first[k].read_bytes() == second[k].read_bytes() for k in ("report", "chain")}
    ok = all(same.values())
    record("8", ok, "two sequential runs of configs/ids.json: report.json "
                    f"{'identical' if same['report'] else 'DIFFERS'}, chain.jsonl "
                    f"{'identical' if same['chain'] else 'DIFFERS'}")
    assert ok


# -- 9 ---------------------------------------------------------------------

def _toy_epochs(widths, limit=2000):
    """Epochs of default-hyperparameter training until training accuracy hits 1.0 (None if never)."""
    data = separable_2d(60)
    w = delm.init_network(NetworkConfig(2, widths, 1, seed=0))
    hyper = TrainingHyper()
    for epoch in range(1, limit + 1):
        w, _ = delm.train_client(w, data, TrainingHyper(hyper.learning_rate, hyper.batch_size, 1,
                                                        shuffle_seed=epoch))
        if (delm.predict(w, data.features) == data.labels).all():
            return epoch, 1.0
    return None, float((delm.predict(w, data.features) == data.labels).mean())


def test_toy_convergence():
    epoch, acc = _toy_epochs((20, 20))
    ok = epoch is not None
    record("9", ok, f"2-D separable set, hidden [20, 20], default learning rate and batch size: "
                    f"training accuracy {acc:.3f} after {epoch or 2000} epochs (limit 2000)")
    assert ok


@pytest.mark.slow
@pytest.mark.xfail(strict=True, reason="six sigmoid hidden layers trained by plain SGD do not leave chance "
                                       "level within 2000 epochs; see README")
def test_toy_convergence_six_layer_default():
    epoch, acc = _toy_epochs(NetworkConfig(2).hidden_widths)
    record("9 (six-layer default)", epoch is not None,
           f"2-D separable set, hidden [20]*6: training accuracy {acc:.3f} after {epoch or 2000} epochs")
    assert epoch is not None
