import json
import os
from pathlib import Path

import numpy as np
import pytest

import tgom

CONFIGS = Path(os.environ.get("TGOM_CONFIG_DIR", Path(__file__).resolve().parents[2] / "configs"))


def small_spec(n=150):
    spec = json.loads((CONFIGS / "simulate_k2.json").read_text())
    spec["n_individuals"] = n
    return spec


def small_config(iterations=400, burn_in=100):
    cfg = json.loads((CONFIGS / "fit_k2.json").read_text())
    cfg["sampler"].update(n_iterations=iterations, burn_in=burn_in, store_memberships=5, progress_every=0)
    return cfg


@pytest.fixture(scope="module")
def panel():
    p, truth = tgom.simulate(small_spec(), seed=3)
    assert truth.splitlines()[0]
    return p


@pytest.fixture(scope="module")
def chain(panel):
    return tgom.fit(panel, small_config())


def test_simulate_shapes_and_determinism(panel):
    assert (panel.n_individuals, panel.n_items, panel.n_waves) == (150, 6, 6)
    assert panel.outcomes.shape == (150, 6, 6)
    ages = panel.ages
    assert np.isnan(ages[~panel.observed]).all()
    assert not np.isnan(ages[panel.observed]).any()
    again, _ = tgom.simulate(small_spec(), seed=3)
    assert again.fingerprint == panel.fingerprint


def test_csv_roundtrip(panel, tmp_path):
    path = tmp_path / "panel.csv"
    panel.write(path)
    back = tgom.Panel.read(path)
    assert back.to_csv() == panel.to_csv()
    assert tgom.Panel.from_csv(panel.to_csv()).fingerprint == panel.fingerprint


def test_fit_chain_arrays(chain):
    d = chain.n_draws
    assert d == 60
    assert chain.beta0.shape == (d, 2, 6)
    assert chain.alpha.shape == (d, 1, 2)
    assert chain.memberships.shape == (d, 5, 2)
    assert np.allclose(chain.memberships.sum(axis=2), 1.0)
    assert np.isfinite(chain.log_posterior).all()


def test_chain_save_load(chain, tmp_path):
    path = tmp_path / "chain.jsonl"
    chain.save(path)
    back = tgom.Chain.load(path)
    assert np.array_equal(back.beta1, chain.beta1)
    path.write_text(path.read_text()[:-40])
    with pytest.raises(tgom.ChainFormatError):
        tgom.Chain.load(path)


def test_relabel_and_summary(chain):
    relabeled, perm = chain.relabel()
    assert sorted(perm) == [0, 1]
    xi = relabeled.alpha[:, 0, :] / relabeled.alpha[:, 0, :].sum(axis=1, keepdims=True)
    assert xi[:, 0].mean() >= xi[:, 1].mean()
    s = tgom.summarize(chain)
    assert len(s["xi"]) == 2 and len(s["profiles"]) == 2
    assert set(s["profiles"][0]) == set(chain.item_labels)


def test_phi(panel, chain):
    held = panel.subset(list(range(20)))
    out = tgom.phi(held, chain, membership_draws=5, max_draws=10, seed=2)
    assert out["cell"].shape == (20, 6, 6)
    assert (out["all"] <= np.nanmin(out["wave"], axis=1) + 1e-12).all()
    assert 0.0 < out["means"]["phi_i"] <= out["means"]["phi_ijt"] <= 1.0
    base = tgom.baseline_phi(panel.subset(list(range(20, 150))), held)
    assert base["item"].shape == (20, 6)


def test_cross_validate(panel):
    report = tgom.cross_validate(panel, {"K=2": small_config(200, 50)}, folds=3, seed=5, max_draws=10)
    assert report == tgom.cross_validate(panel, {"K=2": small_config(200, 50)}, folds=3, seed=5, max_draws=10)
    assert json.dumps(report)


def test_errors():
    with pytest.raises(tgom.ConfigError):
        tgom.load_config({"K": 0})
    with pytest.raises(tgom.IoError):
        tgom.Panel.read("/nonexistent/panel.csv")
    with pytest.raises(tgom.ValidationError):
        tgom.Panel.from_csv("id,wave,interview_date,dob,A\n1,1984,1984-06-15,1900-01-01,2\n")
    assert issubclass(tgom.ValidationError, tgom.TgomError)


def test_age_quantile():
    assert tgom.age_quantile(0.0, 0.1, 0.5) == pytest.approx(80.0)


def test_run_cli():
    code, out, _ = tgom.run_cli("--version")
    assert code == 0 and tgom.__version__ in out
    code, _, err = tgom.run_cli("fit")
    assert code == 2 and err
