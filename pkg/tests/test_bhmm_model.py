import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import plane_dataset

from mdera_ccuc.bhmm import (EmConfig, bhmm_mean, bhmm_pdf, fit_bhmm, load_models, sample_df, save_models)
from mdera_ccuc.bhmm.sampling import component_sample, rejection_sample
from mdera_ccuc.bhmm.em import integration_sample

CFG = EmConfig(mc_sample_count=2048, max_iter=60, components_range=(1, 2))


@pytest.fixture(scope="module")
def plane_model():
    return fit_bhmm(plane_dataset(np.random.default_rng(3)), em_cfg=CFG)


def test_structure(plane_model):
    m = plane_model
    assert len(m.hfcs) == 1 and len(m.hpcs) == 2
    assert sorted(h.zero_set for h in m.hpcs) == [(), (0,)]
    assert m.component_weights.sum() == pytest.approx(1.0, abs=1e-12)
    assert all(h.is_fitted for h in m.hpcs)


def test_pdf_kinds(plane_model):
    m = plane_model
    assert bhmm_pdf([0.5, 0.3, 0.2], m).kind == "mass"
    assert bhmm_pdf([0.5, 0.3, 0.2], m).value == pytest.approx(60 / 560)
    assert bhmm_pdf([0.0, 0.4, 0.6], m).kind == "density"
    assert bhmm_pdf([0.4, 0.6, 0.0], m).kind == "zero"
    with pytest.raises(ValueError):
        bhmm_pdf([0.5, 0.6, 0.2], m)


def test_samples_on_simplex_with_correct_frequencies(plane_model):
    rng = np.random.default_rng(0)
    X, comp = sample_df(plane_model, 5000, rng)
    assert np.max(np.abs(X.sum(axis=1) - 1.0)) < 1e-9 and X.min() >= 0
    freq = np.bincount(comp, minlength=3) / len(comp)
    assert np.allclose(freq, plane_model.component_weights, atol=0.02)
    on_plane = comp == 1 + [h.zero_set for h in plane_model.hpcs].index((0,))
    assert np.all(X[on_plane, 0] == 0.0) and np.all(X[on_plane, 1:] > 0)


def test_mean_matches_sample_mean(plane_model):
    X, _ = sample_df(plane_model, 20_000, np.random.default_rng(1))
    assert np.allclose(bhmm_mean(plane_model), X.mean(axis=0), atol=0.01)


def test_proposals_agree(plane_model):
    hpc = next(h for h in plane_model.hpcs if h.zero_set == ())
    samples = integration_sample(hpc.region, CFG)
    a = rejection_sample(hpc, 20_000, np.random.default_rng(2), samples)
    b = component_sample(hpc, 20_000, np.random.default_rng(3))
    assert np.allclose(a.mean(axis=0), b.mean(axis=0), atol=0.01)
    assert np.allclose(np.cov(a.T), np.cov(b.T), atol=0.002)


def test_json_round_trip_is_exact(tmp_path, plane_model):
    save_models([plane_model], tmp_path / "m.json")
    back = load_models(tmp_path / "m.json")[0]
    save_models([back], tmp_path / "m2.json")
    assert (tmp_path / "m.json").read_bytes() == (tmp_path / "m2.json").read_bytes()
    a, _ = sample_df(plane_model, 100, np.random.default_rng(4))
    b, _ = sample_df(back, 100, np.random.default_rng(4))
    assert np.array_equal(a, b)


def test_sparse_planes_become_atoms():
    X = np.array([[0.0, 0.3, 0.7], [0.0, 0.6, 0.4], [0.2, 0.3, 0.5], [0.1, 0.1, 0.8],
                  [0.5, 0.0, 0.5], [0.3, 0.0, 0.7]])
    m = fit_bhmm(X, em_cfg=CFG)
    assert all(not h.is_fitted for h in m.hpcs)
    S, _ = sample_df(m, 200, np.random.default_rng(0))
    rows = {tuple(np.round(r, 12)) for r in X}
    assert all(tuple(np.round(s, 12)) in rows for s in S)


@settings(max_examples=10)
@given(st.integers(0, 1000), st.integers(2, 4))
def test_sampling_properties(seed, D):
    rng = np.random.default_rng(seed)
    X = rng.dirichlet(np.full(D, 2.0), 120)
    X[:30, 0] = 0.0
    X /= X.sum(axis=1, keepdims=True)
    X[-15:] = X[-1]
    m = fit_bhmm(X, em_cfg=EmConfig(mc_sample_count=1024, max_iter=20, components_range=(1, 1)))
    S, comp = sample_df(m, 500, rng)
    assert np.max(np.abs(S.sum(axis=1) - 1.0)) < 1e-9 and S.min() >= 0
    assert comp.max() < len(m.component_weights)
