import numpy as np
import pytest
from sklearn.base import clone
from sklearn.pipeline import make_pipeline
from sklearn.preprocessing import StandardScaler

from bdloss import AspectRatioKDE, GaussianBoxEncoder, ObbBox, obb_to_anisotropic_gaussian, obb_to_gaussian
from bdloss.estimators import scott_bandwidth


def test_encoder_plain():
    X = np.array([[1, 2, 4, 2, np.pi / 6], [0, 0, 2, 2, 0.3]])
    out = GaussianBoxEncoder(anisotropic=False).fit_transform(X)
    g = obb_to_gaussian(ObbBox(1, 2, 4, 2, np.pi / 6))
    assert out.shape == (2, 5)
    assert np.allclose(out[0], [1, 2, g.cov[0, 0], g.cov[0, 1], g.cov[1, 1]])


def test_encoder_anisotropic_rows():
    X = np.array([[0, 0, 2, 2, 0.3], [0, 0, 4, 1, 0.3]])
    out = GaussianBoxEncoder().fit_transform(X)
    ga = obb_to_anisotropic_gaussian(ObbBox(0, 0, 2, 2, 0.3))
    gp = obb_to_gaussian(ObbBox(0, 0, 4, 1, 0.3))
    assert np.allclose(out[0, 2:], [ga.cov[0, 0], ga.cov[0, 1], ga.cov[1, 1]])
    assert np.allclose(out[1, 2:], [gp.cov[0, 0], gp.cov[0, 1], gp.cov[1, 1]])


def test_encoder_params_and_clone():
    enc = GaussianBoxEncoder(tau=1.2, delta=4.0)
    assert enc.get_params() == {"anisotropic": True, "tau": 1.2, "delta": 4.0}
    assert clone(enc).get_params() == enc.get_params()
    assert list(enc.fit(np.ones((1, 5))).get_feature_names_out()) == [
        "mean_x", "mean_y", "var_xx", "cov_xy", "var_yy"]


def test_encoder_pipeline():
    X = np.random.default_rng(0).uniform(0.5, 5, (20, 5))
    assert make_pipeline(GaussianBoxEncoder(), StandardScaler()).fit_transform(X).shape == (20, 5)


@pytest.mark.parametrize("X", [np.ones((3, 4)), np.array([[0, 0, -1, 1, 0]])])
def test_encoder_rejects(X):
    with pytest.raises(ValueError):
        GaussianBoxEncoder().fit(X)


def test_kde_scott():
    x = np.random.default_rng(1).uniform(1, 3, 100)
    kde = AspectRatioKDE().fit(x)
    assert kde.bandwidth_ == pytest.approx(np.std(x, ddof=1) * 100 ** -0.2)
    assert scott_bandwidth(x) == kde.bandwidth_


def test_kde_reflection_keeps_mass():
    kde = AspectRatioKDE().fit(np.ones(50))
    assert np.trapezoid(kde.density_, kde.grid_) == pytest.approx(1.0, abs=1e-3)
    assert kde.mode() == pytest.approx(1.0, abs=1e-3)
    assert kde.density([0.5])[0] == 0.0


def test_kde_score_samples():
    kde = AspectRatioKDE(bandwidth=0.2).fit([1.5, 2.0, 2.5])
    assert np.allclose(np.exp(kde.score_samples([2.0])), kde.density([2.0]))


@pytest.mark.parametrize("kw,X", [({}, [2.0]), ({}, [0.5, 2.0]), ({"bandwidth": -1}, [1.5, 2.0]),
                                  ({"bandwidth": 1e-9}, [1.5, 20.0])])
def test_kde_rejects(kw, X):
    with pytest.raises(ValueError):
        AspectRatioKDE(**kw).fit(X)
