import numpy as np
import pytest
from scipy import stats

from penalized_sampler.data import (
    Dataset,
    dirichlet_oracle,
    gen_linear,
    gen_regression_fixture,
    load_csv,
    save_csv,
    standardize,
    uniform_l1_ball,
    uniform_simplex,
)
from penalized_sampler.errors import DataParseError, InvalidArgument, SchemaError


def test_noiseless_rows_are_exact():
    data = gen_linear(n=100, noise_var=0.0, seed=1)
    np.testing.assert_array_equal(data.responses, data.features[:, 0] + data.features[:, 1])


def test_response_variance():
    assert gen_linear(seed=3).responses.var() == pytest.approx(2.25, abs=0.1)


def test_generation_is_deterministic():
    a, b = gen_linear(n=50, seed=9), gen_linear(n=50, seed=9)
    np.testing.assert_array_equal(a.features, b.features)
    np.testing.assert_array_equal(a.responses, b.responses)
    assert a.provenance == b.provenance


def test_ols_converges_to_truth():
    data = gen_linear(seed=4)
    assert np.linalg.norm(data.ols() - [1.0, 1.0]) <= 0.05


def test_generator_validation():
    with pytest.raises(InvalidArgument):
        gen_linear(n=0)
    with pytest.raises(InvalidArgument):
        gen_linear(noise_var=-1)
    with pytest.raises(InvalidArgument):
        Dataset(np.ones((3, 2)), np.ones(2))
    with pytest.raises(InvalidArgument):
        Dataset(np.array([[np.nan]]), np.ones(1))


def test_csv_round_trip(tmp_path):
    data = gen_regression_fixture(n=30, dim=3, seed=1)
    path = tmp_path / "d.csv"
    save_csv(data, path)
    back = load_csv(path)
    np.testing.assert_array_equal(back.features, data.features)
    np.testing.assert_array_equal(back.responses, data.responses)
    assert path.read_text().splitlines()[0] == "a_0,a_1,a_2,y"


def test_header_only_csv(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("a_0,a_1,y\n")
    data = load_csv(path)
    assert data.n == 0 and data.dim == 2


def test_non_numeric_token_names_line(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("a_0,y\n1,2\n3,oops\n")
    with pytest.raises(DataParseError) as info:
        load_csv(path)
    assert info.value.line == 3
    assert "3" in str(info.value)


def test_width_and_header_errors(tmp_path):
    path = tmp_path / "w.csv"
    path.write_text("a_0,a_1,y\n1,2,3\n1,2\n")
    with pytest.raises(SchemaError):
        load_csv(path)
    path.write_text("x,y\n1,2\n")
    with pytest.raises(SchemaError):
        load_csv(path)
    path.write_text("")
    with pytest.raises(SchemaError):
        load_csv(path)


@pytest.mark.parametrize("scaling", ["unit_variance", "unit_norm"])
def test_standardize(scaling):
    data = standardize(gen_regression_fixture(n=442, dim=4), scaling=scaling)
    np.testing.assert_allclose(data.features.mean(axis=0), 0.0, atol=1e-12)
    assert abs(data.responses.mean()) < 1e-10
    scale = data.features.std(axis=0) if scaling == "unit_variance" else np.linalg.norm(data.features, axis=0)
    np.testing.assert_allclose(scale, 1.0, rtol=1e-12)
    assert scaling in data.provenance
    with pytest.raises(InvalidArgument):
        standardize(data, scaling="minmax")


def test_dirichlet_oracle_means():
    x = dirichlet_oracle([1, 2, 2], 10_000, seed=1)
    np.testing.assert_allclose(x.mean(axis=0), [0.2, 0.4, 0.4], atol=0.02)
    y = dirichlet_oracle([1, 1, 1], 10_000, seed=2)
    np.testing.assert_allclose(y.mean(axis=0), 1 / 3, atol=0.02)
    assert np.all(x >= 0)
    np.testing.assert_allclose(x.sum(axis=1), 1.0, atol=1e-12)


def test_dirichlet_oracle_marginal_ks():
    alpha = np.array([1.0, 2.0, 2.0])
    x = dirichlet_oracle(alpha, 10_000, seed=5)
    ks = stats.kstest(x[:, 0], stats.beta(alpha[0], alpha.sum() - alpha[0]).cdf).statistic
    assert ks <= 0.02


def test_dirichlet_oracle_validation_and_determinism():
    with pytest.raises(InvalidArgument):
        dirichlet_oracle([1.0, 0.0], 10)
    np.testing.assert_array_equal(dirichlet_oracle([2, 3], 5, seed=7), dirichlet_oracle([2, 3], 5, seed=7))


def test_uniform_initializers():
    rng = np.random.default_rng(0)
    s = uniform_simplex(2, 5000, rng)
    assert np.all(s >= 0) and np.all(s.sum(axis=1) <= 1)
    b = uniform_l1_ball(3, 2.0, 5000, rng)
    assert np.all(np.abs(b).sum(axis=1) <= 2.0 + 1e-12)
    assert np.all(np.abs(b.mean(axis=0)) < 0.05)
