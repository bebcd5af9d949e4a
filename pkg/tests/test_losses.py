import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from icfsr.losses import LossReport, color_loss, consistency_loss, total_loss
from icfsr.resample import nearest_resize

from conftest import checker, rgb


def test_consistency_zero_case(rng):
    x = rng.random((4, 4, 3))
    assert consistency_loss(x, x, x) == 0.0


def test_consistency_constant_offset(rng):
    x = rng.random((4, 4, 3)) * 0.5
    assert consistency_loss(x + 0.1, x, x) == pytest.approx(0.1, abs=1e-12)


def test_consistency_matches_elementwise_oracle(rng):
    x_hat = rng.random((4, 4, 3))
    x_check = rng.random((4, 4, 3))
    x = rng.random((4, 4, 3))
    ref = 0.0
    for arr in (x_hat, x_check):
        total = 0.0
        for i in range(4):
            for j in range(4):
                for c in range(3):
                    total += abs(arr[i, j, c] - x[i, j, c])
        ref += total / 48
    assert consistency_loss(x_hat, x_check, x) == pytest.approx(ref, abs=1e-12)


def test_consistency_symmetry(rng):
    a, b, x = rng.random((3, 4, 4, 3))
    assert consistency_loss(a, b, x) == pytest.approx(consistency_loss(b, a, x), abs=1e-15)


def test_consistency_dim_mismatch(rng):
    with pytest.raises(ValueError):
        consistency_loss(rng.random((4, 4, 3)), rng.random((4, 4, 3)), rng.random((8, 8, 3)))


def test_color_constant_images():
    c = 0.42
    x = np.full((16, 16, 3), c)
    x_s = np.full((32, 32, 3), c)
    x_inv = np.full((8, 8, 3), c)
    assert color_loss(x_s, x_inv, x, 2) == pytest.approx(0.0, abs=1e-14)


def test_color_pooled_shapes_48x48():
    # s = 2 on a 48x48 input pools to 12x12 (first term) and 6x6 (second)
    rng = np.random.default_rng(0)
    x = rng.random((48, 48, 3))
    x_s = rng.random((96, 96, 3))
    x_inv = rng.random((24, 24, 3))
    from icfsr.resample import avg_pool

    ref = (
        np.abs(avg_pool(x_s, 8, 8) - avg_pool(x, 4, 4)).mean()
        + np.abs(avg_pool(x_inv, 4, 4) - avg_pool(x, 8, 8)).mean()
    )
    assert avg_pool(x_s, 8, 8).shape == (12, 12, 3)
    assert avg_pool(x, 8, 8).shape == (6, 6, 3)
    assert color_loss(x_s, x_inv, x, 2) == pytest.approx(ref, abs=1e-14)


def test_color_checkerboard_first_term_vanishes():
    x = rgb(checker(8, 8))
    x_s = nearest_resize(x, 2)
    x_inv = np.full((4, 4, 3), 0.5)
    # both pools of the first term are 0.5 everywhere by symmetry
    assert color_loss(x_s, x_inv, x, 2) == pytest.approx(0.0, abs=1e-14)


def test_color_divisibility_errors(rng):
    with pytest.raises(ValueError):
        color_loss(rng.random((20, 20, 3)), rng.random((5, 5, 3)), rng.random((10, 10, 3)), 2)
    with pytest.raises(ValueError):
        color_loss(rng.random((30, 32, 3)), rng.random((8, 8, 3)), rng.random((16, 16, 3)), 2)
    with pytest.raises(ValueError):
        color_loss(rng.random((32, 32, 3)), rng.random((8, 8, 3)), rng.random((16, 16, 3)), 1)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_color_nonnegative(seed):
    r = np.random.default_rng(seed)
    val = color_loss(r.random((16, 16, 3)), r.random((4, 4, 3)), r.random((8, 8, 3)), 2)
    assert val >= 0.0


def test_color_invariant_to_block_permutation(rng):
    # pooling erases ordering within each 4x4 block of x
    x = rng.random((8, 8, 3))
    x_perm = x.copy()
    block = x_perm[0:4, 0:4].reshape(16, 3)
    x_perm[0:4, 0:4] = block[::-1].reshape(4, 4, 3)
    x_s = rng.random((16, 16, 3))
    x_inv = rng.random((4, 4, 3))
    assert color_loss(x_s, x_inv, x, 2) == pytest.approx(
        color_loss(x_s, x_inv, x_perm, 2), abs=1e-14
    )


def test_total_loss_examples():
    assert total_loss(1.0, 0.5, 0.2) == pytest.approx(1.1, abs=1e-15)
    assert total_loss(3.7, 0.0, 0.9) == 3.7
    assert total_loss(0.0, 0.0, 0.2) == 0.0


def test_loss_report_identity_exact():
    report = LossReport(l_cons=0.31, l_color=0.12, l_total=0.31 + 0.2 * 0.12, lambda_color=0.2)
    assert report.l_total == report.l_cons + report.lambda_color * report.l_color
