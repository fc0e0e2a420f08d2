import numpy as np
import pytest

from motionkit.fsq import FsqSpec, UniversalToken, enumerate_codes, fsq_bound_grad, fsq_quantize


def test_zero_maps_to_zero_codes():
    spec = FsqSpec(dims=4, levels=5)
    tok = fsq_quantize(np.zeros(4), spec)
    assert np.all(tok.codes == 0)
    assert np.all(tok.continuous_value == 0)


def test_saturation_even_levels():
    spec = FsqSpec(dims=1, levels=8)
    tok = fsq_quantize(np.array([100.0]), spec)
    assert tok.codes[0] == 4  # floor(8/2), tanh saturated
    tok = fsq_quantize(np.array([-100.0]), spec)
    assert tok.codes[0] == -4


@pytest.mark.parametrize("dims,levels", [(2, 3), (3, 3), (2, 5)])
def test_codebook_enumeration(dims, levels):
    spec = FsqSpec(dims=dims, levels=levels)
    seen = enumerate_codes(spec, grid_points_per_dim=41)
    assert len(seen) == levels**dims == spec.codebook_size


def test_idempotence_over_all_codes():
    for levels in (3, 5, 7):
        spec = FsqSpec(dims=1, levels=levels)
        half = spec.half
        eps = 1e-6
        for code in range(-half, half + 1):
            z = np.arctanh(np.array([code / half * (1 - eps)])) if code != 0 else np.zeros(1)
            tok = fsq_quantize(z, spec)
            assert tok.codes[0] == code, (levels, code)


def test_code_bound_invariant():
    rng = np.random.default_rng(0)
    spec = FsqSpec(dims=6, levels=8)
    for _ in range(500):
        tok = fsq_quantize(rng.normal(scale=3.0, size=6), spec)
        assert np.all(np.abs(tok.codes) <= spec.half)
        assert np.all(tok.codes == np.rint(tok.continuous_value))


def test_local_constancy_away_from_boundaries():
    spec = FsqSpec(dims=3, levels=5)
    rng = np.random.default_rng(2)
    for _ in range(200):
        z = rng.normal(size=3)
        tok = fsq_quantize(z, spec)
        frac = np.abs(tok.continuous_value - np.rint(tok.continuous_value))
        if np.any(frac > 0.499):  # too close to a rounding boundary
            continue
        tok2 = fsq_quantize(z + 1e-9 * rng.normal(size=3), spec)
        assert np.array_equal(tok.codes, tok2.codes)


def test_bound_gradient_matches_fd():
    spec = FsqSpec(dims=4, levels=7)
    rng = np.random.default_rng(3)
    z = rng.normal(size=4)
    h = 1e-6
    from motionkit.fsq import fsq_bound

    for i in range(4):
        e = np.zeros(4)
        e[i] = h
        fd = (fsq_bound(z + e, spec)[i] - fsq_bound(z - e, spec)[i]) / (2 * h)
        assert np.isclose(fd, fsq_bound_grad(z, spec)[i], rtol=1e-6)


def test_token_invariant_checked():
    with pytest.raises(ValueError):
        UniversalToken(codes=np.array([1]), continuous_value=np.array([0.2]))


def test_non_finite_rejected():
    spec = FsqSpec(dims=2, levels=5)
    with pytest.raises(ValueError):
        fsq_quantize(np.array([np.nan, 0.0]), spec)
