import numpy as np
import pytest

from ptychocert.core import (
    ComplexField,
    GridSpec,
    MaskSpec,
    block_of,
    random_object,
    random_phase_mask,
    restrict,
)
from ptychocert.forward import acquire, data_distance, diffract, exit_wave
from ptychocert.scheme import ScanScheme, raster_scheme
from ptychocert.ambiguity import (
    AmbiguityParams,
    apply_affine_phase,
    apply_block_phases,
    apply_scaling,
    example_t0,
    translate_pair_ex31,
    twin_pair_ex0,
    verify_equivalence,
)
from ptychocert.constraints import MPCParams, OSCParams, check_mpc, check_osc
from ptychocert.core import PixelSet, box_hull


def torus_setup(n=16, m=8, tau=4, mask_seed=1, obj_seed=2, gamma=1.0):
    grid = GridSpec(n, m, "torus")
    sch = raster_scheme(grid, tau)
    mask = random_phase_mask(MaskSpec(m, gamma, "unimodular", mask_seed))
    obj = random_object(n, obj_seed)
    return grid, sch, mask, obj


def integer_frequency(n, j1, j2):
    return (2 * np.pi * j1 / n, 2 * np.pi * j2 / n)


class TestScaling:
    def test_identity(self):
        _, sch, mask, obj = torus_setup()
        pair = apply_scaling(obj, mask, 1.0)
        assert np.array_equal(pair.object.data, obj.data)
        assert np.array_equal(pair.mask.data, mask.data)

    def test_data_invariant(self):
        _, sch, mask, obj = torus_setup()
        pair = apply_scaling(obj, mask, 2.0)
        assert data_distance(acquire(sch, mask, obj),
                             acquire(sch, pair.mask, pair.object)) < 1e-10

    def test_inverse_recovers(self):
        _, sch, mask, obj = torus_setup()
        pair = apply_scaling(obj, mask, 2.0)
        back = apply_scaling(pair.object, pair.mask, 0.5)
        np.testing.assert_allclose(back.object.data, obj.data, atol=1e-14)
        np.testing.assert_allclose(back.mask.data, mask.data, atol=1e-14)

    def test_rejects_nonpositive(self):
        _, _, mask, obj = torus_setup()
        with pytest.raises(ValueError):
            apply_scaling(obj, mask, -1.0)
        with pytest.raises(ValueError):
            AmbiguityParams(c=0.0)


class TestAffinePhase:
    def test_trivial_params_identity(self):
        _, sch, mask, obj = torus_setup()
        pair = apply_affine_phase(obj, mask, 0.0, 0.0, (0.0, 0.0))
        for t in sch.shifts:
            a = exit_wave(mask, obj, t, sch.grid).field.data
            b = exit_wave(pair.mask, pair.object, t, sch.grid).field.data
            assert np.array_equal(a, b)

    def test_random_params_data_invariant(self):
        grid, sch, mask, obj = torus_setup(n=32, m=8, tau=4)
        rng = np.random.default_rng(3)
        base = acquire(sch, mask, obj)
        for _ in range(10):
            a, b = rng.uniform(-np.pi, np.pi, 2)
            w = integer_frequency(32, rng.integers(-5, 6), rng.integers(-5, 6))
            pair = apply_affine_phase(obj, mask, a, b, w)
            assert data_distance(base, acquire(sch, pair.mask, pair.object)) < 1e-10

    def test_block_phases_follow_drift_formula(self):
        grid, sch, mask, obj = torus_setup(n=32, m=8, tau=4)
        a, b = 0.4, -1.1
        w = integer_frequency(32, 1, 0)
        pair = apply_affine_phase(obj, mask, a, b, w)
        for t in sch.shifts:
            wt = exit_wave(mask, obj, t, grid).field.data
            wc = exit_wave(pair.mask, pair.object, t, grid).field.data
            expected = w[0] * t[0] + w[1] * t[1] + (b - a)
            got = np.angle(np.vdot(wt, wc))
            assert abs(np.angle(np.exp(1j * (got - expected)))) < 1e-8


class TestBlockPhases:
    def test_identity(self):
        grid, sch, mask, obj = torus_setup()
        waves = [exit_wave(mask, obj, t, grid) for t in sch.shifts]
        out = apply_block_phases(waves, [0.0] * len(waves))
        for w0, w1 in zip(waves, out):
            assert np.array_equal(w0.field.data, w1.field.data)

    def test_patterns_unchanged(self):
        grid, sch, mask, obj = torus_setup()
        waves = [exit_wave(mask, obj, t, grid) for t in sch.shifts]
        rng = np.random.default_rng(8)
        theta = rng.uniform(-np.pi, np.pi, len(waves))
        out = apply_block_phases(waves, theta)
        for w0, w1 in zip(waves, out):
            p0, p1 = diffract(w0).values, diffract(w1).values
            assert np.max(np.abs(p0 - p1)) <= 1e-12 * max(p0.max(), 1.0)

    def test_matches_affine_construction(self):
        grid, sch, mask, obj = torus_setup(n=32, m=8, tau=4)
        b_minus_a = 0.0  # with a = b the two routes agree exactly
        w = integer_frequency(32, 2, -1)
        pair = apply_affine_phase(obj, mask, 0.7, 0.7, w)
        waves = [exit_wave(mask, obj, t, grid) for t in sch.shifts]
        theta = [w[0] * t[0] + w[1] * t[1] + b_minus_a for t in sch.shifts]
        shifted = apply_block_phases(waves, theta)
        for t, wv in zip(sch.shifts, shifted):
            direct = exit_wave(pair.mask, pair.object, t, grid).field.data
            assert np.max(np.abs(direct - wv.field.data)) < 1e-12

    def test_length_mismatch(self):
        grid, sch, mask, obj = torus_setup()
        waves = [exit_wave(mask, obj, t, grid) for t in sch.shifts]
        with pytest.raises(ValueError):
            apply_block_phases(waves, [0.0])


class TestTwinPairEx0:
    def torus_instance(self, m=16, seed=0):
        grid = GridSpec(m, m, "torus")
        sch = ScanScheme(grid, ((0, 0), (m // 2, 0)))
        mask = random_phase_mask(MaskSpec(m, 1.0, "unimodular", 10 + seed))
        obj = random_object(m, 20 + seed)
        return grid, sch, mask, obj

    def test_data_invariant_on_torus(self):
        grid, sch, mask, obj = self.torus_instance()
        pair = twin_pair_ex0(obj, mask, sch)
        assert data_distance(acquire(sch, mask, obj),
                             acquire(sch, pair.mask, pair.object)) < 1e-10

    def test_mpc_fails(self):
        fails = 0
        for seed in range(10):
            grid, sch, mask, obj = self.torus_instance(seed=seed)
            pair = twin_pair_ex0(obj, mask, sch)
            if not check_mpc(pair.mask, mask, MPCParams(0.4, 1.0)).passed:
                fails += 1
        assert fails == 10

    def test_dirichlet_geometry_with_symmetry(self):
        m, n = 8, 12  # n = 3m/2
        grid = GridSpec(n, m, "dirichlet-zero")
        sch = ScanScheme(grid, ((0, 0), (m // 2, 0)))
        mask = random_phase_mask(MaskSpec(m, 1.0, "unimodular", 31))
        rng = np.random.default_rng(32)
        data = np.zeros((n, n), dtype=complex)
        data[:m, :m] = rng.normal(size=(m, m)) + 1j * rng.normal(size=(m, m))
        data[m:, :m] = data[:m // 2, :m]  # enforce f^0_0 = f^1_1
        obj = ComplexField(data)
        pair = twin_pair_ex0(obj, mask, sch)
        assert data_distance(acquire(sch, mask, obj),
                             acquire(sch, pair.mask, pair.object)) < 1e-10

    def test_rejects_asymmetric_object(self):
        m, n = 8, 12
        grid = GridSpec(n, m, "dirichlet-zero")
        sch = ScanScheme(grid, ((0, 0), (m // 2, 0)))
        mask = random_phase_mask(MaskSpec(m, 1.0, "unimodular", 33))
        obj = random_object(n, 34)  # no symmetry
        with pytest.raises(ValueError):
            twin_pair_ex0(obj, mask, sch)

    def test_rejects_wrong_scheme(self):
        grid, sch, mask, obj = self.torus_instance()
        bad = ScanScheme(grid, ((0, 0), (3, 0)))
        with pytest.raises(ValueError):
            twin_pair_ex0(obj, mask, bad)


def ex31_instance(m=8, n=12, mask_seed=1, obj_seed=2):
    grid = GridSpec(n, m, "dirichlet-zero")
    sch = ScanScheme(grid, ((0, 0), (m // 2, 0)))
    mask = random_phase_mask(MaskSpec(m, 1.0, "unimodular", mask_seed))
    rng = np.random.default_rng(obj_seed)
    data = np.zeros((n, n), dtype=complex)
    data[m // 2:m, :m] = ((0.5 + rng.random((m // 2, m)))
                          * np.exp(1j * np.pi * (1 - 2 * rng.random((m // 2, m)))))
    return grid, sch, mask, ComplexField(data)


class TestTranslatePairEx31:
    @pytest.mark.parametrize("variant", ["translate", "twin"])
    def test_data_invariant(self, variant):
        grid, sch, mask, obj = ex31_instance()
        pair = translate_pair_ex31(obj, mask, sch, variant=variant)
        assert data_distance(acquire(sch, mask, obj),
                             acquire(sch, pair.mask, pair.object)) < 1e-10
        assert not np.allclose(pair.object.data, obj.data)

    def test_translate_identities_pixelwise(self):
        # the masked estimates are exact translates of the masked truth
        grid, sch, mask, obj = ex31_instance()
        m = grid.m
        half = m // 2
        pair = translate_pair_ex31(obj, mask, sch)
        t = sch.shifts[1]
        f0 = restrict(obj, block_of(grid, (0, 0))).data
        ft = restrict(obj, block_of(grid, t)).data
        g0 = restrict(pair.object, block_of(grid, (0, 0))).data
        gt = restrict(pair.object, block_of(grid, t)).data
        lhs0 = g0 * pair.mask.data
        rhs0 = np.zeros_like(lhs0)
        rhs0[:half] = (f0 * mask.data)[half:]
        assert np.max(np.abs(lhs0 - rhs0)) < 1e-12
        lhst = gt * pair.mask.data
        rhst = np.zeros_like(lhst)
        rhst[half:] = (ft * mask.data)[:half]
        assert np.max(np.abs(lhst - rhst)) < 1e-12

    def test_twin_variant_identities_pixelwise(self):
        grid, sch, mask, obj = ex31_instance()
        pair = translate_pair_ex31(obj, mask, sch, variant="twin")
        f0 = restrict(obj, block_of(grid, (0, 0))).data
        g0 = restrict(pair.object, block_of(grid, (0, 0))).data
        lhs = g0 * pair.mask.data
        rhs = np.conj((mask.data * f0)[::-1, ::-1])
        assert np.max(np.abs(lhs - rhs)) < 1e-12

    def test_not_blockwise_phase_multiple(self):
        from ptychocert.analysis import block_phases

        grid, sch, mask, obj = ex31_instance()
        pair = translate_pair_ex31(obj, mask, sch)
        _, residuals = block_phases(pair, obj, mask, sch)
        assert min(residuals) > 0.1

    def test_osc_accepts_loose_then_rejects_tightened(self):
        grid, sch, mask, obj = ex31_instance()
        m = grid.m
        supp = [(i, j) for i in range(m // 2, m) for j in range(m)]
        fbox = box_hull(PixelSet.of(GridSpec(m, m, "dirichlet-zero"), supp))
        for variant in ("translate", "twin"):
            pair = translate_pair_ex31(obj, mask, sch, variant=variant)
            g0 = restrict(pair.object, block_of(grid, (0, 0)))
            loose = check_osc(g0, OSCParams(example_t0(m, 0), fbox))
            tight = check_osc(g0, OSCParams(example_t0(m, 1), fbox))
            assert loose.passed
            assert not tight.passed
            assert tight.offender == (m // 2, 0)

    def test_rejects_nonzero_flank(self):
        grid, sch, mask, _ = ex31_instance()
        with pytest.raises(ValueError):
            translate_pair_ex31(random_object(grid.n, 5), mask, sch)

    def test_rejects_narrow_grid(self):
        grid = GridSpec(8, 8, "torus")  # 2n < 3m
        sch = ScanScheme(grid, ((0, 0), (4, 0)))
        mask = random_phase_mask(MaskSpec(8, 1.0, "unimodular", 1))
        obj = ComplexField(np.zeros((8, 8), dtype=complex))
        with pytest.raises(ValueError):
            translate_pair_ex31(obj, mask, sch)


class TestVerifyEquivalence:
    def test_affine_pair_classified(self):
        grid, sch, mask, obj = torus_setup(n=32, m=8, tau=4)
        a, b = 0.9, 0.2
        w = integer_frequency(32, 1, 2)
        pair = apply_affine_phase(obj, mask, a, b, w)
        rep = verify_equivalence(pair, obj, mask, sch)
        assert rep.data_equal
        assert rep.blockwise_pass
        assert rep.classification == "affine"
        got_w = rep.params["w"]
        assert max(abs(np.angle(np.exp(1j * (got_w[i] - w[i])))) for i in range(2)) < 1e-8
        drift = rep.params["b"] - rep.params["a"]
        assert abs(np.angle(np.exp(1j * (drift - (b - a))))) < 1e-8

    def test_scaling_pair_classified(self):
        _, sch, mask, obj = torus_setup()
        pair = apply_scaling(obj, mask, 7.3)
        rep = verify_equivalence(pair, obj, mask, sch)
        assert rep.data_equal
        assert rep.classification == "scaling"
        assert abs(rep.params["c"] - 7.3) < 1e-10 * 7.3

    def test_unrelated_object_is_other(self):
        from ptychocert.ambiguity import SolutionPair

        _, sch, mask, obj = torus_setup()
        other = random_object(16, 99)
        rep = verify_equivalence(SolutionPair(other, mask), obj, mask, sch)
        assert not rep.data_equal
        assert rep.classification == "other"

    def test_disjoint_blocks_block_phase_only(self):
        # with tau = m the blocks tile the torus, so arbitrary per-block
        # phases give a well-defined object: blockwise pass, but no affine
        # profile fits a random theta
        from ptychocert.ambiguity import SolutionPair

        grid = GridSpec(16, 4, "torus")
        sch = raster_scheme(grid, 4)
        mask = random_phase_mask(MaskSpec(4, 1.0, "unimodular", 61))
        obj = random_object(16, 62)
        rng = np.random.default_rng(63)
        g = np.array(obj.data)
        for t in sch.shifts:
            i1 = (t[0] + np.arange(4)) % 16
            i2 = (t[1] + np.arange(4)) % 16
            g[np.ix_(i1, i2)] *= np.exp(1j * rng.uniform(-np.pi, np.pi))
        rep = verify_equivalence(SolutionPair(ComplexField(g), mask), obj, mask, sch)
        assert rep.data_equal
        assert rep.blockwise_pass
        assert rep.classification == "block-phase-only"

    def test_composition_is_invariant(self):
        grid, sch, mask, obj = torus_setup(n=32, m=8, tau=4)
        w = integer_frequency(32, -2, 3)
        pair = apply_affine_phase(obj, mask, 0.3, 1.0, w)
        pair = apply_scaling(pair.object, pair.mask, 2.0)
        rep = verify_equivalence(pair, obj, mask, sch)
        assert rep.data_equal
        assert rep.classification == "affine"

    def test_ex31_report(self):
        grid, sch, mask, obj = ex31_instance()
        pair = translate_pair_ex31(obj, mask, sch)
        rep = verify_equivalence(pair, obj, mask, sch)
        assert rep.data_equal
        assert not rep.blockwise_pass
        assert rep.classification == "other"

    def test_report_serializes(self):
        import json

        _, sch, mask, obj = torus_setup()
        rep = verify_equivalence(apply_scaling(obj, mask, 2.0), obj, mask, sch)
        json.dumps(rep.to_dict())


@pytest.mark.parametrize("m", [4, 8, 16, 32])
def test_constructor_invariance_sweep(m):
    # every constructor with a data-invariance contract, across block sizes
    n = 2 * m
    grid = GridSpec(n, m, "torus")
    sch = raster_scheme(grid, m // 2)
    rng = np.random.default_rng(m)
    base_seed = 100 * m
    for trial in range(5):
        mask = random_phase_mask(MaskSpec(m, 1.0, "unimodular", base_seed + trial))
        obj = random_object(n, base_seed + 50 + trial)
        truth = acquire(sch, mask, obj)
        c = float(rng.uniform(0.3, 3.0))
        sc = apply_scaling(obj, mask, c)
        assert data_distance(truth, acquire(sch, sc.mask, sc.object)) < 1e-10
        w = integer_frequency(n, int(rng.integers(-3, 4)), int(rng.integers(-3, 4)))
        af = apply_affine_phase(obj, mask, float(rng.uniform(-3, 3)),
                                float(rng.uniform(-3, 3)), w)
        assert data_distance(truth, acquire(sch, af.mask, af.object)) < 1e-10
    # twin example on its own geometry
    sch0 = ScanScheme(grid=GridSpec(m, m, "torus"), shifts=((0, 0), (m // 2, 0)))
    mask = random_phase_mask(MaskSpec(m, 1.0, "unimodular", base_seed))
    obj0 = random_object(m, base_seed + 1)
    tp = twin_pair_ex0(obj0, mask, sch0)
    assert data_distance(acquire(sch0, mask, obj0),
                         acquire(sch0, tp.mask, tp.object)) < 1e-10
