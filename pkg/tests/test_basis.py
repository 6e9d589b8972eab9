import json

import numpy as np
import pytest
from scipy.optimize import brentq

from modalform import (
    EUCLIDEAN,
    INFINITY,
    InvalidBasisError,
    InvalidParameterError,
    ModalBasis,
    NATURAL,
    RIGID,
    SIZE,
    TaggedField,
    assemble_operators,
    build_profile,
    enrich_basis,
    renormalize,
    rigid_and_size_fields,
    solve_modes,
)


def free_free_beta_l(count):
    """Independent oracle: roots of cos(x)cosh(x) = 1, x > 0."""
    f = lambda x: np.cos(x) * np.cosh(x) - 1.0
    roots = []
    x = 1.0
    while len(roots) < count:
        if f(x) * f(x + 0.5) < 0:
            roots.append(brentq(f, x, x + 0.5, xtol=1e-13))
        x += 0.5
    return np.array(roots)


@pytest.fixture(scope="module")
def beam201():
    """Free-free beam, 200 elements."""
    return build_profile(10.0, 201)


@pytest.fixture(scope="module")
def beam_modes7(beam201):
    return solve_modes(assemble_operators(beam201), 7)


class TestSolveModes:
    def test_two_rigid_modes(self, beam_modes7):
        values = beam_modes7.eigenvalues
        assert values[0] <= 1e-8 * values[2]
        assert values[1] <= 1e-8 * values[2]

    def test_flexible_frequencies_match_transcendental_roots(self, beam_modes7):
        beta_l = free_free_beta_l(5)
        exact = (beta_l / 10.0) ** 4  # EI = rhoA = 1, L = 10
        got = beam_modes7.eigenvalues[2:7]
        np.testing.assert_allclose(got, exact, rtol=0.01)

    def test_eigen_residual(self, beam201, beam_modes7):
        ops = assemble_operators(beam201)
        k_norm = np.linalg.norm(ops.stiffness, 2)
        for i in range(beam_modes7.n_modes):
            mode = beam_modes7.modes[:, i]
            residual = ops.stiffness @ mode - beam_modes7.eigenvalues[i] * (ops.mass @ mode)
            assert np.linalg.norm(residual) <= 1e-8 * k_norm * np.linalg.norm(mode)

    def test_mass_orthogonality(self, beam201, beam_modes7):
        ops = assemble_operators(beam201)
        gram = beam_modes7.modes.T @ ops.mass @ beam_modes7.modes
        off = gram - np.diag(np.diag(gram))
        assert np.abs(off).max() <= 1e-8 * np.abs(np.diag(gram)).max()

    def test_cap_kernel_mode_is_constant(self, cap321):
        basis = solve_modes(assemble_operators(cap321), 5)
        assert basis.eigenvalues[0] <= 1e-10
        first = basis.modes[:, 0]
        assert first.max() - first.min() <= 1e-6 * np.abs(first).max()

    def test_eigenvalues_ascending(self, beam_modes7):
        assert np.all(np.diff(beam_modes7.eigenvalues) >= 0)

    def test_sign_convention(self, beam_modes7):
        peaks = beam_modes7.modes[
            np.argmax(np.abs(beam_modes7.modes), axis=0),
            np.arange(beam_modes7.n_modes),
        ]
        assert np.all(peaks > 0)

    def test_rigid_mode_count_matches_operator(self, beam_modes7, cap321):
        assert beam_modes7.mode_class[:3] == (RIGID, RIGID, NATURAL)
        cap_basis = solve_modes(assemble_operators(cap321), 5)
        assert cap_basis.mode_class[:2] == (RIGID, NATURAL)

    def test_n_larger_than_p_rejected(self, beam201):
        with pytest.raises(InvalidParameterError):
            solve_modes(assemble_operators(beam201), 202)


class TestRigidAndSizeFields:
    def test_cap_rotations_vanish(self, cap321):
        fields = rigid_and_size_fields(cap321)
        names = [f.name for f in fields]
        assert names == ["translation_x", "translation_y", "translation_z", "size"]

    def test_cap_z_translation_is_polar_cosine(self, cap321):
        fields = {f.name: f.values for f in rigid_and_size_fields(cap321)}
        np.testing.assert_allclose(fields["translation_z"], cap321.normals[:, 2], atol=1e-14)

    def test_cap_size_field_is_ones(self, cap321):
        fields = {f.name: f for f in rigid_and_size_fields(cap321)}
        assert fields["size"].tag == SIZE
        np.testing.assert_array_equal(fields["size"].values, np.ones(321))

    def test_profile_two_survivors(self, profile250):
        fields = rigid_and_size_fields(profile250)
        assert [f.tag for f in fields] == [RIGID, RIGID]
        ones, tilt = fields[0].values, fields[1].values
        np.testing.assert_array_equal(ones, np.ones(250))
        x_centred = profile250.nodes[:, 0] - profile250.nodes[:, 0].mean()
        cosine = tilt @ x_centred / (np.linalg.norm(tilt) * np.linalg.norm(x_centred))
        assert abs(abs(cosine) - 1.0) <= 1e-12


class TestEnrichBasis:
    def test_empty_extra_fields_is_noop(self, beam_modes7):
        enriched = enrich_basis(beam_modes7, [])
        np.testing.assert_allclose(enriched.modes, beam_modes7.modes, atol=1e-14)
        assert enriched.mode_class == beam_modes7.mode_class

    def test_cap_drops_exactly_one_duplicate(self, cap321):
        natural = solve_modes(assemble_operators(cap321), 30)
        enriched = enrich_basis(natural, rigid_and_size_fields(cap321))
        assert enriched.n_modes == 30 + 4 - 1

    def test_size_column_orthogonal_to_later_columns(self, cap_basis50):
        size_idx = cap_basis50.mode_class.index(SIZE)
        gram = cap_basis50.modes.T @ cap_basis50.modes
        later = gram[size_idx, size_idx + 1 :]
        assert np.abs(later).max() <= 1e-10

    def test_enriched_span_contains_naturals_and_injected(self, cap321):
        natural = solve_modes(assemble_operators(cap321), 20)
        fields = rigid_and_size_fields(cap321)
        enriched = enrich_basis(natural, fields)
        targets = np.concatenate(
            [natural.modes, np.stack([f.values for f in fields], axis=1)], axis=1
        )
        fitted = enriched.modes @ np.linalg.lstsq(enriched.modes, targets, rcond=None)[0]
        errors = np.linalg.norm(targets - fitted, axis=0) / np.linalg.norm(targets, axis=0)
        assert errors.max() <= 1e-8

    def test_mode_order_is_rigid_size_natural(self, cap_basis50):
        assert cap_basis50.mode_class[:4] == (RIGID, RIGID, RIGID, SIZE)
        assert set(cap_basis50.mode_class[4:]) == {NATURAL}

    def test_dependent_extra_fields_rejected(self, beam_modes7):
        ones = TaggedField(np.ones(201), RIGID, "a")
        twos = TaggedField(2.0 * np.ones(201), RIGID, "b")
        with pytest.raises(InvalidParameterError):
            enrich_basis(beam_modes7, [ones, twos])


class TestRenormalize:
    def _single_column(self, values):
        return ModalBasis(
            geometry_ref="test",
            modes=np.asarray(values, dtype=float)[:, None],
            eigenvalues=[1.0],
            mode_class=(NATURAL,),
            norm_kind=EUCLIDEAN,
            inf_norms=[1.0],
        )

    def test_direct_scaling_records_scale(self):
        basis = self._single_column([0.0, 2.0, -4.0])
        scaled = renormalize(basis, INFINITY)
        np.testing.assert_allclose(scaled.modes[:, 0], [0.0, 0.5, -1.0], atol=1e-15)
        np.testing.assert_allclose(scaled.inf_norms, [4.0])

    def test_idempotent(self, cap_basis50):
        again = renormalize(cap_basis50, INFINITY)
        np.testing.assert_array_equal(again.modes, cap_basis50.modes)
        np.testing.assert_allclose(again.inf_norms, cap_basis50.inf_norms, rtol=1e-15)

    def test_round_trip(self, beam_modes7):
        forth = renormalize(beam_modes7, INFINITY)
        back = renormalize(forth, EUCLIDEAN)
        scale = np.abs(beam_modes7.modes).max()
        assert np.abs(back.modes - beam_modes7.modes).max() <= 1e-12 * scale
        np.testing.assert_allclose(back.inf_norms, 1.0, rtol=1e-12)

    def test_zero_column_rejected(self):
        basis = self._single_column([0.0, 0.0, 0.0])
        with pytest.raises(InvalidBasisError):
            renormalize(basis, INFINITY)


class TestModalBasisJson:
    def test_round_trip(self, cap_basis50):
        clone = ModalBasis.from_json(cap_basis50.to_json())
        assert np.array_equal(clone.modes, cap_basis50.modes)
        assert np.array_equal(clone.eigenvalues, cap_basis50.eigenvalues)
        assert clone.mode_class == cap_basis50.mode_class
        assert clone.ref == cap_basis50.ref

    def test_load_validates_infinity_norm(self, cap_basis50):
        payload = json.loads(cap_basis50.to_json())
        for row in payload["modes"]:
            row[0] *= 0.5
        with pytest.raises(InvalidBasisError):
            ModalBasis.from_json(json.dumps(payload))

    def test_load_validates_column_independence(self, cap_basis50):
        payload = json.loads(cap_basis50.to_json())
        for row in payload["modes"]:
            row[1] = row[0]
        for key in ("eigenvalues", "inf_norms"):
            payload[key][1] = payload[key][0]
        payload["mode_class"][1] = payload["mode_class"][0]
        with pytest.raises(InvalidBasisError):
            ModalBasis.from_json(json.dumps(payload))

    def test_load_validates_eigenvalue_order(self, cap_basis50):
        payload = json.loads(cap_basis50.to_json())
        payload["eigenvalues"].reverse()
        with pytest.raises(InvalidBasisError):
            ModalBasis.from_json(json.dumps(payload))


class TestTruncation:
    def test_keeps_leading_columns(self, cap_basis50):
        short = cap_basis50.truncated(10)
        assert short.n_modes == 10
        np.testing.assert_array_equal(short.modes, cap_basis50.modes[:, :10])
        assert short.mode_class == cap_basis50.mode_class[:10]
