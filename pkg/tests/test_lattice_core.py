import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lattice_embed.errors import DiagnosticError, DomainError, InputError
from lattice_embed.lattice_core import (
    Direction,
    Site,
    Wavenumber,
    apply_embedding_operator,
    as_direction,
    candidate_roots,
    dispersion_polynomial,
    helmholtz_residual,
    plane_wave,
    solve_dispersion,
)
from oracles import dispersion_roots_oracle

K = Wavenumber(0.6 + 0.01j)

# frozen outgoing root for beta = 2, k = 0.6 + 0.01i (agrees with the quadratic oracle)
FROZEN_BETA2 = (0.8463164068836189 + 0.5147991378337018j, 0.9616177838703128 + 0.2587693990457512j)

directions = st.tuples(st.integers(-7, 7), st.integers(-7, 7)).filter(lambda p: p != (0, 0))
# Re k = 2 is where both beta = 0 pairs (s = +-1) reach the unit torus; keep clear of it
wavenumbers = st.builds(
    lambda re, im: Wavenumber(complex(re, im)),
    st.one_of(st.floats(0.2, 1.7), st.floats(2.3, 2.6)),
    st.floats(0.005, 0.3),
)


class TestWavenumber:
    def test_accepts_band(self):
        assert Wavenumber(0.6 + 0.01j).k2 == pytest.approx((0.6 + 0.01j) ** 2)

    @pytest.mark.parametrize("value", [0.6, 0.6 - 0.01j, 3.0 + 0.1j, 0.0 + 0.1j, -2.9 + 0.1j])
    def test_rejects_outside(self, value):
        with pytest.raises(DomainError):
            Wavenumber(value)


class TestDirection:
    def test_reduction(self):
        d = Direction(4, -6)
        assert (d.m, d.n) == (2, -3)

    def test_quadrant_kept(self):
        assert Direction(1, 2) != Direction(-1, -2)
        assert Direction(1, 2).beta == Direction(-1, -2).beta

    def test_zero_rejected(self):
        with pytest.raises(DomainError):
            Direction(0, 0)

    def test_beta_infinite(self):
        assert Direction(-3, 0).beta == -math.inf
        assert Direction.from_beta(math.inf) == Direction(1, 0)

    def test_from_beta_upper_half(self):
        d = Direction.from_beta(-0.5)
        assert (d.m, d.n) == (-1, 2)
        assert Direction.from_beta(0.5, lower=True) == Direction(-1, -2)

    @pytest.mark.parametrize("theta,expected", [(0.0, (1, 0)), (math.pi, (-1, 0)), (math.pi / 2, (0, 1)), (-math.pi / 4, (1, -1))])
    def test_from_angle(self, theta, expected):
        assert Direction.from_angle(theta) == Direction(*expected)

    @given(directions)
    def test_gcd_invariant(self, p):
        d = Direction(*p)
        assert math.gcd(abs(d.m), abs(d.n)) == 1
        assert math.atan2(d.n, d.m) == pytest.approx(math.atan2(p[1], p[0]))

    def test_as_direction(self):
        assert as_direction((2, 4)) == Direction(1, 2)
        assert as_direction(0.25) == Direction(1, 4)


class TestSolveDispersion:
    def test_diagonal(self):
        r = solve_dispersion(Direction(1, 1), K)
        a = K.c / 2
        s_ref = min(((a + np.sqrt(a * a - 4)) / 2, (a - np.sqrt(a * a - 4)) / 2), key=abs)
        assert abs(r.s - r.q) < 1e-12
        assert abs(r.s - s_ref) < 1e-12

    def test_normal(self):
        r = solve_dispersion(Direction(0, 1), K)
        assert r.s == 1
        b = 2 - K.k2
        q_ref = min(((b + np.sqrt(b * b - 4)) / 2, (b - np.sqrt(b * b - 4)) / 2), key=abs)
        assert abs(r.q - q_ref) < 1e-12

    def test_beta2_companion_and_quadratic_oracle(self):
        r = solve_dispersion(Direction(2, 1), K)
        roots = np.roots(dispersion_polynomial(2.0, K))
        assert min(abs(roots - r.s)) < 1e-12
        s, q = dispersion_roots_oracle(2, 1, K.value)
        assert abs(r.s - s) < 1e-12 and abs(r.q - q) < 1e-12
        assert abs(r.s - FROZEN_BETA2[0]) < 1e-13 and abs(r.q - FROZEN_BETA2[1]) < 1e-13

    def test_quartic_roots_reciprocal_pairs(self):
        roots = np.roots(dispersion_polynomial(2.0, K))
        for s in roots:
            assert min(abs(roots - 1 / s)) < 1e-10

    @settings(max_examples=60, deadline=None)
    @given(directions, wavenumbers)
    def test_matches_oracle_and_residuals(self, p, k):
        r = solve_dispersion(Direction(*p), k)
        assert r.kind == "outgoing"
        assert r.dispersion_residual(k) <= 1e-12
        assert r.beta_residual() <= 1e-10
        d = Direction(*p)
        s, q = dispersion_roots_oracle(d.m, d.n, k.value)
        assert abs(r.s - s) < 1e-9 and abs(r.q - q) < 1e-9

    @given(directions)
    def test_outgoing_decays_along_ray(self, p):
        d = Direction(*p)
        r = solve_dispersion(d, K)
        assert d.m * math.log(abs(r.s)) + d.n * math.log(abs(r.q)) < 0
        if d.m > 0 and d.n > 0:
            assert abs(r.s) < 1 and abs(r.q) < 1

    @given(directions)
    def test_reciprocal_beta_swaps(self, p):
        d = Direction(*p)
        r, rs = solve_dispersion(d, K), solve_dispersion(d.swapped(), K)
        assert abs(rs.s - r.q) < 1e-10 and abs(rs.q - r.s) < 1e-10

    @pytest.mark.parametrize("p", [(1, 1), (2, 1), (1, 3), (-2, 1), (1, 0)])
    def test_continuation_moves_toward_unit(self, p):
        d = Direction(*p)
        k2 = K.with_imag(K.value.imag / 2)
        r, r2 = solve_dispersion(d, K), solve_dispersion(d, k2)
        dist = lambda z: abs(math.log(abs(z.s))) + abs(math.log(abs(z.q)))  # noqa: E731
        assert dist(r2) < dist(r)
        evanescent = [pq for pq in candidate_roots(d, K) if abs(pq[0] - r.s) > 1e-6 and abs(pq[0] - 1 / r.s) > 1e-6]
        for s, q in evanescent:
            assert abs(math.log(abs(s))) + abs(math.log(abs(q))) > 0.1

    def test_ambiguous_near_band_switch(self):
        with pytest.raises(DiagnosticError):
            solve_dispersion(Direction(0, 1), Wavenumber(2.0 + 0.25j))

    def test_deterministic(self):
        a = solve_dispersion(Direction(3, 2), K)
        b = solve_dispersion(Direction(6, 4), K)
        assert a == b


class TestPlaneWave:
    def test_origin(self):
        r = solve_dispersion(Direction(2, 1), K)
        assert plane_wave(r, 0, 0, -1) == 1 and plane_wave(r, 0, 0, 1) == 1

    def test_unit_step(self):
        r = solve_dispersion(Direction(2, 1), K)
        assert plane_wave(r, 1, 0, -1) == pytest.approx(1 / r.s, rel=1e-15)

    def test_bad_sign(self):
        with pytest.raises(InputError):
            plane_wave(solve_dispersion(Direction(1, 1), K), 0, 0, 2)

    @given(directions, st.integers(-40, 40), st.integers(-40, 40))
    def test_helmholtz(self, p, m, n):
        r = solve_dispersion(Direction(*p), K)
        u = lambda a, b: plane_wave(r, a, b, -1)  # noqa: E731
        assert abs(helmholtz_residual(u, Site(m, n), K)) <= 1e-12 * max(1.0, abs(u(m, n)))


class TestHelmholtzResidual:
    def test_constant(self):
        assert helmholtz_residual(lambda m, n: 1.0, Site(0, 0), K) == pytest.approx(K.k2)

    def test_missing_neighbour(self):
        data = {(0, 0): 1.0, (1, 0): 1.0, (-1, 0): 1.0, (0, 1): 1.0}
        with pytest.raises(InputError):
            helmholtz_residual(lambda m, n: data[(m, n)], Site(0, 0), K)


class TestEmbeddingOperators:
    @given(directions, st.integers(-20, 20), st.integers(-20, 20))
    def test_annihilate_incident(self, p, m, n):
        r = solve_dispersion(Direction(*p), K)
        u = lambda a, b: plane_wave(r, a, b, -1)  # noqa: E731
        scale = abs(u(m, n))
        for order in ("H1", "H2"):
            assert abs(apply_embedding_operator(u, Site(m, n), r.s, order)) <= 1e-14 * 8 * scale

    def test_h2_on_test_wave_gives_factor(self):
        rin = solve_dispersion(Direction(1, 1), K)
        rb = solve_dispersion(Direction(-2, 3), K)
        t = lambda a, b: plane_wave(rb, a, b, -1)  # noqa: E731
        site = Site(3, -4)
        got = apply_embedding_operator(t, site, rin.s, "H2")
        assert got == pytest.approx((rb.f - rin.f) * t(*site), rel=1e-12)

    def test_unknown_order(self):
        with pytest.raises(InputError):
            apply_embedding_operator(lambda m, n: 1.0, Site(0, 0), 0.5, "H3")
