"""Smoke test for the fqhe_torus extension module.

Build and install first:  pip install ./crates/python  (or `maturin develop`)
"""

import cmath
import math

import fqhe_torus as fq


def close(x, y, tol):
    return abs(x - y) <= tol * max(1.0, abs(y))


def main():
    tau = 1j

    # Odd theta vanishes at the origin and is quasi-periodic under z -> z+1.
    assert abs(fq.theta1d(0.5, 0.5, 0j, tau)) < 1e-13
    z = 0.3 + 0.2j
    v = fq.theta1d(0.5, 0.5, z, tau)
    assert close(fq.theta1d(0.5, 0.5, z + 1, tau), cmath.exp(1j * math.pi) * v, 1e-12)

    # A diagonal period matrix factorises into one-variable thetas.
    prod = fq.theta1d(0.0, 0.0, 0.1j, 2 * tau) * fq.theta1d(0.0, 0.0, 0.2, 3 * tau)
    assert close(fq.theta_g([0, 0], [0, 0], [0.1j, 0.2], tau, [[2, 0], [0, 3]]), prod, 1e-12)

    # One-particle Gram matrix against its closed form.
    g = fq.one_particle_gram(3, tau, xi_a=0.2, xi_b=0.1, grid=64)
    diag = fq.one_particle_norm_sq(3, 1.0, 0.2)
    assert close(diag, math.sqrt(1 / 6) * math.exp(2 * math.pi * 0.04 / 3), 1e-15)
    for p in range(3):
        for q in range(3):
            want = diag if p == q else 0.0
            assert abs(g["matrix"][p][q] - want) < 1e-9, (p, q, g["matrix"][p][q])

    # Wen datum arithmetic and rejection.
    w = fq.validate_wen([[2, 1], [1, 2]], [1, 1])
    assert (w.d, w.delta, w.cyclic, w.n_delta_over_d) == (3, 3, True, 2)
    assert len(w.pi()) == 3
    assert fq.WenDatum.from_text(w.to_text()).d == 3
    try:
        fq.validate_wen([[2, 0], [0, 3]], [1, 1])
    except ValueError as e:
        assert "even and odd" in str(e)
    else:
        raise AssertionError("mixed parity accepted")

    # Centre-of-mass Gram matrix is scalar and equals kappa.
    kap, _alt = fq.kappa([[2, 1], [1, 2]], [0.0, 0.0], 1.0)
    c = fq.center_mass_gram([[2, 1], [1, 2]], tau, grid=24)
    assert c["scalar_residual"] < 1e-8
    assert close(c["diagonal_mean"], kap, 1e-8)

    # Multilayer and Haldane-Rezayi states are orthogonal.
    k = fq.kvw_gram(w, tau, xi_a=0.1, grid=10)
    assert k["scalar_residual"] < 1e-8
    h = fq.hr_gram(2, 2, tau, backend="qmc", samples=4096, seed=1, replicates=4)
    assert len(h["matrix"]) == 2
    try:
        fq.hr_gram(2, 2, tau, backend="qmc")
    except ValueError:
        pass
    else:
        raise AssertionError("qmc without a seed accepted")

    # Degree of the multilayer bundle.
    r = fq.curvature("multilayer", tau, n=[1, 1], big_k=[[2, 1], [1, 2]])
    assert abs(r["degree"] + 2) < 1e-6, r
    try:
        fq.curvature("one-particle", tau, k=1, na=8)
    except fq.NumericalError:
        pass
    else:
        raise AssertionError("coarse grid accepted")

    assert fq.run_cli(["wen-validate", "--K", "2 1; 1 2", "--n", "1 1", "--out", "/dev/null"]) == 0
    assert fq.run_cli(["wen-validate", "--K", "2 0; 0 3", "--n", "1 1"]) == 2

    print("smoke test OK")


if __name__ == "__main__":
    main()
