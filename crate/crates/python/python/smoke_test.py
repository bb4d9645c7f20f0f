"""Smoke test for the extremal_spectral extension module."""

import math

import extremal_spectral as es

A = [[0.1, 0.9], [0.2, 0.8], [0.3, 0.7], [0.4, 0.6]]


def main():
    assert es.choose_k_n(400, 5.0) == 15

    truth = es.lfm_angular_measure(A, 1.0)
    assert abs(sum(truth.masses) - 1.0) < 1e-12

    sample = es.simulate_lfm(A, 1.0, 25000, seed=1)
    assert len(sample.x) == 25000 and len(sample.z[0]) == 2

    ext = es.select_extremes(sample.x, n_extremes=400)
    assert len(ext) == 400

    res = es.spectral_cluster(ext.angles, 2, es.choose_k_n(400, 5.0), mode="mutual", seed=1)
    assert abs(sum(res.masses) + res.singleton_mass - 1.0) < 1e-12

    err = max(
        min(math.dist(est, true) for est in res.atoms) for true in truth.atoms
    )
    print(f"atoms {res.atoms}")
    print(f"masses {res.masses} (true {truth.masses})")
    print(f"max center error {err:.4f}")
    assert err < 0.1

    scree = es.screeplot(ext.angles)
    assert scree[0] >= scree[-1]

    try:
        es.choose_k_n(1, 5.0)
    except ValueError:
        pass
    else:
        raise AssertionError("expected ValueError")

    print("ok")


if __name__ == "__main__":
    main()
