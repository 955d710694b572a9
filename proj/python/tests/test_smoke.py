import math

import numpy as np
import pytest

import gcnseg


def test_grid_laplacian_annihilates_constants():
    g = gcnseg.grid_graph(3, 4)
    assert g.num_nodes == 12
    assert g.num_edges == 17
    lap = gcnseg.laplacian(g)
    np.testing.assert_allclose(lap @ np.ones(12), 0.0, atol=1e-15)
    np.testing.assert_array_equal(np.diag(lap), gcnseg.degree(g))


def test_four_cycle_spectrum():
    g = gcnseg.Graph(4, [(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (3, 0, 1.0)])
    lam, phi = gcnseg.eig_sym(gcnseg.laplacian(g))
    np.testing.assert_allclose(lam, [0, 2, 2, 4], atol=1e-12)
    np.testing.assert_allclose(phi.T @ phi, np.eye(4), atol=1e-12)
    assert gcnseg.lambda_max(g) == pytest.approx(4.0, rel=1e-7)


def test_renormalized_adjacency_of_triangle():
    g = gcnseg.Graph(3, [(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)])
    np.testing.assert_allclose(gcnseg.renormalized_adjacency(g), np.full((3, 3), 1 / 3), atol=1e-15)


def test_cheb_apply_matches_numpy_spectral_filter():
    g = gcnseg.grid_graph(4, 5, connectivity=8)
    rng = np.random.default_rng(3)
    f = rng.standard_normal((20, 2))
    coeffs = [0.5, -0.25, 0.125, 0.3]
    lam_max = gcnseg.lambda_max(g)
    lam, phi = np.linalg.eigh(gcnseg.laplacian(g))
    response = np.polynomial.chebyshev.chebval(2 * lam / lam_max - 1, coeffs)
    expected = phi @ np.diag(response) @ phi.T @ f
    got = gcnseg.cheb_apply(g, coeffs, f, lam_max=lam_max)
    np.testing.assert_allclose(got, expected, atol=1e-10)
    assert gcnseg.cheb_apply(g, coeffs, f[:, 0]).shape == (20,)


def test_metrics_hand_counted():
    truth = np.zeros(100, dtype=np.uint8)
    pred = np.zeros(100, dtype=np.uint8)
    truth[:8] = 1
    pred[:6] = 1
    pred[8:10] = 1
    m = gcnseg.metrics(pred, truth)
    assert (m["tp"], m["fp"], m["fn"], m["tn"]) == (6, 2, 2, 90)
    assert m["oa"] == pytest.approx(0.96)
    assert m["f1"] == pytest.approx(0.75)
    assert m["iou"] == pytest.approx(0.6)


def test_nll_of_uniform_prediction():
    log_probs = np.full((16, 2), math.log(0.5))
    assert gcnseg.nll_loss(log_probs, np.zeros(16, dtype=np.uint8)) == pytest.approx(math.log(2))


def test_raster_round_trip_and_slicing(tmp_path):
    rng = np.random.default_rng(0)
    image = rng.integers(0, 256, size=(100, 90, 3), dtype=np.uint8)
    mask = (rng.random((100, 90)) > 0.5).astype(np.uint8)
    path = tmp_path / "tile.ppm"
    gcnseg.save_raster(image, path)
    np.testing.assert_array_equal(gcnseg.load_raster(path), image)

    images, masks = gcnseg.slice_patches(image, mask, size=64, stride=19)
    assert images.shape == (gcnseg.patch_count(100, 90, 64, 19), 3, 64, 64)
    np.testing.assert_array_equal(images[0], image[:64, :64].transpose(2, 0, 1) / 255.0)
    np.testing.assert_array_equal(masks[-1], mask[19:83, 19:83])
    assert gcnseg.patch_count(256, 256) == 121


def test_tiny_model_trains_and_round_trips():
    images, masks = gcnseg.synthetic_samples(count=4)
    images = images[:, :, :8, :8].copy()
    masks = masks[:, :8, :8].copy()
    model = gcnseg.init_model(seed=1, conv_channels=[4], gcn_dims=[4, 2], patch_size=8)
    probs = model.forward(images[0])
    assert probs.shape == (64, 2)
    np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-12)

    trained, losses = gcnseg.train(model, images, masks, lr=0.05, epochs=3, batch_size=2, seed=2)
    assert len(losses) == 3
    again, losses_again = gcnseg.train(model, images, masks, lr=0.05, epochs=3, batch_size=2, seed=2)
    assert losses == losses_again
    assert trained.to_bytes() == again.to_bytes()

    restored = gcnseg.Model.from_bytes(trained.to_bytes())
    np.testing.assert_array_equal(restored.predict(images[1]), trained.predict(images[1]))
    assert trained.predict(images[1]).shape == (8, 8)
    m = trained.evaluate(images, masks)
    assert m["tp"] + m["fp"] + m["fn"] + m["tn"] == 4 * 64


def test_errors_surface_as_gcnseg_error():
    with pytest.raises(gcnseg.Error, match="invalid"):
        gcnseg.grid_graph(2, 2, connectivity=6)
    with pytest.raises(gcnseg.Error):
        gcnseg.lambda_max(gcnseg.Graph(3, []))


def test_verify_passes():
    results = gcnseg.verify(trials=3)
    assert results
    assert all(passed for _, passed, _ in results), results
