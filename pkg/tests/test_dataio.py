"""Dataset files, the portable generator, and run artifacts."""

import json

import numpy as np
import pytest

from mvdec import dataio, metrics, nn, target


def reference_splitmix(seed, count):
    # straight port of the published splitmix64 recurrence using python ints
    mask = (1 << 64) - 1
    x = seed & mask
    out = []
    for _ in range(count):
        x = (x + 0x9E3779B97F4A7C15) & mask
        z = x
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & mask
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & mask
        out.append(z ^ (z >> 31))
    return out


class TestPortableRng:
    @pytest.mark.parametrize("seed", [0, 1, 1234567, 2**63 + 11])
    def test_matches_reference_recurrence(self, seed):
        assert dataio.splitmix64(seed, 6).tolist() == reference_splitmix(seed, 6)

    def test_known_first_output_for_seed_zero(self):
        assert dataio.splitmix64(0, 1)[0] == 0xE220A8397B1DCDAF

    def test_offset_continues_the_stream(self):
        whole = dataio.splitmix64(9, 10)
        tail = dataio.splitmix64(9, 4, offset=6)
        np.testing.assert_array_equal(whole[6:], tail)

    def test_uniforms_in_unit_interval(self):
        u = dataio.PortableRng(3).uniforms(20000)
        assert u.min() >= 0.0 and u.max() < 1.0
        assert abs(u.mean() - 0.5) < 0.01

    def test_normals_moments(self):
        z = dataio.PortableRng(4).normals(100001)
        assert z.shape == (100001,)
        assert abs(z.mean()) < 0.02
        assert abs(z.std() - 1.0) < 0.02

    def test_streams_are_reproducible(self):
        a = dataio.PortableRng(5)
        b = dataio.PortableRng(5)
        np.testing.assert_array_equal(a.normals(7), b.normals(7))
        # consuming state advances the stream
        assert not np.array_equal(a.normals(7), dataio.PortableRng(5).normals(7))

    def test_permutation_is_a_permutation(self):
        perm = dataio.PortableRng(6).permutation(100)
        assert sorted(perm.tolist()) == list(range(100))

    def test_child_seeds_differ(self):
        seeds = {dataio.child_seed(1, tag) for tag in range(20)}
        assert len(seeds) == 20


class TestSyntheticSpec:
    def test_validation(self):
        good = dict(n=10, k=2, dims=(3,), noise_per_view=(0.1,))
        dataio.SyntheticSpec(**good)
        with pytest.raises(ValueError):
            dataio.SyntheticSpec(**{**good, "n": 3})  # n < 2k
        with pytest.raises(ValueError):
            dataio.SyntheticSpec(**{**good, "noise_per_view": (0.1, 0.2)})
        with pytest.raises(ValueError):
            dataio.SyntheticSpec(**{**good, "separation": 0.0})
        with pytest.raises(ValueError):
            dataio.SyntheticSpec(**{**good, "noise_per_view": (-0.1,)})

    def test_preset_lookup(self):
        spec = dataio.preset_spec("noisy-view", seed=3)
        assert spec.n == 1000 and spec.k == 4 and len(spec.dims) == 3
        with pytest.raises(ValueError):
            dataio.preset_spec("nope")


class TestGenerator:
    def test_deterministic(self):
        spec = dataio.SyntheticSpec(n=50, k=3, dims=(4, 6), noise_per_view=(0.1, 0.2), seed=12)
        a = dataio.generate_synthetic(spec)
        b = dataio.generate_synthetic(spec)
        for va, vb in zip(a.views, b.views):
            np.testing.assert_array_equal(va, vb)
        np.testing.assert_array_equal(a.labels, b.labels)
        c = dataio.generate_synthetic(dataio.SyntheticSpec(
            n=50, k=3, dims=(4, 6), noise_per_view=(0.1, 0.2), seed=13))
        assert np.abs(a.views[0] - c.views[0]).max() > 0

    def test_balanced_labels(self):
        spec = dataio.SyntheticSpec(n=103, k=4, dims=(3,), noise_per_view=(0.1,), seed=0)
        counts = np.bincount(dataio.generate_synthetic(spec).labels, minlength=4)
        assert counts.max() - counts.min() <= 1
        assert counts.sum() == 103

    def test_values_in_unit_interval(self):
        ds = dataio.generate_synthetic(dataio.preset_spec("noisy-view", seed=1))
        for view in ds.views:
            assert view.min() >= 0.0 and view.max() <= 1.0

    def test_zero_noise_collapses_to_prototypes(self):
        spec = dataio.SyntheticSpec(n=40, k=4, dims=(5, 3), noise_per_view=(0.0, 0.0), seed=2)
        ds = dataio.generate_synthetic(spec)
        for view in ds.views:
            # every cluster is one exact point, distinct across clusters
            for j in range(4):
                rows = view[ds.labels == j]
                assert np.ptp(rows, axis=0).max() == 0.0
            assert len(np.unique(view, axis=0)) == 4

    def test_noisy_view_preset_contrast(self):
        # the third view carries 12x the noise of the first two; raw k-means
        # should read the clean views perfectly and struggle on the noisy one
        ds = dataio.generate_synthetic(dataio.preset_spec("noisy-view", seed=7))
        accs = [
            metrics.acc(target.kmeans(view, 4, seed=0).labels, ds.labels)
            for view in ds.views
        ]
        assert accs[0] >= 0.99 and accs[1] >= 0.99
        assert accs[2] <= 0.90


class TestDatasetRoundTrip:
    @pytest.mark.parametrize("fmt", ["binary", "csv"])
    def test_save_load_bitwise(self, tmp_path, fmt):
        spec = dataio.SyntheticSpec(n=30, k=2, dims=(4, 2), noise_per_view=(0.1, 0.3), seed=5)
        ds = dataio.generate_synthetic(spec)
        dataio.save_dataset(ds, tmp_path / "d", fmt=fmt)
        loaded = dataio.load_dataset(tmp_path / "d")
        assert loaded.name == ds.name
        for va, vb in zip(ds.views, loaded.views):
            np.testing.assert_array_equal(va, vb)
        np.testing.assert_array_equal(ds.labels, loaded.labels)

    def test_binary_header(self, tmp_path):
        mat = np.random.default_rng(0).random((3, 2))
        path = tmp_path / "v.bin"
        dataio.write_view_binary(path, mat)
        raw = path.read_bytes()
        assert raw[:4] == b"MVDS"
        assert len(raw) == 16 + 3 * 2 * 8
        np.testing.assert_array_equal(dataio.read_view_binary(path), mat)

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "v.bin"
        path.write_bytes(b"XXXX" + bytes(12) + bytes(8))
        with pytest.raises(dataio.DatasetError):
            dataio.read_view_binary(path)

    def test_checksum_corruption_detected(self, tmp_path):
        ds = dataio.generate_synthetic(
            dataio.SyntheticSpec(n=10, k=2, dims=(3,), noise_per_view=(0.1,), seed=1))
        dataio.save_dataset(ds, tmp_path / "d")
        victim = tmp_path / "d" / "view0.bin"
        raw = bytearray(victim.read_bytes())
        raw[-1] ^= 0xFF
        victim.write_bytes(bytes(raw))
        with pytest.raises(dataio.ChecksumError):
            dataio.load_dataset(tmp_path / "d")

    def test_missing_view_file(self, tmp_path):
        ds = dataio.generate_synthetic(
            dataio.SyntheticSpec(n=10, k=2, dims=(3,), noise_per_view=(0.1,), seed=1))
        dataio.save_dataset(ds, tmp_path / "d")
        (tmp_path / "d" / "view0.bin").unlink()
        with pytest.raises(dataio.MissingFileError):
            dataio.load_dataset(tmp_path / "d")

    def test_manifest_shape_mismatch(self, tmp_path):
        ds = dataio.generate_synthetic(
            dataio.SyntheticSpec(n=10, k=2, dims=(3,), noise_per_view=(0.1,), seed=1))
        dataio.save_dataset(ds, tmp_path / "d")
        manifest_path = tmp_path / "d" / "manifest.json"
        manifest = json.loads(manifest_path.read_text())
        manifest["n"] = 11
        manifest_path.write_text(json.dumps(manifest))
        with pytest.raises(dataio.DimensionMismatchError):
            dataio.load_dataset(tmp_path / "d")

    def test_scale_flag_rescales_on_load(self, tmp_path):
        d = tmp_path / "d"
        d.mkdir()
        mat = np.array([[2.0], [4.0], [6.0]])
        dataio.write_view_binary(d / "view0.bin", mat)
        manifest = {
            "name": "raw", "n": 3,
            "views": [{"file": "view0.bin", "dims": 1, "format": "binary"}],
            "scale": True, "checksums": {},
        }
        (d / "manifest.json").write_text(json.dumps(manifest))
        loaded = dataio.load_dataset(d)
        np.testing.assert_allclose(loaded.views[0][:, 0], [0.0, 0.5, 1.0])
        # without the flag the same file is out of range
        manifest["scale"] = False
        (d / "manifest.json").write_text(json.dumps(manifest))
        with pytest.raises(dataio.FeatureRangeError):
            dataio.load_dataset(d)


class TestModelsAndArtifacts:
    def test_model_round_trip(self, tmp_path):
        model = nn.build_autoencoder(6, embed_dim=3, hidden_dims=(5,), seed=4)
        dataio.save_autoencoder(model, tmp_path / "m.npz")
        loaded = dataio.load_autoencoder(tmp_path / "m.npz")
        x = np.random.default_rng(0).random((4, 6))
        np.testing.assert_array_equal(nn.encode(model, x), nn.encode(loaded, x))
        np.testing.assert_array_equal(nn.decode(model, nn.encode(model, x)),
                                      nn.decode(loaded, nn.encode(loaded, x)))

    def test_save_load_models_dir(self, tmp_path):
        models = [nn.build_autoencoder(d, embed_dim=2, hidden_dims=(4,), seed=i)
                  for i, d in enumerate((3, 5))]
        dataio.save_models(models, tmp_path / "models")
        loaded = dataio.load_models(tmp_path / "models")
        assert len(loaded) == 2
        assert loaded[0].input_dim == 3 and loaded[1].input_dim == 5

    def test_export_embeddings_headers_and_widths(self, tmp_path):
        ds = dataio.generate_synthetic(
            dataio.SyntheticSpec(n=12, k=2, dims=(4, 3), noise_per_view=(0.1, 0.1), seed=2))
        models = [nn.build_autoencoder(d, embed_dim=2, hidden_dims=(4,), seed=v)
                  for v, d in enumerate(ds.dims)]
        written = dataio.export_embeddings(models, ds, tmp_path / "out")
        assert len(written) == 3
        header = (tmp_path / "out" / "embeddings_view0.csv").read_text().splitlines()[0]
        assert header.split(",") == ["z0", "z1"]
        body = np.loadtxt(tmp_path / "out" / "embeddings_view0.csv", delimiter=",", skiprows=1)
        np.testing.assert_array_equal(body, nn.encode(models[0], ds.views[0]))
        global_rows = (tmp_path / "out" / "embeddings_global.csv").read_text().splitlines()
        assert len(global_rows[0].split(",")) == 4  # 2 embedding dims per view
        assert len(global_rows) == 1 + 12

    def test_report_round_trip_exact_floats(self, tmp_path):
        report = {"a": 0.1 + 0.2, "nested": {"xs": [1e-17, 3.141592653589793]}, "flag": None}
        path = dataio.write_report(report, tmp_path / "r" / "report.json")
        assert dataio.read_report(path) == report


class TestMultiViewDataset:
    def test_rejects_out_of_range(self):
        with pytest.raises(dataio.FeatureRangeError):
            dataio.MultiViewDataset([np.array([[1.5]])])

    def test_rejects_row_mismatch(self):
        with pytest.raises(dataio.DimensionMismatchError):
            dataio.MultiViewDataset([np.zeros((2, 1)), np.zeros((3, 1))])

    def test_rejects_bad_labels(self):
        with pytest.raises(dataio.DimensionMismatchError):
            dataio.MultiViewDataset([np.zeros((2, 1))], labels=np.array([0]))
        with pytest.raises(dataio.DatasetError):
            dataio.MultiViewDataset([np.zeros((2, 1))], labels=np.array([-1, 0]))

    def test_properties(self):
        ds = dataio.MultiViewDataset([np.zeros((4, 2)), np.zeros((4, 5))], labels=np.zeros(4))
        assert (ds.n, ds.v, ds.dims) == (4, 2, (2, 5))
