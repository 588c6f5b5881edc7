import warnings

import numpy as np
import pytest
from numpy.testing import assert_array_equal

from colorvit import data, pseudocolor, store
from helpers import CLASSES, make_image_corpus as make_corpus


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    return make_corpus(tmp_path_factory.mktemp("corpus"))


class TestScanCorpus:
    def test_forty_images_four_classes(self, corpus):
        m = data.scan_corpus(corpus)
        assert len(m) == 40
        assert m.class_names == CLASSES
        assert sorted(set(m.labels)) == [0, 1, 2, 3]
        assert m.class_counts() == {name: 10 for name in CLASSES}

    def test_labels_follow_alphabetical_order(self, tmp_path):
        # created out of order on purpose; labels must track sorted names
        make_corpus(tmp_path, classes=("whirl", "axon", "moss", "kelp"), per_class=1)
        m = data.scan_corpus(tmp_path)
        assert m.class_names == ("axon", "kelp", "moss", "whirl")
        for rel, label in zip(m.paths, m.labels):
            assert rel.startswith(m.class_names[label] + "/")

    def test_paths_sorted(self, corpus):
        m = data.scan_corpus(corpus)
        assert list(m.paths) == sorted(m.paths)

    def test_missing_expected_class_named(self, corpus):
        with pytest.raises(ValueError, match="notumor"):
            data.scan_corpus(corpus, expected_classes=CLASSES + ("notumor",))

    def test_unexpected_class_named(self, corpus):
        with pytest.raises(ValueError, match="pituitary"):
            data.scan_corpus(corpus, expected_classes=CLASSES[:3])

    def test_empty_class_warns_and_records(self, tmp_path):
        make_corpus(tmp_path, classes=("full",), per_class=2)
        (tmp_path / "hollow").mkdir()
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            m = data.scan_corpus(tmp_path)
        assert any("hollow" in str(w.message) for w in caught)
        assert any("hollow" in msg for msg in m.warnings)
        assert m.class_names == ("full", "hollow")

    def test_no_class_directories(self, tmp_path):
        with pytest.raises(ValueError, match="no class directories"):
            data.scan_corpus(tmp_path)

    def test_missing_root(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            data.scan_corpus(tmp_path / "absent")

    def test_non_image_files_ignored(self, tmp_path):
        make_corpus(tmp_path, classes=("one",), per_class=3)
        (tmp_path / "one" / "notes.txt").write_text("not an image")
        assert len(data.scan_corpus(tmp_path)) == 3


class TestManifestPersistence:
    def test_round_trip(self, corpus, tmp_path):
        m = data.scan_corpus(corpus)
        path = tmp_path / "manifest.tsv"
        data.save_manifest(m, path)
        loaded = data.load_manifest(path, m.root)
        assert loaded.class_names == m.class_names
        assert loaded.paths == m.paths
        assert loaded.labels == m.labels

    def test_line_per_example_with_class_name(self, corpus, tmp_path):
        m = data.scan_corpus(corpus)
        path = tmp_path / "manifest.tsv"
        data.save_manifest(m, path)
        rows = [ln for ln in path.read_text().splitlines() if not ln.startswith("#")]
        assert len(rows) == 40
        rel, label, cls = rows[0].split("\t")
        assert cls == m.class_names[int(label)]
        assert rel == m.paths[0]

    def test_warnings_survive_round_trip(self, tmp_path):
        make_corpus(tmp_path / "c", classes=("full",), per_class=1)
        (tmp_path / "c" / "hollow").mkdir()
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            m = data.scan_corpus(tmp_path / "c")
        data.save_manifest(m, tmp_path / "m.tsv")
        loaded = data.load_manifest(tmp_path / "m.tsv", m.root)
        assert any("hollow" in msg for msg in loaded.warnings)

    def test_corrupt_label_rejected(self, corpus, tmp_path):
        m = data.scan_corpus(corpus)
        path = tmp_path / "manifest.tsv"
        data.save_manifest(m, path)
        text = path.read_text().replace("\t0\tglioma", "\t9\tglioma", 1)
        path.write_text(text)
        with pytest.raises(ValueError):
            data.load_manifest(path, m.root)


class TestSplits:
    def test_partition_is_exact(self):
        labels = np.repeat([0, 1, 2, 3], 25)
        kept, held = data.stratified_split_indices(labels, 4, 0.2, seed=1)
        assert sorted(kept + held) == list(range(100))
        assert set(kept).isdisjoint(held)

    def test_per_class_fraction(self):
        labels = np.repeat([0, 1, 2, 3], 25)
        _, held = data.stratified_split_indices(labels, 4, 0.2, seed=1)
        held_labels = labels[held]
        for c in range(4):
            assert (held_labels == c).sum() == 5

    def test_ceil_and_keep_one_floor(self):
        labels = np.array([0, 0, 0, 1])
        kept, held = data.stratified_split_indices(labels, 2, 0.5, seed=0)
        # class 1 has one member; it must stay kept even at fraction 0.5
        assert 3 in kept
        assert (labels[held] == 0).sum() == 2

    def test_seed_determinism(self):
        labels = np.repeat([0, 1], 20)
        a = data.stratified_split_indices(labels, 2, 0.25, seed=7)
        b = data.stratified_split_indices(labels, 2, 0.25, seed=7)
        c = data.stratified_split_indices(labels, 2, 0.25, seed=8)
        assert a == b
        assert a != c

    def test_fraction_domain(self):
        for bad in (0.0, 1.0, -0.1, 1.5):
            with pytest.raises(ValueError):
                data.stratified_split_indices(np.zeros(4, dtype=int), 1, bad, seed=0)

    def test_split_validation_manifests(self, corpus):
        m = data.scan_corpus(corpus)
        train, val = data.split_validation(m, 0.2, seed=3)
        assert train.class_names == val.class_names == m.class_names
        assert len(train) + len(val) == len(m)
        assert set(train.paths).isdisjoint(val.paths)
        assert val.class_counts() == {name: 2 for name in CLASSES}


class TestBatches:
    def test_forty_over_thirty_two(self):
        sizes = [len(b) for b in data.batches(40, 32)]
        assert sizes == [32, 8]

    def test_unshuffled_is_identity(self):
        flat = np.concatenate(list(data.batches(10, 3)))
        assert_array_equal(flat, np.arange(10))

    def test_epoch_covers_every_index_once(self):
        rng = data.derive_epoch_seed(0, 5)
        flat = np.concatenate(list(data.batches(23, 4, rng)))
        assert sorted(flat.tolist()) == list(range(23))

    def test_same_seed_same_order(self):
        a = np.concatenate(list(data.batches(50, 8, data.derive_epoch_seed(9, 2))))
        b = np.concatenate(list(data.batches(50, 8, data.derive_epoch_seed(9, 2))))
        assert_array_equal(a, b)

    def test_different_epochs_differ(self):
        a = np.concatenate(list(data.batches(50, 8, data.derive_epoch_seed(9, 2))))
        b = np.concatenate(list(data.batches(50, 8, data.derive_epoch_seed(9, 3))))
        assert not np.array_equal(a, b)

    def test_empty_dataset_rejected(self):
        with pytest.raises(ValueError):
            list(data.batches(0, 4))

    def test_bad_batch_size_rejected(self):
        with pytest.raises(ValueError):
            list(data.batches(10, 0))


class TestPreprocessLoader:
    def test_example_equals_direct_pipeline(self, corpus):
        m = data.scan_corpus(corpus)
        loader = data.PreprocessLoader(m, image_size=16)
        gray = pseudocolor.load_grayscale(corpus / m.paths[5])
        want = pseudocolor.preprocess(gray, size=16)
        assert_array_equal(loader.example(5), want)

    def test_no_augmentation_across_epochs(self, corpus):
        # the same index must produce bit-identical pixels every time
        m = data.scan_corpus(corpus)
        loader = data.PreprocessLoader(m, image_size=16)
        first = loader.example(3).copy()
        for _ in range(3):
            assert_array_equal(loader.example(3), first)

    def test_gather_shapes_and_dtypes(self, corpus):
        m = data.scan_corpus(corpus)
        loader = data.PreprocessLoader(m, image_size=16)
        images, labels = loader.gather([0, 11, 22, 33])
        assert images.shape == (4, 3, 16, 16)
        assert images.dtype == np.float32
        assert labels.dtype == np.int64
        assert_array_equal(labels, [0, 1, 2, 3])

    def test_len_and_class_names(self, corpus):
        loader = data.PreprocessLoader(data.scan_corpus(corpus), image_size=16)
        assert len(loader) == 40
        assert loader.class_names == CLASSES


@pytest.fixture(scope="module")
def archive(tmp_path_factory):
    root = make_corpus(tmp_path_factory.mktemp("arc_corpus"), per_class=3)
    loader = data.PreprocessLoader(data.scan_corpus(root), image_size=16)
    path = tmp_path_factory.mktemp("arc") / "train.cvt"
    data.write_archive(loader, path)
    return loader, path


class TestArchive:
    def test_one_tensor_per_image(self, archive):
        loader, path = archive
        box = store.read_container(path)
        assert len(box.tensor_names()) == len(loader)
        assert set(box.tensor_names()) == set(loader.manifest.paths)

    def test_round_trip_bit_exact(self, archive):
        loader, path = archive
        arc = data.ArchiveLoader(path)
        for rel in loader.manifest.paths:
            i_src = loader.manifest.paths.index(rel)
            i_arc = arc.paths.index(rel)
            assert_array_equal(arc.example(i_arc), loader.example(i_src))

    def test_labels_and_metadata(self, archive):
        loader, path = archive
        arc = data.ArchiveLoader(path)
        assert arc.class_names == CLASSES
        assert arc.image_size == 16
        assert arc.colormap == "jet"
        for rel, label in zip(arc.paths, arc.labels):
            assert rel.startswith(CLASSES[label] + "/")

    def test_gather_matches_source(self, archive):
        loader, path = archive
        arc = data.ArchiveLoader(path)
        images, labels = arc.gather(np.arange(len(arc)))
        src_images, src_labels = loader.gather(
            [loader.manifest.paths.index(rel) for rel in arc.paths]
        )
        assert_array_equal(images, src_images)
        assert_array_equal(labels, src_labels)

    def test_kind_checked(self, tmp_path):
        path = tmp_path / "not_archive.cvt"
        store.write_container(
            path, {"x": np.zeros(2, dtype=np.float32)}, kind="checkpoint"
        )
        with pytest.raises(store.StoreError, match="archive"):
            data.ArchiveLoader(path)


class TestSubsetLoader:
    def test_remaps_indices(self, corpus):
        base = data.PreprocessLoader(data.scan_corpus(corpus), image_size=16)
        sub = data.SubsetLoader(base, [30, 5, 12])
        assert len(sub) == 3
        assert_array_equal(sub.labels, base.labels[[30, 5, 12]])
        assert_array_equal(sub.example(1), base.example(5))
        images, labels = sub.gather([2, 0])
        base_images, base_labels = base.gather([12, 30])
        assert_array_equal(images, base_images)
        assert_array_equal(labels, base_labels)
