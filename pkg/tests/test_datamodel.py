import json
import math
import struct

import numpy as np
import pytest
from hypothesis import given, settings
import hypothesis.strategies as st

from eegdecode.datamodel import (
    CategoryTemplate, EegDataset, LabelRangeError, MagicError, MaskSpec,
    SynthConfig, TruncatedError, VersionError, apply_mask, dataset_read,
    dataset_write, default_occipital_mask, default_synth_config, mask_read,
    mask_write, synth_generate,
)
from conftest import matched_filter_predict, random_dataset


class TestContainerRoundTrip:
    def test_minimal_single_trial(self, tmp_path):
        ds = random_dataset(np.random.default_rng(0), n_trials=1)
        path = tmp_path / "one.eegd"
        dataset_write(ds, path)
        back = dataset_read(path)
        assert back.trials.shape == (1, 124, 32)
        np.testing.assert_array_equal(back.trials, ds.trials)

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 2 ** 31), n_trials=st.integers(1, 8),
           n_channels=st.integers(1, 8), n_samples=st.integers(1, 8))
    def test_roundtrip_is_bitwise_identity(self, tmp_path_factory, seed, n_trials,
                                           n_channels, n_samples):
        ds = random_dataset(np.random.default_rng(seed), n_trials, n_channels, n_samples)
        path = tmp_path_factory.mktemp("rt") / "ds.eegd"
        dataset_write(ds, path)
        back = dataset_read(path)
        assert back.trials.tobytes() == ds.trials.tobytes()
        np.testing.assert_array_equal(back.exemplar_labels, ds.exemplar_labels)
        assert back.channel_names == ds.channel_names
        assert back.subject_id == ds.subject_id

    def test_full_subject_header_reports_5184(self, tmp_path):
        labels = np.repeat(np.arange(72), 72)
        ds = EegDataset(np.zeros((5184, 2, 3), np.float32), labels,
                        ["a", "b"], 62.5, "full")
        path = tmp_path / "full.eegd"
        dataset_write(ds, path)
        blob = path.read_bytes()
        hlen = struct.unpack("<I", blob[6:10])[0]
        header = json.loads(blob[10:10 + hlen])
        assert header["n_trials"] == 5184


class TestContainerErrors:
    def _valid_file(self, tmp_path):
        ds = random_dataset(np.random.default_rng(1), n_trials=2, n_channels=3, n_samples=4)
        path = tmp_path / "v.eegd"
        dataset_write(ds, path)
        return path

    def test_bad_magic(self, tmp_path):
        path = self._valid_file(tmp_path)
        blob = bytearray(path.read_bytes())
        blob[:4] = b"NOPE"
        path.write_bytes(bytes(blob))
        with pytest.raises(MagicError):
            dataset_read(path)

    def test_version_mismatch(self, tmp_path):
        path = self._valid_file(tmp_path)
        blob = bytearray(path.read_bytes())
        blob[4:6] = struct.pack("<H", 9)
        path.write_bytes(bytes(blob))
        with pytest.raises(VersionError):
            dataset_read(path)

    def test_truncated_payload(self, tmp_path):
        path = self._valid_file(tmp_path)
        blob = path.read_bytes()
        path.write_bytes(blob[:-5])
        with pytest.raises(TruncatedError):
            dataset_read(path)

    def test_label_out_of_range(self, tmp_path):
        path = self._valid_file(tmp_path)
        blob = bytearray(path.read_bytes())
        hlen = struct.unpack("<I", blob[6:10])[0]
        blob[10 + hlen:12 + hlen] = struct.pack("<H", 72)
        path.write_bytes(bytes(blob))
        with pytest.raises(LabelRangeError):
            dataset_read(path)

    def test_write_refuses_invalid(self, tmp_path):
        ds = random_dataset(np.random.default_rng(2), n_trials=2)
        ds.trials[0, 0, 0] = np.nan
        with pytest.raises(ValueError):
            dataset_write(ds, tmp_path / "bad.eegd")


class TestMask:
    def test_all_channels_is_identity(self):
        rng = np.random.default_rng(3)
        x = rng.standard_normal((2, 124, 32)).astype(np.float32)
        full = MaskSpec("all", tuple(range(124)))
        np.testing.assert_array_equal(apply_mask(x, full), x)

    def test_single_channel(self):
        x = np.ones((124, 32), np.float32)
        out = apply_mask(x, MaskSpec("one", (0,)))
        np.testing.assert_array_equal(out[0], 1.0)
        np.testing.assert_array_equal(out[1:], 0.0)

    def test_invariant_to_nonretained_perturbation(self):
        rng = np.random.default_rng(4)
        mask = MaskSpec("m", (3, 5, 7))
        x = rng.standard_normal((4, 124, 32)).astype(np.float32)
        y = x.copy()
        keep = np.zeros(124, bool)
        keep[list(mask.indices)] = True
        y[:, ~keep, :] = rng.standard_normal(y[:, ~keep, :].shape)
        assert apply_mask(x, mask).tobytes() == apply_mask(y, mask).tobytes()

    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(0, 10_000),
           idx=st.sets(st.integers(0, 123), min_size=1, max_size=20))
    def test_idempotent_and_scale_commutes(self, seed, idx):
        mask = MaskSpec("h", tuple(sorted(idx)))
        x = np.random.default_rng(seed).standard_normal((2, 124, 8)).astype(np.float32)
        once = apply_mask(x, mask)
        np.testing.assert_array_equal(apply_mask(once, mask), once)
        np.testing.assert_allclose(apply_mask(2.5 * x, mask), 2.5 * once, rtol=1e-6)

    @pytest.mark.parametrize("indices", [(), (0, 0), (-1,), (124,)])
    def test_invalid_masks_rejected(self, indices):
        with pytest.raises(ValueError):
            MaskSpec("bad", indices)

    def test_default_mask_properties(self):
        mask = default_occipital_mask()
        assert len(mask.indices) == len(set(mask.indices))
        assert all(0 <= i < 124 for i in mask.indices)
        assert len(mask.indices) == 24  # documented default size
        assert default_occipital_mask().indices == mask.indices

    def test_mask_file_override_is_verbatim(self, tmp_path):
        custom = MaskSpec("custom", (1, 2, 3))
        path = tmp_path / "m.json"
        mask_write(custom, path)
        assert mask_read(path).indices == (1, 2, 3)
        assert mask_read(path).name == "custom"


class TestSynth:
    def test_fixed_seed_is_bitwise_reproducible(self):
        cfg = default_synth_config(trials_per_exemplar=2, seed=9)
        a = synth_generate(cfg)
        b = synth_generate(cfg)
        assert a.trials.tobytes() == b.trials.tobytes()
        np.testing.assert_array_equal(a.exemplar_labels, b.exemplar_labels)

    def test_label_marginals_uniform(self):
        ds = synth_generate(default_synth_config(trials_per_exemplar=2, seed=0))
        counts = np.bincount(ds.category_labels, minlength=6)
        np.testing.assert_array_equal(counts, 2 * 12)
        np.testing.assert_array_equal(np.bincount(ds.exemplar_labels, minlength=72), 2)

    def test_infinite_snr_gives_identical_trials_per_exemplar(self):
        cfg = default_synth_config(trials_per_exemplar=3, snr=math.inf, seed=5)
        ds = synth_generate(cfg)
        for e in (0, 35, 71):
            rows = ds.trials[ds.exemplar_labels == e]
            assert (rows == rows[0]).all()

    def test_matched_filter_on_disjoint_templates(self):
        # category templates with disjoint focus channels and latencies
        templates = tuple(
            CategoryTemplate(latency=4 + 3 * c, duration=8,
                             channels=tuple(range(20 * c, 20 * c + 12)))
            for c in range(6))
        cfg = SynthConfig(trials_per_exemplar=3, snr=10.0, templates=templates, seed=21)
        ds = synth_generate(cfg)
        pred = matched_filter_predict(ds, cfg)
        assert (pred // 12 == ds.category_labels).mean() >= 0.99

    def test_invalid_configs_rejected(self):
        with pytest.raises(ValueError):
            default_synth_config(trials_per_exemplar=0)
        with pytest.raises(ValueError):
            default_synth_config(snr=-1.0)
        with pytest.raises(ValueError):
            SynthConfig(trials_per_exemplar=1, snr=1.0,
                        templates=tuple(CategoryTemplate(28, 8, (0,)) for _ in range(6)))

    def test_config_json_roundtrip(self):
        cfg = default_synth_config(trials_per_exemplar=4, snr=3.5, seed=11,
                                   off_focus_snr=0.5)
        back = SynthConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
        assert back == cfg

    def test_category_consistency_invariant(self):
        ds = synth_generate(default_synth_config(trials_per_exemplar=1))
        np.testing.assert_array_equal(ds.category_labels, ds.exemplar_labels // 12)
