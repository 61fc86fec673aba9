"""Tests for the flat key = value configuration layer."""

import pytest

from scorefes.config import CONFIG_ENTRIES, describe_config, resolve_config, write_snapshot
from scorefes.errors import ConfigError


class TestResolve:
    def test_defaults_parse_cleanly(self):
        cfg = resolve_config()
        assert cfg["bins"] == 64
        assert cfg["hidden_sizes"] == (128, 128, 128)
        assert cfg["kbt_h"] == (3.0, 6.0, 9.0)
        assert cfg["estimator"] == "sbdm"

    def test_file_then_flags_precedence(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("bins = 32\nseed = 7\n")
        cfg = resolve_config(str(path), {"seed": "9"})
        assert cfg["bins"] == 32
        assert cfg["seed"] == 9

    def test_sections_group_but_do_not_namespace(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("[training]\nn_epochs = 5\n\n[output]\noutput_dir = here\n")
        cfg = resolve_config(str(path))
        assert cfg["n_epochs"] == 5
        assert cfg["output_dir"] == "here"

    def test_comments_and_inline_comments(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("# full line\n; also a comment\nbins = 16  # trailing\n")
        assert resolve_config(str(path))["bins"] == 16

    def test_unknown_key_is_error(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("bin_count = 32\n")
        with pytest.raises(ConfigError, match="bin_count"):
            resolve_config(str(path))
        with pytest.raises(ConfigError, match="nope"):
            resolve_config(None, {"nope": "1"})

    def test_duplicate_key_is_error(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("bins = 8\nbins = 9\n")
        with pytest.raises(ConfigError, match="duplicate"):
            resolve_config(str(path))

    def test_bad_value_names_the_key(self):
        with pytest.raises(ConfigError, match="'bins'"):
            resolve_config(None, {"bins": "many"})
        with pytest.raises(ConfigError, match="'estimator'"):
            resolve_config(None, {"estimator": "magic"})

    def test_missing_file(self):
        with pytest.raises(ConfigError, match="not found"):
            resolve_config("/nonexistent/run.cfg")

    def test_malformed_line_reports_location(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("bins 32\n")
        with pytest.raises(ConfigError, match=":1"):
            resolve_config(str(path))


class TestDescribeAndSnapshot:
    def test_describe_lists_every_key(self):
        text = describe_config()
        for entry in CONFIG_ENTRIES:
            assert f"{entry.key} = " in text

    def test_snapshot_reloads_to_same_config(self, tmp_path):
        cfg = resolve_config(None, {"bins": "48", "learning_rate": "0.0005"})
        path = write_snapshot(cfg, str(tmp_path))
        again = resolve_config(path)
        assert again == cfg
