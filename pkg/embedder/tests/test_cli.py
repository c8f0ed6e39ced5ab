"""CLI behavior: extract, check, lock, and interoperability."""

import shutil
import subprocess
import sys

import pytest

from embedder.cli import main

RAW = (
    "text,label,split\n"
    "are you a robot?,positive,train\n"
    "what is a robot?,negative,train\n"
    "am I chatting with a bot?,positive,test\n"
)


@pytest.fixture
def raw_path(tmp_path):
    path = tmp_path / "raw.csv"
    path.write_text(RAW, encoding="utf-8")
    return path


def run(argv, capsys):
    code = main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestExtractCommand:
    def test_extract_then_check_ok(self, raw_path, tmp_path, capsys):
        out = tmp_path / "data.emb"
        code, stdout, _ = run(["extract", "--model", "stub", "--in", str(raw_path),
                               "--out", str(out)], capsys)
        assert code == 0
        assert "3 records, dim 384" in stdout and "stub@builtin" in stdout
        code, stdout, _ = run(["check", "--in", str(out)], capsys)
        assert code == 0
        assert stdout.splitlines()[0] == "OK, 3 records, dim 384"

    def test_unknown_model_is_validation_error(self, raw_path, tmp_path, capsys):
        code, _, stderr = run(["extract", "--model", "word2vec", "--in", str(raw_path),
                               "--out", str(tmp_path / "x.emb")], capsys)
        assert code == 2 and "error:" in stderr and "aliases" in stderr

    def test_bad_raw_label_is_validation_error(self, tmp_path, capsys):
        raw = tmp_path / "bad.csv"
        raw.write_text("text,label,split\nhi,sideways,train\n", encoding="utf-8")
        code, _, stderr = run(["extract", "--model", "stub", "--in", str(raw),
                               "--out", str(tmp_path / "x.emb")], capsys)
        assert code == 2 and "sideways" in stderr

    def test_real_model_without_hub_is_validation_error(self, raw_path, tmp_path, capsys):
        code, _, stderr = run(["extract", "--model", "minilm", "--in", str(raw_path),
                               "--out", str(tmp_path / "x.emb")], capsys)
        if code == 0:
            pytest.skip("model weights available locally; offline path not exercised")
        assert code == 2 and "error:" in stderr


class TestCheckCommand:
    def test_truncated_file_fails_with_byte_offset(self, raw_path, tmp_path, capsys):
        out = tmp_path / "data.emb"
        assert main(["extract", "--model", "stub", "--in", str(raw_path),
                     "--out", str(out)]) == 0
        capsys.readouterr()
        out.write_bytes(out.read_bytes()[:-7])
        code, stdout, _ = run(["check", "--in", str(out)], capsys)
        assert code == 2
        assert "FAIL" in stdout and "byte" in stdout

    def test_missing_file_reported_not_raised(self, tmp_path, capsys):
        code, stdout, _ = run(["check", "--in", str(tmp_path / "nope.emb")], capsys)
        assert code == 2 and "unreadable" in stdout


class TestLockCommand:
    def test_lock_reports_and_preserves_file_offline(self, tmp_path, capsys):
        lock = tmp_path / "models.lock"
        lock.write_text("toy.model = stub\ntoy.dim = 16\ntoy.revision = builtin\n"
                        "real.model = sentence-transformers/all-MiniLM-L6-v2\n"
                        "real.dim = 384\nreal.revision = unpinned\n", encoding="utf-8")
        before = lock.read_text(encoding="utf-8")
        code, stdout, _ = run(["lock", "--lock", str(lock)], capsys)
        assert "toy: already builtin" in stdout
        if code == 0:
            assert "real: pinned" in stdout       # hub reachable after all
        else:
            assert code == 3 and "real: unresolved" in stdout
            assert lock.read_text(encoding="utf-8") == before


class TestPrimaryToolInterop:
    @pytest.mark.skipif(shutil.which("hypercert") is None,
                        reason="verification toolkit CLI not installed")
    def test_emitted_file_passes_the_consumer_ingest_check(self, raw_path, tmp_path):
        out = tmp_path / "data.emb"
        assert main(["extract", "--model", "stub", "--in", str(raw_path),
                     "--out", str(out)]) == 0
        proc = subprocess.run(
            ["hypercert", "ingest-check", "--set", f"dataset.path={out}"],
            capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
        assert "OK, 3 records, dim 384" in proc.stdout

    def test_console_entry_point_runs(self, raw_path, tmp_path):
        proc = subprocess.run(
            [sys.executable, "-m", "embedder.cli", "check", "--in", str(tmp_path / "no.emb")],
            capture_output=True, text=True)
        assert proc.returncode == 2 and "FAIL" in proc.stdout
