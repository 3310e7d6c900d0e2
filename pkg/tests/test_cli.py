import subprocess
import sys

from conftest import TOY_LEFT, TOY_RIGHT

from ramdec import cli


def decode_args(toy_model, out, am="local", extra=()):
    toy_dir = toy_model["toy_dir"]
    args = [
        "decode",
        "--graph", str(toy_dir / "fst.txt"),
        "--words", str(toy_dir / "words.txt"),
        "--feats", str(toy_dir / "feats.ark"),
        "--left", str(TOY_LEFT), "--right", str(TOY_RIGHT),
        "--priors", str(toy_model["priors"]),
        "--am", am,
        "--out", str(out),
    ]
    if am == "local":
        args += ["--model", str(toy_model["model"])]
    return args + list(extra)


class TestUsage:
    def test_unknown_flag_exits_2(self, capsys):
        assert cli.main(["--no-such-flag"]) == 2
        capsys.readouterr()

    def test_unknown_subcommand_exits_2(self, capsys):
        assert cli.main(["frobnicate"]) == 2
        capsys.readouterr()

    def test_help_exits_0(self, capsys):
        assert cli.main(["--help"]) == 0
        assert "gen-toy" in capsys.readouterr().out

    def test_local_without_model_exits_2(self, toy_model, tmp_path, capsys):
        args = decode_args(toy_model, tmp_path / "hyp.txt")
        args.remove("--model")
        args.remove(str(toy_model["model"]))
        assert cli.main(args) == 2
        capsys.readouterr()

    def test_remote_without_url_exits_2(self, toy_model, tmp_path, capsys, monkeypatch):
        monkeypatch.delenv("RAMDEC_URL", raising=False)
        assert cli.main(decode_args(toy_model, tmp_path / "hyp.txt", am="remote")) == 2
        capsys.readouterr()

    def test_console_script_runs(self):
        proc = subprocess.run(
            [sys.executable, "-m", "ramdec", "--help"], capture_output=True, text=True
        )
        assert proc.returncode == 0
        assert "usage: ramdec" in proc.stdout


class TestDecodeLocal:
    def test_writes_hypotheses_in_input_order(self, toy_model, tmp_path):
        out = tmp_path / "hyp.txt"
        assert cli.main(decode_args(toy_model, out)) == 0
        lines = out.read_text().splitlines()
        assert len(lines) == 20
        assert [l.split()[0] for l in lines] == [f"utt{i + 1:04d}" for i in range(20)]

    def test_jobs_flag_gives_identical_output(self, toy_model, tmp_path):
        serial = tmp_path / "serial.txt"
        parallel = tmp_path / "parallel.txt"
        assert cli.main(decode_args(toy_model, serial)) == 0
        assert cli.main(decode_args(toy_model, parallel, extra=["--jobs", "4"])) == 0
        assert serial.read_bytes() == parallel.read_bytes()

    def test_lattice_output(self, toy_model, tmp_path):
        out = tmp_path / "hyp.txt"
        lat = tmp_path / "lat.txt"
        assert cli.main(decode_args(toy_model, out, extra=["--lattice-out", str(lat)])) == 0
        blocks = [b for b in lat.read_text().split("\n\n") if b.strip()]
        assert len(blocks) == 20
        assert blocks[0].splitlines()[0] == "utt0001"


class TestDecodeRemote:
    def test_remote_matches_local_byte_for_byte(self, toy_model, predict_double, tmp_path):
        local = tmp_path / "local.txt"
        remote = tmp_path / "remote.txt"
        assert cli.main(decode_args(toy_model, local)) == 0
        assert cli.main(decode_args(
            toy_model, remote, am="remote", extra=["--url", predict_double.base_url],
        )) == 0
        assert local.read_bytes() == remote.read_bytes()

    def test_url_from_environment(self, toy_model, predict_double, tmp_path, monkeypatch):
        monkeypatch.setenv("RAMDEC_URL", predict_double.base_url)
        out = tmp_path / "hyp.txt"
        assert cli.main(decode_args(toy_model, out, am="remote")) == 0
        assert out.exists()

    def test_server_down_exits_1(self, toy_model, tmp_path, monkeypatch):
        from ramdec import am as am_mod

        monkeypatch.setattr(am_mod, "RETRY_BACKOFF_S", 0.0)
        out = tmp_path / "hyp.txt"
        code = cli.main(decode_args(
            toy_model, out, am="remote",
            extra=["--url", "http://127.0.0.1:9", "--timeout-ms", "200", "--max-retries", "0"],
        ))
        assert code == 1


class TestScoreCommand:
    def test_perfect_score(self, toy_model, tmp_path, capsys):
        out = tmp_path / "hyp.txt"
        assert cli.main(decode_args(toy_model, out)) == 0
        ref = toy_model["toy_dir"] / "ref.txt"
        assert cli.main(["score", "--ref", str(ref), "--hyp", str(out)]) == 0
        captured = capsys.readouterr()
        assert "%WER 0.00" in captured.out

    def test_unknown_hyp_key_exits_1(self, tmp_path, capsys):
        ref = tmp_path / "ref.txt"
        hyp = tmp_path / "hyp.txt"
        ref.write_text("u1 a b\n")
        hyp.write_text("ghost a b\n")
        assert cli.main(["score", "--ref", str(ref), "--hyp", str(hyp)]) == 1
        assert "ghost" in capsys.readouterr().err

    def test_report_dir(self, tmp_path, capsys):
        ref = tmp_path / "ref.txt"
        hyp = tmp_path / "hyp.txt"
        ref.write_text("u1 a b\nu2 c\n")
        hyp.write_text("u1 a x\nu2 c\n")
        report_dir = tmp_path / "report"
        assert cli.main([
            "score", "--ref", str(ref), "--hyp", str(hyp), "--report-dir", str(report_dir),
        ]) == 0
        capsys.readouterr()
        assert (report_dir / "utterance_scores.csv").exists()
        assert (report_dir / "score_summary.png").exists()


class TestTrainReport:
    def test_report_dir_written(self, toy_model, tmp_path):
        report_dir = tmp_path / "train_report"
        assert cli.main([
            "train", "--egs", str(toy_model["egs"]), "--layers", "8", "--epochs", "3",
            "--lr", "0.1", "--batch", "32", "--seed", "2",
            "--out", str(tmp_path / "m.bin"), "--report-dir", str(report_dir),
        ]) == 0
        assert (report_dir / "training_metrics.csv").exists()
        assert (report_dir / "training_curves.png").exists()


class TestGenToy:
    def test_missing_out_is_usage_error(self, capsys):
        assert cli.main(["gen-toy", "--seed", "1"]) == 2
        capsys.readouterr()

    def test_writes_manifest(self, tmp_path):
        assert cli.main(["gen-toy", "--seed", "5", "--out", str(tmp_path / "toy")]) == 0
        manifest = (tmp_path / "toy" / "manifest.txt").read_text()
        assert "fst fst.txt" in manifest
        assert "spec.seed 5" in manifest
