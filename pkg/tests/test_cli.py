import json
import subprocess
import sys

import numpy as np
import pytest

from dl4sim.audiofile import AudioBuffer, read_wav, write_wav
from dl4sim.cli import main
from dl4sim.harness import render
from dl4sim.sequencer import parse_step_list

DRY = "step dry: DS=256 DF=0.6 RG=0.0 MX=0.0\n"
ECHO = "step echo: DS=256 DF=0.6 RG=0.5 MX=1.0\n"


def wav(path, samples, rate=48000, fmt="float32"):
    write_wav(path, AudioBuffer.from_mono(samples, rate), fmt)
    return str(path)


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestRender:
    def test_dry_render_round_trips(self, tmp_path, capsys, rng):
        src = wav(tmp_path / "in.wav", rng.uniform(-1, 1, 4800))
        (tmp_path / "p.steps").write_text(DRY)
        out = tmp_path / "out.wav"
        code, _, _ = run(capsys, "render", "--input", src, "--steps",
                         str(tmp_path / "p.steps"), "--output", str(out))
        assert code == 0
        np.testing.assert_array_equal(read_wav(out).mono, read_wav(src).mono)

    def test_format_flag(self, tmp_path, capsys, rng):
        src = wav(tmp_path / "in.wav", rng.uniform(-1, 1, 480))
        (tmp_path / "p.steps").write_text(DRY)
        out = tmp_path / "out.wav"
        code, _, _ = run(capsys, "render", "--input", src, "--steps",
                         str(tmp_path / "p.steps"), "--output", str(out),
                         "--format", "pcm16")
        assert code == 0 and read_wav(out).storage == "pcm16"

    def test_script_flag(self, tmp_path, capsys):
        src = wav(tmp_path / "in.wav", np.ones(6000))
        (tmp_path / "p.steps").write_text(DRY)
        (tmp_path / "m.script").write_text("100 set OUTPHASE 1\n")
        out = tmp_path / "out.wav"
        code, _, _ = run(capsys, "render", "--input", src, "--steps",
                         str(tmp_path / "p.steps"), "--script",
                         str(tmp_path / "m.script"), "--output", str(out))
        assert code == 0
        y = read_wav(out).mono
        assert y[4799] == 1.0 and y[4800] == -1.0

    def test_stereo_input_rejected(self, tmp_path, capsys):
        path = tmp_path / "st.wav"
        write_wav(path, AudioBuffer(np.zeros((2, 100)), 48000))
        (tmp_path / "p.steps").write_text(DRY)
        code, _, err = run(capsys, "render", "--input", str(path), "--steps",
                           str(tmp_path / "p.steps"), "--output", str(tmp_path / "o.wav"))
        assert code == 3 and "expected mono" in err

    def test_bad_step_file(self, tmp_path, capsys, rng):
        src = wav(tmp_path / "in.wav", rng.uniform(-1, 1, 480))
        (tmp_path / "p.steps").write_text("step a: DF=9\n")
        code, _, err = run(capsys, "render", "--input", src, "--steps",
                           str(tmp_path / "p.steps"), "--output", str(tmp_path / "o.wav"))
        assert code == 3 and "line 1" in err

    def test_missing_input_file(self, tmp_path, capsys):
        (tmp_path / "p.steps").write_text(DRY)
        code, _, err = run(capsys, "render", "--input", str(tmp_path / "nope.wav"),
                           "--steps", str(tmp_path / "p.steps"),
                           "--output", str(tmp_path / "o.wav"))
        assert code == 3 and "error:" in err


class TestCheck:
    def build(self, tmp_path, rng, steps_text=ECHO):
        wav(tmp_path / "in.wav", rng.uniform(-0.5, 0.5, 24000))
        stored = read_wav(tmp_path / "in.wav")
        (tmp_path / "p.steps").write_text(steps_text)
        golden = render(stored, parse_step_list(steps_text))
        write_wav(tmp_path / "ref.wav", golden)
        spec = {"input": "in.wav", "steps": "p.steps", "golden": "ref.wav", "mode": "exact"}
        (tmp_path / "check.json").write_text(json.dumps(spec))
        return str(tmp_path / "check.json")

    def test_passing_check(self, tmp_path, capsys, rng):
        spec = self.build(tmp_path, rng)
        code, out, _ = run(capsys, "check", "--spec", spec)
        report = json.loads(out)
        assert code == 0 and report["passed"] and report["max_abs_diff"] == 0.0

    def test_failing_check(self, tmp_path, capsys, rng):
        spec = self.build(tmp_path, rng)
        (tmp_path / "p.steps").write_text(ECHO.replace("DF=0.6", "DF=0.61"))
        code, out, _ = run(capsys, "check", "--spec", spec)
        report = json.loads(out)
        assert code == 1 and not report["passed"]
        assert report["first_divergence"] is not None

    def test_broken_spec(self, tmp_path, capsys):
        path = tmp_path / "broken.json"
        path.write_text("{nope")
        code, _, err = run(capsys, "check", "--spec", str(path))
        assert code == 3 and "invalid JSON" in err


class TestAnalyze:
    def test_delay_on_render(self, tmp_path, capsys):
        delta = np.zeros(96000)
        delta[0] = 1.0
        src = wav(tmp_path / "delta.wav", delta)
        (tmp_path / "p.steps").write_text(ECHO)
        out = tmp_path / "echo.wav"
        run(capsys, "render", "--input", src, "--steps", str(tmp_path / "p.steps"),
            "--output", str(out), "--mapping", "raw")
        code, text, _ = run(capsys, "analyze", str(out), "--mode", "delay")
        result = json.loads(text)
        assert code == 0 and result["echo"]
        assert result["delay_ms"] == pytest.approx(153.6, abs=0.05)

    def test_delay_no_echo(self, tmp_path, capsys, rng):
        src = wav(tmp_path / "n.wav", rng.uniform(-1, 1, 120000))
        code, text, _ = run(capsys, "analyze", src, "--mode", "delay")
        assert code == 0 and json.loads(text) == {
            "mode": "delay", "file": src, "echo": False,
        }

    def test_delay_needs_enough_signal(self, tmp_path, capsys):
        src = wav(tmp_path / "short.wav", np.zeros(1000))
        code, _, err = run(capsys, "analyze", src, "--mode", "delay")
        assert code == 3 and "need at least" in err

    def test_comb_estimation_failure_exits_one(self, tmp_path, capsys):
        src = wav(tmp_path / "quiet.wav", np.zeros(48000))
        code, text, _ = run(capsys, "analyze", src, "--mode", "comb")
        result = json.loads(text)
        assert code == 1 and "no noise floor" in result["error"]

    def test_feedback_gain(self, tmp_path, capsys):
        x = np.zeros(48000)
        x[::960] = 0.75 ** np.arange(50)
        src = wav(tmp_path / "train.wav", x)
        code, text, _ = run(capsys, "analyze", src, "--mode", "feedback",
                            "--delay-ms", "20")
        assert code == 0
        assert json.loads(text)["gain"] == pytest.approx(0.75, abs=1e-4)

    def test_feedback_requires_delay(self, tmp_path, capsys):
        src = wav(tmp_path / "x.wav", np.ones(100))
        with pytest.raises(SystemExit) as exc:
            main(["analyze", src, "--mode", "feedback"])
        assert exc.value.code == 2
        assert "--delay-ms" in capsys.readouterr().err

    def test_snr_identical_files(self, tmp_path, capsys, rng):
        samples = rng.uniform(-1, 1, 4800)
        a = wav(tmp_path / "a.wav", samples)
        b = wav(tmp_path / "b.wav", samples)
        code, text, _ = run(capsys, "analyze", a, "--mode", "snr", "--reference", b)
        assert code == 0 and json.loads(text)["snr_db"] == 200.0

    def test_snr_requires_reference(self, tmp_path, capsys):
        src = wav(tmp_path / "x.wav", np.ones(100))
        with pytest.raises(SystemExit) as exc:
            main(["analyze", src, "--mode", "snr"])
        assert exc.value.code == 2

    def test_snr_rate_mismatch(self, tmp_path, capsys, rng):
        samples = rng.uniform(-1, 1, 480)
        a = wav(tmp_path / "a.wav", samples)
        b = wav(tmp_path / "b.wav", samples, rate=44100)
        code, _, err = run(capsys, "analyze", a, "--mode", "snr", "--reference", b)
        assert code == 3 and "sample rates differ" in err


class TestStepsValidate:
    def test_valid_file(self, tmp_path, capsys):
        path = tmp_path / "p.steps"
        path.write_text("policy discard_lfo\n" + DRY + "step b: MX=1\n")
        code, out, _ = run(capsys, "steps", "validate", str(path))
        assert code == 0
        assert out.strip() == f"{path}: 2 steps (policies: discard_lfo)"

    def test_invalid_file(self, tmp_path, capsys):
        path = tmp_path / "p.steps"
        path.write_text("step a: DS=256 DF=9 RG=0 MX=1\n")
        code, _, err = run(capsys, "steps", "validate", str(path))
        assert code == 3 and "line 1" in err

    def test_incomplete_first_step(self, tmp_path, capsys):
        path = tmp_path / "p.steps"
        path.write_text("step a: DF=0.5\n")
        code, _, err = run(capsys, "steps", "validate", str(path))
        assert code == 3 and "first step must set" in err

    def test_shipped_preset_validates(self, capsys):
        from importlib import resources

        preset = resources.files("dl4sim.presets") / "summermood_placeholder.steps"
        code, out, _ = run(capsys, "steps", "validate", str(preset))
        assert code == 0 and "comb_df_override" in out


class TestUsage:
    def test_unknown_subcommand(self):
        with pytest.raises(SystemExit) as exc:
            main(["bogus"])
        assert exc.value.code == 2

    def test_no_arguments(self):
        with pytest.raises(SystemExit) as exc:
            main([])
        assert exc.value.code == 2

    def test_serve_requires_a_source(self, tmp_path):
        (tmp_path / "p.steps").write_text(DRY)
        with pytest.raises(SystemExit) as exc:
            main(["serve", "--port", "9000", "--steps", str(tmp_path / "p.steps")])
        assert exc.value.code == 2


class TestEntryPoints:
    def test_module_invocation(self):
        proc = subprocess.run(
            [sys.executable, "-m", "dl4sim", "--help"],
            capture_output=True, text=True, timeout=60,
        )
        assert proc.returncode == 0
        for name in ("render", "check", "analyze", "serve", "steps"):
            assert name in proc.stdout

    def test_console_script(self, tmp_path):
        (tmp_path / "p.steps").write_text(DRY)
        proc = subprocess.run(
            ["dl4sim", "steps", "validate", str(tmp_path / "p.steps")],
            capture_output=True, text=True, timeout=60,
        )
        assert proc.returncode == 0 and "1 steps" in proc.stdout
