import json

import numpy as np
import pytest

from svclab.cli import main
from svclab.config import ConfigError, load_config
from svclab.features import AudioClip, save_audio
from svclab.synth import write_toy_corpus

SMALL_MODEL = """
[model]
singer_emb_dim = 8
enc_dim = 16
dec_dim = 16
classifier_channels = 8
regressor_width = 8
prenet_dim = 16
cbhg_bank_size = 3
cbhg_bank_channels = 8
highway_layers = 1
mel_enc_channels = [2, 2, 2, 2, 2, 2]
mel_enc_gru_dim = 8
postnet_channels = 16

[train]
batch_size = 2
checkpoint_interval = 2
"""


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    write_toy_corpus(root / "corpus", n_singers=2, utts_per_singer=3, ppg_dim=64, seed=0)
    config = root / "run.toml"
    config.write_text(SMALL_MODEL)
    assert main(["prepare", "--corpus", str(root / "corpus"), "--out", str(root / "feats"),
                 "--config", str(config)]) == 0
    assert main(["train", "--features", str(root / "feats"), "--out", str(root / "ckpt"),
                 "--config", str(config), "--steps", "3", "--seed", "1"]) == 0
    return root, config


def test_prepare_layout(workspace):
    root, _ = workspace
    manifest = json.loads((root / "feats" / "manifest.json").read_text())
    assert manifest["singers"] == {"singer0": 0, "singer1": 1}
    assert len(manifest["utterances"]) == 6 and manifest["failures"] == {}
    assert len(list((root / "feats").glob("*/*/meta.json"))) == 6


def test_prepare_is_idempotent(workspace, capsys):
    root, config = workspace
    before = {p: p.stat().st_mtime_ns for p in (root / "feats").glob("*/*/mel.f32")}
    assert main(["prepare", "--corpus", str(root / "corpus"), "--out", str(root / "feats"),
                 "--config", str(config)]) == 0
    assert "written: 0" in capsys.readouterr().out
    assert before == {p: p.stat().st_mtime_ns for p in (root / "feats").glob("*/*/mel.f32")}


def test_prepare_corrupt_wav(tmp_path, capsys):
    write_toy_corpus(tmp_path / "corpus", n_singers=2, utts_per_singer=3, seed=0)
    bad = tmp_path / "corpus" / "singer1" / "utt001.wav"
    bad.write_bytes(b"RIFF garbage")
    code = main(["prepare", "--corpus", str(tmp_path / "corpus"), "--out", str(tmp_path / "feats")])
    assert code == 1
    assert "utt001.wav" in capsys.readouterr().err
    manifest = json.loads((tmp_path / "feats" / "manifest.json").read_text())
    assert len(manifest["utterances"]) == 5


def test_prepare_empty_corpus(tmp_path):
    (tmp_path / "corpus").mkdir()
    assert main(["prepare", "--corpus", str(tmp_path / "corpus"), "--out", str(tmp_path / "f")]) == 2


def test_train_outputs(workspace):
    root, _ = workspace
    log = (root / "ckpt" / "loss_log.csv").read_text().splitlines()
    assert log[0] == "step,l_dec,l_d,l_melenc,l_g,lr" and len(log) == 4
    assert (root / "ckpt" / "latest.npz").exists()


def test_train_missing_features(tmp_path, workspace):
    _, config = workspace
    code = main(["train", "--features", str(tmp_path / "nope"), "--out", str(tmp_path / "c"),
                 "--config", str(config)])
    assert code == 2 and not (tmp_path / "c").exists()


def test_train_base3_ablation(tmp_path, workspace):
    root, config = workspace
    assert main(["train", "--features", str(root / "feats"), "--out", str(tmp_path / "b3"),
                 "--config", str(config), "--steps", "2", "--ablation", "base3"]) == 0
    rows = (tmp_path / "b3" / "loss_log.csv").read_text().splitlines()[1:]
    assert all(r.split(",")[2] == "" and r.split(",")[3] == "" for r in rows)


def test_convert(workspace, tmp_path, capsys):
    root, config = workspace
    src = root / "corpus" / "singer0" / "utt000.wav"
    out = tmp_path / "conv.wav"
    code = main(["convert", "--src", str(src), "--target-singer", "singer1", "--ckpt",
                 str(root / "ckpt" / "latest.npz"), "--out", str(out), "--config", str(config),
                 "--gl-iters", "2"])
    assert code == 0
    text = capsys.readouterr().out
    frames = int(text.split("frames: ")[1].split()[0])
    steps = int(text.split("decode_steps: ")[1].split()[0])
    dump = np.fromfile(out.with_suffix(".mel.f32"), dtype="<f4")
    assert out.exists() and dump.size == frames * 80 and frames == 2 * steps


def test_convert_unknown_singer(workspace, tmp_path, capsys):
    root, config = workspace
    code = main(["convert", "--src", str(root / "corpus" / "singer0" / "utt000.wav"),
                 "--target-singer", "nobody", "--ckpt", str(root / "ckpt" / "latest.npz"),
                 "--out", str(tmp_path / "x.wav"), "--config", str(config)])
    assert code == 2
    err = capsys.readouterr().err
    assert "singer0" in err and "singer1" in err


def test_evaluate_ncc_same_file(workspace, tmp_path, capsys):
    root, _ = workspace
    wav = str(root / "corpus" / "singer0" / "utt000.wav")
    assert main(["evaluate", "ncc", "--ref", wav, "--hyp", wav, "--out", str(tmp_path / "n.json")]) == 0
    record = json.loads((tmp_path / "n.json").read_text())
    assert record["ncc"] == pytest.approx(1.0, abs=1e-12) and "config_hash" in record


def test_evaluate_snr(workspace, tmp_path, capsys):
    root, _ = workspace
    wav = str(root / "corpus" / "singer0" / "utt000.wav")
    assert main(["evaluate", "snr", "--clean", wav, "--degraded", wav]) == 0
    assert json.loads(capsys.readouterr().out)["infinite"] is True
    assert main(["evaluate", "snr", "--clean", wav]) == 2


def test_evaluate_sweep(workspace, tmp_path, capsys):
    root, config = workspace
    t = np.arange(36000) / 24000
    src = tmp_path / "long.wav"
    save_audio(src, AudioClip(0.3 * np.sin(2 * np.pi * 220 * t)))
    np.savez(tmp_path / "long.ppg.npz", ppg=np.full((120, 64), 1 / 64))
    args = ["evaluate", "sweep", "--src", str(src), "--target-singer", "singer1", "--ckpt",
            str(root / "ckpt" / "latest.npz"), "--levels", "25.35,15.30,8.18", "--gl-iters", "2",
            "--config", str(config), "--out", str(tmp_path / "s.csv")]
    assert main(args) == 0
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0].startswith("# config_hash=")
    assert lines[1] == "level_db,source_snr,converted_snr" and len(lines) == 5
    assert capsys.readouterr().out.splitlines()[1].startswith("25.35,")


def test_evaluate_probe(workspace, capsys):
    root, _ = workspace
    ckpt = str(root / "ckpt" / "latest.npz")
    assert main(["evaluate", "probe", "--ckpt-a", ckpt, "--ckpt-b", ckpt, "--features",
                 str(root / "feats"), "--steps", "5", "--test-fraction", "0.34"]) == 0
    record = json.loads(capsys.readouterr().out)
    assert record["delta"] == 0.0 and 0 <= record["a"]["probe_accuracy"] <= 1


def test_bad_usage_exit_code():
    with pytest.raises(SystemExit) as exc:
        main(["train", "--ablation", "bogus"])
    assert exc.value.code == 2


def test_seed_precedence(tmp_path, monkeypatch):
    cfg_file = tmp_path / "c.toml"
    cfg_file.write_text("seed = 5\n")
    monkeypatch.setenv("SVCLAB_SEED", "9")
    assert load_config(None).seed == 9
    assert load_config(cfg_file).seed == 5
    assert load_config(cfg_file, seed=2).seed == 2
    assert load_config(cfg_file, seed=2).train.seed == 2


def test_config_errors(tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text("[train]\nnope = 1\n")
    with pytest.raises(ConfigError):
        load_config(bad)
    same = tmp_path / "same.toml"
    same.write_text('[paths]\ncorpus_dir = "x"\nfeatures_dir = "x"\n')
    with pytest.raises(ConfigError):
        load_config(same)
    assert main(["prepare", "--config", str(tmp_path / "missing.toml")]) == 2
