import numpy as np
import pytest

import jepa_fer


def test_worked_example_metrics():
    cm = [[3, 1], [2, 4]]
    assert jepa_fer.uar(cm) == pytest.approx(17 / 24, abs=1e-12)
    assert jepa_fer.war(cm) == 0.7


def test_non_square_matrix_rejected():
    with pytest.raises(ValueError):
        jepa_fer.uar([[1, 2]])


def test_voting_witness():
    clips = [[0.9, 0.1], [0.4, 0.6], [0.4, 0.6]]
    assert jepa_fer.vote_mv(clips) == 1
    assert jepa_fer.vote_pbv(clips) == 0


def test_clip_counts():
    assert len(jepa_fer.enumerate_clips(61)) == 1
    assert jepa_fer.enumerate_clips(64) == [0, 1, 2, 3]
    assert jepa_fer.enumerate_clips(30) == [0]


def test_pca_matches_numpy():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(6, 4))
    out = jepa_fer.pca2(x.tolist())
    ev = np.sort(np.linalg.eigvalsh(np.cov(x, rowvar=False)))[::-1]
    assert out["variance"] == pytest.approx(ev[:2], abs=1e-10)
    assert len(out["coords"]) == 6


def test_crema_d_folds():
    folds = jepa_fer.crema_d_folds()
    assert [len(f) for f in folds] == [19, 18, 18, 18, 18]
    assert len({s for f in folds for s in f}) == 91


def test_gen_synthetic(tmp_path):
    n = jepa_fer.gen_synthetic(tmp_path, subjects=5, videos_per_class=1, size=16, seed=3)
    assert n == 15
    lines = (tmp_path / "manifest.csv").read_text().splitlines()
    assert lines[0] == "id,path,subject_id,label,dataset,duration_frames"
    assert len(lines) == 16


def test_gradcheck_passes():
    results = jepa_fer.gradcheck(seed=1, trials=1)
    assert results
    assert all(ok for _, _, ok in results), results
