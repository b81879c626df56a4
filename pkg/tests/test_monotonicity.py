import numpy as np
import pytest
from hypothesis import given, strategies as st

import elastomono.monotonicity as mono
from elastomono.linsolve import ResonanceSuspected
from elastomono.materials import Box, InclusionSpec, TestBlock, apply_inclusions, background
from elastomono.mesh import build_load_patches, build_structured_hex_mesh
from elastomono.monotonicity import (
    MonotonicityError,
    SweepResult,
    alpha_variants,
    make_cover,
    negative_count,
    suggest_Mtilde,
    sweep,
    test_block as run_test_block,
    test_ntd as make_test_ntd,
)
from elastomono.ntd import NtDMatrix, ntd_for_field

from conftest import ALPHA_BOUNDS, REFERENCE_BACKGROUND

# one element above the clamped bottom, so a 4^3 mesh still resolves it
INCLUSION = Box((1, 1, 2), (3, 3, 3))


@pytest.fixture(scope="module")
def setup():
    mesh = build_structured_hex_mesh(4)
    loads = build_load_patches(mesh, 2)
    truth = apply_inclusions(background(*REFERENCE_BACKGROUND, mesh), [InclusionSpec(INCLUSION, *ALPHA_BOUNDS)], mesh)
    measured = {w: ntd_for_field(mesh, truth, loads, w) for w in (0.0, 10.0)}
    return mesh, loads, measured


def inside_blocks(cover):
    return {b.index for b in cover if INCLUSION.contains(b.box)}


def test_inside_block_static(setup):
    mesh, loads, measured = setup
    block = TestBlock(Box((1, 1, 2), (2, 2, 3)), ALPHA_BOUNDS)
    v = run_test_block(measured[0.0], block, REFERENCE_BACKGROUND, 0.0, 0, mesh, loads)
    assert v.n_neg == 0 and v.inside


def test_outside_block_static(setup):
    mesh, loads, measured = setup
    block = TestBlock(Box((3, 3, 3), (4, 4, 4)), ALPHA_BOUNDS)
    v = run_test_block(measured[0.0], block, REFERENCE_BACKGROUND, 0.0, 0, mesh, loads)
    assert v.n_neg > 0 and not v.inside


def test_rejects_bad_inputs(setup):
    mesh, loads, measured = setup
    box = Box((0, 0, 0), (1, 1, 1))
    with pytest.raises(MonotonicityError):
        run_test_block(measured[0.0], TestBlock(box, (0, 0, 0)), REFERENCE_BACKGROUND, 0.0, 0, mesh, loads)
    with pytest.raises(MonotonicityError):
        run_test_block(measured[0.0], TestBlock(box, (1, 1, 3e3)), REFERENCE_BACKGROUND, 0.0, 0, mesh, loads)
    with pytest.raises(MonotonicityError):
        run_test_block(measured[0.0], TestBlock(box, ALPHA_BOUNDS), REFERENCE_BACKGROUND, 10.0, 0, mesh, loads)
    other = build_load_patches(mesh, 1)
    with pytest.raises(MonotonicityError):
        run_test_block(measured[0.0], TestBlock(box, ALPHA_BOUNDS), REFERENCE_BACKGROUND, 0.0, 0, mesh, other)


def test_static_sweep_separates(setup):
    mesh, loads, measured = setup
    cover = make_cover(mesh, 4, ALPHA_BOUNDS)
    res = sweep(measured[0.0], cover, None, 0.0, 0, mesh, loads, REFERENCE_BACKGROUND)
    assert len(res.verdicts) == 64
    assert set(res.inside_indices()) == inside_blocks(cover)
    assert [v.block_index for v in res.verdicts] == list(range(64))


def test_harmonic_sweep_separates(setup):
    mesh, loads, measured = setup
    cover = make_cover(mesh, 4, ALPHA_BOUNDS)
    res = sweep(measured[10.0], cover, None, 10.0, "auto", mesh, loads, REFERENCE_BACKGROUND, threads=2)
    counts = res.counts
    inside = sorted(inside_blocks(cover))
    outside = sorted(set(range(64)) - set(inside))
    assert counts[inside].max() < counts[outside].min()
    assert res.suggestion is not None and res.suggestion.separated
    assert res.m_tilde == res.suggestion.value


def test_threads_do_not_change_result(setup):
    mesh, loads, measured = setup
    cover = make_cover(mesh, 2, ALPHA_BOUNDS)
    a = sweep(measured[10.0], cover, None, 10.0, 3, mesh, loads, REFERENCE_BACKGROUND, threads=1)
    b = sweep(measured[10.0], cover, None, 10.0, 3, mesh, loads, REFERENCE_BACKGROUND, threads=3)
    assert a.verdicts == b.verdicts


def test_empty_cover(setup):
    mesh, loads, measured = setup
    res = sweep(measured[0.0], [], None, 0.0, 0, mesh, loads, REFERENCE_BACKGROUND)
    assert res.verdicts == [] and res.inside_indices() == []


def test_alpha_subsets_take_minimum(setup):
    mesh, loads, measured = setup
    variants = alpha_variants(ALPHA_BOUNDS, subsets=True)
    assert len(variants) == 7
    block = TestBlock(Box((3, 0, 3), (4, 1, 4)), ALPHA_BOUNDS, index=0)
    counts = [run_test_block(measured[10.0], block.with_alpha(a), REFERENCE_BACKGROUND, 10.0, None, mesh, loads).n_neg
              for a in variants]
    res = sweep(measured[10.0], [block], variants, 10.0, 0, mesh, loads, REFERENCE_BACKGROUND)
    assert res.verdicts[0].n_neg == min(counts)


@given(st.floats(0.05, 1.0), st.floats(0.05, 1.0), st.floats(0.05, 1.0))
def test_alpha_monotone_inside(setup, s1, s2, s3):
    mesh, loads, measured = setup
    block = TestBlock(Box((1, 2, 2), (2, 3, 3)), (s1 * 1.4e6, s2 * 1.4e4, s3 * 2e3))
    v = run_test_block(measured[0.0], block, REFERENCE_BACKGROUND, 0.0, 0, mesh, loads)
    assert v.inside


@given(st.integers(0, 2**32 - 1))
def test_count_congruence_invariant(setup, seed):
    mesh, loads, measured = setup
    meas = measured[10.0]
    test = make_test_ntd(mesh, loads, REFERENCE_BACKGROUND, TestBlock(Box((0, 0, 3), (1, 1, 4)), ALPHA_BOUNDS), 10.0)
    rng = np.random.default_rng(seed)
    C = np.eye(meas.m) + 0.3 * rng.standard_normal((meas.m, meas.m)) / np.sqrt(meas.m)

    def congruent(L):
        return NtDMatrix(C.T @ L.entries @ C, L.omega, L.field_fingerprint, L.loadset_fingerprint,
                         L.mesh_fingerprint)

    assert negative_count(congruent(test), congruent(meas)) == negative_count(test, meas)


def test_suggest_examples():
    s = suggest_Mtilde([5, 6, 7, 60, 61, 62, 7, 5])
    assert s.value == 7 and s.gap == (7, 60) and s.separated
    flat = suggest_Mtilde([4, 4, 4])
    assert not flat.separated and flat.value == 4
    # ties go to the lower gap
    assert suggest_Mtilde([0, 3, 6]).value == 0
    with pytest.raises(MonotonicityError):
        suggest_Mtilde([])


@given(st.lists(st.integers(0, 200), min_size=1, max_size=60))
def test_suggest_is_low_edge_of_widest_gap(counts):
    s = suggest_Mtilde(counts)
    distinct = sorted(set(counts))
    if len(distinct) == 1:
        assert not s.separated and s.value == distinct[0]
        return
    lo, hi = s.gap
    assert s.value == lo and lo in distinct and hi in distinct
    assert not any(lo < c < hi for c in distinct)
    widest = max(b - a for a, b in zip(distinct, distinct[1:]))
    assert hi - lo == widest


def test_failed_block_recorded(setup, monkeypatch):
    mesh, loads, measured = setup
    cover = make_cover(mesh, 2, ALPHA_BOUNDS)
    real = mono.test_ntd

    def flaky(mesh_, loads_, bg, block, omega, zero_tol):
        if block.index == 3:
            raise ResonanceSuspected("forced", 0.0, 1.0)
        return real(mesh_, loads_, bg, block, omega, zero_tol)

    monkeypatch.setattr(mono, "test_ntd", flaky)
    res = sweep(measured[0.0], cover, None, 0.0, 100, mesh, loads, REFERENCE_BACKGROUND)
    bad = res.verdicts[3]
    assert not bad.valid and not bad.inside and "forced" in bad.error
    assert res.counts[3] == -1
    assert 3 not in res.inside_indices()
    assert all(v.valid for i, v in enumerate(res.verdicts) if i != 3)


def test_sweep_result_roundtrip_and_csv(setup, tmp_path):
    mesh, loads, measured = setup
    cover = make_cover(mesh, 2, ALPHA_BOUNDS)
    res = sweep(measured[10.0], cover, None, 10.0, "auto", mesh, loads, REFERENCE_BACKGROUND, m0=7)
    back = SweepResult.from_dict(res.to_dict())
    assert back.verdicts == res.verdicts and back.suggestion == res.suggestion and back.m0 == 7
    rethreshold = SweepResult.from_dict(res.to_dict(), m_tilde=10**6)
    assert len(rethreshold.inside_indices()) == 8
    lines = res.write_eigencount_csv(tmp_path / "e.csv").read_text().splitlines()
    assert lines[0] == "block_index,i,j,k,N_B,verdict" and len(lines) == 9
    assert len(res.write_verdict_csv(tmp_path / "v.csv").read_text().splitlines()) == 9


def test_cover_layout():
    mesh = build_structured_hex_mesh(10)
    cover = make_cover(mesh, 5, ALPHA_BOUNDS)
    assert len(cover) == 125
    b = cover[1 + 5 * 2 + 25 * 3]
    assert b.box == Box((2, 4, 6), (4, 6, 8))
    with pytest.raises(MonotonicityError):
        make_cover(mesh, 3, ALPHA_BOUNDS)
