import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from visionseg.profileseg import (
    PageSegmentation,
    SystemRegion,
    ThresholdParams,
    critical_points,
    extract_regions,
    row_profile,
    segment_page,
    select_cuts,
)
from visionseg.synthgen import SynthConfig, compose_page, make_page, render_fake_system

DEFAULTS = ThresholdParams()


# ---------------------------------------------------------------------------
# row_profile
# ---------------------------------------------------------------------------

def test_row_profile_all_ones():
    assert row_profile(np.ones((4, 8))).tolist() == [8, 8, 8, 8]


def test_row_profile_zeros():
    assert not row_profile(np.zeros((3, 5))).any()


def test_row_profile_matches_naive_accumulation():
    rng = np.random.default_rng(1)
    img = rng.random((16, 16))
    naive = [sum(float(img[r, c]) for c in range(16)) for r in range(16)]
    assert np.max(np.abs(row_profile(img) - naive)) < 1e-9


# ---------------------------------------------------------------------------
# critical_points
# ---------------------------------------------------------------------------

def test_single_peak():
    cp = critical_points(np.array([0.0, 1.0, 0.0]))
    assert cp.maxima == [(1, 1.0)]
    assert cp.minima == []


def test_monotone_profile_has_no_extrema():
    cp = critical_points(np.linspace(0, 5, 50))
    assert cp.minima == [] and cp.maxima == []


def test_short_profile_rejected():
    with pytest.raises(ValueError):
        critical_points(np.array([1.0, 2.0]))


def test_sampled_sine_extrema_near_analytic():
    # p(r) = 50 + 40*sin(2*pi*3*r/200); analytic maxima where the phase is
    # pi/2 + 2*pi*k, minima at -pi/2 + 2*pi*k
    rows = np.arange(200)
    p = 50 + 40 * np.sin(2 * np.pi * 3 * rows / 200)
    cp = critical_points(p)
    analytic_max = [200 / 3 * (0.25 + k) for k in range(3)]
    analytic_min = [200 / 3 * (0.75 + k) for k in range(3)]
    assert len(cp.maxima) == 3 and len(cp.minima) == 3
    for (row, _), want in zip(cp.maxima, analytic_max):
        assert abs(row - want) <= 1
    for (row, _), want in zip(cp.minima, analytic_min):
        assert abs(row - want) <= 1


def test_plateau_collapses_to_midpoint():
    p = np.array([3.0, 1.0, 1.0, 1.0, 1.0, 3.0])
    cp = critical_points(p)
    assert len(cp.minima) == 1
    assert cp.minima[0][0] == 2  # zero-run of the derivative, floored midpoint


def test_binary_step_profile_extrema():
    t = np.array([0, 0, 1, 1, 1, 0, 0, 0, 1, 1, 1, 0], dtype=float)
    cp = critical_points(t)
    assert [r for r, _ in cp.maxima] == [3, 9]   # system plateau centers
    assert [r for r, _ in cp.minima] == [6]      # gap plateau center
    assert cp.minima[0][1] == 0.0


@settings(max_examples=100)
@given(st.lists(st.integers(0, 40), min_size=3, max_size=60))
def test_extrema_alternate_and_exclude_endpoints(vals):
    p = np.array(vals, dtype=float)
    cp = critical_points(p)
    merged = sorted([(r, "min") for r, _ in cp.minima]
                    + [(r, "max") for r, _ in cp.maxima])
    rows = [r for r, _ in merged]
    assert rows == sorted(set(rows))                       # strictly increasing
    assert 0 not in rows and len(p) - 1 not in rows        # endpoints excluded
    for (_, a), (_, b) in zip(merged, merged[1:]):
        assert a != b                                      # strict alternation


@settings(max_examples=60)
@given(st.lists(st.integers(0, 40), min_size=8, max_size=60), st.booleans())
def test_extrema_genuine_on_smoothed_profiles(vals, wide):
    # central differences cannot see period-2 zigzags, so genuineness is
    # promised on smoothed profiles only (the pipeline always smooths first)
    from scipy.ndimage import gaussian_filter1d

    p = gaussian_filter1d(np.array(vals, dtype=float), 1.5 if wide else 1.0,
                          mode="reflect")
    cp = critical_points(p)
    for row, val in cp.minima:
        assert val <= p[row - 1] and val <= p[row + 1]
    for row, val in cp.maxima:
        assert val >= p[row - 1] and val >= p[row + 1]


# ---------------------------------------------------------------------------
# select_cuts
# ---------------------------------------------------------------------------

def _bands_profile():
    """Two dense bands separated by an exactly-zero gap (rows ~40..60)."""
    p = np.zeros(100)
    rows = np.arange(100)
    p += 120 * np.exp(-((rows - 20) ** 2) / 50)
    p += 120 * np.exp(-((rows - 80) ** 2) / 50)
    p[p < 1e-5] = 0.0  # truncate the tails: real inter-system gaps are blank
    return p


def test_two_bands_one_cut_in_gap():
    p = _bands_profile()
    assert p[50] == 0.0
    sel = select_cuts(p, critical_points(p), DEFAULTS)
    assert len(sel.cuts) == 1
    assert 40 <= sel.cuts[0] <= 60


def test_a_min_zero_yields_no_cuts_for_positive_minima():
    p = 10 + _bands_profile()  # all minima strictly positive now
    cp = critical_points(p)
    sel = select_cuts(p, cp, ThresholdParams(a_min=0.0))
    assert sel.cuts == [] and sel.candidates == []


def test_single_band_no_cuts():
    cfg = SynthConfig(min_systems=1, max_systems=1, seed=13)
    page = compose_page([render_fake_system(cfg.content_width, 5)], cfg)
    seg = segment_page(page.image, DEFAULTS)
    assert seg.cuts == []
    assert len(seg.regions) == 1


def test_flat_profile_degenerate():
    p = np.full(50, 3.0)
    sel = select_cuts(p, critical_points(p), DEFAULTS)
    assert sel.cuts == []


def test_exact_step_profile_cuts_at_gap_centers():
    t = np.zeros(100)
    t[10:40] = 1.0
    t[55:90] = 1.0
    sel = select_cuts(t, critical_points(t), DEFAULTS)
    assert sel.cuts == [(40 + 54) // 2]


def test_scale_equivariance_power_of_two():
    p = _bands_profile() + 0.5
    base = select_cuts(p, critical_points(p), DEFAULTS)
    for c in (0.25, 2.0, 8.0):  # exact fp scaling
        scaled = c * p
        sel = select_cuts(scaled, critical_points(scaled), DEFAULTS)
        assert sel.cuts == base.cuts
        assert sel.mu_min == pytest.approx(c * base.mu_min, rel=1e-12)
        assert sel.mu_max == pytest.approx(c * base.mu_max, rel=1e-12)


def test_decreasing_a_min_only_removes_candidates():
    rng = np.random.default_rng(9)
    p = np.abs(np.cumsum(rng.normal(size=300))) + 1.0
    cp = critical_points(p)
    prev = None
    for a_min in (1.2, 1.0, 0.8, 0.5, 0.2, 0.0):
        cand = {r for r, _ in select_cuts(p, cp, ThresholdParams(a_min=a_min)).candidates}
        if prev is not None:
            assert cand <= prev
        prev = cand


def test_emitted_cuts_are_candidate_minima():
    for seed in range(5):
        page = make_page(SynthConfig(seed=101), seed)
        from visionseg.profileseg import preprocess_page

        smooth = preprocess_page(page.image, DEFAULTS)
        prof = row_profile(smooth)
        cp = critical_points(prof)
        sel = select_cuts(prof, cp, DEFAULTS)
        minima_rows = {r for r, _ in cp.minima}
        assert sel.cuts == sorted(sel.cuts)
        assert len(set(sel.cuts)) == len(sel.cuts)
        for cut in sel.cuts:
            assert cut in minima_rows
            assert prof[cut] <= DEFAULTS.a_min * sel.mu_min
        # no two cuts inside the same grouping interval
        max_rows = sel.selected_maxima_rows
        groups = [sum(1 for m in max_rows if m < cut) for cut in sel.cuts]
        assert len(set(groups)) == len(groups)


# ---------------------------------------------------------------------------
# extract_regions
# ---------------------------------------------------------------------------

def test_blank_page_no_regions():
    seg = segment_page(np.ones((200, 100)), DEFAULTS)
    assert seg.cuts == [] and seg.regions == []


def test_regions_contain_ground_truth_boxes():
    for idx in (0, 3, 7):
        page = make_page(SynthConfig(seed=77), idx)
        seg = segment_page(page.image, DEFAULTS, source=page.page_id)
        assert len(seg.regions) == len(page.placements)
        for region, placement in zip(seg.regions, page.placements):
            assert region.row_start <= placement.row_start
            assert region.row_end >= placement.row_end


def test_column_trimming_bound():
    page = make_page(SynthConfig(seed=3), 1)
    from visionseg.profileseg import preprocess_page

    smooth = preprocess_page(page.image, DEFAULTS)
    seg = segment_page(page.image, DEFAULTS)
    for region in seg.regions:
        band = smooth[region.row_start:region.row_end]
        col_sum = band.sum(axis=0)
        assert np.all(col_sum[:region.col_start] <= DEFAULTS.trim_epsilon)
        assert np.all(col_sum[region.col_end:] <= DEFAULTS.trim_epsilon)
        assert col_sum[region.col_start] > DEFAULTS.trim_epsilon
        assert col_sum[region.col_end - 1] > DEFAULTS.trim_epsilon


def test_extract_regions_rejects_bad_cuts():
    with pytest.raises(ValueError):
        extract_regions(np.ones((10, 10)), [0], DEFAULTS, [5])


# ---------------------------------------------------------------------------
# segment_page
# ---------------------------------------------------------------------------

def test_three_system_page_recovery():
    cfg = SynthConfig(min_systems=3, max_systems=3, seed=7)
    page = make_page(cfg, 0)
    seg = segment_page(page.image, DEFAULTS, source=page.page_id)
    assert len(seg.regions) == 3
    assert len(seg.cuts) == 2
    centers = [(a.row_end + b.row_start) / 2
               for a, b in zip(page.placements, page.placements[1:])]
    for cut, center in zip(seg.cuts, centers):
        assert abs(cut - center) <= 8


def test_segment_page_deterministic():
    page = make_page(SynthConfig(seed=19), 2)
    a = segment_page(page.image, DEFAULTS)
    b = segment_page(page.image, DEFAULTS)
    assert a == b


def test_at_most_one_cut_per_true_gap():
    for idx in range(8):
        page = make_page(SynthConfig(seed=55), idx)
        seg = segment_page(page.image, DEFAULTS)
        for a, b in zip(page.placements, page.placements[1:]):
            inside = [c for c in seg.cuts if a.row_end <= c < b.row_start]
            assert len(inside) <= 1


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def test_segmentation_json_roundtrip(tmp_path):
    seg = PageSegmentation(
        source="p1", cuts=[100, 200],
        regions=[SystemRegion(0, 100, 10, 90, 0), SystemRegion(100, 200, 12, 88, 1)])
    path = tmp_path / "seg.json"
    seg.save(path)
    assert PageSegmentation.load(path) == seg
    doc = seg.to_dict()
    assert set(doc) == {"source", "cuts", "regions"}
    assert set(doc["regions"][0]) == {"row_start", "row_end", "col_start",
                                      "col_end", "order_index"}
