import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mbnopt.phy import (
    BANDS,
    DEFAULT_MODULATIONS,
    GnParams,
    ModulationFormat,
    ModulationTable,
    PhyConfig,
    ase_power,
    band_worst_snr,
    build_grid,
    capacity_matrix,
    effective_attenuation,
    first_span_snr,
    linear_to_db,
    load_phy_config,
    nli_coefficient,
    path_snr_db,
    select_modulation,
)
from mbnopt.topology import load_topology, candidate_routes

# Baud rate (GBaud) -> channel count over 15 THz, as swept in experiments.
BAUD_TO_W = {500: 30, 200: 75, 150: 100, 100: 150, 50: 300, 25: 600, 15: 1000, 12.5: 1200, 10: 1500}


class TestBuildGrid:
    @pytest.mark.parametrize("baud,expected", sorted(BAUD_TO_W.items()))
    def test_wavelength_counts(self, baud, expected):
        grid = build_grid(baud * 1e9)
        assert grid.channel_count == expected

    def test_rejects_nonpositive_baud(self):
        with pytest.raises(ValueError):
            build_grid(0.0)
        with pytest.raises(ValueError):
            build_grid(-25e9)

    def test_offsets_symmetric(self):
        grid = build_grid(25e9)
        offsets = grid.channel_offsets
        assert len(offsets) == 600
        assert offsets[0] == pytest.approx(-offsets[-1])
        assert abs(sum(offsets)) < 1e-3

    def test_band_partition_covers_grid_in_order(self):
        grid = build_grid(25e9)
        sizes = [grid.band_size(b) for b in BANDS]
        assert sum(sizes) == grid.channel_count
        stops = [grid.band_partition[b].stop for b in BANDS]
        assert stops == sorted(stops)

    def test_remainder_goes_to_c_then_l(self):
        # 15 THz / 70 GHz = 214 channels; 214 = 71 + 71 + 72
        grid = build_grid(70e9)
        assert grid.channel_count == 214
        assert grid.band_size("U") == 71
        assert grid.band_size("L") == 71
        assert grid.band_size("C") == 72
        # 215 = 71 + 72 + 72
        grid = build_grid(15e12 / 215)
        assert grid.band_size("U") == 71
        assert grid.band_size("L") == 72
        assert grid.band_size("C") == 72

    def test_band_of_matches_partition(self):
        grid = build_grid(1.875e12)  # 8 channels
        bands = [grid.band_of(w) for w in range(1, 9)]
        assert bands == ["U", "U", "L", "L", "L", "C", "C", "C"]


FLAT_NO_ISRS = GnParams(isrs_enabled=False)


class TestEffectiveAttenuation:
    def test_no_isrs_reduces_to_fiber_attenuation(self):
        grid = build_grid(25e9)
        for w in (1, 300, 600):
            alpha_eff, l_eff = effective_attenuation(FLAT_NO_ISRS, grid, w)
            assert alpha_eff == pytest.approx(0.2 * math.log(10) / 10)
            assert l_eff == pytest.approx((1 - math.exp(-alpha_eff * 80)) / alpha_eff)

    def test_center_channel_sees_no_tilt(self):
        grid = build_grid(15e12 / 601)  # odd count -> exact zero center offset
        params = GnParams(isrs_enabled=True)
        center = 301
        assert grid.channel_offsets[center - 1] == pytest.approx(0.0, abs=1e-3)
        alpha_eff, _ = effective_attenuation(params, grid, center)
        assert alpha_eff == pytest.approx(params.alpha_per_km(center))

    def test_tilt_monotone_and_low_frequency_gain(self):
        # recompute from the adopted linear-tilt rule: attenuation grows with
        # channel offset, so channels below center (U side) see gain
        grid = build_grid(25e9)
        params = GnParams(isrs_enabled=True)
        alphas = [effective_attenuation(params, grid, w)[0] for w in range(1, 601)]
        assert all(a2 >= a1 for a1, a2 in zip(alphas, alphas[1:]))
        base = params.alpha_per_km(1)
        assert alphas[0] < base  # U-band edge: Raman gain
        assert alphas[-1] > base  # C-band edge: Raman depletion
        p_t = params.total_power(grid)
        for w in (1, 150, 599):
            f_w = grid.channel_offsets[w - 1]
            expected = base + 0.5 * p_t * params.raman_slope * max(-params.raman_cutoff, min(params.raman_cutoff, f_w))
            assert alphas[w - 1] == pytest.approx(expected)

    def test_bad_channel_index(self):
        grid = build_grid(25e9)
        with pytest.raises(IndexError):
            effective_attenuation(FLAT_NO_ISRS, grid, 0)
        with pytest.raises(IndexError):
            effective_attenuation(FLAT_NO_ISRS, grid, 601)


class TestAsePower:
    def test_linear_in_noise_figure(self):
        grid = build_grid(25e9)
        base = ase_power(GnParams(isrs_enabled=False, noise_figure_db=5.0), grid, 10)
        doubled = ase_power(GnParams(isrs_enabled=False, noise_figure_db=5.0 + 10 * math.log10(2)), grid, 10)
        assert doubled == pytest.approx(2 * base)

    def test_frequency_ratio_law(self):
        grid = build_grid(25e9)
        w1, w2 = 100, 500
        p1 = ase_power(FLAT_NO_ISRS, grid, w1)
        p2 = ase_power(FLAT_NO_ISRS, grid, w2)
        f1 = grid.center_frequency + grid.channel_offsets[w1 - 1]
        f2 = grid.center_frequency + grid.channel_offsets[w2 - 1]
        assert p2 / p1 == pytest.approx(f2 / f1)

    def test_reference_value(self):
        # four-factor product recomputed independently:
        # exp(alpha*L) * NF * R_s * h * f at the grid center
        grid = build_grid(15e12 / 601)
        center = 301
        value = ase_power(FLAT_NO_ISRS, grid, center)
        alpha = 0.2 * math.log(10) / 10
        oracle = math.exp(alpha * 80) * 10 ** 0.5 * grid.baud_rate * 6.62607015e-34 * 190.9e12
        assert value == pytest.approx(oracle, rel=1e-12)
        # frozen at 25 GHz spacing for the same parameter set
        grid25 = build_grid(25e9)
        mid = ase_power(FLAT_NO_ISRS, grid25, 300)
        f_mid = grid25.center_frequency + grid25.channel_offsets[299]
        assert mid == pytest.approx(3.981089731986126e-07 * f_mid / 190.9e12, rel=1e-9)


class TestNliCoefficient:
    def test_quadratic_in_gamma(self):
        grid = build_grid(25e9)
        eta1 = nli_coefficient(GnParams(isrs_enabled=False, nonlinear_coeff=1.2), grid, 10)
        eta2 = nli_coefficient(GnParams(isrs_enabled=False, nonlinear_coeff=2.4), grid, 10)
        assert eta2 == pytest.approx(4 * eta1)

    def test_decreases_with_baud(self):
        eta_fast = nli_coefficient(FLAT_NO_ISRS, build_grid(50e9), 10)
        eta_slow = nli_coefficient(FLAT_NO_ISRS, build_grid(25e9), 10)
        assert eta_fast < eta_slow

    def test_zero_dispersion_rejected(self):
        grid = build_grid(25e9)
        with pytest.raises(ValueError):
            nli_coefficient(GnParams(isrs_enabled=False, beta2_ps2_km=0.0), grid, 10)

    def test_reference_value(self):
        # Eq. recomputed term by term in SI units
        grid = build_grid(25e9)
        value = nli_coefficient(FLAT_NO_ISRS, grid, 300)
        assert value == pytest.approx(2864.4880244294295, rel=1e-9)


class TestFirstSpanSnr:
    def test_ase_limited_at_low_power(self):
        grid = build_grid(25e9)
        params = GnParams(isrs_enabled=False, psd=1e-18)
        w = 300
        snr = first_span_snr(params, grid, w)
        assert snr == pytest.approx(params.channel_power(grid) / ase_power(params, grid, w), rel=1e-6)

    def test_unique_snr_maximum_at_stationary_power(self):
        grid = build_grid(25e9)
        w = 300
        pase = ase_power(FLAT_NO_ISRS, grid, w)
        eta = nli_coefficient(FLAT_NO_ISRS, grid, w)
        p_star = (pase / (2 * eta)) ** (1 / 3)

        def snr_at(psd):
            return first_span_snr(GnParams(isrs_enabled=False, psd=psd), grid, w)

        best_psd = p_star / grid.channel_spacing
        peak = snr_at(best_psd)
        for factor in (0.25, 0.5, 0.9, 1.1, 2.0, 4.0):
            assert snr_at(best_psd * factor) < peak

    def test_paper_psd_gives_p0(self):
        grid = build_grid(25e9)
        params = GnParams()  # psd = 14 uW/GHz
        assert params.channel_power(grid) == pytest.approx(0.35e-3)


class TestBandWorstSnr:
    def test_single_channel_band(self):
        grid = build_grid(5.1e12)  # 2 channels: U gets 0? -> 15/5.1 = 2 channels
        # 2 channels split 0/1/1 over U/L/C; U is empty, L and C single
        assert grid.band_size("L") == 1
        snr = band_worst_snr(FLAT_NO_ISRS, grid, "L")
        w = grid.band_channels("L").start + 1
        assert snr == pytest.approx(linear_to_db(first_span_snr(FLAT_NO_ISRS, grid, w)))
        with pytest.raises(ValueError):
            band_worst_snr(FLAT_NO_ISRS, grid, "U")

    def test_worst_is_min_over_band(self):
        grid = build_grid(1.875e12)
        params = GnParams()
        for band in BANDS:
            worst = band_worst_snr(params, grid, band)
            per_channel = [
                linear_to_db(first_span_snr(params, grid, w + 1)) for w in grid.band_channels(band)
            ]
            assert worst == pytest.approx(min(per_channel))

    def test_isrs_orders_bands_u_best_c_worst(self):
        grid = build_grid(25e9)
        params = GnParams(isrs_enabled=True)
        u, l, c = (band_worst_snr(params, grid, b) for b in BANDS)
        assert u > l > c

    def test_configured_defaults(self):
        config = PhyConfig()
        grid = build_grid(25e9)
        rwba = {s.band: s for s in config.band_specs(grid, "RWBA")}
        assert (rwba["U"].first_span_snr_db, rwba["L"].first_span_snr_db, rwba["C"].first_span_snr_db) == (24.8, 24.5, 20.4)
        assert all(s.margin_db == 0.0 for s in rwba.values())
        rwa = {s.band: s for s in config.band_specs(grid, "RWA")}
        assert (rwa["U"].margin_db, rwa["L"].margin_db, rwa["C"].margin_db) == (4.4, 4.1, 0.0)
        for spec in rwa.values():
            assert spec.first_span_snr_db - spec.margin_db == pytest.approx(20.4)


class TestPathSnr:
    def test_identity_case(self):
        assert path_snr_db(20.4, 1, 0.0) == pytest.approx(20.4)

    def test_ten_spans(self):
        assert path_snr_db(20.4, 10, 0.0) == pytest.approx(10.4)

    def test_four_spans(self):
        assert path_snr_db(24.8, 4, 0.0) == pytest.approx(18.779400086720376, abs=1e-12)

    def test_rejects_zero_spans(self):
        with pytest.raises(ValueError):
            path_snr_db(20.4, 0)

    @given(st.integers(min_value=1, max_value=64), st.floats(min_value=-10, max_value=40))
    @settings(max_examples=50, deadline=None)
    def test_doubling_spans_costs_3db(self, n, snr1):
        assert path_snr_db(snr1, 2 * n) == pytest.approx(path_snr_db(snr1, n) - 3.010299956639812, abs=1e-9)

    @given(st.integers(min_value=1, max_value=50), st.integers(min_value=1, max_value=50))
    @settings(max_examples=50, deadline=None)
    def test_group_property(self, n1, n2):
        lhs = path_snr_db(17.0, n1 * n2)
        rhs = path_snr_db(17.0, n1) - 10 * math.log10(n2)
        assert lhs == pytest.approx(rhs, abs=1e-9)


class TestSelectModulation:
    def test_boundary_thresholds(self):
        top = select_modulation(DEFAULT_MODULATIONS, 24.7)
        assert top is not None and top.name == "PM-256QAM" and top.spectral_efficiency == 12.5
        assert select_modulation(DEFAULT_MODULATIONS, 3.69) is None
        assert select_modulation(DEFAULT_MODULATIONS, 3.7).name == "PM-BPSK"

    def test_mid_table(self):
        fmt = select_modulation(DEFAULT_MODULATIONS, 20.4)
        assert fmt.name == "PM-64QAM"
        assert fmt.spectral_efficiency * 25e9 == pytest.approx(235e9)

    def test_prefix_restriction(self):
        table = DEFAULT_MODULATIONS.prefix(1)
        assert select_modulation(table, 30.0).name == "PM-BPSK"
        with pytest.raises(ValueError):
            DEFAULT_MODULATIONS.prefix(0)
        with pytest.raises(ValueError):
            DEFAULT_MODULATIONS.prefix(9)

    def test_table_must_increase(self):
        with pytest.raises(ValueError):
            ModulationTable((ModulationFormat("a", 2.0, 5.0), ModulationFormat("b", 1.0, 7.0)))
        with pytest.raises(ValueError):
            ModulationTable((ModulationFormat("a", 1.0, 7.0), ModulationFormat("b", 2.0, 5.0)))


class TestCapacityMatrix:
    @pytest.fixture(scope="class")
    def setup(self, data_dir):
        topology = load_topology(data_dir / "example4.csv")
        routes = candidate_routes(topology, 3)
        grid = build_grid(25e9)
        config = PhyConfig()
        return topology, routes, grid, config

    def test_rwba_dominates_rwa(self, setup):
        _, routes, grid, config = setup
        rwба = capacity_matrix(routes, config.band_specs(grid, "RWBA"), grid, config.modulations, "RWBA")
        rwa = capacity_matrix(routes, config.band_specs(grid, "RWA"), grid, config.modulations, "RWA")
        for key, by_band in rwба.per_band.items():
            for band in BANDS:
                assert by_band[band] >= rwa.flat[key]

    def test_single_format_restriction(self, setup):
        _, routes, grid, config = setup
        matrix = capacity_matrix(routes, config.band_specs(grid, "RWA"), grid, config.modulations, "RWA", formats_allowed=1)
        values = {v for v in matrix.flat.values() if v > 0}
        assert values == {1.6 * 25e9}

    def test_entries_match_per_path_recomputation(self, setup):
        _, routes, grid, config = setup
        specs = config.band_specs(grid, "RWBA")
        matrix = capacity_matrix(routes, specs, grid, config.modulations, "RWBA")
        for (s, d), route_list in routes.items():
            for route in route_list:
                for spec in specs:
                    snr = spec.first_span_snr_db - 10 * math.log10(route.span_total) - spec.margin_db
                    fmt = select_modulation(config.modulations, snr)
                    expected = fmt.spectral_efficiency * grid.baud_rate if fmt else 0.0
                    assert matrix.get(s, d, route.route_index, spec.band) == pytest.approx(expected)

    def test_capacity_nonincreasing_in_span_count(self, setup):
        _, routes, grid, config = setup
        specs = config.band_specs(grid, "RWBA")
        matrix = capacity_matrix(routes, specs, grid, config.modulations, "RWBA")
        for (s, d), route_list in routes.items():
            for r1, r2 in zip(route_list, route_list[1:]):
                for band in BANDS:
                    assert matrix.get(s, d, r1.route_index, band) >= matrix.get(s, d, r2.route_index, band)

    def test_more_formats_never_decrease(self, setup):
        _, routes, grid, config = setup
        specs = config.band_specs(grid, "RWBA")
        prev = None
        for n in range(1, 9):
            matrix = capacity_matrix(routes, specs, grid, config.modulations, "RWBA", formats_allowed=n)
            if prev is not None:
                for key, by_band in matrix.per_band.items():
                    for band in BANDS:
                        assert by_band[band] >= prev.per_band[key][band]
            prev = matrix

    def test_csv_export(self, setup, tmp_path):
        _, routes, grid, config = setup
        matrix = capacity_matrix(routes, config.band_specs(grid, "RWBA"), grid, config.modulations, "RWBA")
        out = tmp_path / "caps.csv"
        matrix.write_csv(out)
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "s,d,k,band,capacity_bps"
        assert len(lines) == 1 + 3 * len(matrix.per_band)


class TestPhyConfigFile:
    def test_toml_roundtrip(self, data_dir):
        config = load_phy_config(data_dir / "phy.toml")
        assert config.band_snr_db == {"U": 24.8, "L": 24.5, "C": 20.4}
        assert config.rwa_margin_db == {"U": 4.4, "L": 4.1, "C": 0.0}
        assert config.gn.span_length_km == 80.0
        assert not config.estimate_band_snr

    def test_json_overrides(self, tmp_path):
        path = tmp_path / "phy.json"
        path.write_text('{"band_snr_db": {"C": 21.0}, "gn": {"noise_figure_db": 6.0}}')
        config = load_phy_config(path)
        assert config.band_snr_db["C"] == 21.0
        assert config.band_snr_db["U"] == 24.8
        assert config.gn.noise_figure_db == 6.0
