"""Tests for neighbor cell list construction."""

import math

import numpy as np
import pytest

from femto_handover.config import NeighborSection, ScenarioConfig
from femto_handover.neighbor_list import (
    Measurement,
    Provenance,
    Thresholds,
    build_list_fap_connected,
    build_list_macro_connected,
    build_list_traditional,
    collect_measurements,
    detectable_set,
    hidden_set,
    macro_known_locations,
    measure_for_macro,
    same_frequency_set,
    shared_channel_set,
    strong_set,
)
from femto_handover.radio import RadioEnvironment
from femto_handover.topology import FapDescriptor, MacroCell, Topology, Wall, build_topology

SERVING_CHANNEL = 0


def fap_side_measurements():
    return [
        Measurement(0, -50.0, 0, distance_m=None),  # serving FAP itself
        Measurement(1, -60.0, 1),
        Measurement(2, -65.0, 0, distance_m=15.0),
        Measurement(3, -85.0, 2, distance_m=12.0),
        Measurement(4, -95.0, 3, distance_m=30.0),
        Measurement(5, -100.0, 1, distance_m=8.0),
        Measurement(6, -70.0, 2, accessible=False),
        Measurement(7, -80.0, 3),
    ]


KNOWN = frozenset({2, 3, 4, 5})


class TestSets:
    """Test the set builders."""

    def test_detectable_drops_inaccessible(self):
        ids = [m.fap_id for m in detectable_set(fap_side_measurements(), -90.0)]
        assert ids == [0, 1, 2, 3, 7]

    def test_strong(self):
        a = detectable_set(fap_side_measurements(), -90.0)
        assert [m.fap_id for m in strong_set(a, -75.0)] == [0, 1, 2]

    def test_same_frequency(self):
        b = strong_set(detectable_set(fap_side_measurements(), -90.0), -75.0)
        assert [m.fap_id for m in same_frequency_set(b, SERVING_CHANNEL)] == [0, 2]
        assert same_frequency_set(b, 5) == []

    def test_hidden_set_bounds(self):
        """Known, accessible, within d_max, and weak or co-channel."""
        d = hidden_set(fap_side_measurements(), KNOWN, -75.0, SERVING_CHANNEL, 20.0)
        assert sorted(m.fap_id for m in d) == [2, 3, 5]

    def test_hidden_needs_known_location(self):
        d = hidden_set(fap_side_measurements(), frozenset(), -75.0, SERVING_CHANNEL, 20.0)
        assert d == []

    def test_shared_channel_keeps_nearest(self):
        strong = [
            Measurement(1, -60.0, 1, distance_m=12.0),
            Measurement(2, -70.0, 1, distance_m=5.0),
            Measurement(3, -65.0, 2),
        ]
        assert [m.fap_id for m in shared_channel_set(strong)] == [1]

    def test_shared_channel_without_distance_uses_rssi(self):
        strong = [Measurement(1, -60.0, 1), Measurement(2, -70.0, 1), Measurement(3, -72.0, 1)]
        assert sorted(m.fap_id for m in shared_channel_set(strong)) == [2, 3]


class TestFapConnected:
    """Test the list for an MS served by an FAP."""

    def test_counts_and_order(self):
        """Strong entries by RSSI, then hidden entries by distance."""
        nl = build_list_fap_connected(fap_side_measurements(), SERVING_CHANNEL, KNOWN, Thresholds(), serving_id=0)
        assert (nl.n_det, nl.n_1, nl.n_2, nl.m, nl.n_f) == (4, 2, 1, 3, 4)
        assert nl.fap_ids == [1, 5, 3, 2]
        assert len(nl) == nl.n_f
        assert nl.hidden_ids() == {2, 3, 5}
        assert nl.entries[0].provenance is Provenance.STRONG

    def test_serving_never_listed(self):
        nl = build_list_fap_connected(fap_side_measurements(), SERVING_CHANNEL, KNOWN, Thresholds(), serving_id=0)
        assert 0 not in nl

    def test_inaccessible_never_listed(self):
        nl = build_list_fap_connected(fap_side_measurements(), SERVING_CHANNEL, KNOWN | {6}, Thresholds(), serving_id=0)
        assert 6 not in nl

    def test_cochannel_exclusion(self):
        """The variant drops co-channel FAPs from the hidden set."""
        thresholds = Thresholds(hidden_excludes_cochannel=True)
        nl = build_list_fap_connected(fap_side_measurements(), SERVING_CHANNEL, KNOWN, thresholds, serving_id=0)
        assert nl.fap_ids == [1, 5, 3]
        assert nl.m == 2
        assert nl.n_f == 3

    def test_macro_fallback(self):
        measurements = fap_side_measurements()
        assert build_list_fap_connected(measurements, 0, KNOWN, Thresholds(), -80.0).includes_macro
        assert not build_list_fap_connected(measurements, 0, KNOWN, Thresholds(), -95.0).includes_macro
        assert build_list_fap_connected(measurements, 0, KNOWN, Thresholds(), None).includes_macro

    def test_empty_measurements(self):
        nl = build_list_fap_connected([], 0, frozenset(), Thresholds())
        assert len(nl) == 0
        assert nl.n_f == 0

    def test_smaller_than_traditional(self):
        """Same-channel strong FAPs are filtered; weak detected FAPs stay out."""
        measurements = fap_side_measurements()
        proposed = build_list_fap_connected(measurements, SERVING_CHANNEL, frozenset(), Thresholds(), serving_id=0)
        traditional = build_list_traditional(measurements, -90.0, serving_id=0)
        assert len(proposed) < len(traditional)


class TestMacroConnected:
    """Test the list for an MS served by the macro BS."""

    def measurements(self):
        return [
            Measurement(1, -60.0, 1, distance_m=12.0),
            Measurement(2, -70.0, 1, distance_m=5.0),
            Measurement(3, -65.0, 2),
            Measurement(4, -88.0, 3, distance_m=10.0),
        ]

    def test_counts_and_order(self):
        nl = build_list_macro_connected(self.measurements(), frozenset({1, 2, 4}), Thresholds())
        assert (nl.n_det, nl.n_1, nl.n_2, nl.m, nl.n_f) == (4, 3, 1, 3, 5)
        assert nl.fap_ids == [3, 2, 4, 1]
        assert not nl.includes_macro

    def test_nearest_shared_member_counted_in_m_listed_once(self):
        """The kept member of a shared channel is in D too; m counts it, the list holds it once."""
        nl = build_list_macro_connected(self.measurements(), frozenset({1, 2, 4}), Thresholds())
        d = hidden_set(self.measurements(), frozenset({1, 2, 4}), -75.0, None, 20.0, cochannel={1})
        assert {m.fap_id for m in d} == {1, 2, 4}
        assert nl.m == len(d)
        assert nl.fap_ids.count(2) == 1
        assert len(nl) <= nl.n_f
        strong_kept = {3, 2}
        assert len(nl) == len(strong_kept) + len({m.fap_id for m in d} - strong_kept)

    def test_cochannel_exclusion(self):
        nl = build_list_macro_connected(
            self.measurements(), frozenset({1, 2, 4}), Thresholds(hidden_excludes_cochannel=True)
        )
        assert nl.fap_ids == [3, 2, 4]
        assert nl.n_f == 3


class TestTraditional:
    """Test the baseline list."""

    def test_everything_detectable(self):
        nl = build_list_traditional(fap_side_measurements(), -90.0, serving_id=0)
        assert nl.fap_ids == [1, 2, 7, 3]
        assert nl.scheme == "traditional"
        assert nl.hidden_ids() == set()

    def test_macro_entry(self):
        assert build_list_traditional([], -90.0, -85.0).includes_macro
        assert not build_list_traditional([], -90.0, -95.0).includes_macro
        assert not build_list_traditional([], -90.0).includes_macro


class TestThresholds:
    def test_from_section(self):
        thresholds = Thresholds.from_section(NeighborSection(s_t0_dbm=-92, s_t1_dbm=-70, d_max_m=25))
        assert thresholds == Thresholds(-92.0, -70.0, 25.0, False)


class TestMeasurements:
    """Test measurement collection over a topology."""

    def topology(self, wall_db: float = 40.0) -> Topology:
        faps = (
            FapDescriptor(fap_id=0, position=(0.0, 0.0)),
            FapDescriptor(fap_id=1, position=(25.0, 0.0)),
            FapDescriptor(fap_id=2, position=(500.0, 0.0)),
        )
        walls = (Wall((20.0, -5.0), (20.0, 5.0), wall_db),)
        return Topology(macro_bs=MacroCell(), faps=faps, walls=walls, coordination_range=30.0)

    def test_distance_only_for_known(self):
        env = RadioEnvironment(self.topology())
        measurements = collect_measurements(env, (12.0, 0.0), None, frozenset({1}))
        by_id = {m.fap_id: m for m in measurements}
        assert set(by_id) == {0, 1}
        assert by_id[1].distance_m == pytest.approx(13.0)
        assert by_id[0].distance_m is None

    def test_known_faps_measured_beyond_range(self):
        env = RadioEnvironment(self.topology())
        measurements = collect_measurements(env, (12.0, 0.0), None, frozenset({2}))
        assert 2 in {m.fap_id for m in measurements}

    def test_hidden_fap_behind_wall(self):
        """A walled-off neighbor is missed by the traditional list and recovered as hidden."""
        topology = self.topology()
        env = RadioEnvironment(topology)
        position = (12.0, 0.0)
        known = topology.known_locations(0)
        measurements = collect_measurements(env, position, None, known)
        assert env.fap_rssi(1, position) < -90.0
        proposed = build_list_fap_connected(measurements, 0, known, Thresholds(), serving_id=0)
        traditional = build_list_traditional(measurements, -90.0, serving_id=0)
        assert 1 in proposed
        assert 1 in proposed.hidden_ids()
        assert 1 not in traditional

    def test_macro_side_knowledge(self):
        topology = self.topology(wall_db=0.0)
        assert macro_known_locations(topology, [0]) == frozenset({0, 1})
        env = RadioEnvironment(topology)
        measurements, known = measure_for_macro(env, (12.0, 0.0), None, Thresholds())
        assert known == frozenset({0, 1})
        assert all(m.distance_m is not None for m in measurements if m.fap_id in known)


def random_measurements(rng: np.random.Generator, count: int = 40):
    return [
        Measurement(
            fap_id=i,
            rssi_dbm=float(rng.uniform(-110.0, -40.0)),
            frequency_channel=int(rng.integers(4)),
            distance_m=float(rng.uniform(0.0, 40.0)) if rng.random() < 0.5 else None,
            accessible=bool(rng.random() < 0.9),
        )
        for i in range(count)
    ]


def known_of(measurements) -> frozenset:
    return frozenset(m.fap_id for m in measurements if m.distance_m is not None)


class TestListProperties:
    """Properties over random measurement sets and generated topologies."""

    @pytest.mark.parametrize("seed", range(5))
    def test_strong_set_shrinks_as_threshold_rises(self, seed):
        rng = np.random.default_rng(seed)
        for _ in range(20):
            measurements = random_measurements(rng)
            known = known_of(measurements)
            sizes = [
                build_list_fap_connected(measurements, 0, known, Thresholds(s_t1=s_t1)).n_1
                for s_t1 in (-85.0, -80.0, -75.0, -70.0, -60.0)
            ]
            assert sizes == sorted(sizes, reverse=True)

    @pytest.mark.parametrize("seed", range(5))
    def test_proposed_within_traditional_plus_hidden(self, seed):
        rng = np.random.default_rng(seed)
        for _ in range(50):
            measurements = random_measurements(rng)
            known = known_of(measurements)
            fap = build_list_fap_connected(measurements, int(rng.integers(4)), known, Thresholds(), serving_id=0)
            macro = build_list_macro_connected(measurements, known, Thresholds())
            assert len(fap) <= len(build_list_traditional(measurements, -90.0, serving_id=0)) + fap.m
            assert len(macro) <= len(build_list_traditional(measurements, -90.0)) + macro.m
            assert fap.n_f == fap.n_1 - fap.n_2 + fap.m
            assert len(set(fap.fap_ids)) == len(fap)

    @pytest.mark.parametrize("seed", range(4))
    def test_known_weak_faps_always_listed(self, seed):
        """Every SON-known, accessible FAP within d_max below S_T1 is in the proposed list."""
        config = ScenarioConfig().with_overrides(
            {"topology.n_faps": 400, "topology.macro_radius_m": 350.0, "topology.wall_attenuation_db": 35.0}
        )
        topology = build_topology(config, seed, warn=False)
        env = RadioEnvironment(topology, config.radio)
        thresholds = Thresholds.from_section(config.neighbor)
        rng = np.random.default_rng(seed)
        checked = 0
        for index in rng.integers(len(topology.faps), size=40):
            serving = topology.faps[int(index)]
            known = topology.known_locations(serving.fap_id)
            r = serving.radius * math.sqrt(rng.random())
            a = rng.uniform(0.0, 2 * math.pi)
            position = (serving.position[0] + r * math.cos(a), serving.position[1] + r * math.sin(a))
            measurements = collect_measurements(env, position, None, known)
            proposed = build_list_fap_connected(
                measurements, serving.frequency_channel, known, thresholds, serving_id=serving.fap_id
            )
            for m in measurements:
                if m.fap_id == serving.fap_id or m.fap_id not in known or not m.accessible:
                    continue
                if m.distance_m <= thresholds.d_max and m.rssi_dbm < thresholds.s_t1:
                    assert m.fap_id in proposed
                    checked += 1
        assert checked > 0
