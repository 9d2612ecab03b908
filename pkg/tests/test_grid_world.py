import numpy as np
import pytest

from mapshare.grid_world import (
    CellPos,
    MapFormatError,
    MapValueError,
    WorldMap,
    load_map,
    local_window,
    save_map,
)


def test_world_map_validates_range():
    with pytest.raises(MapValueError):
        WorldMap(2, 2, np.array([0.0, 0.5, 1.0, 1.1]))
    with pytest.raises(ValueError):
        WorldMap(2, 2, np.zeros(3))
    with pytest.raises(ValueError):
        WorldMap(0, 2, np.zeros(0))


def test_index_roundtrip():
    world = WorldMap(5, 3, np.zeros(15))
    for i in range(world.n):
        assert world.index(world.pos_of(i)) == i


def test_csv_identity_read(tmp_path):
    f = tmp_path / "m.csv"
    f.write_text("0.0,0.0\n0.0,0.0\n")
    world = load_map(f)
    assert (world.width, world.height) == (2, 2)
    assert world.occupancy.tolist() == [0.0, 0.0, 0.0, 0.0]


def test_csv_round_trip_bit_exact(tmp_path):
    rng = np.random.default_rng(5)
    occ = rng.random(48)
    world = WorldMap(8, 6, occ)
    f = tmp_path / "m.csv"
    save_map(world, f)
    again = load_map(f)
    assert np.array_equal(again.occupancy, world.occupancy)
    assert (again.width, again.height) == (8, 6)


def test_csv_errors_carry_position(tmp_path):
    f = tmp_path / "bad.csv"
    f.write_text("0.0,0.2\n0.1,oops\n")
    with pytest.raises(MapFormatError, match="line 2, field 2"):
        load_map(f)
    f.write_text("0.0,0.2\n0.1,1.5\n")
    with pytest.raises(MapValueError, match="line 2, field 2"):
        load_map(f)
    f.write_text("0.0,0.2\n0.1\n")
    with pytest.raises(MapFormatError, match="line 2"):
        load_map(f)


def test_pgm_endpoint_mapping(tmp_path):
    f = tmp_path / "m.pgm"
    f.write_bytes(b"P2\n2 1\n255\n255 0\n")
    world = load_map(f)
    assert world.occupancy.tolist() == [0.0, 1.0]


def test_pgm_partial_value():
    # pixel 51 of maxval 255 -> occupancy 1 - 51/255 = 0.8
    from mapshare.grid_world import _parse_pgm

    w, h, occ = _parse_pgm(b"P2\n1 1\n255\n51\n")
    assert occ[0] == pytest.approx(0.8, abs=1e-12)


def test_pgm_binary_matches_ascii(tmp_path):
    pixels = bytes([0, 51, 128, 255])
    p5 = tmp_path / "m5.pgm"
    p5.write_bytes(b"P5\n2 2\n255\n" + pixels)
    p2 = tmp_path / "m2.pgm"
    p2.write_bytes(b"P2\n# comment\n2 2\n255\n0 51 128 255\n")
    assert np.array_equal(load_map(p5).occupancy, load_map(p2).occupancy)


def test_pgm_rejects_pixel_above_maxval(tmp_path):
    f = tmp_path / "m.pgm"
    f.write_bytes(b"P2\n2 1\n100\n50 101\n")
    with pytest.raises(MapFormatError, match="maxval"):
        load_map(f)


def test_pgm_save_load(tmp_path):
    world = WorldMap(3, 2, np.array([0.0, 0.5, 1.0, 0.25, 0.75, 0.1]))
    f = tmp_path / "m.pgm"
    save_map(world, f)
    again = load_map(f)
    assert np.allclose(again.occupancy, world.occupancy, atol=1 / 255.0 + 1e-9)


def test_local_window_interior():
    world = WorldMap(64, 64, np.zeros(64 * 64))
    lm = local_window(world, CellPos(30, 30), 7, 7)
    assert len(lm) == 49
    assert world.index(CellPos(30, 30)) in lm.cells
    assert lm.center == CellPos(30, 30)


def test_local_window_corner_clipping():
    world = WorldMap(64, 64, np.zeros(64 * 64))
    lm = local_window(world, CellPos(0, 0), 7, 7)
    assert len(lm) == 16  # 4x4 survives
    assert lm.origin == CellPos(-3, -3)


def test_local_window_fits_near_edge():
    world = WorldMap(30, 30, np.zeros(900))
    lm = local_window(world, CellPos(1, 14), 3, 3)
    assert len(lm) == 9


def test_local_window_rejects_even_dims(flat_world):
    with pytest.raises(ValueError):
        local_window(flat_world, CellPos(2, 2), 4, 3)
    with pytest.raises(ValueError):
        local_window(flat_world, CellPos(2, 2), 3, 2)


def test_local_window_values_match_world():
    rng = np.random.default_rng(11)
    world = WorldMap(9, 7, rng.random(63))
    lm = local_window(world, CellPos(3, 4), 5, 3)
    for cell, value in zip(lm.cells, lm.values):
        assert value == world.occupancy[cell]


def test_windows_cover_whole_map(flat_world):
    seen = set()
    for r in range(flat_world.height):
        for c in range(flat_world.width):
            seen.update(local_window(flat_world, CellPos(r, c), 3, 3).cells)
    assert seen == set(range(flat_world.n))
