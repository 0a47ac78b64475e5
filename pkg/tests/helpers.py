"""Small record and layout builders shared by the unit tests."""

from lablayout.assets import asset_base_from_list


def record(asset_id, short, long, height, asset_type="room_asset", category="furniture", surface=None, safety=None, synonyms=()):
    out = {
        "asset_id": asset_id,
        "asset_type": asset_type,
        "category": category,
        "subtype": "",
        "synonyms": list(synonyms),
        "description": "",
        "bbox": {"short_side": short, "long_side": long, "height": height},
        "scale_factor": 1.0,
        "front_direction": [0.0, 1.0, 0.0],
        "coordinate_system": "z_up",
        "usd_path": "",
        "safety": dict(safety or {}),
    }
    if surface is not None:
        out["provides_surface"] = surface
    return out


def small_base():
    """Bench 1.0 x 0.6 x 0.9 (a surface), a 1 x 1 box, and two point-like items."""
    return asset_base_from_list(
        [
            record("Bench", 0.6, 1.0, 0.9, surface=True),
            record("Box", 1.0, 1.0, 1.0, surface=False),
            record("Vial", 0.02, 0.02, 0.05, asset_type="instrument", category="glassware", surface=False),
            record("Tube", 0.02, 0.04, 0.05, asset_type="instrument", category="glassware", surface=False),
        ]
    )
