from __future__ import annotations

"""
This maps the flight-management applications hosted by the partitions to the
values they put on the wire.
Note: the order of value labels is the order of values in the frame payload.
"""


mapping = [
    dict(
        app_id=1,
        app_name="gps",
        value_labels=("latitude", "longitude"),
        units=("°", "°"),
    ),
    dict(
        app_id=2,
        app_name="speed",
        value_labels=("speed",),
        units=("m/s",),
    ),
    dict(
        app_id=3,
        app_name="angle",
        value_labels=("heading",),
        units=("°",),
    ),
]


def get_app_spec(app_id: int) -> dict | None:
    """
    Find the specs of an application by id.
    """
    for app_spec in mapping:
        if app_spec["app_id"] == app_id:
            return app_spec.copy()
    return None


def get_supported_apps_str() -> str:
    """A string - list of supported applications, also revealing their values"""
    return ", ".join(
        [
            f"{app_spec['app_id']}={app_spec['app_name']} ({', '.join(app_spec['value_labels'])})"
            for app_spec in mapping
        ]
    )
