import math

from marshmallow import (
    Schema,
    validates,
    validates_schema,
    ValidationError,
    fields,
    post_load,
    validate,
)

from ... import (
    ALLOWED_BAGS_MS,
    DEFAULT_EPSILON,
    DEFAULT_PROP_DELAY_US,
    DEFAULT_QUEUING_CAPACITY,
    DEFAULT_RUN_MAFS,
    DEFAULT_WINDOW_N,
    MAX_FRAME_SIZE,
    MIN_FRAME_SIZE,
)
from ...app_specs import get_app_spec, get_supported_apps_str
from ...utils.framing import VirtualLinkConfig
from ...utils.generating import AppGeneratorState
from ...utils.monitoring import ValueLaw, VariationLaw
from ...utils.partitioning import (
    MajorFrame,
    PartitionConfig,
    PartitionWindow,
    PortKind,
    validate_major_frame,
)
from .fault_scenario import FaultScenarioSchema


class WindowSchema(Schema):
    partition = fields.Int(required=True)
    offset_us = fields.Int(required=True)
    duration_us = fields.Int(required=True)

    @post_load
    def make(self, data, **kwargs):
        return PartitionWindow(data["partition"], data["offset_us"], data["duration_us"])


class MajorFrameSchema(Schema):
    maf_duration_us = fields.Int(required=True)
    windows = fields.List(fields.Nested(WindowSchema), load_default=list)

    @post_load
    def make(self, data, **kwargs):
        return MajorFrame(data["maf_duration_us"], tuple(data["windows"]))


class PortSchema(Schema):
    kind = fields.Str(load_default="queuing", validate=validate.OneOf([k.value for k in PortKind]))
    capacity = fields.Int(load_default=DEFAULT_QUEUING_CAPACITY, validate=validate.Range(min=1))


class GeneratorSchema(Schema):
    """Initial kinematic state of an application and its constant rates."""

    latitude = fields.Float(load_default=0.0, validate=validate.Range(min=-90, max=90))
    longitude = fields.Float(load_default=0.0, validate=validate.Range(min=-180, max=180))
    speed = fields.Float(load_default=0.0)
    heading = fields.Float(load_default=0.0, validate=validate.Range(min=0, max=360, max_inclusive=False))
    accel = fields.Float(load_default=0.0)
    turn_rate = fields.Float(load_default=0.0)

    @post_load
    def make(self, data, **kwargs):
        return AppGeneratorState(**data)


class PartitionSchema(Schema):
    partition_id = fields.Int(required=True, validate=validate.Range(min=0, max=0xFF))
    app_id = fields.Int(required=True)
    port = fields.Nested(PortSchema, load_default=lambda: PortSchema().load({}))
    generator = fields.Nested(GeneratorSchema, load_default=lambda: GeneratorSchema().load({}))

    @validates("app_id")
    def validate_app_is_supported(self, app_id: int, **kwargs):
        if get_app_spec(app_id):
            return
        raise ValidationError(
            f"Application {app_id} is not supported. For now, the following is supported: [{get_supported_apps_str()}]"
        )

    @post_load
    def make(self, data, **kwargs):
        return PartitionConfig(
            partition_id=data["partition_id"],
            app_id=data["app_id"],
            generator=data["generator"],
            port_kind=PortKind(data["port"]["kind"]),
            port_capacity=data["port"]["capacity"],
        )


class VirtualLinkSchema(Schema):
    vl_id = fields.Int(required=True, validate=validate.Range(min=1, max=0xFFFF))
    bag_ms = fields.Int(required=True)
    max_frame_size = fields.Int(
        load_default=MAX_FRAME_SIZE, validate=validate.Range(min=MIN_FRAME_SIZE, max=MAX_FRAME_SIZE)
    )
    max_jitter_us = fields.Int(load_default=0, validate=validate.Range(min=0))
    source_partition = fields.Int(required=True)
    destinations = fields.List(fields.Str(), load_default=list)

    @validates("bag_ms")
    def validate_bag(self, bag_ms: int, **kwargs):
        if bag_ms not in ALLOWED_BAGS_MS:
            raise ValidationError(f"bag must be one of {','.join(str(b) for b in ALLOWED_BAGS_MS)}")

    @post_load
    def make(self, data, **kwargs):
        return VirtualLinkConfig(
            vl_id=data["vl_id"],
            bag=data["bag_ms"],
            max_frame_size=data["max_frame_size"],
            max_jitter=data["max_jitter_us"],
            source_partition=data["source_partition"],
            destinations=tuple(data["destinations"]),
        )


class ValueLawSchema(Schema):
    max_rate = fields.Float(required=True, validate=validate.Range(min=0))
    min = fields.Float(load_default=None, allow_none=True)
    max = fields.Float(load_default=None, allow_none=True)
    angular = fields.Bool(load_default=False)

    @post_load
    def make(self, data, **kwargs):
        return ValueLaw(
            max_rate=data["max_rate"],
            min=-math.inf if data["min"] is None else data["min"],
            max=math.inf if data["max"] is None else data["max"],
            angular=data["angular"],
        )


class VariationLawSchema(Schema):
    app_id = fields.Int(required=True)
    window_n = fields.Int(load_default=DEFAULT_WINDOW_N, validate=validate.Range(min=2))
    epsilon = fields.Float(load_default=DEFAULT_EPSILON, validate=validate.Range(min=0))
    values = fields.List(fields.Nested(ValueLawSchema), required=True)

    @validates_schema
    def validate_value_count(self, data, **kwargs):
        app_spec = get_app_spec(data["app_id"])
        if app_spec and len(data["values"]) != len(app_spec["value_labels"]):
            raise ValidationError(
                f"Application {data['app_id']} sends {', '.join(app_spec['value_labels'])}, "
                f"the law gives {len(data['values'])} value laws.",
                "values",
            )

    @post_load
    def make(self, data, **kwargs):
        return VariationLaw(
            app_id=data["app_id"],
            values=tuple(data["values"]),
            window_n=data["window_n"],
            epsilon=data["epsilon"],
        )


class SystemConfigSchema(Schema):
    """
    Schema for a whole system: the partition schedule, the applications, the
    virtual links and the laws the monitor checks the data against.
    Loads into a dict of domain objects.
    """

    major_frame = fields.Nested(MajorFrameSchema, required=True)
    partitions = fields.List(fields.Nested(PartitionSchema), load_default=list)
    virtual_links = fields.List(fields.Nested(VirtualLinkSchema), load_default=list)
    laws = fields.List(fields.Nested(VariationLawSchema), load_default=list)
    prop_delay_us = fields.Int(load_default=DEFAULT_PROP_DELAY_US, validate=validate.Range(min=0))
    run_mafs = fields.Int(load_default=DEFAULT_RUN_MAFS, validate=validate.Range(min=0))
    watched_vls = fields.List(fields.Int(), load_default=None, allow_none=True)
    scenario = fields.Nested(FaultScenarioSchema, load_default=None, allow_none=True)

    @validates_schema(skip_on_field_errors=False)
    def validate_references(self, data, **kwargs):
        errors: dict = {}
        partitions = data.get("partitions", [])
        partition_ids = [p.partition_id for p in partitions]
        if len(partition_ids) != len(set(partition_ids)):
            errors.setdefault("partitions", []).append("partition ids must be unique")
        if "major_frame" in data:
            for violation in validate_major_frame(data["major_frame"], partition_ids):
                errors.setdefault("major_frame", []).append(str(violation))
        vls = data.get("virtual_links", [])
        vl_ids = [vl.vl_id for vl in vls]
        if len(vl_ids) != len(set(vl_ids)):
            errors.setdefault("virtual_links", []).append("vl ids must be unique")
        sources = set()
        for vl in vls:
            if vl.source_partition not in partition_ids:
                errors.setdefault("virtual_links", []).append(
                    f"unknown partition {vl.source_partition} as source of VL {vl.vl_id}"
                )
            elif vl.source_partition in sources:
                errors.setdefault("virtual_links", []).append(
                    f"partition {vl.source_partition} already sources another VL"
                )
            sources.add(vl.source_partition)
        apps = {p.app_id for p in partitions}
        for law in data.get("laws", []):
            if law.app_id not in apps:
                errors.setdefault("laws", []).append(f"application {law.app_id} is not run by any partition")
        if errors:
            raise ValidationError(errors)
