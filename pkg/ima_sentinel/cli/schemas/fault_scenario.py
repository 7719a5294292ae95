from marshmallow import (
    Schema,
    ValidationError,
    fields,
    post_load,
    validate,
)

from ...utils.injecting import (
    CorruptBits,
    CorruptValue,
    Delay,
    Drop,
    Duplicate,
    FaultScenario,
    RogueVl,
    ScheduleShift,
)

VL_ID = validate.Range(min=0, max=0xFFFF)
NTH = validate.Range(min=1)


class DropSchema(Schema):
    vl = fields.Int(required=True, validate=VL_ID)
    nth = fields.Int(load_default=1, validate=NTH)

    @post_load
    def make(self, data, **kwargs):
        return Drop(**data)


class DelaySchema(Schema):
    vl = fields.Int(required=True, validate=VL_ID)
    nth = fields.Int(load_default=1, validate=NTH)
    delta = fields.Int(required=True, data_key="delta_us", validate=validate.Range(min=0))

    @post_load
    def make(self, data, **kwargs):
        return Delay(**data)


class DuplicateSchema(Schema):
    vl = fields.Int(required=True, validate=VL_ID)
    nth = fields.Int(load_default=1, validate=NTH)

    @post_load
    def make(self, data, **kwargs):
        return Duplicate(**data)


class CorruptValueSchema(Schema):
    app = fields.Int(required=True)
    nth_sample = fields.Int(load_default=1, validate=NTH)
    value_index = fields.Int(load_default=0, validate=validate.Range(min=0))
    delta = fields.Float(required=True)

    @post_load
    def make(self, data, **kwargs):
        return CorruptValue(**data)


class CorruptBitsSchema(Schema):
    vl = fields.Int(required=True, validate=VL_ID)
    nth = fields.Int(load_default=1, validate=NTH)
    byte_index = fields.Int(required=True, validate=validate.Range(min=0))
    xor_mask = fields.Int(required=True, validate=validate.Range(min=1, max=0xFF))

    @post_load
    def make(self, data, **kwargs):
        return CorruptBits(**data)


class RogueVlSchema(Schema):
    vl_id = fields.Int(required=True, validate=VL_ID)
    times = fields.List(fields.Int(validate=validate.Range(min=0)), data_key="times_us", required=True)

    @post_load
    def make(self, data, **kwargs):
        return RogueVl(vl_id=data["vl_id"], times=tuple(data["times"]))


class ScheduleShiftSchema(Schema):
    partition = fields.Int(required=True)
    delta = fields.Int(required=True, data_key="delta_us")

    @post_load
    def make(self, data, **kwargs):
        return ScheduleShift(**data)


FAULT_SCHEMAS = {
    "drop": DropSchema,
    "delay": DelaySchema,
    "duplicate": DuplicateSchema,
    "corrupt_value": CorruptValueSchema,
    "corrupt_bits": CorruptBitsSchema,
    "rogue_vl": RogueVlSchema,
    "schedule_shift": ScheduleShiftSchema,
}


class FaultField(fields.Field):
    """One fault object, its schema picked by the "type" key."""

    def _deserialize(self, value, attr, data, **kwargs):
        if not isinstance(value, dict) or value.get("type") not in FAULT_SCHEMAS:
            raise ValidationError(f"fault type must be one of {', '.join(FAULT_SCHEMAS)}")
        spec = {k: v for k, v in value.items() if k != "type"}
        return FAULT_SCHEMAS[value["type"]]().load(spec)


class FaultScenarioSchema(Schema):
    name = fields.Str(load_default="scenario")
    seed = fields.Int(load_default=0, validate=validate.Range(min=0, max=(1 << 64) - 1))
    faults = fields.List(FaultField(), load_default=list)

    @post_load
    def make(self, data, **kwargs):
        return FaultScenario(name=data["name"], faults=tuple(data["faults"]), seed=data["seed"])
