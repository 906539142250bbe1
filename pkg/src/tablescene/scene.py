"""The abstract scene model: a table slab plus identified object boxes."""
from __future__ import annotations

from dataclasses import dataclass, field, replace

from .errors import InvalidSceneError, SchemaError
from .evidence import TABLE, object_constant
from .geometry import Obb, Pose6D, TableFrame

TABLE_HALF_EXTENTS = (1.0, 1.0, 0.01)


def default_table() -> Obb:
    """2 m x 2 m x 2 cm slab whose top facet is the z = 0 plane."""
    return Obb(Pose6D((0.0, 0.0, -TABLE_HALF_EXTENTS[2])), TABLE_HALF_EXTENTS)


@dataclass(frozen=True)
class SceneObject:
    id: int
    obb: Obb

    @property
    def constant(self) -> str:
        return object_constant(self.id)


@dataclass(frozen=True)
class SceneModel:
    table: Obb = field(default_factory=default_table)
    objects: tuple[SceneObject, ...] = ()
    frame: TableFrame = field(default_factory=TableFrame)

    def __post_init__(self):
        objs = tuple(sorted(self.objects, key=lambda o: o.id))
        ids = [o.id for o in objs]
        if len(set(ids)) != len(ids):
            raise InvalidSceneError(f"duplicate object ids in {ids}")
        for i in ids:
            if not isinstance(i, int) or isinstance(i, bool):
                raise InvalidSceneError(f"object id must be an integer, got {i!r}")
        object.__setattr__(self, "objects", objs)

    @property
    def ids(self) -> list[int]:
        return [o.id for o in self.objects]

    def constants(self) -> list[str]:
        return [TABLE] + [o.constant for o in self.objects]

    def boxes(self) -> dict[str, Obb]:
        out = {TABLE: self.table}
        out.update((o.constant, o.obb) for o in self.objects)
        return out

    def object(self, object_id: int) -> SceneObject:
        for o in self.objects:
            if o.id == object_id:
                return o
        raise SchemaError(f"no object with id {object_id}")

    def pose(self, object_id: int) -> Pose6D:
        return self.object(object_id).obb.pose

    def with_pose(self, object_id: int, pose: Pose6D) -> "SceneModel":
        if object_id not in self.ids:
            raise SchemaError(f"no object with id {object_id}")
        objs = tuple(SceneObject(o.id, o.obb.with_pose(pose)) if o.id == object_id else o
                     for o in self.objects)
        return replace(self, objects=objs)

    def without(self, object_id: int) -> "SceneModel":
        return replace(self, objects=tuple(o for o in self.objects if o.id != object_id))

    def to_dict(self) -> dict:
        return {
            "table": self.table.to_dict(),
            "objects": [{"id": o.id, "obb": o.obb.to_dict()} for o in self.objects],
            "frame": self.frame.sensor_to_table.to_dict(),
        }

    @classmethod
    def from_dict(cls, d) -> "SceneModel":
        try:
            table = Obb.from_dict(d["table"]) if "table" in d else default_table()
            objects = tuple(SceneObject(int(o["id"]), Obb.from_dict(o["obb"])) for o in d["objects"])
            frame = TableFrame(Pose6D.from_dict(d["frame"])) if "frame" in d else TableFrame()
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"malformed scene: {exc}") from None
        return cls(table, objects, frame)
