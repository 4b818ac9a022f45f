"""Problem-instance containers shared by the solver, bound, and simulation layers.

A :class:`CodingInstance` bundles one coding problem: a variant tag plus the
distributions, auxiliary kernels, deterministic maps, distortion or cost
functions, target level(s) D and multiplier(s) lambda that the second-order
evaluators consume.  Instances are immutable and JSON-serializable (the
optional simulation deviation handle is in-process only).
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InvalidInputError, ShapeError
from .probkit import (
    Alphabet,
    CondKernel,
    ProbVec,
    RealFunc,
    _domain_shape,
    as_func,
    product_alphabet,
)

VARIANTS = (
    "LossySC",
    "WynerZiv",
    "IndirectWZ",
    "MultiDistortionWZ",
    "HeegardBerger",
    "ChannelCost",
    "GelfandPinsker",
)


@dataclass(frozen=True, init=False)
class DetMap:
    """Deterministic map from a product of alphabets to one alphabet."""

    inputs: tuple[Alphabet, ...]
    output: Alphabet
    table: np.ndarray  # int indices into output, shape = input sizes

    def __init__(self, inputs, output: Alphabet, table):
        if isinstance(inputs, Alphabet):
            inputs = (inputs,)
        inputs = tuple(inputs)
        shape = _domain_shape(inputs)
        table = np.asarray(table)
        if table.dtype.kind in "US" or (table.dtype == object):
            table = np.vectorize(output.index)(table)
        table = np.asarray(table, dtype=int).reshape(shape)
        if table.min(initial=0) < 0 or table.max(initial=0) >= output.size:
            raise InvalidInputError("map table indexes outside the output alphabet")
        table = table.copy()
        table.flags.writeable = False
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "output", output)
        object.__setattr__(self, "table", table)

    def apply_indices(self, *idx) -> np.ndarray:
        return self.table[idx]

    def compose_cost(self, cost: RealFunc, arg: int = 1) -> RealFunc:
        """Pull a cost on (..., output, ...) back through the map.

        ``arg`` is the position of the output alphabet in ``cost.domain``;
        the result lives on cost.domain with that factor replaced by the
        map's input factors.
        """
        if cost.domain[arg] != self.output:
            raise ShapeError("cost factor does not match the map output alphabet")
        vals = np.moveaxis(cost.values, arg, -1)
        picked = vals[..., self.table]          # (*other, *inputs)
        picked = np.moveaxis(picked, range(-len(self.inputs), 0),
                             range(arg, arg + len(self.inputs)))
        domain = cost.domain[:arg] + self.inputs + cost.domain[arg + 1:]
        return RealFunc(domain, picked)

    def to_json_dict(self) -> dict:
        return {
            "inputs": [list(a.symbols) for a in self.inputs],
            "output": list(self.output.symbols),
            "table": [self.output.symbols[i] for i in self.table.ravel()],
        }

    @classmethod
    def from_json_dict(cls, obj: dict, input_names=(), output_name="") -> "DetMap":
        input_names = tuple(input_names) + ("",) * (len(obj["inputs"]) - len(input_names))
        inputs = tuple(Alphabet(tuple(a), name=nm) for a, nm in zip(obj["inputs"], input_names))
        output = Alphabet(tuple(obj["output"]), name=output_name)
        return cls(inputs, output, np.asarray(obj["table"], dtype=object))


def _as_tuple(x) -> tuple[float, ...]:
    if x is None:
        return ()
    if np.isscalar(x):
        return (float(x),)
    return tuple(float(v) for v in x)


@dataclass(frozen=True)
class CodingInstance:
    """One coding problem: variant tag plus all of its components.

    Field usage by variant (unused fields stay None):

    * ``LossySC``: source P_X, test_channel P_{Y|X}, distortions=(d(X,Y),).
    * ``WynerZiv``: source P_X, side_channel P_{Y|X}, aux_channel P_{U|X},
      recon_map z(U,Y)->Z, distortions=(d(X,Z),).
    * ``IndirectWZ`` / ``MultiDistortionWZ``: hidden_joint P_{F,X,Y},
      aux_channel P_{U|X}, recon_map z(U,Y)->Z, distortions=(d_i(F,Z),...).
    * ``HeegardBerger``: source P_X, side_channel P_{Y|X}, aux_channel
      P_{U1,U2|X} (output is the product alphabet of aux_parts), recon_map
      z1(U1)->Z1, recon_map2 z2(U1,U2,Y)->Z2, distortions=(d1(X,Z1), d2(X,Z2)).
    * ``ChannelCost``: channel P_{Y|X}, distortions=(cost(X),), source =
      input distribution (optional until solved).
    * ``GelfandPinsker``: source P_S, aux_channel P_{U|S}, emit_map
      x(S,U)->X, channel P_{Y|S,X}, distortions=(cost(S,X),).

    ``D`` and ``lam`` are tuples (length = number of distortions; length one
    for scalar problems).  ``zeta`` optionally carries a deviation-function
    handle for the simulator; it is process-local and never serialized.
    """

    variant: str
    source: ProbVec | None = None
    side_channel: CondKernel | None = None
    hidden_joint: RealFunc | None = None
    aux_channel: CondKernel | None = None
    aux_parts: tuple[Alphabet, ...] = ()
    recon_map: DetMap | None = None
    recon_map2: DetMap | None = None
    emit_map: DetMap | None = None
    channel: CondKernel | None = None
    test_channel: CondKernel | None = None
    distortions: tuple[RealFunc, ...] = ()
    D: tuple[float, ...] = ()
    lam: tuple[float, ...] = ()
    zeta: object = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise InvalidInputError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        object.__setattr__(self, "D", _as_tuple(self.D))
        object.__setattr__(self, "lam", _as_tuple(self.lam))
        for v in self.lam:
            if not math.isfinite(v) or v < 0:
                raise InvalidInputError("multipliers must be finite and >= 0")
        self._validate_shape()

    # -- validation -------------------------------------------------------
    def _need(self, *names):
        for nm in names:
            if getattr(self, nm) is None or (nm == "distortions" and not self.distortions):
                raise ShapeError(f"variant {self.variant} requires component {nm!r}")

    def _validate_shape(self):
        v = self.variant
        if v == "LossySC":
            self._need("source", "distortions")
            d = self.distortions[0]
            if d.domain[0] != self.source.alphabet:
                raise ShapeError("distortion first factor must be the source alphabet")
            if self.test_channel is not None:
                if self.test_channel.given != (self.source.alphabet,):
                    raise ShapeError("test channel must condition on the source alphabet")
                if self.test_channel.to != d.domain[1]:
                    raise ShapeError("test channel output must match the distortion")
        elif v == "WynerZiv":
            self._need("source", "side_channel", "aux_channel", "recon_map", "distortions")
            x = self.source.alphabet
            if self.side_channel.given != (x,) or self.aux_channel.given != (x,):
                raise ShapeError("side and auxiliary channels must condition on the source")
            u, y = self.aux_channel.to, self.side_channel.to
            if self.recon_map.inputs != (u, y):
                raise ShapeError("reconstruction map must take (aux, side-info)")
            d = self.distortions[0]
            if d.domain != (x, self.recon_map.output):
                raise ShapeError("distortion must live on (source, reconstruction)")
        elif v in ("IndirectWZ", "MultiDistortionWZ"):
            self._need("hidden_joint", "aux_channel", "recon_map", "distortions")
            f_a, x, y = self.hidden_joint.domain
            if self.aux_channel.given != (x,):
                raise ShapeError("auxiliary channel must condition on the observation")
            u = self.aux_channel.to
            if self.recon_map.inputs != (u, y):
                raise ShapeError("reconstruction map must take (aux, side-info)")
            for d in self.distortions:
                if d.domain != (f_a, self.recon_map.output):
                    raise ShapeError("each distortion must live on (hidden source, reconstruction)")
            if len(self.D) != len(self.distortions) or (self.lam and len(self.lam) != len(self.distortions)):
                raise ShapeError("need one D (and lambda) per distortion")
        elif v == "HeegardBerger":
            self._need("source", "side_channel", "aux_channel", "recon_map", "recon_map2", "distortions")
            if len(self.aux_parts) != 2:
                raise ShapeError("aux_parts must name the two auxiliary alphabets")
            u1, u2 = self.aux_parts
            x, y = self.source.alphabet, self.side_channel.to
            if self.recon_map.inputs != (u1,) or self.recon_map2.inputs != (u1, u2, y):
                raise ShapeError("reconstruction maps must take (U1) and (U1, U2, Y)")
            if len(self.distortions) != 2 or len(self.D) != 2:
                raise ShapeError("two distortions and two targets required")
        elif v == "ChannelCost":
            self._need("channel", "distortions")
            d = self.distortions[0]
            if d.domain != (self.channel.from_alphabet,):
                raise ShapeError("cost must be a function of the channel input")
        elif v == "GelfandPinsker":
            self._need("source", "aux_channel", "emit_map", "channel", "distortions")
            s = self.source.alphabet
            if self.aux_channel.given != (s,):
                raise ShapeError("auxiliary channel must condition on the state")
            u = self.aux_channel.to
            if self.emit_map.inputs != (s, u):
                raise ShapeError("emission map must take (state, aux)")
            x = self.emit_map.output
            if self.channel.given != (s, x):
                raise ShapeError("channel must condition on (state, input)")
            if self.distortions[0].domain != (s, x):
                raise ShapeError("cost must live on (state, input)")

    # -- conveniences -----------------------------------------------------
    @property
    def scalar_D(self) -> float:
        if len(self.D) != 1:
            raise ShapeError("instance carries a vector of targets")
        return self.D[0]

    @property
    def scalar_lam(self) -> float:
        if len(self.lam) != 1:
            raise ShapeError("instance carries a vector of multipliers")
        return self.lam[0]

    def with_zeta(self, zeta) -> "CodingInstance":
        return replace(self, zeta=zeta)

    # -- serialization ----------------------------------------------------
    def to_json_dict(self) -> dict:
        out = {"variant": self.variant, "D": list(self.D), "lambda": list(self.lam)}
        if self.source is not None:
            out["source"] = self.source.to_json_dict()
        for nm in ("side_channel", "aux_channel", "channel", "test_channel"):
            k = getattr(self, nm)
            if k is not None:
                out[nm] = k.to_json_dict()
        if self.hidden_joint is not None:
            out["hidden_joint"] = self.hidden_joint.to_json_dict()
        for nm in ("recon_map", "recon_map2", "emit_map"):
            m = getattr(self, nm)
            if m is not None:
                out[nm] = m.to_json_dict()
        out["distortions"] = [d.to_json_dict() for d in self.distortions]
        if self.aux_parts:
            out["aux_parts"] = [list(a.symbols) for a in self.aux_parts]
        return out


def instance_digest(instance: CodingInstance) -> str:
    """Stable 12-hex digest of the canonical JSON form."""
    blob = json.dumps(instance.to_json_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


def instance_from_json_dict(obj: dict) -> CodingInstance:
    """Rebuild an instance, assigning the conventional variable names."""
    variant = obj.get("variant")
    if variant not in VARIANTS:
        raise InvalidInputError(f"unknown or missing variant {variant!r}")
    kw: dict = {"variant": variant, "D": obj.get("D", ()), "lam": obj.get("lambda", ())}
    src_name = "S" if variant == "GelfandPinsker" else "X"

    if "source" in obj:
        kw["source"] = ProbVec.from_json_dict(obj["source"], name=src_name)
    if "hidden_joint" in obj:
        kw["hidden_joint"] = RealFunc.from_json_dict(obj["hidden_joint"], names=("F", "X", "Y"))
    if "side_channel" in obj:
        kw["side_channel"] = CondKernel.from_json_dict(obj["side_channel"], names=("X", "Y"))
    if "aux_channel" in obj:
        given = "X" if variant != "GelfandPinsker" else "S"
        to = "U12" if variant == "HeegardBerger" else "U"
        kw["aux_channel"] = CondKernel.from_json_dict(obj["aux_channel"], names=(given, to))
    if "channel" in obj:
        names = ("S", "X", "Y") if variant == "GelfandPinsker" else ("X", "Y")
        kw["channel"] = CondKernel.from_json_dict(obj["channel"], names=names)
    if "test_channel" in obj:
        kw["test_channel"] = CondKernel.from_json_dict(obj["test_channel"], names=("X", "Y"))
    if "aux_parts" in obj:
        kw["aux_parts"] = tuple(
            Alphabet(tuple(a), name=f"U{i+1}") for i, a in enumerate(obj["aux_parts"])
        )
    if "recon_map" in obj:
        if variant == "HeegardBerger":
            kw["recon_map"] = DetMap.from_json_dict(obj["recon_map"], ("U1",), "Z1")
        else:
            kw["recon_map"] = DetMap.from_json_dict(obj["recon_map"], ("U", "Y"), "Z")
    if "recon_map2" in obj:
        kw["recon_map2"] = DetMap.from_json_dict(obj["recon_map2"], ("U1", "U2", "Y"), "Z2")
    if "emit_map" in obj:
        kw["emit_map"] = DetMap.from_json_dict(obj["emit_map"], ("S", "U"), "X")

    names_by_field = {
        "distortions": {
            "LossySC": ("X", "Y"), "WynerZiv": ("X", "Z"), "IndirectWZ": ("F", "Z"),
            "MultiDistortionWZ": ("F", "Z"), "ChannelCost": ("X",),
            "GelfandPinsker": ("S", "X"),
        }
    }
    ds = []
    for i, dd in enumerate(obj.get("distortions", ())):
        if variant == "HeegardBerger":
            nm = ("X", f"Z{i+1}")
        else:
            nm = names_by_field["distortions"][variant]
        ds.append(RealFunc.from_json_dict(dd, names=nm))
    kw["distortions"] = tuple(ds)
    return CodingInstance(**kw)


# ---------------------------------------------------------------------------
# builders
# ---------------------------------------------------------------------------

def lossy_sc_instance(source: ProbVec, distortion: RealFunc, D: float,
                      test_channel: CondKernel | None = None,
                      lam: float | None = None) -> CodingInstance:
    return CodingInstance(
        variant="LossySC", source=source, test_channel=test_channel,
        distortions=(distortion,), D=(float(D),),
        lam=(float(lam),) if lam is not None else (),
    )


def wz_instance(source: ProbVec, side_channel: CondKernel, aux_channel: CondKernel,
                recon_map: DetMap, distortion: RealFunc, D: float, lam: float) -> CodingInstance:
    return CodingInstance(
        variant="WynerZiv", source=source, side_channel=side_channel,
        aux_channel=aux_channel, recon_map=recon_map,
        distortions=(distortion,), D=(float(D),), lam=(float(lam),),
    )


def indirect_wz_instance(hidden_joint: RealFunc, aux_channel: CondKernel, recon_map: DetMap,
                         distortions, D, lam, multi: bool = False) -> CodingInstance:
    distortions = tuple(distortions)
    variant = "MultiDistortionWZ" if (multi or len(distortions) > 1) else "IndirectWZ"
    return CodingInstance(
        variant=variant, hidden_joint=hidden_joint, aux_channel=aux_channel,
        recon_map=recon_map, distortions=distortions, D=D, lam=lam,
    )


def heegard_berger_instance(source: ProbVec, side_channel: CondKernel,
                            aux_channel: CondKernel, aux_parts, recon_map: DetMap,
                            recon_map2: DetMap, distortions, D, lam) -> CodingInstance:
    return CodingInstance(
        variant="HeegardBerger", source=source, side_channel=side_channel,
        aux_channel=aux_channel, aux_parts=tuple(aux_parts), recon_map=recon_map,
        recon_map2=recon_map2, distortions=tuple(distortions), D=D, lam=lam,
    )


def channel_cost_instance(channel: CondKernel, cost: RealFunc, D: float,
                          input_dist: ProbVec | None = None,
                          lam: float | None = None) -> CodingInstance:
    return CodingInstance(
        variant="ChannelCost", channel=channel, source=input_dist,
        distortions=(cost,), D=(float(D),),
        lam=(float(lam),) if lam is not None else (),
    )


def gelfand_pinsker_instance(state: ProbVec, aux_channel: CondKernel, emit_map: DetMap,
                             channel: CondKernel, cost: RealFunc, D: float,
                             lam: float) -> CodingInstance:
    return CodingInstance(
        variant="GelfandPinsker", source=state, aux_channel=aux_channel,
        emit_map=emit_map, channel=channel, distortions=(cost,),
        D=(float(D),), lam=(float(lam),),
    )
