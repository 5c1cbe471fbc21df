"""Fitted model: a leaf set with conditional laws, plus ancestor fallbacks.

The model is a pair (tree, laws): a suffix-free set of context keys
covering the training contexts, each carrying the conditional distribution
of the center symbol.  Ancestor nodes of the leaves (including the root)
keep their aggregate laws so that a context never seen in training can
still be resolved by its deepest stored ancestor.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .errors import CandidateError, ModeError, ParseError
from .geometry import ContextKey, Mode, num_classes
from .grid import Alphabet

FORMAT_MODEL = "pcn-model/1"
_PROB_SUM_TOL = 1e-9


@dataclass(frozen=True)
class PcnDist:
    """Conditional law of the center symbol at one node.

    ``n_occ``/``counts`` are present for fitted nodes and None for
    hand-specified models.
    """

    probs: tuple[float, ...]
    n_occ: int | None = None
    counts: tuple[int, ...] | None = None


class Pcn:
    """Context tree with conditional laws over a finite alphabet."""

    def __init__(
        self,
        alphabet: Alphabet,
        mode: Mode,
        depth: int,
        leaves: dict[ContextKey, PcnDist],
        internals: dict[ContextKey, PcnDist] | None = None,
    ):
        if not leaves:
            raise CandidateError("model needs at least one leaf")
        self.alphabet = alphabet
        self.mode = mode
        self.depth = depth
        self.leaves = dict(leaves)
        self.internals = dict(internals) if internals else {}
        self._validate()

    def _validate(self) -> None:
        for key, dist in list(self.leaves.items()) + list(self.internals.items()):
            if key.mode is not self.mode:
                raise ModeError(f"key {key} does not match model mode {self.mode.value}")
            if key.order > self.depth:
                raise ParseError(f"key {key} deeper than model depth {self.depth}")
            if len(dist.probs) != self.alphabet.size:
                raise ParseError(f"distribution at {key} has {len(dist.probs)} entries")
            if any(p < 0 for p in dist.probs) or abs(sum(dist.probs) - 1.0) > _PROB_SUM_TOL:
                raise ParseError(f"distribution at {key} is not a probability vector")
        chains = {k.frames for k in self.leaves}
        for key in self.leaves:
            for cut in range(len(key.frames)):
                if key.frames[:cut] in chains:
                    raise CandidateError(
                        f"leaf {ContextKey(self.mode, key.frames[:cut])} is a suffix of leaf {key}"
                    )
        for key in self.internals:
            if key.frames in chains:
                raise CandidateError(f"key {key} is both a leaf and an internal node")
            for cut in range(len(key.frames)):
                if key.frames[:cut] in chains:
                    raise CandidateError(f"internal node {key} extends below leaf")

    def leaf_keys(self) -> list[ContextKey]:
        return sorted(self.leaves, key=ContextKey.sort_key)

    def all_keys(self) -> list[ContextKey]:
        return sorted(list(self.leaves) + list(self.internals), key=lambda k: (k.order, k.sort_key()))

    def lookup(self, key: ContextKey) -> tuple[ContextKey, PcnDist]:
        """Deepest stored node whose key is a suffix of ``key``.

        Leaves win over fallback internals at equal depth (they cannot
        coexist on one chain anyway).  Raises ``CANDIDATE_ERROR`` when not
        even the root is stored and no prefix matches.
        """
        if key.mode is not self.mode:
            raise ModeError(f"cannot look up {key.mode.value} key in {self.mode.value} model")
        for cut in range(len(key.frames), -1, -1):
            probe = ContextKey(self.mode, key.frames[:cut])
            if probe in self.leaves:
                return probe, self.leaves[probe]
            if probe in self.internals:
                return probe, self.internals[probe]
        raise CandidateError(f"no stored distribution covers context {key}")

    def has_root_fallback(self) -> bool:
        root = ContextKey.root(self.mode)
        return root in self.leaves or root in self.internals

    def is_complete(self) -> bool:
        """True when every stored node with children has all possible children."""
        children: dict[tuple, set] = {}
        for key in list(self.leaves) + list(self.internals):
            for cut in range(len(key.frames)):
                children.setdefault(key.frames[:cut], set()).add(key.frames[cut])
        for prefix, present in children.items():
            order = len(prefix) + 1
            if len(present) != num_classes(order, self.alphabet.size, self.mode):
                return False
        return True

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Pcn)
            and self.alphabet == other.alphabet
            and self.mode is other.mode
            and self.depth == other.depth
            and self.leaves == other.leaves
            and self.internals == other.internals
        )

    def __repr__(self) -> str:
        return (
            f"Pcn(|A|={self.alphabet.size}, mode={self.mode.value}, depth={self.depth}, "
            f"leaves={len(self.leaves)}, internals={len(self.internals)})"
        )

    def to_json(self) -> str:
        def rows(dists: dict[ContextKey, PcnDist]) -> list[dict]:
            out = []
            for key in sorted(dists, key=lambda k: (k.order, k.sort_key())):
                d = dists[key]
                out.append(
                    {
                        "key": str(key),
                        "probs": list(d.probs),
                        "n_occ": d.n_occ,
                        "counts": None if d.counts is None else list(d.counts),
                    }
                )
            return out

        doc = {
            "format": FORMAT_MODEL,
            "alphabet": list(self.alphabet.symbols),
            "mode": self.mode.value,
            "depth": self.depth,
            "leaves": rows(self.leaves),
            "internals": rows(self.internals),
        }
        return json.dumps(doc, indent=1, sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "Pcn":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(f"bad model JSON: {exc}") from None
        if not isinstance(doc, dict) or doc.get("format") != FORMAT_MODEL:
            raise ParseError(f"not a model artifact (format={doc.get('format')!r})")
        alphabet = Alphabet(tuple(doc["alphabet"]))
        mode = Mode.parse(doc["mode"])

        def parse_rows(rows: list[dict]) -> dict[ContextKey, PcnDist]:
            out = {}
            for rec in rows:
                key = ContextKey.from_string(rec["key"], mode)
                counts = rec.get("counts")
                out[key] = PcnDist(
                    probs=tuple(float(p) for p in rec["probs"]),
                    n_occ=None if rec.get("n_occ") is None else int(rec["n_occ"]),
                    counts=None if counts is None else tuple(int(c) for c in counts),
                )
            return out

        return Pcn(
            alphabet=alphabet,
            mode=mode,
            depth=int(doc["depth"]),
            leaves=parse_rows(doc["leaves"]),
            internals=parse_rows(doc.get("internals", [])),
        )

    def to_dot(self) -> str:
        """Graphviz rendering: boxes for nodes, double border on leaves."""
        stored = set(self.leaves) | set(self.internals)

        def parent_of(key: ContextKey) -> ContextKey | None:
            for cut in range(len(key.frames) - 1, -1, -1):
                probe = ContextKey(self.mode, key.frames[:cut])
                if probe in stored:
                    return probe
            return None

        def label(key: ContextKey) -> str:
            dist = self.leaves.get(key) or self.internals.get(key)
            probs = ",".join(f"{p:.4f}" for p in dist.probs)
            name = "root" if key.is_root else str(key.frames[-1])
            return f"{name}\\np=[{probs}]"

        lines = ["digraph pcn {", '  node [shape=box, fontname="monospace"];']
        for key in self.all_keys():
            extra = ", peripheries=2" if key in self.leaves else ""
            lines.append(f'  "{key}" [label="{label(key)}"{extra}];')
        for key in self.all_keys():
            up = parent_of(key)
            if up is not None:
                lines.append(f'  "{up}" -> "{key}";')
        lines.append("}")
        return "\n".join(lines) + "\n"
