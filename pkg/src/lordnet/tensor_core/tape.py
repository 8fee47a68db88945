"""
Reverse-mode automatic differentiation tape.

Nodes are appended to the tape in creation order, so walking the tape backwards is a
valid reverse topological order. A tape has a single writer.
"""

import itertools
import logging
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from ..errors import ContractError
from .field import Field, as_field

logger = logging.getLogger(__name__)

_tape_ids = itertools.count()

BackwardFn = Callable[[np.ndarray], None]


class DiffValue:
    """A tape node: forward value, accumulated gradient and the rule to push it to its parents."""

    __slots__ = ("value", "grad", "tape", "tape_id", "name", "requires_grad", "op", "_parents", "_backward")

    def __init__(self, value: Field, tape: "Tape", tape_id: int, requires_grad: bool,
                 parents: Sequence["DiffValue"] = (), backward: Optional[BackwardFn] = None,
                 op: str = "", name: Optional[str] = None):
        self.value = value
        self.grad = np.zeros_like(value) if requires_grad else None
        self.tape = tape
        self.tape_id = tape_id
        self.name = name
        self.requires_grad = requires_grad
        self.op = op
        self._parents = tuple(parents)
        self._backward = backward

    @property
    def shape(self):
        return self.value.shape

    @property
    def ndim(self) -> int:
        return self.value.ndim

    def accumulate(self, contribution: np.ndarray) -> None:
        if self.requires_grad:
            self.grad += contribution

    def __repr__(self) -> str:
        label = self.name or self.op or "value"
        return f"DiffValue({label}, shape={self.shape}, id={self.tape_id})"


class Tape:
    def __init__(self):
        self.id = next(_tape_ids)
        self._nodes: List[DiffValue] = []
        self._variables: Dict[str, DiffValue] = {}

    def __len__(self) -> int:
        return len(self._nodes)

    @property
    def variables(self) -> Dict[str, DiffValue]:
        return dict(self._variables)

    def variable(self, data, name: str) -> DiffValue:
        """Register a trainable leaf under a unique name."""
        if name in self._variables:
            raise ContractError(f"variable '{name}' is already on this tape")
        node = self._append(as_field(data, writeable=False), requires_grad=True, name=name, op="variable")
        self._variables[name] = node
        return node

    def constant(self, data) -> DiffValue:
        return self._append(as_field(data, writeable=False), requires_grad=False, op="constant")

    def record(self, value: np.ndarray, parents: Sequence[DiffValue], backward: BackwardFn, op: str) -> DiffValue:
        for parent in parents:
            if parent.tape is not self:
                raise ContractError(f"operand {parent!r} of {op} belongs to another tape")
        requires_grad = any(parent.requires_grad for parent in parents)
        value.setflags(write=False)
        return self._append(value, requires_grad=requires_grad, parents=parents,
                            backward=backward if requires_grad else None, op=op)

    def _append(self, value, requires_grad, parents=(), backward=None, op="", name=None) -> DiffValue:
        node = DiffValue(value, self, len(self._nodes), requires_grad, parents, backward, op, name)
        self._nodes.append(node)
        return node

    def backward(self, loss: DiffValue) -> Dict[str, Field]:
        """Accumulate d(loss)/d(variable) for every registered variable."""
        if not self._nodes:
            raise ContractError("cannot run backward on an empty tape")
        if loss.tape is not self:
            raise ContractError("loss does not belong to this tape")
        if loss.value.ndim != 0:
            raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")

        for node in self._nodes:
            if node.requires_grad:
                node.grad.fill(0.0)
        if loss.requires_grad:
            loss.grad.fill(1.0)
            for node in reversed(self._nodes[: loss.tape_id + 1]):
                if node._backward is not None:
                    node._backward(node.grad)
        else:
            loss.grad = np.ones_like(loss.value)
            logger.debug("loss does not depend on any variable; all gradients are zero")

        return {name: np.array(node.grad, copy=True) for name, node in self._variables.items()}


def backward(loss: DiffValue) -> Dict[str, Field]:
    """Gradient of a scalar loss with respect to every variable of its tape."""
    return loss.tape.backward(loss)
