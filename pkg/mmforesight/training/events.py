from collections import defaultdict
from typing import Callable, Dict, List


class EpochEvent:
    def __init__(self, epoch: int, loss: float, terms: Dict[str, float], batches: int) -> None:
        self.epoch = epoch
        self.loss = loss
        self.terms = terms
        self.batches = batches

    def __str__(self) -> str:
        return "EpochEvent[epoch={}, loss={:.6g}, batches={}]".format(
            self.epoch, self.loss, self.batches
        )


class BatchEvent:
    def __init__(
        self, epoch: int, batch: int, loss: float, terms: Dict[str, float], grad_norm: float
    ) -> None:
        self.epoch = epoch
        self.batch = batch
        self.loss = loss
        self.terms = terms
        self.grad_norm = grad_norm

    def __str__(self) -> str:
        return "BatchEvent[epoch={}, batch={}, loss={:.6g}]".format(
            self.epoch, self.batch, self.loss
        )


class RegisteredListener:
    def __init__(self, listener_id: str, handler: Callable) -> None:
        self.listener_id = str(listener_id)
        self.handler = handler

    def __eq__(self, other) -> bool:
        if isinstance(other, RegisteredListener):
            return self.listener_id == other.listener_id and self.handler == other.handler
        return False

    def __hash__(self):
        return hash((self.listener_id, self.handler))


class HandlerList:
    """
    Listeners keyed by event name, fired in registration order
    """

    def __init__(self) -> None:
        self._handlers: Dict[str, List[RegisteredListener]] = defaultdict(list)

    def register(self, listener: RegisteredListener) -> None:
        if not self.has(listener):
            self._handlers[listener.listener_id].append(listener)

    def unregister(self, listener: RegisteredListener) -> None:
        self._handlers[listener.listener_id].remove(listener)

    def has(self, listener: RegisteredListener) -> bool:
        return listener in self._handlers[listener.listener_id]

    def unregister_all(self) -> None:
        self._handlers.clear()

    def get_handlers(self, listener_id: str) -> List[RegisteredListener]:
        return list(self._handlers.get(listener_id, []))

    def fire(self, listener_id: str, event) -> None:
        for listener in self.get_handlers(listener_id):
            listener.handler(event)
