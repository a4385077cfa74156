from .protocol import (
    MsgType,
    ProtocolError,
    WireMessage,
    decode,
    encode,
    read_message,
    send_message,
    shards_message,
    unpack_shards,
)
from .runner import IterationTimeout, Master, RunnerConfig, master_loop, reap, spawn_workers, worker_loop

__all__ = ["MsgType", "ProtocolError", "WireMessage", "decode", "encode", "read_message",
           "send_message", "shards_message", "unpack_shards", "IterationTimeout", "Master",
           "RunnerConfig", "master_loop", "reap", "spawn_workers", "worker_loop"]
