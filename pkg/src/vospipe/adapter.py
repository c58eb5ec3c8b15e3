"""Subprocess adapter client for the propagation wire protocol.

Protocol version 1, newline-delimited JSON over the adapter process's
standard streams:

1. handshake: adapter emits ``{"type":"hello","protocol":1,"name":str}``.
2. request: ``{"type":"propagate","video_id":str,"frame_paths":[str...],
   "key_index":int,"key_mask":{RLE record},"direction":"forward"|"backward"}``
   where frame_paths covers only the requested range, in propagation
   order (key frame first).
3. response: one line per frame in order,
   ``{"type":"mask","frame_index":int,"mask":{RLE record}}``, terminated
   by ``{"type":"done"}``.
4. error: ``{"type":"error","message":str}`` aborts the request.

A connection serves one request at a time; callers that want parallelism
hold one connection per worker.
"""

from __future__ import annotations

import json
import logging
import os
import select
import subprocess
from dataclasses import dataclass
from pathlib import Path

from vospipe.errors import DimensionMismatch, MalformedRle, PropagatorFailure
from vospipe.masks import BinaryMask, rle_decode, rle_encode, rle_from_record, rle_to_record
from vospipe.propagation import PropagationRequest

log = logging.getLogger(__name__)

PROTOCOL_VERSION = 1
_DEFAULT_TIMEOUT = 30.0

__all__ = [
    "SubprocessPropagator",
    "ConformanceCheck",
    "run_conformance",
]


class _LineChannel:
    """Line-delimited JSON over a child process's pipes, with timeouts."""

    def __init__(self, command: list[str], timeout: float = _DEFAULT_TIMEOUT):
        self.command = list(command)
        self.timeout = timeout
        try:
            self.process = subprocess.Popen(
                self.command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=None,  # adapter diagnostics pass through
            )
        except OSError as exc:
            raise PropagatorFailure(f"failed to start adapter {self.command!r}: {exc}") from exc
        self._buffer = bytearray()

    def send_line(self, text: str) -> None:
        proc = self.process
        if proc.stdin is None or proc.poll() is not None:
            raise PropagatorFailure(f"adapter {self.command!r} exited (code {proc.returncode})")
        try:
            proc.stdin.write(text.encode("utf-8") + b"\n")
            proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise PropagatorFailure(f"adapter {self.command!r} closed its stdin: {exc}") from exc

    def send(self, message: dict) -> None:
        self.send_line(json.dumps(message))

    def receive_line(self) -> str:
        proc = self.process
        assert proc.stdout is not None
        fd = proc.stdout.fileno()
        while True:
            newline = self._buffer.find(b"\n")
            if newline >= 0:
                line = self._buffer[:newline].decode("utf-8")
                del self._buffer[: newline + 1]
                return line
            # Raw fd reads keep select() truthful (no hidden userspace buffer).
            ready, _, _ = select.select([fd], [], [], self.timeout)
            if not ready:
                raise PropagatorFailure(
                    f"adapter {self.command!r}: no response within {self.timeout}s"
                )
            chunk = os.read(fd, 65536)
            if not chunk:
                raise PropagatorFailure(
                    f"adapter {self.command!r} closed its stdout (exit code {proc.poll()})"
                )
            self._buffer.extend(chunk)

    def receive(self) -> dict:
        line = self.receive_line()
        try:
            message = json.loads(line)
        except json.JSONDecodeError as exc:
            raise PropagatorFailure(f"adapter sent unparseable line {line!r}: {exc}") from exc
        if not isinstance(message, dict):
            raise PropagatorFailure(f"adapter sent a non-object message: {line!r}")
        return message

    def close(self) -> None:
        proc = self.process
        if proc.poll() is None:
            if proc.stdin is not None:
                try:
                    proc.stdin.close()
                except OSError:
                    pass
            try:
                proc.wait(timeout=2)
            except subprocess.TimeoutExpired:
                proc.kill()
                proc.wait()


def _read_handshake(channel: _LineChannel) -> tuple[str, str]:
    hello = channel.receive()
    if hello.get("type") != "hello":
        raise PropagatorFailure(f"expected hello handshake, got {hello!r}")
    if hello.get("protocol") != PROTOCOL_VERSION:
        raise PropagatorFailure(
            f"adapter speaks protocol {hello.get('protocol')!r}, need {PROTOCOL_VERSION}"
        )
    name = hello.get("name")
    if not isinstance(name, str) or not name:
        raise PropagatorFailure(f"handshake carries no adapter name: {hello!r}")
    return name, str(hello.get("version", PROTOCOL_VERSION))


class SubprocessPropagator:
    """Propagator backed by a long-running adapter subprocess.

    ``frame_root`` anchors the frame paths sent on the wire; adapters
    that never read pixels (the test stubs) treat them as opaque.
    """

    def __init__(
        self,
        command: list[str],
        frame_root: str | Path | None = None,
        timeout: float = _DEFAULT_TIMEOUT,
    ):
        self.frame_root = Path(frame_root) if frame_root is not None else None
        self._channel = _LineChannel(command, timeout=timeout)
        self.name, self.version = _read_handshake(self._channel)

    def _frame_paths(self, request: PropagationRequest) -> list[str]:
        names = [request.video.frame_names[i] for i in request.frame_indices]
        base = (
            self.frame_root / request.video.video_id
            if self.frame_root is not None
            else Path(request.video.video_id)
        )
        return [str(base / name) for name in names]

    def propagate(self, request: PropagationRequest) -> list[BinaryMask]:
        indices = request.frame_indices
        self._channel.send(
            {
                "type": "propagate",
                "video_id": request.video.video_id,
                "frame_paths": self._frame_paths(request),
                "key_index": request.key_index,
                "key_mask": rle_to_record(rle_encode(request.key_mask)),
                "direction": request.direction,
            }
        )
        masks: list[BinaryMask] = []
        for expected_index in indices:
            message = self._channel.receive()
            kind = message.get("type")
            if kind == "error":
                raise PropagatorFailure(
                    f"{self.name}: adapter error: {message.get('message', '<no message>')}"
                )
            if kind != "mask":
                raise PropagatorFailure(
                    f"{self.name}: expected mask for frame {expected_index}, got {message!r}"
                )
            if message.get("frame_index") != expected_index:
                raise PropagatorFailure(
                    f"{self.name}: out-of-order response: expected frame "
                    f"{expected_index}, got {message.get('frame_index')!r}"
                )
            try:
                mask = rle_decode(rle_from_record(message.get("mask")))
            except MalformedRle as exc:
                raise PropagatorFailure(
                    f"{self.name}: frame {expected_index} carries a bad mask: {exc}"
                ) from exc
            if (mask.width, mask.height) != (request.video.width, request.video.height):
                raise DimensionMismatch(
                    f"{self.name}: frame {expected_index} is {mask.width}x{mask.height}, "
                    f"video is {request.video.width}x{request.video.height}"
                )
            masks.append(mask)
        done = self._channel.receive()
        if done.get("type") == "error":
            raise PropagatorFailure(
                f"{self.name}: adapter error: {done.get('message', '<no message>')}"
            )
        if done.get("type") != "done":
            raise PropagatorFailure(f"{self.name}: expected done marker, got {done!r}")
        return masks

    def close(self) -> None:
        self._channel.close()

    def __enter__(self) -> "SubprocessPropagator":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()


@dataclass(frozen=True)
class ConformanceCheck:
    name: str
    passed: bool
    detail: str = ""


def _conformance_video(frame_count: int = 4, width: int = 6, height: int = 5):
    from vospipe.masks import VideoRef

    names = tuple(f"{i:05d}" for i in range(frame_count))
    return VideoRef(
        video_id="conformance", frame_count=frame_count, width=width, height=height, frame_names=names
    )


def _checkerboard(width: int, height: int) -> BinaryMask:
    import numpy as np

    yy, xx = np.mgrid[0:height, 0:width]
    return BinaryMask((yy + xx) % 2 == 0)


def run_conformance(command: list[str], timeout: float = _DEFAULT_TIMEOUT) -> list[ConformanceCheck]:
    """Drive an adapter through the protocol and report per-check results.

    Checks: handshake shape, forward ordering + done marker, backward
    ordering, mask validity/dimensions, and error recovery (a malformed
    line then an unknown request type must each produce an error message
    without killing the connection).
    """
    checks: list[ConformanceCheck] = []
    video = _conformance_video()
    key_mask = _checkerboard(video.width, video.height)

    channel = _LineChannel(command, timeout=timeout)
    try:
        try:
            name, _ = _read_handshake(channel)
            checks.append(ConformanceCheck("handshake", True, f"adapter {name!r}"))
        except PropagatorFailure as exc:
            checks.append(ConformanceCheck("handshake", False, str(exc)))
            return checks

        def expect_run(check_name: str, key_index: int, direction: str) -> None:
            request = PropagationRequest(video, key_index, key_mask, direction)
            indices = request.frame_indices
            channel.send(
                {
                    "type": "propagate",
                    "video_id": video.video_id,
                    "frame_paths": [f"{video.video_id}/{video.frame_names[i]}" for i in indices],
                    "key_index": key_index,
                    "key_mask": rle_to_record(rle_encode(key_mask)),
                    "direction": direction,
                }
            )
            for expected_index in indices:
                message = channel.receive()
                if message.get("type") != "mask":
                    raise PropagatorFailure(f"expected mask message, got {message!r}")
                if message.get("frame_index") != expected_index:
                    raise PropagatorFailure(
                        f"frame order violation: expected {expected_index}, "
                        f"got {message.get('frame_index')!r}"
                    )
                mask = rle_decode(rle_from_record(message.get("mask")))
                if (mask.width, mask.height) != (video.width, video.height):
                    raise PropagatorFailure(
                        f"frame {expected_index} has wrong dimensions "
                        f"{mask.width}x{mask.height}"
                    )
            done = channel.receive()
            if done.get("type") != "done":
                raise PropagatorFailure(f"missing done marker, got {done!r}")

        for check_name, key_index, direction in (
            ("forward_run", 1, "forward"),
            ("backward_run", 2, "backward"),
            ("full_forward_from_zero", 0, "forward"),
        ):
            try:
                expect_run(check_name, key_index, direction)
                checks.append(ConformanceCheck(check_name, True))
            except (PropagatorFailure, MalformedRle) as exc:
                checks.append(ConformanceCheck(check_name, False, str(exc)))

        def expect_error_then_recover(check_name: str, bad_line: str) -> None:
            channel.send_line(bad_line)
            reply = channel.receive()
            if reply.get("type") != "error":
                raise PropagatorFailure(f"expected error message, got {reply!r}")
            if not isinstance(reply.get("message"), str):
                raise PropagatorFailure(f"error message missing text: {reply!r}")
            # The connection must survive: a valid request still works.
            expect_run(check_name, 1, "forward")

        for check_name, bad_line in (
            ("recovers_from_malformed_line", "this is not json"),
            ("recovers_from_unknown_type", json.dumps({"type": "selfdestruct"})),
        ):
            try:
                expect_error_then_recover(check_name, bad_line)
                checks.append(ConformanceCheck(check_name, True))
            except (PropagatorFailure, MalformedRle) as exc:
                checks.append(ConformanceCheck(check_name, False, str(exc)))
    finally:
        channel.close()
    return checks
