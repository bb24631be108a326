import json
import os
import threading

import pytest

from conftest import tiny_instance

from ipps import (
    Action,
    ProtocolClient,
    ProtocolError,
    SCHEMA_VERSION,
    ServeOptions,
    WAIT,
    schedule_from_json,
    serve,
    serve_tcp,
    validate_schedule,
)


def first_pair(snap):
    return Action(*snap.mask_pairs[0]) if snap.mask_pairs else WAIT


class ServerHarness:
    """serve() on background pipes; the test side talks like an agent."""

    def __init__(self, source, options=None):
        in_r, in_w = os.pipe()    # client -> server
        out_r, out_w = os.pipe()  # server -> client
        self._server_in = os.fdopen(in_r, "r", encoding="utf-8", newline="\n")
        self._server_out = os.fdopen(out_w, "w", encoding="utf-8", newline="\n")
        self.client = ProtocolClient(
            os.fdopen(out_r, "r", encoding="utf-8", newline="\n"),
            os.fdopen(in_w, "w", encoding="utf-8", newline="\n"),
        )
        self.stats = None
        self.thread = threading.Thread(target=self._run, args=(source, options),
                                       daemon=True)
        self.thread.start()

    def _run(self, source, options):
        try:
            self.stats = serve(source, self._server_in, self._server_out, options)
        finally:
            try:
                self._server_out.close()
            except (BrokenPipeError, OSError):
                pass
            self._server_in.close()

    def finish(self):
        self.client.close()
        self.thread.join(timeout=10)
        assert not self.thread.is_alive()
        return self.stats

    def raw_send(self, obj):
        self.client.outfile.write(json.dumps(obj) + "\n")
        self.client.outfile.flush()

    def raw_line(self, text):
        self.client.outfile.write(text + "\n")
        self.client.outfile.flush()


class TestEpisodeFlow:
    def test_full_episode(self, toy):
        h = ServerHarness(toy)
        terminal = h.client.run_episode(first_pair)
        stats = h.finish()
        assert terminal["type"] == "terminal"
        assert terminal["episode"] == 0
        schedule = schedule_from_json(terminal["schedule"], toy)
        report = validate_schedule(toy, schedule)
        assert report.ok
        assert terminal["makespan"] == report.makespan / toy.time_scale
        assert stats.episodes == 1
        assert stats.errors == 0
        assert stats.steps == len(schedule) or stats.steps >= len(schedule)
        assert stats.makespans == [report.makespan]
        assert stats.schedules == [terminal["schedule"]]

    def test_optimal_play_through_wire(self, toy):
        script = iter([Action(0, 1, 0), Action(1, 1, 1), WAIT, Action(0, 2, 1)])
        h = ServerHarness(toy)
        terminal = h.client.run_episode(lambda snap: next(script))
        h.finish()
        assert terminal["makespan"] == 3
        assert terminal["total_reward"] == -3

    def test_hello_and_seq_progression(self, toy):
        h = ServerHarness(toy)
        hello = h.client.read_message()
        assert hello["type"] == "hello"
        assert hello["schema"] == SCHEMA_VERSION
        assert hello["episode"] == 0
        assert hello["instance"] == {
            "name": "toy", "machines": 2, "jobs": 2, "regular_ops": 3,
        }
        state = h.client.read_message()
        assert state["type"] == "state" and state["seq"] == 0
        assert state["reward"] is None
        h.client.send_act(0, Action(0, 1, 0))
        nxt = h.client.read_message()
        assert nxt["seq"] == 1
        assert nxt["reward"] == -1  # running-makespan delta of the first pair
        h.finish()

    def test_multiple_episodes(self, toy):
        h = ServerHarness(toy, ServeOptions(episodes=3))
        episodes = [h.client.run_episode(first_pair)["episode"] for _ in range(3)]
        stats = h.finish()
        assert episodes == [0, 1, 2]
        assert stats.episodes == 3
        assert len(stats.makespans) == 3

    def test_endless_serves_until_hangup(self, toy):
        h = ServerHarness(toy, ServeOptions(episodes=None))
        for _ in range(2):
            h.client.run_episode(first_pair)
        stats = h.finish()  # hanging up ends the endless loop
        assert stats.episodes == 2

    def test_instance_rotation(self):
        specs = {e: tiny_instance(e) for e in range(3)}
        h = ServerHarness(lambda e: specs[e], ServeOptions(episodes=3))
        names = []
        for _ in range(3):
            hello = h.client.read_message()
            names.append(hello["instance"]["name"])
            msg = h.client.read_message()
            while msg["type"] != "terminal":
                snap_pairs = msg["mask"]["pairs"]
                act = (Action(*snap_pairs[0]) if snap_pairs else WAIT)
                h.client.send_act(msg["seq"], act)
                msg = h.client.read_message()
        h.finish()
        assert names == [specs[e].name for e in range(3)]
        assert len(set(names)) == 3


class TestErrorHandling:
    def drive_to_first_state(self, h):
        assert h.client.read_message()["type"] == "hello"
        state = h.client.read_message()
        assert state["type"] == "state"
        return state

    def expect_error_then_same_state(self, h, code, state):
        err = h.client.read_message()
        assert err["type"] == "error"
        assert err["code"] == code
        again = h.client.read_message()
        assert again["type"] == "state"
        assert again["seq"] == state["seq"]
        return again

    def test_bad_json(self, toy):
        h = ServerHarness(toy)
        state = self.drive_to_first_state(h)
        h.raw_line("{not json")
        self.expect_error_then_same_state(h, "bad-message", state)
        stats_episode_completes(h, state)
        assert h.finish().errors == 1

    def test_wrong_type(self, toy):
        h = ServerHarness(toy)
        state = self.drive_to_first_state(h)
        h.raw_send({"type": "state", "seq": 0})
        self.expect_error_then_same_state(h, "schema", state)
        stats_episode_completes(h, state)
        assert h.finish().errors == 1

    def test_stale_seq(self, toy):
        h = ServerHarness(toy)
        state = self.drive_to_first_state(h)
        h.raw_send({"type": "act", "seq": 5, "pair": [0, 1, 0]})
        self.expect_error_then_same_state(h, "stale-seq", state)
        stats_episode_completes(h, state)
        assert h.finish().errors == 1

    def test_unknown_pair(self, toy):
        h = ServerHarness(toy)
        state = self.drive_to_first_state(h)
        h.raw_send({"type": "act", "seq": 0, "pair": [0, 2, 0]})  # gated op
        self.expect_error_then_same_state(h, "unknown-pair", state)
        stats_episode_completes(h, state)
        assert h.finish().errors == 1

    def test_wait_when_not_allowed(self, toy):
        h = ServerHarness(toy)
        state = self.drive_to_first_state(h)
        assert state["mask"]["wait"] is False
        h.raw_send({"type": "act", "seq": 0, "wait": True})
        self.expect_error_then_same_state(h, "unknown-pair", state)
        stats_episode_completes(h, state)
        assert h.finish().errors == 1

    def test_malformed_pair_shape(self, toy):
        h = ServerHarness(toy)
        state = self.drive_to_first_state(h)
        h.raw_send({"type": "act", "seq": 0, "pair": [0, 1]})
        self.expect_error_then_same_state(h, "bad-message", state)
        stats_episode_completes(h, state)
        assert h.finish().errors == 1

    def test_run_episode_surfaces_server_error(self, toy):
        h = ServerHarness(toy)
        with pytest.raises(ProtocolError, match="unknown op") as exc_info:
            h.client.run_episode(lambda snap: Action(9, 9, 9))
        assert exc_info.value.code == "unknown-pair"
        h.client.close()
        h.thread.join(timeout=10)


def stats_episode_completes(h, state):
    """Finish the episode from a re-sent state by taking first pairs."""
    msg = state
    while msg["type"] != "terminal":
        pairs = msg["mask"]["pairs"]
        act = Action(*pairs[0]) if pairs else WAIT
        h.client.send_act(msg["seq"], act)
        msg = h.client.read_message()
        assert msg["type"] in ("state", "terminal")


class TestTcp:
    def test_tcp_round_trip(self, toy):
        port_box = {}
        ready = threading.Event()

        def on_ready(port):
            port_box["port"] = port
            ready.set()

        holder = {}

        def run():
            holder["stats"] = serve_tcp(
                toy, 0, ServeOptions(episodes=2), ready=on_ready
            )

        thread = threading.Thread(target=run, daemon=True)
        thread.start()
        assert ready.wait(timeout=10)
        client = ProtocolClient.connect_tcp(port_box["port"])
        results = [client.run_episode(first_pair) for _ in range(2)]
        client.close()
        thread.join(timeout=10)
        assert not thread.is_alive()
        assert [r["episode"] for r in results] == [0, 1]
        assert holder["stats"].episodes == 2
