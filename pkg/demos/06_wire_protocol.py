"""Drive the environment over its wire protocol, message by message.

Agents do not link against this package: they speak newline-delimited
JSON over stdio or TCP. The server owns the environment and the rules;
the client only ever sees serialized states (a typed heterogeneous graph
plus an action mask) and sends act messages back. Sequence numbers make
retries unambiguous, and an illegal action produces a typed error plus a
re-send of the same state rather than a dead connection.

This demo runs the server in a thread, connects over OS pipes, and
prints a condensed transcript of one episode — including a deliberately
illegal action to show the error path.

Run:  python3 demos/06_wire_protocol.py
"""

import json
import os
import threading

from ipps import WAIT, Action, ProtocolClient, ServeOptions, serve
from ipps.fixtures import toy


def pipe_server(spec, episodes):
    """Start serve() on a thread; return (reader, writer, thread)."""
    client_to_server = os.pipe()
    server_to_client = os.pipe()
    thread = threading.Thread(
        target=serve,
        args=(spec,
              os.fdopen(client_to_server[0], "r"),
              os.fdopen(server_to_client[1], "w"),
              ServeOptions(episodes=episodes)),
        daemon=True,
    )
    thread.start()
    reader = os.fdopen(server_to_client[0], "r")
    writer = os.fdopen(client_to_server[1], "w")
    return reader, writer, thread


def main() -> None:
    spec = toy()
    reader, writer, thread = pipe_server(spec, episodes=1)

    def show(direction: str, payload: dict) -> None:
        kind = payload.get("type")
        if kind == "state":
            mask = payload["mask"]
            counts = {k: len(payload[k]["ids"]) for k in
                      ("ops", "machines", "combinations", "jobs")}
            summary = (f"seq={payload['seq']} reward={payload['reward']} "
                       f"clock={payload['clock']:g} nodes={counts} "
                       f"pairs={mask['pairs']} wait={mask['wait']}")
        elif kind == "hello":
            summary = f"schema={payload['schema']} " + json.dumps(payload["instance"])
        elif kind == "error":
            summary = f"code={payload['code']} message={payload['message']!r}"
        elif kind == "terminal":
            summary = (f"makespan={payload['makespan']} "
                       f"total_reward={payload['total_reward']:g} "
                       f"{len(payload['schedule']['records'])} records")
        else:
            summary = json.dumps(payload)[:100]
        print(f"  {direction} {kind:8s} {summary}")

    def recv() -> dict:
        payload = json.loads(reader.readline())
        show("<-", payload)
        return payload

    def send(payload: dict) -> None:
        show("->", payload)
        writer.write(json.dumps(payload) + "\n")
        writer.flush()

    print("transcript (<- server, -> client):")
    recv()                       # hello
    state = recv()               # initial state

    # An action the mask does not offer: op 2 before op 1 is done.
    send({"type": "act", "seq": state["seq"], "pair": [0, 2, 0]})
    recv()                       # typed error
    state = recv()               # same state again, same seq

    # Now play the optimal episode: start both first ops, wait, finish.
    for move in ([0, 1, 0], [1, 1, 1], "wait", [0, 2, 1]):
        act = {"type": "act", "seq": state["seq"]}
        if move == "wait":
            act["wait"] = True
        else:
            act["pair"] = move
        send(act)
        state = recv()           # next state or terminal
    assert state["type"] == "terminal" and state["makespan"] == 3

    writer.close()
    reader.close()
    thread.join(timeout=5)

    print()
    print("the same episode through the bundled client helper:")
    reader, writer, thread = pipe_server(spec, episodes=1)
    client = ProtocolClient(reader, writer)

    def first_pair(snap):
        return Action(*snap.mask_pairs[0]) if snap.mask_pairs else WAIT

    outcome = client.run_episode(first_pair)
    print(f"  makespan {outcome['makespan']}, total reward {outcome['total_reward']:g}")
    client.close()
    thread.join(timeout=5)


if __name__ == "__main__":
    main()
