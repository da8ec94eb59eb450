"""Discrete-time clock synchronisation models.

Agent 1 is the reference clock and ticks once per step; every other agent
drifts and ticks twice per step.  Clocks count from the start of the current
period, which ends when agent 1 reaches the discretisation ``d``.  A clock
behind agent 1, or more than the allowed distance ahead, is a fault and the
system halts there.

``tte``: at a period end the master sends back the median of the clock
values; adopting it restarts every clock at 0.  In the unsafe variant the
drifting agents ignore it and keep their own value.

``con``: at a period end the agents exchange values and average those within
``d`` of their own; with only the reference and drifting clocks this either
restarts both (difference within the threshold) or leaves the drifting clock
alone.  Safety allows a distance of ``2d``, and a reference clock past the
period end is a fault.  In the unsafe variant nobody averages.
"""

from __future__ import annotations


def clock_system(protocol: str, safe: bool, d: int, agents: int = 2, name: str | None = None) -> str:
    if protocol not in ("tte", "con"):
        raise ValueError(f"unknown protocol {protocol!r}")
    if agents < 2 or d < 1:
        raise ValueError("need at least two agents and a positive discretisation")
    cs = [f"c{i}" for i in range(1, agents + 1)]
    others = cs[1:]
    bound = d if protocol == "tte" else 2 * d
    bad = [f"{c} < c1" for c in others] + [f"{c} - c1 > {bound}" for c in others]
    if protocol == "con":
        bad.append(f"c1 > {d}")
    ok = [f"{c} >= c1 && {c} - c1 <= {bound}" for c in others]
    if protocol == "con":
        ok.append(f"c1 <= {d}")
    restart = ", ".join(f"{c} := 0" for c in cs)
    tick = ", ".join(["c1 := c1 + 1"] + [f"{c} := {c} + 2" for c in others])
    lines = [
        f"# {protocol} clock synchronisation, {'safe' if safe else 'unsafe'} variant, "
        f"{agents} agents, discretisation {d}",
        f"name {name or default_name(protocol, safe, d, agents)}",
        "vars " + " ".join(cs),
        "init " + " && ".join(f"{c} = 0" for c in cs),
        "transitions",
        "  " + " || ".join(bad) + " -> skip",
    ]
    if protocol == "tte":
        lines.append(f"  c1 >= {d} -> " + (restart if safe else "c1 := 0"))
    else:
        if safe:
            within = " && ".join(f"{c} - c1 <= {d}" for c in others)
            lines.append(f"  c1 >= {d} && {within} -> {restart}")
        lines.append(f"  c1 >= {d} -> c1 := 0")
    lines += [
        f"  else -> {tick}",
        "labels",
        "  safe: " + " && ".join(ok),
        "  sync: " + " && ".join(f"{c} = c1" for c in others),
    ]
    return "\n".join(lines) + "\n"


def scale_tag(d: int) -> str:
    return f"{d // 1000}k" if d >= 1000 and d % 1000 == 0 else str(d)


def default_name(protocol: str, safe: bool, d: int, agents: int = 2) -> str:
    base = f"{protocol}-{'sf' if safe else 'usf'}-{scale_tag(d)}"
    return base if agents == 2 else f"{base}-a{agents}"
