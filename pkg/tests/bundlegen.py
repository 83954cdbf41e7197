"""Random, always-valid bundles whose triggers carry pure (non-control) actions."""

from __future__ import annotations

import json
import random

OPS = ["=", "!=", "<", "<=", ">", ">="]


def _items(rng: random.Random) -> list[str]:
    return [f"{rng.choice(['indoor', 'outdoor'])}:{w}" for w in rng.sample(["a", "b", "c", "d", "e", "f"], rng.randint(0, 5))]


def _pure_action(rng: random.Random, msg: str) -> str:
    k = rng.randrange(4)
    if k == 0:
        return f"{msg}.v = {msg}.v + {rng.randint(-5, 5)}"
    if k == 1:
        return f"{msg}.v = max({msg}.v, {rng.randint(0, 20)}) * {rng.randint(1, 3)}"
    if k == 2:
        return f'Filter("drop outdoor", {msg}.items)'
    return f"{msg}.label = {msg}.label + \"{rng.choice('xyz')}\""


def random_bundle(rng: random.Random, around: str | None = None) -> str:
    """A linear process over 1-4 operation activities, 1-3 contexts and 1-3 triggers.

    With ``around`` set to an activity name, an around aspect with
    assignment-only rules is attached to it.
    """
    n_ctx, n_ops, n_act = rng.randint(1, 3), rng.randint(1, 2), rng.randint(1, 4)
    out = ["community cm {", "  attribute executionPrice negative 1.0", "}"]
    for i in range(n_ctx):
        out += [f"provider q{i} {{", "  community cm", "  precision 1.0", "  correctnessProbability 1.0",
                "  refreshRate 1.0", "  executionPrice 1.0", "}"]
        if rng.random() < 0.5:
            sim = f"  range 0 {rng.randint(1, 10)}"
        else:
            sim = f"  value {rng.randint(0, 10)}"
        out += [f"simulate q{i} {{", f"  response {rng.randint(1, 30)}", sim, "}"]
        out += [f"context c{i} {{", "  type Decimal", f"  source service q{i}", "}"]
    out += ["service svc {"]
    for j in range(n_ops):
        out += [f"  operation op{j} {{", f"    input rq{j} {{ a: Integer }}",
                f"    output rs{j} {{ v: Integer, items: List, label: Text }}", "  }"]
    out += ["}"]
    for j in range(n_ops):
        out += [f"endpoint e{j} {{", f"  latency {rng.randint(0, 20)}", f"  return v = {rng.randint(0, 10)}",
                f"  return items = {json.dumps(_items(rng))}", f'  return label = "{rng.choice("pq")}"', "}"]
    acts = [f"A{k}" for k in range(n_act)]
    out += ["process p {", "  start S", "  end E"]
    for k, a in enumerate(acts):
        out.append(f"  activity {a} operation svc.op{k % n_ops} endpoint e{k % n_ops}")
    out += [f"  flow S -> {' -> '.join(acts)} -> E", "}"]
    used_ops = sorted({k % n_ops for k in range(n_act)})
    for t in range(rng.randint(1, 3)):
        j = rng.choice(used_ops)
        part = rng.choice(["v", "items", "label"])
        conds = [f"c{rng.randrange(n_ctx)} {rng.choice(OPS)} {rng.randint(0, 10)}" for _ in range(rng.randint(0, 2))]
        actions = "; ".join(_pure_action(rng, f"rs{j}") for _ in range(rng.randint(1, 3)))
        out += [f"trigger T{t} {{", f"  target svc.op{j}.output.{part}"]
        if conds:
            out.append(f"  when {' and '.join(conds)}")
        out += [f"  action {actions}", "}"]
    if around is not None:
        target = around if around in acts else acts[0]
        k = acts.index(target)
        msg = f"rs{k % n_ops}"
        for r in range(rng.randint(1, 2)):
            out.append(f"rule W{r} {{ [Cond] {msg}.v {rng.choice(['less than', 'greater than', 'equal to'])} "
                       f"{rng.randint(0, 10)} [Action] {msg}.v = {rng.randint(0, 99)} }}")
        rules = ", ".join(f"W{r}" for r in range(rng.randint(1, 2)))
        out.append(f"aspect around {target} rules {rules} extras {msg}")
    return "\n".join(out) + "\n"
