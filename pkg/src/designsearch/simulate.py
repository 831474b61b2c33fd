"""Synthetic-rater experiments: genetic search vs uniform sampling.

A ground-truth utility table stands in for crowd taste; raters answer
pairwise comparisons through a logistic choice model over the utility
gap. Both search methods spend identical comparison budgets, their top
designs then face off in a cross-method evaluation scored by a z-test
of the vote share against a fair coin.
"""

from __future__ import annotations

import dataclasses
import math
import random
import time
from dataclasses import dataclass, field

from .engine import ComparisonResult, Evolution, GAConfig, Individual, top_designs
from .genome import GeneSchema, active_genes, build_schema
from .markup import DesignSpec, parse

# Sub-stream roles so every experiment seed yields independent raters.
_ROLE_TRUTH = 0
_ROLE_SEARCH_GA = 1
_ROLE_SEARCH_UNIFORM = 2
_ROLE_EVAL = 3
_ROLE_ENGINE = 4
_ROLES = 5


def _sub_seed(seed: int, role: int) -> int:
    return seed * _ROLES + role


@dataclass(frozen=True)
class GroundTruth:
    """Per-(gene, option) scores; optional pairwise interaction terms."""

    table: tuple[tuple[float, ...], ...]
    interactions: dict[tuple[int, int], tuple[tuple[float, ...], ...]] = \
        field(default_factory=dict, compare=False)

    @classmethod
    def sample(cls, schema: GeneSchema, seed: int,
               interaction_scale: float = 0.0) -> "GroundTruth":
        rng = random.Random(_sub_seed(seed, _ROLE_TRUTH))
        table = tuple(tuple(rng.gauss(0.0, 1.0) for _ in range(count))
                      for count in schema.option_counts)
        interactions: dict[tuple[int, int], tuple[tuple[float, ...], ...]] = {}
        if interaction_scale:
            n = schema.gene_count
            for g in range(n):
                for h in range(g + 1, n):
                    interactions[(g, h)] = tuple(
                        tuple(rng.gauss(0.0, interaction_scale)
                              for _ in range(schema.option_counts[h]))
                        for _ in range(schema.option_counts[g]))
        return cls(table=table, interactions=interactions)

    def utility(self, schema: GeneSchema, sequence) -> float:
        """Sum of scores over active genes only; dormant genes are
        invisible to raters and carry no utility."""
        active = active_genes(schema, sequence)
        total = sum(self.table[g][sequence[g]] for g in active)
        for (g, h), cross in self.interactions.items():
            if g in active and h in active:
                total += cross[sequence[g]][sequence[h]]
        return total


class SyntheticRater:
    """Logistic 2AFC choice over the ground-truth utility gap.

    noise_beta scales choice sharpness: 0 gives fair coin flips,
    math.inf always picks the truly better design.
    """

    def __init__(self, schema: GeneSchema, truth: GroundTruth,
                 noise_beta: float, seed: int):
        if noise_beta < 0:
            raise ValueError("noise_beta must be >= 0")
        self.schema = schema
        self.truth = truth
        self.noise_beta = noise_beta
        self.rng = random.Random(seed)
        self.calls = 0

    def utility(self, sequence) -> float:
        return self.truth.utility(self.schema, sequence)

    def prefers_first(self, seq_a, seq_b) -> float:
        gap = self.utility(seq_a) - self.utility(seq_b)
        if math.isinf(self.noise_beta):
            return 0.5 if gap == 0 else (1.0 if gap > 0 else 0.0)
        x = self.noise_beta * gap
        if x >= 0:
            return 1.0 / (1.0 + math.exp(-x))
        e = math.exp(x)
        return e / (1.0 + e)

    def choose(self, seq_a, seq_b) -> str:
        """'a' or 'b'."""
        self.calls += 1
        return "a" if self.rng.random() < self.prefers_first(seq_a, seq_b) else "b"


def proportion_z_test(share: float, n: int) -> tuple[float, float]:
    """One-sample z-test of a proportion against 0.5; two-tailed p."""
    if n <= 0:
        raise ValueError("need at least one vote")
    z = (share - 0.5) / math.sqrt(0.25 / n)
    p = math.erfc(abs(z) / math.sqrt(2.0))
    return z, p


@dataclass(frozen=True)
class ExperimentReport:
    condition: str
    space: int
    n_votes: int
    ga_vote_share: float
    z_score: float
    p_value: float
    ga_top_utility: float
    uniform_top_utility: float
    comparisons_per_method: int
    runtime_seconds: float
    seeds: dict

    def to_json(self) -> dict:
        return dataclasses.asdict(self)


# ---------------------------------------------------------------------------
# Search conditions


def _mean_utility(rater: SyntheticRater, individuals) -> float:
    return sum(rater.utility(ind.sequence) for ind in individuals) / len(individuals)


def drive_search(schema: GeneSchema, config: GAConfig,
                 rater: SyntheticRater) -> Evolution:
    """Run the full engine loop with synthetic choices."""
    run = Evolution(schema, config)
    run.run(lambda a, b: a.id if rater.choose(a.sequence, b.sequence) == "a"
            else b.id)
    return run


def run_ga_condition(spec: DesignSpec, ga_config: GAConfig,
                     rater: SyntheticRater, k: int = 5) -> list[Individual]:
    run = drive_search(build_schema(spec), ga_config, rater)
    return run.top(k)


def run_uniform_baseline(spec: DesignSpec, n_samples: int,
                         rater: SyntheticRater, rng: random.Random,
                         k: int = 5) -> list[Individual]:
    """Same comparison budget spent on independent uniform draws.

    Samples are paired disjointly, each pair rated once; the samples the
    raters selected are ranked by votes with ties broken by draw order
    (no peeking at ground truth).
    """
    if n_samples % 2:
        raise ValueError("n_samples must be even")
    schema = build_schema(spec)
    zeros = (0,) * schema.gene_count
    samples = [Individual(id=i, mask=zeros, generation=0,
                          sequence=tuple(rng.randrange(c)
                                         for c in schema.option_counts))
               for i in range(n_samples)]
    order = list(range(n_samples))
    rng.shuffle(order)
    winners = []
    history = []
    for i in range(0, n_samples, 2):
        a, b = samples[order[i]], samples[order[i + 1]]
        winner = a if rater.choose(a.sequence, b.sequence) == "a" else b
        winners.append(winner)
        history.append(ComparisonResult(pair=(a.id, b.id),
                                        winner_id=winner.id, rater_id="sim"))
    return top_designs(winners, history, k)


def cross_method_eval(top_ga: list[Individual], top_uniform: list[Individual],
                      n_votes: int, eval_rater: SyntheticRater,
                      condition: str = "", space: int = 0,
                      comparisons_per_method: int = 0,
                      seeds: dict | None = None) -> ExperimentReport:
    """Head-to-head votes between the two methods' top designs.

    Each trial draws one design per method, randomizes presentation
    sides, and records the rater's pick; reports the vote share for the
    searched designs with a z-test against chance.
    """
    if not top_ga or not top_uniform:
        raise ValueError("both top lists must be non-empty")
    rng = eval_rater.rng
    ga_votes = 0
    for _ in range(n_votes):
        ga_design = rng.choice(top_ga)
        uni_design = rng.choice(top_uniform)
        ga_left = rng.random() < 0.5
        left, right = ((ga_design, uni_design) if ga_left
                       else (uni_design, ga_design))
        picked_left = eval_rater.choose(left.sequence, right.sequence) == "a"
        if picked_left == ga_left:
            ga_votes += 1
    share = ga_votes / n_votes
    z, p = proportion_z_test(share, n_votes)
    return ExperimentReport(
        condition=condition, space=space, n_votes=n_votes,
        ga_vote_share=share, z_score=z, p_value=p,
        ga_top_utility=_mean_utility(eval_rater, top_ga),
        uniform_top_utility=_mean_utility(eval_rater, top_uniform),
        comparisons_per_method=comparisons_per_method,
        runtime_seconds=0.0, seeds=seeds or {})


def run_experiment(spec: DesignSpec | str, seed: int, noise_beta: float = 1.0,
                   n_votes: int = 100, config: GAConfig | None = None,
                   k: int = 5, condition: str = "",
                   interaction_scale: float = 0.0) -> ExperimentReport:
    """One full searched-vs-uniform condition under one seed."""
    started = time.perf_counter()
    if isinstance(spec, str):
        spec = parse(spec)
    schema = build_schema(spec)
    base = config or GAConfig()
    engine_config = dataclasses.replace(
        base, rng_seed=_sub_seed(seed, _ROLE_ENGINE))
    truth = GroundTruth.sample(schema, seed, interaction_scale)
    ga_rater = SyntheticRater(schema, truth, noise_beta,
                              _sub_seed(seed, _ROLE_SEARCH_GA))
    uni_rater = SyntheticRater(schema, truth, noise_beta,
                               _sub_seed(seed, _ROLE_SEARCH_UNIFORM))
    eval_rater = SyntheticRater(schema, truth, noise_beta,
                                _sub_seed(seed, _ROLE_EVAL))

    top_ga = run_ga_condition(spec, engine_config, ga_rater, k=k)
    budget = ga_rater.calls
    top_uniform = run_uniform_baseline(
        spec, n_samples=2 * budget, rater=uni_rater,
        rng=random.Random(_sub_seed(seed, _ROLE_SEARCH_UNIFORM) + 1), k=k)
    assert uni_rater.calls == budget, "methods must consume equal budgets"

    report = cross_method_eval(
        top_ga, top_uniform, n_votes, eval_rater,
        condition=condition or f"seed-{seed}", space=space_of(schema),
        comparisons_per_method=budget,
        seeds={"experiment": seed, "engine": engine_config.rng_seed,
               "eval": _sub_seed(seed, _ROLE_EVAL)})
    return dataclasses.replace(
        report, runtime_seconds=time.perf_counter() - started)


def space_of(schema: GeneSchema) -> int:
    from .genome import space_size
    return space_size(schema)


# ---------------------------------------------------------------------------
# Spec family for the size sweep


_FAMILY_COUNTS = {
    50: (2, 5, 5),
    200: (2, 4, 5, 5),
    500: (4, 5, 5, 5),
    1000: (2, 4, 5, 5, 5),
    3000: (2, 3, 4, 5, 5, 5),
    11000: (2, 2, 2, 5, 5, 5, 11),
}

_VALUE_POOLS = {
    "background": ["#f8f9fa", "#212529", "#0d6efd", "#ffc107", "#d63384",
                   "#198754", "#6610f2", "#fd7e14", "#20c997", "#adb5bd",
                   "#343a40"],
    "color": ["#111", "#333", "#555", "#777", "#999", "#bbb", "#036",
              "#063", "#306", "#630", "#603"],
    "font-size": [f"{px}px" for px in range(11, 33, 2)],
    "padding": [f"{px}px" for px in range(2, 46, 4)],
    "margin": [f"{px}px" for px in range(0, 44, 4)],
    "border-radius": [f"{px}px" for px in range(0, 22, 2)],
    "letter-spacing": [f"{n / 10}px" for n in range(0, 22, 2)],
}


def generate_space_spec(size: int) -> str:
    """A hero-page spec whose search space has exactly ``size`` designs.

    Supported sizes match the sweep grid; attribute counts grow with the
    requested size.
    """
    if size not in _FAMILY_COUNTS:
        supported = ", ".join(str(s) for s in _FAMILY_COUNTS)
        raise ValueError(f"unsupported size {size}; choose one of {supported}")
    counts = _FAMILY_COUNTS[size]
    properties = list(_VALUE_POOLS)
    blocks = []
    for i, count in enumerate(counts):
        prop = properties[i % len(properties)]
        values = " ".join(_VALUE_POOLS[prop][:count])
        blocks.append(f'  <div class="block-{i}" explore-{prop}="{values}">\n'
                      f"    <p>section {i}</p>\n  </div>")
    body = "\n".join(blocks)
    return ("<html>\n<head>\n<title>hero</title>\n</head>\n<body>\n"
            f'<main class="hero">\n{body}\n</main>\n</body>\n</html>\n')


@dataclass(frozen=True)
class SweepPoint:
    space: int
    mean_share: float
    stderr: float
    reports: tuple[ExperimentReport, ...]

    def to_json(self) -> dict:
        return {"space": self.space, "mean_share": self.mean_share,
                "stderr": self.stderr,
                "reports": [r.to_json() for r in self.reports]}


def run_space_size_sweep(sizes, seeds, spec_family=generate_space_spec,
                         noise_beta: float = 1.0, n_votes: int = 100,
                         config: GAConfig | None = None) -> list[SweepPoint]:
    """Full pipeline per size per seed; one aggregated point per size."""
    points = []
    for size in sizes:
        spec = parse(spec_family(size))
        reports = tuple(
            run_experiment(spec, seed=seed, noise_beta=noise_beta,
                           n_votes=n_votes, config=config,
                           condition=f"size-{size}-seed-{seed}")
            for seed in seeds)
        shares = [r.ga_vote_share for r in reports]
        mean = sum(shares) / len(shares)
        if len(shares) > 1:
            var = sum((s - mean) ** 2 for s in shares) / (len(shares) - 1)
            stderr = math.sqrt(var / len(shares))
        else:
            stderr = 0.0
        points.append(SweepPoint(space=size, mean_share=mean, stderr=stderr,
                                 reports=reports))
    return points
