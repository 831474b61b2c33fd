"""Genetic search driven by pairwise-comparison feedback.

The operators differ from a conventional GA in three ways: every
individual carries a feedback mask marking genes endorsed by a won
comparison, crossover swaps masks together with genes and re-randomizes
every unmasked position, and comparisons credit the winner only at the
positions where the two shown designs actually differed (the diff mask).
"""

from __future__ import annotations

import json
import random
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Sequence

from .genome import GeneSchema, active_genes


class OddPopulation(ValueError):
    pass


@dataclass(frozen=True)
class GAConfig:
    population_size: int = 50
    iterations: int = 10
    mutation_rate: float = 0.03
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.population_size < 2 or self.population_size % 2:
            raise ValueError("population_size must be an even integer >= 2")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if not 0.0 <= self.mutation_rate <= 1.0:
            raise ValueError("mutation_rate must be in [0, 1]")


@dataclass(frozen=True)
class Individual:
    id: int
    sequence: tuple[int, ...]
    mask: tuple[int, ...]
    generation: int
    wins: int = 0           # comparison wins in its own round
    lineage_wins: int = 0   # wins accumulated along its ancestry

    def to_json(self) -> dict:
        return {"id": self.id, "sequence": list(self.sequence),
                "mask": list(self.mask), "generation": self.generation,
                "wins": self.wins, "lineage_wins": self.lineage_wins}


@dataclass(frozen=True)
class ComparisonResult:
    pair: tuple[int, int]
    winner_id: int
    rater_id: str

    def __post_init__(self) -> None:
        if self.winner_id not in self.pair:
            raise ValueError("winner must be a member of the pair")

    def to_json(self) -> dict:
        return {"pair": list(self.pair), "winner_id": self.winner_id,
                "rater_id": self.rater_id}


def random_sequence(schema: GeneSchema, rng: random.Random) -> tuple[int, ...]:
    return tuple(rng.randrange(count) for count in schema.option_counts)


def initialize(schema: GeneSchema, config: GAConfig, rng: random.Random,
               seeds: Sequence[Sequence[int]] = ()) -> list[Individual]:
    """Coverage-driven first generation.

    Works through a queue of (gene, option) pairs: each queue entry fixes
    that option in one otherwise-random individual, so every option of
    every gene appears at least once while the budget lasts. Leftover
    slots (queue exhausted) are fully random. Masks start all zero: no
    rater feedback exists yet. Optional ``seeds`` (from a relaunch) are
    inserted first.
    """
    n = schema.gene_count
    zeros = (0,) * n
    population: list[Individual] = []

    def emit(sequence: tuple[int, ...]) -> None:
        population.append(Individual(id=len(population), sequence=sequence,
                                     mask=zeros, generation=0))

    for seed_seq in seeds:
        if len(population) == config.population_size:
            break
        emit(tuple(seed_seq))
    queue = [(gene, option) for gene in range(n)
             for option in range(schema.option_counts[gene])]
    for gene, option in queue:
        if len(population) == config.population_size:
            break
        sequence = list(random_sequence(schema, rng))
        sequence[gene] = option
        emit(tuple(sequence))
    while len(population) < config.population_size:
        emit(random_sequence(schema, rng))
    return population


def pair_population(population: Sequence[Individual],
                    rng: random.Random) -> list[tuple[Individual, Individual]]:
    """A uniformly random perfect matching; every individual rated once."""
    if len(population) % 2:
        raise OddPopulation(f"cannot pair {len(population)} individuals")
    shuffled = list(population)
    rng.shuffle(shuffled)
    return [(shuffled[i], shuffled[i + 1]) for i in range(0, len(shuffled), 2)]


def diff_mask(schema: GeneSchema, a: Individual, b: Individual) -> tuple[int, ...]:
    """1 where the two designs visibly differ.

    A position differs when both sides are active with different values,
    or active on exactly one side. Genes dormant in both designs are
    render-invisible and never counted.
    """
    active_a = active_genes(schema, a.sequence)
    active_b = active_genes(schema, b.sequence)
    bits = []
    for gene in range(schema.gene_count):
        in_a, in_b = gene in active_a, gene in active_b
        if in_a and in_b:
            bits.append(int(a.sequence[gene] != b.sequence[gene]))
        else:
            bits.append(int(in_a != in_b))
    return tuple(bits)


def apply_feedback(winner: Individual, dmask: Sequence[int]) -> Individual:
    """OR the diff mask into the winner's feedback mask."""
    if len(dmask) != len(winner.mask):
        raise ValueError("mask length mismatch")
    merged = tuple(m | d for m, d in zip(winner.mask, dmask))
    return replace(winner, mask=merged)


def crossover(parent_a: Individual, parent_b: Individual, schema: GeneSchema,
              rng: random.Random) -> tuple[Individual, Individual]:
    """Mask-aware single-point crossover.

    Genes and masks to the right of the point swap together; afterwards
    every position whose mask bit is 0 is re-drawn uniformly from that
    gene's options (in child a first, then child b), injecting variation
    exactly where no rater has endorsed a value. With one gene there is
    no point to draw and only the re-draw happens.
    """
    n = schema.gene_count
    if n > 1:
        point = rng.randint(1, n - 1)
        seq_a = parent_a.sequence[:point] + parent_b.sequence[point:]
        seq_b = parent_b.sequence[:point] + parent_a.sequence[point:]
        mask_a = parent_a.mask[:point] + parent_b.mask[point:]
        mask_b = parent_b.mask[:point] + parent_a.mask[point:]
    else:
        seq_a, mask_a = parent_a.sequence, parent_a.mask
        seq_b, mask_b = parent_b.sequence, parent_b.mask

    def redraw(sequence: tuple[int, ...], mask: tuple[int, ...]) -> tuple[int, ...]:
        return tuple(value if bit else rng.randrange(schema.option_counts[gene])
                     for gene, (value, bit) in enumerate(zip(sequence, mask)))

    generation = max(parent_a.generation, parent_b.generation) + 1
    lineage = (parent_a.lineage_wins + parent_a.wins
               + parent_b.lineage_wins + parent_b.wins)
    child_a = Individual(id=-1, sequence=redraw(seq_a, mask_a), mask=mask_a,
                         generation=generation, lineage_wins=lineage)
    child_b = Individual(id=-1, sequence=redraw(seq_b, mask_b), mask=mask_b,
                         generation=generation, lineage_wins=lineage)
    return child_a, child_b


def mutate(individual: Individual, schema: GeneSchema, config: GAConfig,
           rng: random.Random) -> Individual:
    """Per-gene Bernoulli mutation; a mutated gene is forced to change
    value and loses its feedback bit."""
    sequence = list(individual.sequence)
    mask = list(individual.mask)
    for gene, count in enumerate(schema.option_counts):
        if rng.random() < config.mutation_rate:
            other = rng.randrange(count - 1)
            if other >= sequence[gene]:
                other += 1
            sequence[gene] = other
            mask[gene] = 0
    return replace(individual, sequence=tuple(sequence), mask=tuple(mask))


def next_generation(winners: Sequence[Individual], schema: GeneSchema,
                    config: GAConfig, rng: random.Random,
                    id_start: int = 0) -> list[Individual]:
    """Breed a full population from the comparison winners.

    Parents are drawn uniformly with replacement across pairings, the two
    parents of one crossover distinct whenever possible. Winner order
    does not matter: the pool is sorted by id before drawing.
    """
    if not winners:
        raise ValueError("cannot breed from an empty winner pool")
    pool = sorted(winners, key=lambda ind: ind.id)
    children: list[Individual] = []
    while len(children) < config.population_size:
        if len(pool) >= 2:
            parent_a, parent_b = rng.sample(pool, 2)
        else:
            parent_a = parent_b = pool[0]
        for child in crossover(parent_a, parent_b, schema, rng):
            children.append(mutate(child, schema, config, rng))
    return [replace(child, id=id_start + i) for i, child in enumerate(children)]


def top_designs(final_population: Sequence[Individual],
                results_history: Iterable[ComparisonResult],
                k: int) -> list[Individual]:
    """Rank by final-round votes, then ancestral wins, then id; k clamps."""
    votes = Counter(result.winner_id for result in results_history)
    ranked = sorted(final_population,
                    key=lambda ind: (-votes[ind.id], -ind.lineage_wins, ind.id))
    return ranked[:max(0, min(k, len(ranked)))]


# ---------------------------------------------------------------------------
# Run orchestration


class Evolution:
    """Drives one search: rounds of disjoint pairs, feedback, breeding.

    The caller supplies comparison outcomes (from raters or a simulation
    oracle) through record_choice; advance() breeds the next generation
    once the round is complete. The whole run is a pure function of
    (schema, config, seeds, choice outcomes): outcome arrival order does
    not influence the random stream.
    """

    def __init__(self, schema: GeneSchema, config: GAConfig,
                 seeds: Sequence[Sequence[int]] = ()):
        self.schema = schema
        self.config = config
        self._rng = random.Random(config.rng_seed)
        self.population = initialize(schema, config, self._rng, seeds=seeds)
        self.generation = 0
        self.finished = False
        self.results: list[ComparisonResult] = []
        self.history: list[dict] = []
        self._next_id = len(self.population)
        self._begin_round()

    def _begin_round(self) -> None:
        self._by_id = {ind.id: ind for ind in self.population}
        self.pairs = [(a.id, b.id) for a, b
                      in pair_population(self.population, self._rng)]
        self._round_results: dict[int, ComparisonResult] = {}

    # -- round bookkeeping

    def individual(self, individual_id: int) -> Individual:
        return self._by_id[individual_id]

    def pending_pairs(self) -> list[tuple[int, tuple[int, int]]]:
        return [(i, pair) for i, pair in enumerate(self.pairs)
                if i not in self._round_results]

    @property
    def round_complete(self) -> bool:
        return len(self._round_results) == len(self.pairs)

    @property
    def rated_count(self) -> int:
        return len(self._round_results)

    def record_choice(self, pair_index: int, winner_id: int,
                      rater_id: str = "sim") -> ComparisonResult:
        """Record one comparison outcome and credit the winner's mask."""
        if self.finished:
            raise RuntimeError("run already finished")
        if pair_index in self._round_results:
            raise ValueError(f"pair {pair_index} already rated")
        pair = self.pairs[pair_index]
        if winner_id not in pair:
            raise ValueError(f"winner {winner_id} not in pair {pair}")
        result = ComparisonResult(pair=pair, winner_id=winner_id,
                                  rater_id=rater_id)
        winner = self._by_id[winner_id]
        loser = self._by_id[pair[0] if winner_id == pair[1] else pair[1]]
        updated = apply_feedback(winner, diff_mask(self.schema, winner, loser))
        updated = replace(updated, wins=updated.wins + 1)
        self._by_id[winner_id] = updated
        self.population = [self._by_id[ind.id] for ind in self.population]
        self._round_results[pair_index] = result
        self.results.append(result)
        return result

    def advance(self) -> bool:
        """Close the round; breed unless it was the last. True if a new
        round opened."""
        if not self.round_complete:
            raise RuntimeError("round still has pending pairs")
        if self.finished:
            raise RuntimeError("run already finished")
        self.history.append({
            "generation": self.generation,
            "individuals": [ind.to_json() for ind in self.population],
            "pairs": [list(p) for p in self.pairs],
            "results": [r.to_json() for r in self._round_results.values()],
        })
        if self.generation == self.config.iterations - 1:
            self.finished = True
            return False
        winners = sorted((ind for ind in self.population if ind.wins > 0),
                         key=lambda ind: ind.id)
        self.population = next_generation(winners, self.schema, self.config,
                                          self._rng, id_start=self._next_id)
        self._next_id += len(self.population)
        self.generation += 1
        self._begin_round()
        return True

    def run(self, choose: Callable[[Individual, Individual], int],
            rater_id: str = "sim") -> None:
        """Drive the whole search with a choice function returning the
        winning individual's id for each shown pair."""
        while True:
            for index, (a_id, b_id) in self.pending_pairs():
                winner = choose(self._by_id[a_id], self._by_id[b_id])
                self.record_choice(index, winner, rater_id)
            if not self.advance():
                return

    def top(self, k: int) -> list[Individual]:
        if not self.finished:
            raise RuntimeError("run still in progress")
        return top_designs(self.population, self.results, k)

    def history_jsonl(self) -> str:
        """Generation log: one JSON record per completed round."""
        return "\n".join(json.dumps(record) for record in self.history)
