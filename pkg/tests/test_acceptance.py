"""Acceptance suite: each test enforces one release criterion at its
stated tolerance and prints a PASS/FAIL line."""

import random
import threading
import time
from contextlib import contextmanager

from designsearch import (
    GAConfig,
    Individual,
    apply_feedback,
    build_schema,
    crossover,
    diff_mask,
    mutate,
    parse,
    space_size,
    templates,
    validate,
)
from designsearch.scheduler import (
    AlreadySubmitted,
    Budget,
    LeaseExpired,
    NotLeaseHolder,
    QuotaExhausted,
    TaskService,
    audit_events,
)
from designsearch.simulate import (
    GroundTruth,
    SyntheticRater,
    drive_search,
    generate_space_spec,
    proportion_z_test,
    run_experiment,
    run_space_size_sweep,
)

from helpers import enumerate_renders, random_schema, random_spec_html


@contextmanager
def criterion(name: str):
    try:
        yield
    except BaseException:
        print(f"[acceptance] {name}: FAIL")
        raise
    print(f"[acceptance] {name}: PASS")


def rand_sequence(schema, rng):
    return tuple(rng.randrange(c) for c in schema.option_counts)


def rand_individual(schema, rng, id=0, with_mask=False):
    n = schema.gene_count
    mask = tuple(rng.randrange(2) for _ in range(n)) if with_mask else (0,) * n
    return Individual(id=id, sequence=rand_sequence(schema, rng), mask=mask,
                      generation=0)


def test_c1_markup_round_trip():
    with criterion("C1 markup round-trip over template corpus"):
        names = templates.names()
        assert len(names) >= 12
        started = time.perf_counter()
        for name in names:
            first = parse(templates.load(name))
            assert validate(first) == [], name
            again = parse(first.base_html)
            assert again.attributes == first.attributes, name
            assert again.base_html == first.base_html, name
        elapsed = time.perf_counter() - started
        assert elapsed < 1.0, f"corpus round-trip took {elapsed:.2f}s"


def test_c2_space_size_enumeration_oracle():
    with criterion("C2 space size equals enumerated distinct renders"):
        checked = 0
        nested = 0
        seed = 0
        while checked < 20:
            rng = random.Random(9000 + seed)
            seed += 1
            html, has_nested = random_spec_html(rng, max_raw=800)
            spec = parse(html)
            schema = build_schema(spec)
            if schema.gene_count < 2:
                continue
            size = space_size(schema)
            assert size <= 5000
            assert size == len(enumerate_renders(spec, schema))
            checked += 1
            nested += has_nested
        assert nested >= 5, f"only {nested} nested specs in the sample"
        # the bundled nested templates, including the 972-design page
        for name in ("nested_chain", "cover"):
            spec = parse(templates.load(name))
            schema = build_schema(spec)
            assert space_size(schema) == len(enumerate_renders(spec, schema))


def test_c3_mask_algebra_properties():
    with criterion("C3 mask algebra (10^4 cases per property)"):
        rng = random.Random(31)
        cases = 10_000

        for _ in range(cases):  # diff mask symmetry
            schema = random_schema(rng, max_genes=6)
            a = rand_individual(schema, rng, id=0)
            b = rand_individual(schema, rng, id=1)
            assert diff_mask(schema, a, b) == diff_mask(schema, b, a)

        for _ in range(cases):  # OR monotonicity
            schema = random_schema(rng, max_genes=6)
            ind = rand_individual(schema, rng, with_mask=True)
            dmask = tuple(rng.randrange(2) for _ in range(schema.gene_count))
            merged = apply_feedback(ind, dmask).mask
            assert all(m >= o for m, o in zip(merged, ind.mask))
            assert all(m >= d for m, d in zip(merged, dmask))

        for _ in range(cases):  # crossover keeps mask-1 positions
            schema = random_schema(rng, max_genes=6, linked=False)
            n = schema.gene_count
            pa = rand_individual(schema, rng, id=0, with_mask=True)
            pb = rand_individual(schema, rng, id=1, with_mask=True)
            state = rng.getstate()
            ca, cb = crossover(pa, pb, schema, rng)
            probe = random.Random()
            probe.setstate(state)
            point = probe.randint(1, n - 1)
            for child, head, tail in ((ca, pa, pb), (cb, pb, pa)):
                swapped_seq = head.sequence[:point] + tail.sequence[point:]
                swapped_mask = head.mask[:point] + tail.mask[point:]
                assert child.mask == swapped_mask
                for gene in range(n):
                    if swapped_mask[gene]:
                        assert child.sequence[gene] == swapped_seq[gene]

        for _ in range(cases):  # exact swap in the all-ones-mask case
            schema = random_schema(rng, max_genes=6, linked=False)
            n = schema.gene_count
            ones = (1,) * n
            pa = Individual(id=0, sequence=rand_sequence(schema, rng),
                            mask=ones, generation=0)
            pb = Individual(id=1, sequence=rand_sequence(schema, rng),
                            mask=ones, generation=0)
            state = rng.getstate()
            ca, cb = crossover(pa, pb, schema, rng)
            probe = random.Random()
            probe.setstate(state)
            point = probe.randint(1, n - 1)
            assert ca.sequence == pa.sequence[:point] + pb.sequence[point:]
            assert cb.sequence == pb.sequence[:point] + pa.sequence[point:]
            assert ca.mask == ones and cb.mask == ones


def test_c4_protocol_arithmetic():
    with criterion("C4 run arithmetic: 10x25 comparisons, pop 50, 3% flips"):
        spec = parse(templates.load("cover"))
        schema = build_schema(spec)
        config = GAConfig()  # stock defaults: 50 designs x 10 rounds at .03
        rater = SyntheticRater(schema, GroundTruth.sample(schema, 0), 1.0, 1)
        run = drive_search(schema, config, rater)
        assert rater.calls == 250
        assert len(run.history) == 10
        assert all(len(record["individuals"]) == 50 for record in run.history)

        flat = random_schema(random.Random(5), max_genes=8, linked=False)
        rng = random.Random(8)
        trials = 10_000
        flips = 0
        for _ in range(trials):
            ind = rand_individual(flat, rng)
            out = mutate(ind, flat, config, rng)
            flips += sum(a != b for a, b in zip(out.sequence, ind.sequence))
        per_gene = flips / (trials * flat.gene_count)
        assert 0.027 <= per_gene <= 0.033, per_gene


def test_c5_search_superiority_at_size_1000():
    with criterion("C5 searched top-5 beats uniform at size 1000"):
        started = time.perf_counter()
        spec = parse(generate_space_spec(1000))
        utility_wins = 0
        ga_votes = 0
        total_votes = 0
        seeds = 20
        for seed in range(seeds):
            report = run_experiment(spec, seed=seed, noise_beta=1.0,
                                    n_votes=100)
            utility_wins += report.ga_top_utility > report.uniform_top_utility
            ga_votes += round(report.ga_vote_share * report.n_votes)
            total_votes += report.n_votes
        share = ga_votes / total_votes
        z, p = proportion_z_test(share, total_votes)
        assert utility_wins >= 0.8 * seeds, f"{utility_wins}/{seeds}"
        assert share > 0.55, share
        assert p < 0.05, (z, p)
        assert time.perf_counter() - started < 300


def test_c6_vote_share_grows_with_space_size():
    with criterion("C6 larger spaces favor the searched designs"):
        points = run_space_size_sweep([50, 1000, 3000], seeds=range(10))
        by_size = {point.space: point.mean_share for point in points}
        assert by_size[1000] > by_size[50], by_size
        assert by_size[3000] > by_size[50], by_size


SPEC_HTML = parse(templates.load("snippet_nav")).base_html


def _stress_once(run_seed: int) -> None:
    rng = random.Random(run_seed)
    population = rng.choice((10, 20))
    iterations = rng.choice((2, 3))
    quota = rng.choice((2, 3))
    abandon_rate = rng.choice((0.0, 0.05))
    service = TaskService(lease_seconds=0.05)
    task = service.create_task(
        SPEC_HTML,
        config=GAConfig(population_size=population, iterations=iterations,
                        rng_seed=run_seed),
        budget=Budget(worker_count=100, per_worker_quota=quota))
    tid = task["task_id"]
    deadline = time.time() + 60

    def rater(name: str) -> None:
        wrng = random.Random((run_seed, name).__hash__())
        while time.time() < deadline:
            try:
                assignment = service.request_assignment(tid, name)
            except QuotaExhausted:
                return
            if assignment is None:
                if service.progress(tid)["state"] == "completed":
                    return
                time.sleep(0.001)
                continue
            if wrng.random() < abandon_rate:
                continue  # walk away; the lease must expire back to the pool
            try:
                service.submit_choice(assignment["assignment_id"], name,
                                      wrng.choice(("left", "right")))
            except (AlreadySubmitted, LeaseExpired, NotLeaseHolder):
                pass

    threads = [threading.Thread(target=rater, args=(f"w{i}",))
               for i in range(100)]
    for thread in threads:
        thread.start()
    for thread in threads:
        thread.join(timeout=70)
    assert not any(thread.is_alive() for thread in threads), "stalled raters"
    snapshot = service.progress(tid)
    assert snapshot["state"] == "completed", snapshot
    assert snapshot["rated_total"] == iterations * population // 2
    violations = audit_events(service._log.events)
    assert violations == [], violations
    service.close()


def test_c7_scheduler_linearizability():
    with criterion("C7 concurrent raters, exact rounds, restartable log"):
        for run_seed in range(50):
            _stress_once(run_seed)

        # restart mid-generation on a persistent store
        import tempfile
        from pathlib import Path
        with tempfile.TemporaryDirectory() as tmp:
            store = Path(tmp) / "events.jsonl"
            first = TaskService(store_path=store)
            task = first.create_task(
                SPEC_HTML, config=GAConfig(population_size=10, iterations=2,
                                           rng_seed=7),
                budget=Budget(worker_count=100, per_worker_quota=5))
            tid = task["task_id"]
            rng = random.Random(0)
            for _ in range(3):  # 3 of 5 pairs rated: mid-generation
                assignment = first.request_assignment(tid, "w1")
                first.submit_choice(assignment["assignment_id"], "w1",
                                    rng.choice(("left", "right")))
            before = first.progress(tid)
            prefix = store.read_text()
            first.close()

            second = TaskService(store_path=store)
            after = second.progress(tid)
            assert {k: after[k] for k in ("generation", "rated", "designs")} \
                == {k: before[k] for k in ("generation", "rated", "designs")}
            raters = [f"r{i}" for i in range(10)]
            while second.progress(tid)["state"] != "completed":
                moved = False
                for name in raters:
                    try:
                        assignment = second.request_assignment(tid, name)
                    except QuotaExhausted:
                        continue
                    if assignment is None:
                        continue
                    second.submit_choice(assignment["assignment_id"], name,
                                         rng.choice(("left", "right")))
                    moved = True
                assert moved, "no progress while incomplete"
            final_log = store.read_text()
            assert final_log.startswith(prefix)
            assert audit_events(second._log.stored_events()) == []
            second.close()


def test_c8_null_signal_control():
    with criterion("C8 coin-flip raters give no spurious superiority"):
        spec = parse(generate_space_spec(1000))
        ga_votes = 0
        total = 0
        for seed in range(10):
            report = run_experiment(spec, seed=seed, noise_beta=0.0,
                                    n_votes=100)
            ga_votes += round(report.ga_vote_share * report.n_votes)
            total += report.n_votes
        share = ga_votes / total
        assert 0.40 <= share <= 0.60, share
