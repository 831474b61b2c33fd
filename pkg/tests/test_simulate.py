import math
import random

import pytest

from designsearch import GAConfig, Individual, build_schema, parse, space_size
from designsearch.simulate import (
    GroundTruth,
    SyntheticRater,
    cross_method_eval,
    drive_search,
    generate_space_spec,
    proportion_z_test,
    run_experiment,
    run_ga_condition,
    run_space_size_sweep,
    run_uniform_baseline,
)

from helpers import page, parse_and_schema


NAV = page("""
<div explore-child-id="nav-1 nav-2">
    <div id="nav-1" explore-color="x0 x1 x2">one</div>
    <div id="nav-2" explore-padding="y0 y1">two</div>
</div>
""")


def one_gene_spec():
    return parse(page('<div explore-color="bad good">x</div>'))


def make_rater(schema, table, beta, seed=0):
    return SyntheticRater(schema, GroundTruth(table=table), beta, seed)


def test_utility_sums_active_genes_only():
    spec, schema = parse_and_schema(NAV)
    truth = GroundTruth(table=((1.0, 10.0), (0.5, 0.25, 0.125), (7.0, 3.0)))
    # nav-1 selected: padding gene dormant
    assert truth.utility(schema, (0, 1, 0)) == pytest.approx(1.0 + 0.25)
    # nav-2 selected: color gene dormant
    assert truth.utility(schema, (1, 1, 0)) == pytest.approx(10.0 + 7.0)


def test_truth_table_is_seeded_and_stable():
    spec, schema = parse_and_schema(NAV)
    assert GroundTruth.sample(schema, 5) == GroundTruth.sample(schema, 5)
    assert GroundTruth.sample(schema, 5) != GroundTruth.sample(schema, 6)


def test_interaction_terms_change_utility():
    spec, schema = parse_and_schema(page('<div explore-color="a b">x</div>'
                                         '<div explore-margin="1 2">y</div>'))
    plain = GroundTruth.sample(schema, 3)
    crossed = GroundTruth.sample(schema, 3, interaction_scale=1.0)
    assert plain.utility(schema, (0, 0)) != crossed.utility(schema, (0, 0))


def test_rater_beta_zero_is_a_fair_coin():
    spec = one_gene_spec()
    schema = build_schema(spec)
    rater = make_rater(schema, ((0.0, 100.0),), beta=0.0, seed=4)
    picks = [rater.choose((0,), (1,)) for _ in range(2000)]
    share_a = picks.count("a") / len(picks)
    assert 0.45 < share_a < 0.55


def test_rater_infinite_beta_always_picks_better():
    spec = one_gene_spec()
    schema = build_schema(spec)
    rater = make_rater(schema, ((0.0, 1.0),), beta=math.inf, seed=0)
    assert all(rater.choose((1,), (0,)) == "a" for _ in range(50))
    assert all(rater.choose((0,), (1,)) == "b" for _ in range(50))


def test_rater_logistic_probability():
    spec = one_gene_spec()
    schema = build_schema(spec)
    rater = make_rater(schema, ((0.0, 1.0),), beta=2.0)
    expected = 1.0 / (1.0 + math.exp(-2.0))
    assert rater.prefers_first((1,), (0,)) == pytest.approx(expected)
    assert rater.prefers_first((0,), (1,)) == pytest.approx(1.0 - expected)


def test_proportion_z_test_against_half():
    z, p = proportion_z_test(0.78, 100)
    assert z == pytest.approx(5.6)
    assert p < 1e-7
    z, p = proportion_z_test(0.5, 100)
    assert z == 0.0
    assert p == pytest.approx(1.0)


# --- uniform baseline


def test_uniform_baseline_consumes_half_sample_count():
    spec, schema = parse_and_schema(NAV)
    rater = SyntheticRater(schema, GroundTruth.sample(schema, 0), 1.0, 1)
    run_uniform_baseline(spec, 500, rater, random.Random(2))
    assert rater.calls == 250


def test_uniform_baseline_two_samples_returns_pair_winner():
    spec = one_gene_spec()
    schema = build_schema(spec)
    rater = make_rater(schema, ((0.0, 5.0),), beta=math.inf)
    (top,) = run_uniform_baseline(spec, 2, rater, random.Random(7), k=1)
    assert top.sequence in {(0,), (1,)}


def test_uniform_baseline_noiseless_winner_is_truly_better():
    # Replay the sampling stream to know what was drawn: whenever the
    # pair differs, infinite beta must hand the win to the better option.
    spec = one_gene_spec()
    schema = build_schema(spec)
    for seed in range(30):
        replay = random.Random(seed)
        drawn = [replay.randrange(2) for _ in range(2)]
        rater = make_rater(schema, ((0.0, 5.0),), beta=math.inf, seed=seed)
        (best,) = run_uniform_baseline(spec, 2, rater, random.Random(seed), k=1)
        if drawn[0] != drawn[1]:
            assert best.sequence == (1,)
        else:
            assert best.sequence == (drawn[0],)


def test_uniform_baseline_rejects_odd_sample_count():
    spec = one_gene_spec()
    schema = build_schema(spec)
    rater = make_rater(schema, ((0.0, 1.0),), beta=1.0)
    with pytest.raises(ValueError):
        run_uniform_baseline(spec, 3, rater, random.Random(0))


# --- searched condition


def test_ga_condition_consumes_paper_budget():
    spec = parse(generate_space_spec(1000))
    schema = build_schema(spec)
    rater = SyntheticRater(schema, GroundTruth.sample(schema, 0), 1.0, 2)
    top = run_ga_condition(spec, GAConfig(rng_seed=11), rater)
    assert rater.calls == 250
    assert len(top) == 5


def test_ga_condition_single_iteration():
    spec, schema = parse_and_schema(NAV)
    rater = SyntheticRater(schema, GroundTruth.sample(schema, 1), 1.0, 3)
    top = run_ga_condition(spec, GAConfig(population_size=10, iterations=1,
                                          rng_seed=5), rater, k=3)
    assert rater.calls == 5
    assert len(top) == 3


def test_ga_condition_deterministic_under_seed():
    spec, schema = parse_and_schema(NAV)

    def once():
        rater = SyntheticRater(schema, GroundTruth.sample(schema, 2), 1.0, 9)
        return run_ga_condition(spec, GAConfig(population_size=10,
                                               iterations=3, rng_seed=4), rater)

    assert once() == once()


# --- cross-method evaluation


def test_cross_method_identical_lists_hover_at_half():
    spec, schema = parse_and_schema(NAV)
    truth = GroundTruth.sample(schema, 0)
    top = [Individual(id=i, sequence=(0, 1, 0), mask=(0, 0, 0), generation=0)
           for i in range(5)]
    shares = []
    for seed in range(30):
        rater = SyntheticRater(schema, truth, 1.0, seed)
        report = cross_method_eval(top, top, 100, rater)
        shares.append(report.ga_vote_share)
    mean = sum(shares) / len(shares)
    assert 0.45 < mean < 0.55


def test_cross_method_dominant_list_takes_all_votes():
    spec = one_gene_spec()
    schema = build_schema(spec)
    best = [Individual(id=0, sequence=(1,), mask=(0,), generation=0)]
    worst = [Individual(id=1, sequence=(0,), mask=(0,), generation=0)]
    rater = make_rater(schema, ((0.0, 9.0),), beta=math.inf, seed=0)
    report = cross_method_eval(best, worst, 200, rater)
    assert report.ga_vote_share == 1.0
    assert report.p_value < 1e-10


def test_cross_method_z_band_at_true_preference_078():
    # Binomial oracle: with P(searched design wins) = .78 and 100 votes,
    # the z statistic concentrates around (0.78-0.5)/sqrt(0.25/100).
    spec = one_gene_spec()
    schema = build_schema(spec)
    gap = math.log(0.78 / 0.22)  # logistic(gap) == 0.78 at beta 1
    ga_top = [Individual(id=0, sequence=(1,), mask=(0,), generation=0)]
    uni_top = [Individual(id=1, sequence=(0,), mask=(0,), generation=0)]
    zs = []
    for seed in range(50):
        rater = make_rater(schema, ((0.0, gap),), beta=1.0, seed=seed)
        zs.append(cross_method_eval(ga_top, uni_top, 100, rater).z_score)
    mean_z = sum(zs) / len(zs)
    assert 5.0 < mean_z < 6.7
    assert all(2.8 < z < 8.4 for z in zs)  # within ~3.4 sigma of 5.6


def test_cross_method_requires_non_empty_lists():
    spec = one_gene_spec()
    schema = build_schema(spec)
    rater = make_rater(schema, ((0.0, 1.0),), beta=1.0)
    with pytest.raises(ValueError):
        cross_method_eval([], [Individual(id=0, sequence=(0,), mask=(0,),
                                          generation=0)], 10, rater)


# --- full experiments


def test_experiment_budget_parity_and_report_shape():
    spec = parse(generate_space_spec(200))
    report = run_experiment(spec, seed=0)
    assert report.comparisons_per_method == 250
    assert report.n_votes == 100
    assert 0.0 <= report.ga_vote_share <= 1.0
    assert report.space == 200
    data = report.to_json()
    assert data["condition"] == "seed-0"
    assert data["seeds"]["experiment"] == 0


def test_experiment_null_signal_control():
    spec = parse(generate_space_spec(1000))
    votes = 0
    wins = 0
    for seed in range(10):
        report = run_experiment(spec, seed=seed, noise_beta=0.0)
        votes += report.n_votes
        wins += round(report.ga_vote_share * report.n_votes)
    share = wins / votes
    assert 0.40 <= share <= 0.60


def test_search_improves_ground_truth_utility_over_generations():
    spec = parse(generate_space_spec(1000))
    schema = build_schema(spec)
    first, last = [], []
    for seed in range(10):
        truth = GroundTruth.sample(schema, seed)
        rater = SyntheticRater(schema, truth, 1.0, seed + 71)
        run = drive_search(schema, GAConfig(rng_seed=seed), rater)
        best = [max(truth.utility(schema, tuple(ind["sequence"]))
                    for ind in record["individuals"])
                for record in run.history]
        first.append(best[0])
        last.append(best[-1])
    assert sum(last) / len(last) > sum(first) / len(first)


def test_generated_specs_hit_requested_sizes():
    for size in (50, 200, 500, 1000, 3000, 11000):
        spec = parse(generate_space_spec(size))
        assert space_size(build_schema(spec)) == size


def test_generated_spec_rejects_unknown_size():
    with pytest.raises(ValueError):
        generate_space_spec(123)


def test_sweep_reports_one_point_per_size():
    points = run_space_size_sweep([50, 1000], seeds=range(3), n_votes=40)
    assert [p.space for p in points] == [50, 1000]
    assert all(len(p.reports) == 3 for p in points)
    assert all(0.0 <= p.mean_share <= 1.0 for p in points)
    single = run_space_size_sweep([500], seeds=[7], n_votes=20)
    assert len(single) == 1 and single[0].stderr == 0.0
