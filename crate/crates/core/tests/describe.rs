use meaning_core::abstraction::is_abstracting;
use meaning_core::comprehension::Check;
use meaning_core::describe::{
    describe, describe_failure, describe_operator, describe_own_concept, goal_membership, goal_met, lexicon_pool,
    DescribeProblem, FailureCase, GoalTest, PoolOperator,
};
use meaning_core::operator::{apply_and, apply_hedge};
use meaning_core::seed::{fixtures, seed_lexicon};
use meaning_core::{ContextId, Error, MeaningOperator, Region};

/// Every sequence of `n` symbols of length `len`.
fn words(n: usize, len: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..len {
        out = out.iter().flat_map(|p| (0..n).map(move |i| [p.clone(), vec![i]].concat())).collect();
    }
    out
}

fn goal_of(problem: &DescribeProblem, ops: &[MeaningOperator]) -> Vec<f64> {
    let seq = MeaningOperator::sequence(ops.to_vec());
    let finals: Vec<Region> = problem.sources.iter().map(|s| seq.apply(s).unwrap()).collect();
    problem.goal.apply(&finals).unwrap()
}

#[test]
fn toy_refined_pair_is_the_shortest_concrete_answer() {
    let problem = fixtures::describe_toy(32).unwrap();
    let d = describe(&problem).unwrap();
    assert_eq!(d.abstract_names, ["relocate"]);
    assert_eq!(d.names, ["go-north", "go-east"]);
    assert!(d.goal_membership >= 0.9);

    // Enumerate concrete compositions: none of length one meets the goal,
    // and among length two none beats the found pair.
    let concrete: Vec<&PoolOperator> = problem.pool.iter().filter(|p| p.level == 0).collect();
    let theta = problem.goal_threshold;
    for w in words(concrete.len(), 1) {
        let g = goal_of(&problem, &[concrete[w[0]].operator.clone()]);
        assert!(!goal_met(&g, theta));
    }
    let best = words(concrete.len(), 2)
        .into_iter()
        .map(|w| {
            goal_membership(
                &goal_of(&problem, &w.iter().map(|i| concrete[*i].operator.clone()).collect::<Vec<_>>()),
                theta,
            )
        })
        .fold(0.0, f64::max);
    assert!((d.goal_membership - best).abs() < 1e-12);
    assert!(d.visited < d.exhaustive);
    let n = problem.pool.len();
    assert_eq!(d.exhaustive, n + n * n);
}

#[test]
fn toy_refinement_passes_the_abstraction_check() {
    let problem = fixtures::describe_toy(32).unwrap();
    let d = describe(&problem).unwrap();
    let relocate = problem.pool.iter().find(|p| p.operator.name == "relocate").unwrap();
    let axes = relocate.operator.external_axes().unwrap();
    let mut probes = problem.probes.clone();
    probes.extend(problem.sources.iter().cloned());
    let family = [MeaningOperator::sequence(d.composition.clone())];
    let v = is_abstracting(&relocate.operator, &family, &axes, &problem.abstraction, &probes).unwrap();
    assert!(v.holds, "residual {}", v.residual);
    assert_eq!(d.refinements[0].replacement, d.names);
}

#[test]
fn slow_is_uniquely_not_fast_among_short_compositions() {
    let lex = seed_lexicon(32).unwrap();
    let d = describe_own_concept("slow", &lex).unwrap();
    assert_eq!(d.names, ["not", "fast"]);
    // Same problem by hand: every composition of at most two pool words.
    let slow = &lex.lookup("slow")[0].operator;
    let q = lex.context(&ContextId::new("quickness")).unwrap();
    let sources = meaning_core::abstraction::default_probes(q, 32).unwrap();
    let targets = sources.iter().map(|s| slow.apply(s)).collect::<Result<Vec<_>, _>>().unwrap();
    let pool = lexicon_pool(&lex, &["slow"]);
    let problem = DescribeProblem::new(sources, pool.clone(), GoalTest::Agreement { targets }).unwrap();
    let applicable: Vec<&PoolOperator> =
        pool.iter().filter(|p| p.operator.external_axes().is_none_or(|a| a.iter().all(|x| q.contains(x)))).collect();
    let mut met = Vec::new();
    for len in 1..=2 {
        for w in words(applicable.len(), len) {
            let ops: Vec<MeaningOperator> = w.iter().map(|i| applicable[*i].operator.clone()).collect();
            if goal_met(&goal_of(&problem, &ops), problem.goal_threshold) {
                met.push(ops.iter().map(|o| o.name.clone()).collect::<Vec<_>>());
            }
        }
    }
    assert_eq!(met, vec![vec!["not".to_string(), "fast".to_string()]]);
}

#[test]
fn very_fast_is_described_as_very_fast() {
    let lex = seed_lexicon(32).unwrap();
    let fast = lex.lookup("fast")[0].operator.clone();
    let very = lex.lookup("very")[0].operator.clone();
    let op = MeaningOperator::sequence(vec![very, fast]);
    let q = lex.context(&ContextId::new("quickness")).unwrap().clone();
    let d = describe_operator(&op, &q, &lex, &[]).unwrap();
    assert_eq!(d.names, ["very", "fast"]);
}

#[test]
fn single_operator_reaching_the_goal_is_one_step() {
    let problem = fixtures::describe_toy(32).unwrap();
    let relocate = problem.pool[0].clone();
    let sources = problem.probes.clone();
    let targets = sources.iter().map(|s| relocate.operator.apply(s)).collect::<Result<Vec<_>, _>>().unwrap();
    let one = DescribeProblem::new(sources, vec![relocate], GoalTest::Agreement { targets }).unwrap();
    let d = describe(&one).unwrap();
    assert_eq!(d.names, ["relocate"]);
    assert_eq!(d.trace.len(), 2);
}

#[test]
fn words_without_other_decomposition() {
    let lex = seed_lexicon(32).unwrap();
    assert!(matches!(describe_own_concept("moderately-paced", &lex), Err(Error::NoDescription(_))));
    assert!(matches!(describe_own_concept("zzz", &lex), Err(Error::UnknownWords(_))));
}

#[test]
fn failure_reports() {
    let lex = seed_lexicon(32).unwrap();
    let q = lex.context(&ContextId::new("quickness")).unwrap().clone();
    let region = |w: &str| lex.lookup(w)[0].operator.apply(&Region::empty(q.clone())).unwrap();
    let (fast, slow) = (region("fast"), region("slow"));
    let both = apply_and(&fast, &slow).unwrap();
    let one = describe_failure(
        &[FailureCase {
            label: "slow and fast".into(),
            passing: slow.clone(),
            failing: both.clone(),
            check: Check::Contradiction,
        }],
        &lex,
    );
    assert_eq!(one.len(), 1);
    let text = one[0].render();
    assert!(text.contains("contradiction"), "{text}");
    assert!(text.contains("slow and fast"), "{text}");
    assert!(one[0].passing.is_ok());
    assert!(describe_failure(&[], &lex).is_empty());
    let very_fast = apply_hedge("very", &fast).unwrap();
    let cases = [
        FailureCase { label: "b".into(), passing: very_fast, failing: both.clone(), check: Check::Contradiction },
        FailureCase { label: "a".into(), passing: fast, failing: both, check: Check::Vacuous },
    ];
    let two = describe_failure(&cases, &lex);
    assert_eq!(two.iter().map(|e| e.label.as_str()).collect::<Vec<_>>(), ["b", "a"]);
    assert_eq!(two[0].passing.as_ref().unwrap(), &["very", "fast"]);
}
