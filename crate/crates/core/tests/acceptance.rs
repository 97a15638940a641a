//! Acceptance suite: one PASS/FAIL line per criterion. Runs without the
//! libtest harness so the lines always reach the output.

use std::sync::Arc;

use meaning_core::abstraction::{default_probes, is_abstracting, AbstractionParams};
use meaning_core::describe::{describe, describe_own_concept, goal_met};
use meaning_core::interpreter::Action;
use meaning_core::operator::{
    apply_and, apply_but, apply_hedge, apply_not, apply_or, CoordinateMap, GeneralTransform, PointwiseFn,
};
use meaning_core::region::quantize;
use meaning_core::scenario::{run, Scenario};
use meaning_core::seed::{fixtures, seed_lexicon};
use meaning_core::{
    AxisId, Context, EngineConfig, Factor, Lexicon, MeaningOperator, MembershipGrid, OperatorKind, Region, Session,
};

/// De Morgan duality tolerance.
const DE_MORGAN_TOL: f64 = 1e-9;
/// Axis-expansion oracle tolerance.
const EXPANSION_TOL: f64 = 0.05;
/// Contradiction peak: `0.5 ± 0.02`.
const CONTRADICTION_PEAK: f64 = 0.5;
const CONTRADICTION_TOL: f64 = 0.02;
/// Lower edge of the top quartile of an axis.
const TOP_QUARTILE: f64 = 0.75;
/// Goal membership a description must reach.
const DESCRIBE_GOAL: f64 = 0.9;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn ax(s: &str) -> AxisId {
    AxisId::new(s)
}

fn line_ctx(id: &str, axis: &str) -> Context {
    Context::new(id, vec![ax(axis)]).unwrap()
}

fn line(id: &str, axis: &str, n: usize, f: impl Fn(f64) -> f64) -> Region {
    let g = MembershipGrid::from_fn(vec![ax(axis)], n, |c| f(c[0])).unwrap();
    Region::from_grid(line_ctx(id, axis), g).unwrap()
}

fn values(r: &Region) -> Vec<f64> {
    r.factors().iter().flat_map(|f| f.grid.values().to_vec()).collect()
}

/// Deterministic pseudo-random memberships.
fn lcg_values(seed: u64, n: usize) -> Vec<f64> {
    let mut s = seed;
    (0..n)
        .map(|_| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            quantize((s >> 11) as f64 / (1u64 << 53) as f64)
        })
        .collect()
}

fn random_line(seed: u64, axis: &str) -> Region {
    let g = MembershipGrid::from_values(vec![ax(axis)], 32, lcg_values(seed, 32)).unwrap();
    Region::from_grid(line_ctx("c", axis), g).unwrap()
}

fn operator_laws() -> Outcome {
    let mut regions: Vec<Region> = (0..50).map(|k| random_line(k, "x")).collect();
    regions.push(line("c", "x", 1001, |x| x));
    for r in &regions {
        ensure(apply_not(&apply_not(r).unwrap()).unwrap() == *r, || "not∘not differs from identity".into())?;
        let very = apply_hedge("very", r).unwrap();
        for (a, b) in values(r).iter().zip(values(&very)) {
            ensure(b <= *a, || format!("very({a}) = {b} exceeds the input"))?;
            ensure((b == *a) == (*a == 0.0 || *a == 1.0), || format!("very({a}) = {b}: equality off {{0, 1}}"))?;
        }
    }
    let mut worst: f64 = 0.0;
    for k in 0..50 {
        let (f, g) = (&regions[k], &regions[(k + 7) % 50]);
        let or = apply_or(f, g).unwrap();
        let dual = apply_not(&apply_and(&apply_not(f).unwrap(), &apply_not(g).unwrap()).unwrap()).unwrap();
        let and = apply_and(f, g).unwrap();
        let dual_and = apply_not(&apply_or(&apply_not(f).unwrap(), &apply_not(g).unwrap()).unwrap()).unwrap();
        for i in 0..32 {
            let x = i as f64 / 31.0;
            worst = worst.max((or.eval_with(|_| x) - dual.eval_with(|_| x)).abs());
            worst = worst.max((and.eval_with(|_| x) - dual_and.eval_with(|_| x)).abs());
        }
    }
    ensure(worst < DE_MORGAN_TOL, || format!("De Morgan residual {worst:e}"))?;
    let mut sums = 0;
    for k in 0..20u64 {
        let xr = random_line(100 + k, "a").with_context(line_ctx("X", "a")).unwrap();
        let yr = random_line(200 + k, "b").with_context(line_ctx("Y", "b")).unwrap();
        let a = MeaningOperator::new(
            "A",
            OperatorKind::Restricted {
                inner: Box::new(MeaningOperator::pointwise("pow", PointwiseFn::Power { p: 0.5 + k as f64 / 10.0 })),
                axes: vec![ax("a")],
            },
        );
        let b = MeaningOperator::new(
            "B",
            OperatorKind::Negation {
                operand: Box::new(MeaningOperator::new(
                    "id",
                    OperatorKind::Restricted { inner: Box::new(MeaningOperator::identity()), axes: vec![ax("b")] },
                )),
            },
        );
        let sum = MeaningOperator::new("A+B", OperatorKind::DirectSum { parts: vec![a.clone(), b.clone()] });
        let lhs = sum.apply(&Region::direct_sum(&xr, &yr).unwrap()).unwrap();
        let rhs = Region::direct_sum(&a.apply(&xr).unwrap(), &b.apply(&yr).unwrap()).unwrap();
        for i in 0..32 {
            for j in 0..32 {
                let (u, v) = (i as f64 / 31.0, j as f64 / 31.0);
                let at = |c: &AxisId| if c.as_str() == "a" { u } else { v };
                ensure(lhs.eval_with(at) == rhs.eval_with(at), || format!("direct sum differs at ({u}, {v})"))?;
                sums += 1;
            }
        }
    }
    Ok(format!(
        "51 regions involutive and contracting, De Morgan residual {worst:.1e}, {sums} direct-sum samples equal"
    ))
}

fn weighted_product() -> Outcome {
    let c = Context::new("c", vec![ax("x"), ax("y"), ax("z")]).unwrap();
    let grid = |axis: &str, seed: u64| MembershipGrid::from_values(vec![ax(axis)], 32, lcg_values(seed, 32)).unwrap();
    let mut checked = 0;
    for k in 0..30u64 {
        let alpha = 0.1 + 0.8 * (k as f64 / 29.0);
        let r =
            Region::new(c.clone(), vec![Factor::new(grid("x", k), alpha), Factor::new(grid("y", 50 + k), 1.0 - alpha)])
                .unwrap();
        // a) a zero factor annihilates; b) unit factors leave the rest alone.
        let zero = r.join(MembershipGrid::constant(vec![ax("z")], 8, 0.0).unwrap(), 0.3).unwrap();
        ensure(zero.stats().max == 0.0, || "zero factor does not annihilate".into())?;
        let unit = r.absorb(MembershipGrid::constant(vec![ax("z")], 8, 1.0).unwrap(), 0.3).unwrap();
        for i in 0..32 {
            let (x, y) = (i as f64 / 31.0, (31 - i) as f64 / 31.0);
            let at = |a: &AxisId| {
                if a.as_str() == "x" {
                    x
                } else if a.as_str() == "y" {
                    y
                } else {
                    0.5
                }
            };
            ensure(unit.eval_with(at) == r.eval_with(at), || "unit factor changed a sample".into())?;
        }
        // c) level sets: every factor at level v gives v.
        for step in 1..=9 {
            let v = step as f64 / 10.0;
            let flat = Region::new(
                c.clone(),
                vec![
                    Factor::new(MembershipGrid::constant(vec![ax("x")], 4, v).unwrap(), alpha),
                    Factor::new(MembershipGrid::constant(vec![ax("y")], 4, v).unwrap(), 1.0 - alpha),
                ],
            )
            .unwrap();
            let m = quantize(flat.eval_with(|_| 0.5));
            ensure(m == quantize(v), || format!("level {v}: membership {m} with alpha {alpha}"))?;
        }
        // d) joining a factor renormalizes; no sample falls below the
        // smallest factor membership raised to the exponent sum.
        let joined = r.join(grid("z", 90 + k), 0.25 + 0.5 * alpha).unwrap();
        ensure((joined.exponent_sum() - 1.0).abs() < 1e-12, || "exponents not renormalized".into())?;
        for i in 0..32 {
            for j in (0..32).step_by(3) {
                let (x, y, z) = (i as f64 / 31.0, j as f64 / 31.0, ((i + j) % 32) as f64 / 31.0);
                let at = |a: &AxisId| match a.as_str() {
                    "x" => x,
                    "y" => y,
                    _ => z,
                };
                let least = joined.factors().iter().map(|f| f.grid.sample(&[at(&f.axes()[0])])).fold(1.0, f64::min);
                let bound = least.powf(joined.exponent_sum());
                let m = joined.eval_with(at);
                ensure(m >= bound - 1e-12, || format!("sample {m} below bound {bound}"))?;
                checked += 1;
            }
        }
    }
    Ok(format!(
        "30 weight splits: annihilation, unit law, 9 exact level sets each, {checked} joined samples above bound"
    ))
}

fn axis_expansion() -> Outcome {
    let lex = seed_lexicon(64).unwrap();
    let mp = lex.lookup("moderately-paced")[0].operator.parameters().unwrap().clone();
    let expanded = lex.expand(&mp, &ax("quickness")).unwrap();
    // Independent closed forms: fast(s, t) = (s - t + 1) / 2 and the
    // moderately-paced triangle on [0.2, 0.8] peaking at 0.5.
    let fast = |s: f64, t: f64| (s - t + 1.0) / 2.0;
    let tri = |q: f64| {
        if q <= 0.2 || q >= 0.8 {
            0.0
        } else if q <= 0.5 {
            (q - 0.2) / 0.3
        } else {
            (0.8 - q) / 0.3
        }
    };
    let mut worst: f64 = 0.0;
    for i in 0..64 {
        for j in 0..64 {
            let (s, t) = (i as f64 / 63.0, j as f64 / 63.0);
            let m = expanded.eval_with(|a| if a.as_str() == "s" { s } else { t });
            worst = worst.max((m - tri(fast(s, t))).abs());
        }
    }
    ensure(worst <= EXPANSION_TOL, || format!("max deviation {worst:.4} over 64x64 samples"))?;
    Ok(format!("max deviation {worst:.4} over 64x64 samples (tolerance {EXPANSION_TOL})"))
}

fn session() -> Session {
    Session::new(Arc::new(seed_lexicon(64).unwrap()), EngineConfig::default())
}

fn first_flags(o: &meaning_core::InterpretationOutcome) -> Vec<String> {
    o.candidates.iter().find(|c| c.error.is_none()).map(|c| c.flags.clone()).unwrap_or_default()
}

fn figure_flags() -> Outcome {
    let o = session().interpret("slow and fast");
    let flags = o.flag_names();
    ensure(flags.contains(&"contradiction"), || format!("and(slow, fast) flags {flags:?}"))?;
    let max = o.chosen.as_ref().unwrap().region.stats().max;
    ensure((max - CONTRADICTION_PEAK).abs() <= CONTRADICTION_TOL, || format!("contradiction peak {max}"))?;

    let o = session().interpret("slow or fast");
    ensure(first_flags(&o).contains(&"vacuous".to_string()), || format!("or(slow, fast) flags {:?}", first_flags(&o)))?;

    let mut s = session();
    let o = s.interpret("walk faster");
    ensure(o.action == Action::Accepted && o.flag_names().is_empty(), || format!("walk faster: {:?}", o.flag_names()))?;
    let o = s.interpret("stand still faster");
    ensure(first_flags(&o).contains(&"no_change".to_string()), || {
        format!("stand still faster: {:?}", first_flags(&o))
    })?;
    ensure(o.action == Action::ClarificationRequested, || "stand still faster was not questioned".into())?;

    let mut s = session();
    s.interpret("go ne");
    let o = s.interpret("go anywhere except sw");
    let vague = first_flags(&o);
    ensure(vague.contains(&"vagueness_increase".to_string()), || format!("except sw: {vague:?}"))?;
    let mut s = session();
    s.interpret("go ne");
    let o = s.interpret("forget everything, go anywhere except sw");
    ensure(first_flags(&o).is_empty() && o.action == Action::Accepted, || format!("reset: {:?}", first_flags(&o)))?;
    Ok(format!("contradiction peak {max:.4}; vacuous; no_change vs none; vagueness_increase suppressed by reset"))
}

fn but_contract() -> Outcome {
    let mut s = session();
    s.interpret("car is light");
    let car = s.find_context("car").unwrap().clone();
    let before = s.region(&car.id).unwrap().clone();
    let o = s.interpret("car is fast but heavy");
    let c = o.chosen.ok_or("no interpretation")?;
    ensure(c.clauses.len() == 2, || format!("{} clauses", c.clauses.len()))?;
    let second = &c.clauses[1];
    let direct = second.phrase.apply(&before).unwrap().with_context(second.context.clone()).unwrap();
    ensure(second.region == direct, || "second conjunct differs from its application to the prior region".into())?;
    let (_, reference) = apply_but(&c.clauses[0].phrase, &second.phrase, &before).unwrap();
    ensure(reference.with_context(second.context.clone()).unwrap() == second.region, || "apply_but disagrees".into())?;
    ensure(second.context.parent.as_ref() == Some(&car.id), || "second conjunct not under the shared context".into())?;
    Ok(format!("second conjunct in `{}` equals its application to the pre-phrase region", second.context.id))
}

fn effectors() -> Outcome {
    let mut s = session();
    let o = s.interpret("drive fast");
    let (axis, v) = o.effector().ok_or("drive fast gave no command")?;
    ensure(axis.as_str() == "quickness" && v >= TOP_QUARTILE, || format!("{axis} = {v}"))?;
    let o = s.interpret("drive very fast or very slowly");
    ensure(o.action == Action::ClarificationRequested, || format!("imperative ambiguity: {:?}", o.action))?;
    let o = s.interpret("if I was driving very fast or very slowly");
    ensure(o.action == Action::Accepted && o.effector().is_none() && o.clarification.is_none(), || {
        format!("conditional: {:?}", o.action)
    })?;
    Ok(format!("command quickness = {v:.4}; imperative ambiguity questioned; conditional silent"))
}

fn polysemy() -> Outcome {
    let mut s = Session::new(Arc::new(fixtures::homonym_lexicon(64).unwrap()), EngineConfig::default());
    s.interpret("river is wide");
    let o = s.interpret("bank is steep");
    ensure(o.action == Action::Accepted, || format!("bank is steep: {:?}", o.action))?;
    let c = o.chosen.as_ref().ok_or("no interpretation")?;
    let senses = c.candidate.senses(s.lexicon());
    ensure(senses.iter().any(|x| x.contains("river")), || format!("chose senses {senses:?}"))?;
    ensure(o.candidates.len() == 1, || format!("{} candidates after the prefilter", o.candidates.len()))?;
    let m = Session::new(Arc::new(fixtures::merged_sense_lexicon(64).unwrap()), EngineConfig::default());
    let n = m.candidates("car is brisk").unwrap().len();
    ensure(n == 1, || format!("merged sense gave {n} candidates"))?;
    Ok(format!("bank resolved to {senses:?} without retry; merged sense gives 1 candidate"))
}

/// Exhaustive oracle: every probe, every shift on a grid sixteen times
/// finer than the engine's, every in-range sample.
fn oracle_verdict(
    b: &MeaningOperator,
    family: &[MeaningOperator],
    axis: &AxisId,
    p: &AbstractionParams,
    probes: &[Region],
) -> bool {
    let n = 64;
    let y = [axis.clone()];
    let mut worst: f64 = 0.0;
    for a in family {
        for x in probes {
            let lhs = b.apply(&x.project(&y).unwrap()).unwrap();
            let rhs = a.apply(x).unwrap().project(&y).unwrap();
            let mut best = f64::INFINITY;
            for k in -63i32..=63 {
                let d = k as f64 * p.delta / 64.0;
                let mut sup: f64 = 0.0;
                for i in 0..n {
                    let c = i as f64 / (n - 1) as f64;
                    let moved = c - d;
                    if !(-1e-12..=1.0 + 1e-12).contains(&moved) {
                        continue;
                    }
                    sup = sup.max((lhs.eval_with(|_| c) - rhs.eval_with(|_| moved.clamp(0.0, 1.0))).abs());
                }
                best = best.min(sup);
            }
            worst = worst.max(best);
        }
    }
    worst < p.epsilon
}

fn shift(name: &str, axis: &str, offset: f64) -> MeaningOperator {
    MeaningOperator::new(
        name,
        OperatorKind::Transform {
            target: vec![ax(axis)],
            transform: GeneralTransform::Coordinate { maps: vec![CoordinateMap::Shift { axis: ax(axis), offset }] },
        },
    )
}

fn abstraction_oracle() -> Outcome {
    let ctx = line_ctx("line", "x");
    let probes = default_probes(&ctx, 64).unwrap();
    let p = AbstractionParams::new(0.1, 0.2).unwrap();
    let very = MeaningOperator::hedge("very").unwrap();
    let cases = [
        ("exact-commuting", very.clone(), vec![very.clone()], true),
        ("hedge-vs-identity", very.clone(), vec![MeaningOperator::identity()], false),
        ("shift-within-delta", shift("s55", "x", 0.55), vec![shift("s60", "x", 0.6)], true),
    ];
    let mut notes = Vec::new();
    for (label, b, family, expected) in cases {
        let engine = is_abstracting(&b, &family, &[ax("x")], &p, &probes).unwrap();
        let oracle = oracle_verdict(&b, &family, &ax("x"), &p, &probes);
        ensure(engine.holds == oracle && oracle == expected, || {
            format!("{label}: engine {} oracle {oracle} expected {expected}", engine.holds)
        })?;
        notes.push(format!("{label} {}", engine.holds));
    }
    Ok(notes.join(", "))
}

fn describe_with_words() -> Outcome {
    let problem = fixtures::describe_toy(64).unwrap();
    let d = describe(&problem).unwrap();
    ensure(d.goal_membership >= DESCRIBE_GOAL && goal_met(&d.goal, problem.goal_threshold), || {
        format!("goal membership {:.3}", d.goal_membership)
    })?;
    ensure(d.trace.windows(2).all(|w| w[1].score > w[0].score), || format!("trace not increasing: {:?}", d.trace))?;
    ensure(!d.refinements.is_empty(), || "no refinement step".into())?;
    for r in &d.refinements {
        ensure(r.verdict.as_ref().is_some_and(|v| v.holds), || format!("refinement of {} failed", r.element))?;
    }
    ensure(d.visited < d.exhaustive, || format!("visited {} vs exhaustive {}", d.visited, d.exhaustive))?;
    let lex = seed_lexicon(64).unwrap();
    let slow = describe_own_concept("slow", &lex).map_err(|e| e.to_string())?;
    ensure(slow.names == ["not", "fast"], || format!("slow described as {:?}", slow.names))?;
    Ok(format!(
        "{:?} (abstract {:?}) goal {:.3}, visited {} < {}; slow = {:?}",
        d.names, d.abstract_names, d.goal_membership, d.visited, d.exhaustive, slow.names
    ))
}

fn persistence() -> Outcome {
    let lexicons: Vec<Lexicon> = vec![
        seed_lexicon(64).unwrap(),
        fixtures::homonym_lexicon(32).unwrap(),
        fixtures::merged_sense_lexicon(32).unwrap(),
        fixtures::replay_lexicon(32).unwrap(),
    ];
    for lex in &lexicons {
        let json = lex.to_json().unwrap();
        let back = Lexicon::from_json(&json).unwrap();
        ensure(back == *lex && back.to_json().unwrap() == json, || "lexicon round trip".into())?;
    }
    let lex = Arc::new(lexicons[0].clone());
    let mut s = Session::new(lex.clone(), EngineConfig::default());
    for p in ["walk very fast", "car is fast but heavy", "go ne", "go anywhere except sw", "slow and fast"] {
        s.interpret(p);
    }
    let json = s.to_json().unwrap();
    let back = Session::from_json(&json, lex.clone()).unwrap();
    ensure(back == s && back.to_json().unwrap() == json, || "session round trip".into())?;
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../scenarios/figures.scn"))
        .map_err(|e| e.to_string())?;
    let scenario = Scenario::parse(&text).map_err(|e| e.to_string())?;
    let first = run(&scenario, lex.clone(), &EngineConfig::default()).unwrap();
    let second = run(&scenario, lex, &EngineConfig::default()).unwrap();
    ensure(first.render() == second.render(), || "scenario reports differ".into())?;
    ensure(first.success(), || format!("scenario failed:\n{}", first.render()))?;
    Ok(format!(
        "4 lexicons and a 5-phrase session round-trip; scenario report of {} bytes identical across runs",
        first.render().len()
    ))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        ("operator laws", operator_laws),
        ("weighted product properties", weighted_product),
        ("axis expansion oracle", axis_expansion),
        ("figure flags", figure_flags),
        ("but contract", but_contract),
        ("effector extraction", effectors),
        ("polysemy", polysemy),
        ("abstraction oracle", abstraction_oracle),
        ("describe with words", describe_with_words),
        ("persistence", persistence),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        match std::panic::catch_unwind(check) {
            Ok(Ok(detail)) => println!("PASS {name}: {detail}"),
            Ok(Err(why)) => {
                failed += 1;
                println!("FAIL {name}: {why}");
            }
            Err(_) => {
                failed += 1;
                println!("FAIL {name}: panicked");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
