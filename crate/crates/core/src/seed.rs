//! The built-in working vocabulary and a few test fixtures built on it.

use crate::abstraction::AbstractionParams;
use crate::describe::{DescribeProblem, GoalTest, PoolOperator};
use crate::error::Result;
use crate::lexicon::{Lexicon, PartOfSpeech, Sense};
use crate::operator::{
    apply_not, CoordinateMap, GeneralTransform, MeaningOperator, OperatorKind, PointwiseFn, ProjectionSource,
    ShapeTemplate,
};
use crate::region::{build_grid, Axis, AxisId, Context, Kernel, MembershipGrid, RefPoint, Region};

/// Width of motion ridges in the `(s, t)` plane.
pub const RIDGE_WIDTH: f64 = 0.08;
/// Spread of the spatial blobs "ne" and "sw".
pub const BLOB_SIGMA: f64 = 0.15;

fn ax(id: &str) -> AxisId {
    AxisId::new(id)
}

fn ctx(id: &str, axes: &[&str]) -> Result<Context> {
    Context::new(id, axes.iter().map(|a| ax(a)).collect())
}

fn ramp(axis: &str, points: &[(f64, f64)], resolution: usize) -> Result<MembershipGrid> {
    let pts: Vec<RefPoint> = points.iter().map(|(x, m)| RefPoint::new([*x], *m)).collect();
    build_grid(vec![ax(axis)], &pts, resolution, Kernel::Linear)
}

fn blob(axes: [&str; 2], at: (f64, f64), sigma: f64, resolution: usize) -> Result<MembershipGrid> {
    let kernel = Kernel::InverseDistance { power: 2.0, falloff_sigma: sigma };
    build_grid(axes.iter().map(|a| ax(a)).collect(), &[RefPoint::new([at.0, at.1], 1.0)], resolution, kernel)
}

fn adjective(lex: &mut Lexicon, word: &str, context: &Context, grid: MembershipGrid) -> Result<()> {
    let params = Region::from_grid(context.clone(), grid)?;
    lex.add_sense(word, PartOfSpeech::QualAdjective, Sense::new(MeaningOperator::projection(word, params)))
}

/// Verb whose action region is synthesized from a speed parameter.
pub fn motion_verb(name: &str, resolution: usize) -> Result<MeaningOperator> {
    let speed = Region::empty(ctx(&format!("{name}:speed"), &["quickness"])?);
    let _ = resolution;
    Ok(MeaningOperator::new(
        name,
        OperatorKind::Projection {
            target: vec![ax("s"), ax("t")],
            source: ProjectionSource::Template {
                shape: ShapeTemplate::Motion {
                    speed: ax("quickness"),
                    space: ax("s"),
                    time: ax("t"),
                    gain: 2.0,
                    width: RIDGE_WIDTH,
                },
            },
        },
    )
    .with_internal(speed))
}

/// Verb fixing position near zero at every moment.
pub fn still_verb(name: &str, resolution: usize) -> Result<MeaningOperator> {
    let st = ctx(&format!("{name}:shape"), &["s", "t"])?;
    let ridge = MembershipGrid::from_fn(vec![ax("s"), ax("t")], resolution, |c| {
        (-c[0] * c[0] / (2.0 * RIDGE_WIDTH * RIDGE_WIDTH)).exp()
    })?;
    Ok(MeaningOperator::projection(name, Region::from_grid(st, ridge)?))
}

/// The working vocabulary: speed and motion words, spatial blobs, hedges
/// and connectives.
pub fn seed_lexicon(resolution: usize) -> Result<Lexicon> {
    let mut lex = Lexicon::new();
    lex.add_axis(Axis::basic("s", "position", "relative distance"))?;
    lex.add_axis(Axis::basic("t", "time", "relative"))?;
    lex.add_axis(Axis::derived("quickness", "quickness", "fast").with_effector())?;
    lex.add_axis(Axis::basic("east", "east", "relative"))?;
    lex.add_axis(Axis::basic("north", "north", "relative"))?;
    lex.add_axis(Axis::basic("weight", "weight", "relative"))?;

    let motion = ctx("motion", &["s", "t"])?;
    let quickness = ctx("quickness", &["quickness"])?;
    let location = ctx("location", &["east", "north"])?;
    let weight = ctx("weight", &["weight"])?;
    let car = ctx("car", &["quickness", "weight"])?;
    for c in [&motion, &quickness, &location, &weight, &car] {
        lex.add_context(c.clone())?;
    }

    // Reference region of the derived quickness axis: covering more ground
    // in less time is faster.
    let fast_st = MembershipGrid::from_fn(vec![ax("s"), ax("t")], resolution, |c| (c[0] - c[1] + 1.0) / 2.0)?;
    lex.add_region("fast", Region::from_grid(motion.clone(), fast_st)?.with_label("fast"));

    let fast = ramp("quickness", &[(0.0, 0.0), (1.0, 1.0)], resolution)?;
    let slow = apply_not(&Region::from_grid(quickness.clone(), fast.clone())?)?;
    adjective(&mut lex, "fast", &quickness, fast)?;
    let slow_op = MeaningOperator::projection("slow", slow);
    lex.add_sense("slow", PartOfSpeech::QualAdjective, Sense::new(slow_op).with_tag("not fast"))?;
    let moderate = ramp("quickness", &[(0.0, 0.0), (0.2, 0.0), (0.5, 1.0), (0.8, 0.0), (1.0, 0.0)], resolution)?;
    adjective(&mut lex, "moderately-paced", &quickness, moderate)?;
    adjective(
        &mut lex,
        "heavy",
        &weight,
        ramp("weight", &[(0.0, 0.0), (0.3, 0.0), (0.9, 1.0), (1.0, 1.0)], resolution)?,
    )?;
    adjective(
        &mut lex,
        "light",
        &weight,
        ramp("weight", &[(0.0, 1.0), (0.1, 1.0), (0.7, 0.0), (1.0, 0.0)], resolution)?,
    )?;
    adjective(&mut lex, "ne", &location, blob(["east", "north"], (0.75, 0.75), BLOB_SIGMA, resolution)?)?;
    adjective(&mut lex, "sw", &location, blob(["east", "north"], (0.25, 0.25), BLOB_SIGMA, resolution)?)?;

    for hedge in ["very", "somewhat", "extremely"] {
        lex.add_sense(hedge, PartOfSpeech::AdverbHedge, Sense::new(MeaningOperator::hedge(hedge)?))?;
    }
    lex.add_sense(
        "not",
        PartOfSpeech::Negation,
        Sense::new(MeaningOperator::pointwise("not", PointwiseFn::Complement)),
    )?;
    for junction in ["and", "or", "but"] {
        let op = MeaningOperator::new(junction, OperatorKind::Identity);
        lex.add_sense(junction, PartOfSpeech::Conjunction, Sense::new(op))?;
    }

    let faster = MeaningOperator::new(
        "faster",
        OperatorKind::Transform {
            target: vec![ax("t")],
            transform: GeneralTransform::Coordinate { maps: vec![CoordinateMap::Rescale { axis: ax("t"), k: 2.0 }] },
        },
    );
    lex.add_sense("faster", PartOfSpeech::CompAdjective, Sense::new(faster))?;

    lex.add_sense(
        "walk",
        PartOfSpeech::Verb,
        Sense::new(motion_verb("walk", resolution)?).with_context_axes(&["s", "t"]),
    )?;
    lex.add_sense(
        "stand-still",
        PartOfSpeech::Verb,
        Sense::new(still_verb("stand-still", resolution)?).with_context_axes(&["s", "t"]),
    )?;
    let drive = MeaningOperator::projection("drive", Region::empty(ctx("drive:speed", &["quickness"])?));
    lex.add_sense("drive", PartOfSpeech::Verb, Sense::new(drive).with_context_axes(&["quickness", "t"]))?;
    let go = MeaningOperator::projection("go", Region::empty(ctx("go:place", &["east", "north"])?));
    lex.add_sense("go", PartOfSpeech::Verb, Sense::new(go).with_context_axes(&["east", "north"]))?;
    let car_op = MeaningOperator::projection("car", Region::empty(car.clone()));
    lex.add_sense("car", PartOfSpeech::Noun, Sense::new(car_op).with_context_axes(&["quickness", "weight"]))?;

    let m = &mut lex.morphology;
    for (form, lemma) in [
        ("slowly", "slow"),
        ("quickly", "fast"),
        ("driving", "drive"),
        ("drives", "drive"),
        ("walking", "walk"),
        ("walks", "walk"),
        ("standing", "stand"),
        ("going", "go"),
        ("was", "is"),
        ("are", "is"),
        ("were", "is"),
        ("except", "not"),
        ("cars", "car"),
    ] {
        m.inflections.insert(form.into(), lemma.into());
    }
    for w in ["i", "you", "we", "it", "me", "the", "a", "an", "please", "somewhere", "anywhere", "everywhere"] {
        m.stopwords.insert(w.into());
    }
    m.multiword.insert("stand still".into(), "stand-still".into());
    m.multiword.insert("moderately paced".into(), "moderately-paced".into());
    m.reset_prefixes.push("forget everything".into());
    lex.validate()?;
    Ok(lex)
}

/// Fixtures exercising polysemy and replay.
pub mod fixtures {
    use super::*;

    /// "bank" as a river bank (slope, wetness) and as a money bank
    /// (solvency, interest), with "river" and "account" to set the scene.
    pub fn homonym_lexicon(resolution: usize) -> Result<Lexicon> {
        let mut lex = seed_lexicon(resolution)?;
        for (id, name) in [
            ("width", "width"),
            ("slope", "slope"),
            ("wetness", "wetness"),
            ("solvency", "solvency"),
            ("interest", "interest rate"),
        ] {
            lex.add_axis(Axis::basic(id, name, "relative"))?;
        }
        let river = ctx("river", &["width", "slope", "wetness"])?;
        let shore = ctx("bank:river", &["slope", "wetness"])?;
        let money = ctx("bank:money", &["solvency", "interest"])?;
        for c in [&river, &shore, &money] {
            lex.add_context(c.clone())?;
        }
        let noun = |name: &str, c: &Context| MeaningOperator::projection(name, Region::empty(c.clone()));
        lex.add_sense(
            "river",
            PartOfSpeech::Noun,
            Sense::new(noun("river", &river)).with_context_axes(&["width", "slope", "wetness"]),
        )?;
        lex.add_sense(
            "bank",
            PartOfSpeech::Noun,
            Sense::new(noun("bank", &shore)).with_context_axes(&["slope", "wetness"]).with_tag("river"),
        )?;
        lex.add_sense(
            "bank",
            PartOfSpeech::Noun,
            Sense::new(noun("bank", &money)).with_context_axes(&["solvency", "interest"]).with_tag("money"),
        )?;
        let up = [(0.0, 0.0), (0.3, 0.0), (0.9, 1.0), (1.0, 1.0)];
        adjective(&mut lex, "wide", &ctx("width", &["width"])?, ramp("width", &up, resolution)?)?;
        adjective(&mut lex, "steep", &ctx("slope", &["slope"])?, ramp("slope", &up, resolution)?)?;
        adjective(&mut lex, "solvent", &ctx("solvency", &["solvency"])?, ramp("solvency", &up, resolution)?)?;
        lex.validate()?;
        Ok(lex)
    }

    /// "brisk" entered twice with similar readings over quickness; stored
    /// as one fuzzier sense.
    pub fn merged_sense_lexicon(resolution: usize) -> Result<Lexicon> {
        let mut lex = seed_lexicon(resolution)?;
        let q = ctx("quickness", &["quickness"])?;
        adjective(
            &mut lex,
            "brisk",
            &q,
            ramp("quickness", &[(0.0, 0.0), (0.5, 0.0), (0.9, 1.0), (1.0, 1.0)], resolution)?,
        )?;
        adjective(
            &mut lex,
            "brisk",
            &q,
            ramp("quickness", &[(0.0, 0.0), (0.4, 0.0), (0.8, 1.0), (1.0, 1.0)], resolution)?,
        )?;
        Ok(lex)
    }

    /// "move" read as staying put (first sense) or as walking (second).
    /// "move" followed by "faster" only makes sense under the second.
    pub fn replay_lexicon(resolution: usize) -> Result<Lexicon> {
        let mut lex = seed_lexicon(resolution)?;
        let mut still = still_verb("move", resolution)?;
        still.name = "move".into();
        lex.add_sense(
            "move",
            PartOfSpeech::Verb,
            Sense::new(still).with_context_axes(&["s", "t"]).with_tag("in place"),
        )?;
        lex.add_sense(
            "move",
            PartOfSpeech::Verb,
            Sense::new(motion_verb("move", resolution)?).with_context_axes(&["s", "t"]).with_tag("travel"),
        )?;
        Ok(lex)
    }

    fn shift(name: &str, moves: &[(&str, f64)]) -> MeaningOperator {
        let maps = moves.iter().map(|(a, d)| CoordinateMap::Shift { axis: ax(a), offset: *d }).collect();
        MeaningOperator::new(
            name,
            OperatorKind::Transform {
                target: moves.iter().map(|(a, _)| ax(a)).collect(),
                transform: GeneralTransform::Coordinate { maps },
            },
        )
    }

    /// Two-level navigation pool: "relocate" moves diagonally and stands
    /// for "go-north" followed by "go-east". The source is a small blob in
    /// the south-west, the goal a blob in the north-east.
    pub fn describe_toy(resolution: usize) -> Result<DescribeProblem> {
        let location = ctx("location", &["east", "north"])?;
        let source = Region::from_grid(location.clone(), blob(["east", "north"], (0.2, 0.2), 0.08, resolution)?)?;
        let goal = Region::from_grid(location, blob(["east", "north"], (0.8, 0.8), BLOB_SIGMA, resolution)?)?;
        let pool = vec![
            PoolOperator { operator: shift("relocate", &[("east", 0.55), ("north", 0.55)]), level: 1 },
            PoolOperator { operator: shift("go-north", &[("north", 0.6)]), level: 0 },
            PoolOperator { operator: shift("go-east", &[("east", 0.6)]), level: 0 },
            PoolOperator { operator: shift("go-south", &[("north", -0.6)]), level: 0 },
            PoolOperator { operator: shift("go-west", &[("east", -0.6)]), level: 0 },
        ];
        let mut problem = DescribeProblem::new(vec![source], pool, GoalTest::Image { satisfaction: goal })?;
        problem.abstraction = AbstractionParams::new(0.1, 0.2)?;
        Ok(problem)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_lookups() {
        let lex = seed_lexicon(64).unwrap();
        assert!(lex.lookup("zzz").is_empty());
        assert_eq!(lex.lookup("fast").len(), 1);
        assert_eq!(lex.entry("fast").unwrap().pos, PartOfSpeech::QualAdjective);
        assert_eq!(lex.lookup("fast")[0].internal_axes, vec![AxisId::new("quickness")]);
        let homonym = fixtures::homonym_lexicon(64).unwrap();
        let senses = homonym.lookup("bank");
        assert_eq!(senses.len(), 2);
        assert!(senses[0].internal_axes.iter().all(|a| !senses[1].internal_axes.contains(a)));
        assert_eq!(fixtures::merged_sense_lexicon(64).unwrap().lookup("brisk").len(), 1);
        assert_eq!(fixtures::replay_lexicon(64).unwrap().lookup("move").len(), 2);
    }

    #[test]
    fn document_round_trip() {
        let lex = fixtures::homonym_lexicon(64).unwrap();
        let json = lex.to_json().unwrap();
        let back = Lexicon::from_json(&json).unwrap();
        assert_eq!(back, lex);
        assert_eq!(back.to_json().unwrap(), json);
    }

    #[test]
    fn document_errors_carry_paths() {
        let err = Lexicon::from_json(r#"{"axes": [], "contexts": [], "regions": []}"#).unwrap_err();
        assert!(err.to_string().contains("words"), "{err}");
        let json = seed_lexicon(8).unwrap().to_json().unwrap().replacen("\"qual_adjective\"", "\"adjectivish\"", 1);
        let err = Lexicon::from_json(&json).unwrap_err();
        match err {
            crate::Error::Document { path, message } => {
                assert!(path.starts_with("words["), "{path}");
                assert!(message.contains("adjectivish"), "{message}");
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn quickness_expands_to_reference() {
        let lex = seed_lexicon(64).unwrap();
        let fast = lex.lookup("fast")[0].operator.parameters().unwrap().clone();
        let e = lex.expand(&fast, &AxisId::new("quickness")).unwrap();
        let reference = lex.region("fast").unwrap();
        let (_, s) =
            crate::region::Region::joint_samples(&[&e, &reference.with_context(e.context().clone()).unwrap()]).unwrap();
        let worst = s[0].iter().zip(&s[1]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(worst < 0.05);
    }
}
