//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits nonzero if any fails.

use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use lnn_core::data::{load_csv, normalize, split, synthesize};
use lnn_core::grad::{finite_difference_grad, forward_backward};
use lnn_core::logic::{check_constraints, eval_and, eval_not, eval_or, is_feasible, project_params};
use lnn_core::metrics::{evaluate, roc_auc, EvalReport};
use lnn_core::rules::{bind_params, builtin_model, parse_rule, BUILTIN_NAMES};
use lnn_core::schema::Feature;
use lnn_core::training::{train, train_with_observer};
use lnn_core::{
    AndParams, CrispnessConfig, Expression, InitStrategy, ParamKind, RuleSpec, TrainConfig, TruthValue,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit_secs: f64) -> Result<(), String> {
    ensure(elapsed.as_secs_f64() < limit_secs, || {
        format!("took {:.2} s, limit {limit_secs} s", elapsed.as_secs_f64())
    })
}

fn pima_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/pima-indians-diabetes.csv")
}

fn tv(x: f64) -> TruthValue {
    TruthValue::new(x).unwrap()
}

/// Rejection sampler over the crisp region at `alpha`: beta first, then
/// weights inside `{w_i >= lower, sum(w) <= cap}`.
fn feasible_params(rng: &mut impl Rng, arity: usize, alpha: f64) -> AndParams {
    loop {
        let beta = rng.gen_range(alpha..alpha + 6.0);
        let lower = ((beta - 1.0 + alpha) / alpha).max(0.0);
        let cap = if alpha < 1.0 {
            (beta - alpha) / (1.0 - alpha)
        } else {
            lower * arity as f64 + 5.0
        };
        let slack = cap - lower * arity as f64;
        if slack < 0.0 {
            continue;
        }
        let shares: Vec<f64> = (0..arity).map(|_| rng.gen::<f64>()).collect();
        let total = shares.iter().sum::<f64>().max(1e-12);
        let fill = rng.gen::<f64>();
        let weights = shares.iter().map(|s| lower + slack * fill * s / total).collect();
        return AndParams::new(beta, weights);
    }
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let cfg = CrispnessConfig::new(1.0).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut corners = 0usize;
    for case in 0..10_000 {
        let n = case % 6 + 1;
        let p = feasible_params(&mut rng, n, 1.0);
        ensure(is_feasible(&p, cfg.for_arity(n)), || {
            format!("sampler produced infeasible {p:?}")
        })?;
        for mask in 0u32..(1 << n) {
            let xs: Vec<TruthValue> = (0..n).map(|i| TruthValue::from(mask >> i & 1 == 1)).collect();
            let and = f64::from(u8::from(mask == (1 << n) - 1));
            let or = f64::from(u8::from(mask != 0));
            let got_and = eval_and(&xs, &p).unwrap().get();
            let got_or = eval_or(&xs, &p).unwrap().get();
            let negated: Vec<TruthValue> = xs.iter().map(|&x| eval_not(x)).collect();
            let de_morgan = eval_not(eval_and(&negated, &p).unwrap()).get();
            ensure(got_and == and, || format!("AND {p:?} at {mask:b}: {got_and}"))?;
            ensure(got_or == or && de_morgan == or, || {
                format!("OR {p:?} at {mask:b}: {got_or}")
            })?;
            corners += 1;
        }
    }
    within(start.elapsed(), 5.0)?;
    Ok(format!("10000 parameter sets, {corners} corners, arity 1..6"))
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let mut checks = 0usize;
    for alpha in [0.6, 0.7, 0.9] {
        let cfg = CrispnessConfig::new(alpha).unwrap();
        let arities: Vec<usize> = (1..=6).filter(|&n| cfg.admits_arity(n)).collect();
        for case in 0..10_000 {
            let n = arities[case % arities.len()];
            let p = feasible_params(&mut rng, n, alpha);
            ensure(check_constraints(&p, cfg).is_empty(), || {
                format!("sampler produced infeasible {p:?}")
            })?;
            for _ in 0..4 {
                let high: Vec<TruthValue> = (0..n).map(|_| tv(rng.gen_range(alpha..=1.0))).collect();
                let out = eval_and(&high, &p).unwrap().get();
                ensure(out >= alpha - 1e-9, || {
                    format!("alpha {alpha}, {p:?}: high inputs gave {out}")
                })?;
                let mut low: Vec<TruthValue> = (0..n).map(|_| tv(rng.gen())).collect();
                low[rng.gen_range(0..n)] = tv(rng.gen_range(0.0..=1.0 - alpha));
                let out = eval_and(&low, &p).unwrap().get();
                ensure(out <= 1.0 - alpha + 1e-9, || {
                    format!("alpha {alpha}, {p:?}: low input gave {out}")
                })?;
                checks += 2;
            }
        }
    }
    Ok(format!(
        "30000 parameter sets at alpha 0.6/0.7/0.9, {checks} band checks"
    ))
}

fn kink_free(expr: &Expression, x: &[f64], margin: f64) -> bool {
    fn walk(e: &Expression, x: &[f64], pre: &mut Vec<f64>) -> f64 {
        match e {
            Expression::Predicate { feature, params } => {
                let f = x[*feature];
                f / (1.0 + (-params.slope * (f - params.theta)).exp())
            }
            Expression::And { children, params } => {
                let v: Vec<f64> = children.iter().map(|c| walk(c, x, pre)).collect();
                let z = params.beta
                    - params
                        .weights
                        .iter()
                        .zip(&v)
                        .map(|(w, v)| w * (1.0 - v))
                        .sum::<f64>();
                pre.push(z);
                z.clamp(0.0, 1.0)
            }
            Expression::Or { children, params } => {
                let v: Vec<f64> = children.iter().map(|c| walk(c, x, pre)).collect();
                let z = params.beta - params.weights.iter().zip(&v).map(|(w, v)| w * v).sum::<f64>();
                pre.push(z);
                1.0 - z.clamp(0.0, 1.0)
            }
            Expression::Not(c) => 1.0 - walk(c, x, pre),
        }
    }
    let mut pre = Vec::new();
    let p = walk(expr, x, &mut pre);
    pre.iter().all(|&z| z.abs() > margin && (z - 1.0).abs() > margin) && p > margin && p < 1.0 - margin
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let mut configs = 0usize;
    let mut worst: f64 = 0.0;
    for name in BUILTIN_NAMES {
        let spec = builtin_model(name).unwrap();
        let mut expr = bind_params(
            &spec,
            InitStrategy::PaperNeutral,
            CrispnessConfig::default(),
            10.0,
        )
        .unwrap();
        let mut accepted = 0;
        while accepted < 250 {
            let values: Vec<f64> = expr
                .param_set()
                .addresses
                .iter()
                .map(|a| match a.kind {
                    ParamKind::Beta => rng.gen_range(0.6..1.6),
                    ParamKind::Weight(_) => rng.gen_range(0.05..0.8),
                    ParamKind::Theta => rng.gen_range(0.0..0.9),
                })
                .collect();
            expr.set_param_values(&values).unwrap();
            let x: Vec<f64> = (0..8).map(|_| rng.gen_range(0.4..1.0)).collect();
            if !kink_free(&expr, &x, 1e-3) {
                continue;
            }
            let label = rng.gen_range(0..=1u8);
            let analytic = forward_backward(&expr, &x, label).unwrap();
            let numeric = finite_difference_grad(&expr, &x, label, 1e-5).unwrap();
            for ((_, a), b) in analytic.gradients.iter().zip(&numeric.values) {
                let scale = a.abs().max(b.abs());
                let err = if scale < 1e-6 {
                    (a - b).abs()
                } else {
                    (a - b).abs() / scale
                };
                worst = worst.max(err);
            }
            accepted += 1;
        }
        configs += accepted;
    }
    ensure(configs >= 1000, || format!("only {configs} configurations"))?;
    ensure(worst < 1e-4, || format!("max relative error {worst:.3e}"))?;
    within(start.elapsed(), 30.0)?;
    Ok(format!(
        "{configs} configurations, max relative error {worst:.2e}"
    ))
}

fn synthetic(name: &str, seed: u64, n: usize) -> (RuleSpec, Expression, lnn_core::Dataset) {
    let spec = builtin_model(name).unwrap();
    let cfg = TrainConfig::default();
    let truth = bind_params(
        &spec,
        InitStrategy::Randomized { seed: 1000 + seed },
        cfg.crispness().unwrap(),
        cfg.slope,
    )
    .unwrap();
    let ds = synthesize(n, seed, &truth, 0.0).unwrap();
    (spec, truth, ds)
}

fn criterion_4() -> Outcome {
    let recs = load_csv(pima_path()).map_err(|e| e.to_string())?;
    let (a, b) = split(&recs, 0.2, 7).unwrap();
    let (pima, _, _) = normalize(&a, &b).unwrap();
    let mut epochs = 0usize;
    for name in BUILTIN_NAMES {
        let (spec, _, synth) = synthetic(name, 3, 500);
        for ds in [&synth, &pima] {
            for (alpha, lr) in [(0.7, 0.05), (0.9, 0.5), (1.0, 2.0)] {
                let cfg = TrainConfig {
                    epochs: 50,
                    alpha,
                    learning_rate: lr,
                    ..TrainConfig::default()
                };
                let crisp = cfg.crispness().unwrap();
                let mut bad = None;
                train_with_observer(&spec, ds, &cfg, |epoch, e| {
                    let v = e.violations(crisp);
                    if bad.is_none() && !v.is_empty() {
                        bad = Some(format!("{name} alpha {alpha} epoch {epoch}: {v:?}"));
                    }
                    epochs += 1;
                })
                .map_err(|e| e.to_string())?;
                if let Some(b) = bad {
                    return Err(b);
                }
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    for _ in 0..10_000 {
        let n = rng.gen_range(1..=6);
        let cfg = CrispnessConfig::new(rng.gen_range(0.5..=1.0))
            .unwrap()
            .for_arity(n);
        let p = AndParams::new(
            rng.gen_range(-3.0..5.0),
            (0..n).map(|_| rng.gen_range(-2.0..4.0)).collect(),
        );
        let once = project_params(&p, cfg).map_err(|e| e.to_string())?;
        ensure(check_constraints(&once, cfg).is_empty(), || {
            format!("projection of {p:?} infeasible")
        })?;
        let twice = project_params(&once, cfg).unwrap();
        ensure(twice == once, || {
            format!("project twice differs: {once:?} vs {twice:?}")
        })?;
    }
    Ok(format!("{epochs} epochs feasible, 10000 idempotent projections"))
}

fn pair_count_auc(probs: &[f64], labels: &[u8]) -> f64 {
    let (mut twice, mut pairs) = (0u64, 0u64);
    for (i, &yi) in labels.iter().enumerate() {
        for (j, &yj) in labels.iter().enumerate() {
            if yi == 1 && yj == 0 {
                pairs += 1;
                twice += match probs[i].partial_cmp(&probs[j]).unwrap() {
                    std::cmp::Ordering::Greater => 2,
                    std::cmp::Ordering::Equal => 1,
                    std::cmp::Ordering::Less => 0,
                };
            }
        }
    }
    twice as f64 / 2.0 / pairs as f64
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(105);
    let mut tied = 0;
    for case in 0..200 {
        let levels = [0u32, 1, 2, 4, 8][case % 5];
        let (probs, labels) = loop {
            let n = rng.gen_range(2..=50);
            let labels: Vec<u8> = (0..n).map(|_| rng.gen_range(0..=1)).collect();
            if labels.contains(&0) && labels.contains(&1) {
                let probs: Vec<f64> = (0..n)
                    .map(|_| {
                        if levels == 0 {
                            rng.gen()
                        } else {
                            f64::from(rng.gen_range(0..=levels)) / f64::from(levels)
                        }
                    })
                    .collect();
                break (probs, labels);
            }
        };
        if levels > 0 {
            tied += 1;
        }
        let expected = pair_count_auc(&probs, &labels);
        let got = roc_auc(&probs, &labels).map_err(|e| e.to_string())?;
        ensure(got == expected, || format!("case {case}: {got} vs {expected}"))?;
    }
    Ok(format!("200 cases ({tied} tie-heavy) match exactly"))
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let mut worst_loss: f64 = 0.0;
    let mut worst_acc: f64 = 1.0;
    let mut failures = Vec::new();
    for name in BUILTIN_NAMES {
        for seed in 0..5 {
            let (spec, truth, ds) = synthetic(name, seed, 2000);
            let test = synthesize(2000, seed + 500, &truth, 0.0).unwrap();
            let model =
                train(&spec, &ds, &TrainConfig::default().with_seed(seed)).map_err(|e| e.to_string())?;
            let loss = model.final_loss().unwrap();
            let acc = evaluate(&model, &test, 0.5)
                .map(|r| r.accuracy)
                .map_err(|e| e.to_string())?;
            worst_loss = worst_loss.max(loss);
            worst_acc = worst_acc.min(acc);
            if !(loss < 0.1 && acc >= 0.95) {
                failures.push(format!("{name} seed {seed}: BCE {loss:.4}, accuracy {acc:.4}"));
            }
        }
    }
    ensure(failures.is_empty(), || failures.join("; "))?;
    within(start.elapsed(), 60.0)?;
    Ok(format!(
        "25 runs, worst train BCE {worst_loss:.4}, worst test accuracy {worst_acc:.4}"
    ))
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let recs = load_csv(pima_path()).map_err(|e| e.to_string())?;
    let mut means: Vec<(&str, [f64; 5])> = Vec::new();
    for name in BUILTIN_NAMES {
        let spec = builtin_model(name).unwrap();
        let mut sum = [0.0; 5];
        for seed in 0..5u64 {
            let (a, b) = split(&recs, 0.2, seed).unwrap();
            let (tr, te, _) = normalize(&a, &b).unwrap();
            let model =
                train(&spec, &tr, &TrainConfig::default().with_seed(seed)).map_err(|e| e.to_string())?;
            let r: EvalReport = evaluate(&model, &te, 0.5).map_err(|e| e.to_string())?;
            for (s, v) in sum
                .iter_mut()
                .zip([r.accuracy, r.precision, r.recall, r.f1, r.auc])
            {
                *s += v / 5.0;
            }
        }
        means.push((name, sum));
    }
    let get = |n: &str| means.iter().find(|(m, _)| *m == n).unwrap().1;
    let [mp_acc, _, _, mp_f1, mp_auc] = get("multi-pathway");
    let [co_acc, co_prec, ..] = get("comprehensive");
    let gb_auc = get("glucose-bmi")[4];
    let fi = get("family-insulin");
    let min_other_recall = means
        .iter()
        .filter(|(m, _)| *m != "family-insulin")
        .map(|(_, v)| v[2])
        .fold(f64::INFINITY, f64::min);
    let mut failed = Vec::new();
    let mut check = |ok: bool, what: String| {
        if !ok {
            failed.push(what);
        }
    };
    check(
        mp_acc >= 0.74,
        format!("multi-pathway accuracy {mp_acc:.4} < 0.74"),
    );
    check(mp_auc >= 0.80, format!("multi-pathway AUC {mp_auc:.4} < 0.80"));
    check(
        co_acc >= 0.74,
        format!("comprehensive accuracy {co_acc:.4} < 0.74"),
    );
    check(
        co_prec >= 0.70,
        format!("comprehensive precision {co_prec:.4} < 0.70"),
    );
    check(gb_auc >= 0.74, format!("glucose-bmi AUC {gb_auc:.4} < 0.74"));
    check(
        mp_f1 > fi[3],
        format!("multi-pathway F1 {mp_f1:.4} <= family-insulin F1 {:.4}", fi[3]),
    );
    check(
        fi[2] <= min_other_recall,
        format!(
            "family-insulin recall {:.4} above another model's {min_other_recall:.4}",
            fi[2]
        ),
    );
    if let Err(e) = within(start.elapsed(), 300.0) {
        failed.push(e);
    }
    let table: Vec<String> = means
        .iter()
        .map(|(m, v)| {
            format!(
                "{m}: acc {:.3} prec {:.3} rec {:.3} f1 {:.3} auc {:.3}",
                v[0], v[1], v[2], v[3], v[4]
            )
        })
        .collect();
    if failed.is_empty() {
        Ok(table.join("; "))
    } else {
        Err(format!("{} [{}]", failed.join("; "), table.join("; ")))
    }
}

fn criterion_8() -> Outcome {
    let recs = load_csv(pima_path()).map_err(|e| e.to_string())?;
    let positives = recs.iter().filter(|r| r.outcome == 1).count();
    ensure(recs.len() == 768 && positives == 258, || {
        format!(
            "{} records, {positives} positives (expected 768 and 258)",
            recs.len()
        )
    })?;
    Ok("768 records, 258 positives".into())
}

fn random_rule(rng: &mut impl Rng, depth: u32, out: &mut String) {
    const NAMES: [&str; 8] = ["preg", "gluc", "bp", "skin", "insulin", "bmi", "dpf", "age"];
    fn space(rng: &mut impl Rng, out: &mut String) {
        out.push_str([" ", "  ", "\n", "\t", "", ""][rng.gen_range(0..6)]);
    }
    fn unary(rng: &mut impl Rng, depth: u32, out: &mut String) {
        match if depth == 0 { 2 } else { rng.gen_range(0..5) } {
            0 => {
                out.push('!');
                space(rng, out);
                unary(rng, depth - 1, out);
            }
            1 => {
                out.push('(');
                random_rule(rng, depth - 1, out);
                out.push(')');
            }
            _ => {
                let name = NAMES.choose(rng).unwrap();
                out.extend(name.chars().map(|c| {
                    if rng.gen_bool(0.2) {
                        c.to_ascii_uppercase()
                    } else {
                        c
                    }
                }));
            }
        }
    }
    space(rng, out);
    let ors = if depth == 0 { 1 } else { rng.gen_range(1..=3) };
    for i in 0..ors {
        if i > 0 {
            out.push('|');
            space(rng, out);
        }
        let ands = if depth == 0 { 1 } else { rng.gen_range(1..=4) };
        for j in 0..ands {
            if j > 0 {
                out.push('&');
                space(rng, out);
            }
            unary(rng, depth, out);
            space(rng, out);
        }
    }
}

fn criterion_9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(109);
    for case in 0..1000 {
        let mut text = String::new();
        let depth = rng.gen_range(0..=4);
        random_rule(&mut rng, depth, &mut text);
        let spec = parse_rule(&text).map_err(|e| format!("case {case} {text:?}: {e}"))?;
        let printed = spec.to_string();
        let again = parse_rule(&printed).map_err(|e| format!("case {case} {printed:?}: {e}"))?;
        ensure(again == spec && again.to_string() == printed, || {
            format!("case {case}: {text:?} -> {printed:?}")
        })?;
    }
    use Feature::*;
    let expected: [(&str, Vec<Vec<Feature>>); 5] = [
        ("glucose-bmi", vec![vec![Gluc, Bmi]]),
        ("family-insulin", vec![vec![Dpf, Insulin, Age]]),
        (
            "balanced",
            vec![vec![Dpf, Age], vec![Preg, Gluc, Bp], vec![Skin, Insulin, Bmi]],
        ),
        (
            "multi-pathway",
            vec![vec![Dpf, Age], vec![Gluc, Insulin, Bmi, Skin, Bp, Preg]],
        ),
        (
            "comprehensive",
            vec![vec![Gluc, Insulin, Bmi, Preg], vec![Dpf, Insulin]],
        ),
    ];
    for (name, disjuncts) in expected {
        let spec = builtin_model(name).map_err(|e| e.to_string())?;
        let got: Vec<Vec<Feature>> = spec.disjuncts().into_iter().map(RuleSpec::features).collect();
        ensure(got == disjuncts, || format!("{name}: {got:?}"))?;
        ensure(
            spec.disjuncts().iter().all(|d| matches!(d, RuleSpec::And(_))),
            || format!("{name}: non-conjunctive disjunct"),
        )?;
    }
    Ok("1000 generated rules round-trip; 5 built-in structures match".into())
}

fn criterion_10() -> Outcome {
    let data = pima_path();
    let mut files = Vec::new();
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for dir in &dirs {
        let out = Command::new(env!("CARGO_BIN_EXE_lnn"))
            .current_dir(dir.path())
            .env_remove("LNN_SEED")
            .args([
                "train",
                "--data",
                data.to_str().unwrap(),
                "--rule",
                "balanced",
                "--seed",
                "42",
                "--out",
                "run",
            ])
            .output()
            .map_err(|e| e.to_string())?;
        ensure(out.status.success(), || {
            String::from_utf8_lossy(&out.stderr).into_owned()
        })?;
        let model = fs::read(dir.path().join("run/model.json")).map_err(|e| e.to_string())?;
        let manifest = fs::read(dir.path().join("run/manifest.json")).map_err(|e| e.to_string())?;
        files.push((model, manifest));
    }
    ensure(files[0].0 == files[1].0, || "model files differ".into())?;
    ensure(files[0].1 == files[1].1, || "manifests differ".into())?;
    Ok(format!(
        "model {} bytes and manifest {} bytes identical",
        files[0].0.len(),
        files[0].1.len()
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("operator corner soundness", criterion_1),
        ("crispness band", criterion_2),
        ("gradient correctness", criterion_3),
        ("projection feasibility and idempotence", criterion_4),
        ("AUC oracle equivalence", criterion_5),
        ("synthetic recoverability", criterion_6),
        ("Pima reproduction", criterion_7),
        ("dataset ingestion", criterion_8),
        ("rule parser", criterion_9),
        ("CLI determinism", criterion_10),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|payload| {
            let msg = payload
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| payload.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name} ({secs:.2} s): {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name} ({secs:.2} s): {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
