use pcr_core::metrics::{confusion, evaluate_run, pct, prf1, Confusion, RoundSelector};
use pcr_core::structio::{parse_critique, parse_reasoning};
use pcr_core::{DcrRecord, Label, Prediction, Sample};
use proptest::prelude::*;

const POSITIVES: u64 = 1037;
const NEGATIVES: u64 = 1372;

/// Every (tp, fp) pair on the test split whose rounded P/R/F1/Acc match the
/// published row.
fn invert(p: f64, r: f64, f1: f64, acc: f64) -> Vec<Confusion> {
    let mut found = Vec::new();
    for tp in 0..=POSITIVES {
        for fp in 0..=NEGATIVES {
            let c = Confusion { tp, fp, fn_: POSITIVES - tp, tn: NEGATIVES - fp };
            let pc = c.percentages();
            if (pc.p, pc.r, pc.f1, pc.acc) == (p, r, f1, acc) {
                found.push(c);
            }
        }
    }
    found
}

#[test]
fn final_row_inversion() {
    let counts = invert(76.1, 91.5, 83.1, 84.0);
    assert_eq!(counts, vec![Confusion { tp: 949, fp: 298, fn_: 88, tn: 1074 }]);
    let s = prf1::<f64>(&counts[0]);
    assert!((s.p - 0.7610).abs() < 5e-5);
    assert!((s.r - 0.9151).abs() < 5e-5);
    assert!((s.f1 - 0.8310).abs() < 5e-5);
    assert!((s.acc - 0.8398).abs() < 5e-5);
}

#[test]
fn draft_row_inversion() {
    let counts = invert(75.7, 87.4, 81.1, 82.5);
    assert!(counts.contains(&Confusion { tp: 906, fp: 291, fn_: 131, tn: 1081 }), "{counts:?}");
}

fn record(i: u64, gold: Label, draft: bool, revised: bool) -> String {
    let ans = |yes: bool| if yes { "yes" } else { "no" };
    let sample = Sample::new(format!("s{i}"), "caption").unwrap().with_gold(gold);
    let mut rec = DcrRecord::new(&sample, parse_reasoning(&format!("<think>d</think><answer>{}</answer>", ans(draft))));
    rec.push_round(
        parse_critique("<feedback>look again</feedback><score>1</score>"),
        parse_reasoning(&format!("<think>r</think><answer>{}</answer>", ans(revised))),
    );
    serde_json::to_string(&rec).unwrap()
}

#[test]
fn per_round_report_reproduces_both_rows() {
    let mut lines = Vec::new();
    for i in 0..POSITIVES {
        lines.push(record(i, Label::Sarcastic, i < 906, i < 949));
    }
    for i in 0..NEGATIVES {
        lines.push(record(POSITIVES + i, Label::NotSarcastic, i < 291, i < 298));
    }
    let report = evaluate_run(&lines.join("\n"), RoundSelector::All).unwrap();
    assert_eq!(report.rows.len(), 2);
    let (d, r) = (&report.rows[0], &report.rows[1]);
    assert_eq!(d.name, "Draft");
    assert_eq!((d.f1, d.acc, d.p, d.r), (81.1, 82.5, 75.7, 87.4));
    assert_eq!(r.name, "Revise 1");
    assert_eq!((r.f1, r.acc, r.p, r.r), (83.1, 84.0, 76.1, 91.5));
    assert_eq!((r.tp, r.fp, r.fn_, r.tn), (949, 298, 88, 1074));

    let json: serde_json::Value = serde_json::from_str(&report.to_json()).unwrap();
    assert_eq!(json["rows"][1]["fn"], 88);
    assert!(report.to_table().contains("Revise 1"));

    let only_final = evaluate_run(&lines.join("\n"), RoundSelector::Final).unwrap();
    assert_eq!(only_final.rows[0].f1, 83.1);
}

#[test]
fn draft_only_file_has_one_row() {
    let sample = Sample::new("a", "t").unwrap().with_gold(Label::Sarcastic);
    let rec = DcrRecord::new(&sample, parse_reasoning("<think>x</think><answer>yes</answer>"));
    let report = evaluate_run(&serde_json::to_string(&rec).unwrap(), RoundSelector::All).unwrap();
    assert_eq!(report.rows.len(), 1);
    assert_eq!(report.rows[0].name, "Draft");
}

fn label(b: bool) -> Label {
    if b {
        Label::Sarcastic
    } else {
        Label::NotSarcastic
    }
}

fn preds_from(codes: &[u8]) -> Vec<Prediction> {
    codes
        .iter()
        .map(|c| match c {
            0 => Prediction::of(Label::Sarcastic),
            1 => Prediction::of(Label::NotSarcastic),
            _ => Prediction::invalid("?"),
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn matches_brute_force(data in prop::collection::vec((0u8..3, any::<bool>()), 1..200)) {
        let preds = preds_from(&data.iter().map(|d| d.0).collect::<Vec<_>>());
        let golds: Vec<Label> = data.iter().map(|d| label(d.1)).collect();
        let s = prf1::<f64>(&confusion(&preds, &golds).unwrap());

        // Direct counting. Unparseable answers are scored as wrong calls:
        // on a sarcastic sample a miss, otherwise a false alarm.
        let said_yes = |i: usize| data[i].0 == 0;
        let n = data.len();
        let tp = (0..n).filter(|&i| said_yes(i) && data[i].1).count() as f64;
        let called = (0..n).filter(|&i| said_yes(i) || (data[i].0 == 2 && !data[i].1)).count() as f64;
        let actual = (0..n).filter(|&i| data[i].1).count() as f64;
        let right = (0..n).filter(|&i| (data[i].0 == 0 && data[i].1) || (data[i].0 == 1 && !data[i].1)).count() as f64;
        let p = if called > 0.0 { tp / called } else { 0.0 };
        let r = if actual > 0.0 { tp / actual } else { 0.0 };
        let f1 = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
        prop_assert!((s.p - p).abs() <= 1e-12);
        prop_assert!((s.r - r).abs() <= 1e-12);
        prop_assert!((s.f1 - f1).abs() <= 1e-12);
        prop_assert!((s.acc - right / n as f64).abs() <= 1e-12);
    }

    #[test]
    fn permutation_invariant(data in prop::collection::vec((0u8..3, any::<bool>()), 1..100), rot in 0usize..100) {
        let mut shuffled = data.clone();
        let len = shuffled.len();
        shuffled.rotate_left(rot % len);
        shuffled.reverse();
        let eval = |d: &[(u8, bool)]| {
            let preds = preds_from(&d.iter().map(|x| x.0).collect::<Vec<_>>());
            let golds: Vec<Label> = d.iter().map(|x| label(x.1)).collect();
            confusion(&preds, &golds).unwrap()
        };
        prop_assert_eq!(eval(&data), eval(&shuffled));
    }

    #[test]
    fn fixing_a_miss_never_hurts(tp in 0u64..50, fp in 0u64..50, fn_ in 1u64..50, tn in 0u64..50) {
        let before = Confusion { tp, fp, fn_, tn };
        let after = Confusion { tp: tp + 1, fp, fn_: fn_ - 1, tn };
        let (b, a) = (prf1::<f64>(&before), prf1::<f64>(&after));
        prop_assert!(a.r >= b.r && a.f1 >= b.f1 && a.acc >= b.acc);
        prop_assert!(pct(after.tp, after.tp + after.fn_) >= pct(before.tp, before.tp + before.fn_));
    }
}
