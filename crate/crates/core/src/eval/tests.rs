use super::*;
use crate::data::{Manifest, ManifestRow};
use crate::domain::{PathologySet, RngState};
use crate::error::Error;
use crate::inference::ZeroShotResult;
use rand::Rng;

fn manifest(labels: &[&str]) -> Manifest {
    let set = PathologySet::nih();
    let rows = labels
        .iter()
        .enumerate()
        .map(|(i, l)| ManifestRow {
            path: format!("{i}.png"),
            labels: set.parse_labels(l).unwrap(),
            patient: None,
        })
        .collect();
    Manifest::new(set, rows).unwrap()
}

fn result(ids: Vec<String>, pathologies: &[&str], probability: Vec<f64>) -> ZeroShotResult {
    let n = probability.len();
    ZeroShotResult {
        ids,
        pathologies: pathologies.iter().map(|s| s.to_string()).collect(),
        probability,
        s_pos: vec![0.0; n],
        s_neg: vec![0.0; n],
    }
}

#[test]
fn perfect_ranking_gives_one() {
    let m = manifest(&["Edema", "Mass", "Edema|Mass", "No Finding"]);
    let ids: Vec<String> = (0..4).map(|i| format!("{i}.png")).collect();
    // Columns: Edema, Mass.
    let r = result(ids, &["Edema", "Mass"], vec![0.9, 0.1, 0.2, 0.8, 0.8, 0.9, 0.1, 0.2]);
    let rep = evaluate(&r, &m).unwrap();
    assert_eq!(rep.rows.iter().map(|r| r.auc).collect::<Vec<_>>(), vec![Some(1.0), Some(1.0)]);
    assert_eq!(rep.macro_auc, Some(1.0));
    rep.validate().unwrap();
}

#[test]
fn complement_reverses_auc() {
    let mut rng = RngState::new(1, "test").rng();
    let labels: Vec<&str> = (0..50).map(|i| if i % 3 == 0 { "Edema" } else { "No Finding" }).collect();
    let m = manifest(&labels);
    let ids: Vec<String> = (0..50).map(|i| format!("{i}.png")).collect();
    let p: Vec<f64> = (0..50).map(|_| rng.gen()).collect();
    let a = evaluate(&result(ids.clone(), &["Edema"], p.clone()), &m).unwrap();
    let b = evaluate(&result(ids, &["Edema"], p.iter().map(|v| 1.0 - v).collect()), &m).unwrap();
    assert!((a.rows[0].auc.unwrap() + b.rows[0].auc.unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn random_scores_concentrate_near_half() {
    let mut rng = RngState::new(2, "test").rng();
    let labels: Vec<&str> = (0..10_000).map(|i| if i % 2 == 0 { "Edema" } else { "Mass" }).collect();
    let m = manifest(&labels);
    let ids: Vec<String> = (0..10_000).map(|i| format!("{i}.png")).collect();
    let p: Vec<f64> = (0..20_000).map(|_| rng.gen()).collect();
    let rep = evaluate(&result(ids, &["Edema", "Mass"], p), &m).unwrap();
    let mac = rep.macro_auc.unwrap();
    assert!((0.48..=0.52).contains(&mac), "{mac}");
}

#[test]
fn single_class_excluded_with_warning() {
    let m = manifest(&["Edema", "No Finding", "Edema"]);
    let ids: Vec<String> = (0..3).map(|i| format!("{i}.png")).collect();
    let r = result(ids, &["Edema", "Mass"], vec![0.9, 0.5, 0.1, 0.5, 0.8, 0.5]);
    let rep = evaluate(&r, &m).unwrap();
    assert_eq!(rep.rows[1].auc, None);
    assert_eq!(rep.macro_auc, rep.rows[0].auc);
    assert_eq!(rep.warnings.len(), 1);
    assert!(rep.warnings[0].contains("Mass"));
}

#[test]
fn missing_ids_listed() {
    let m = manifest(&["Edema", "No Finding"]);
    let r = result(vec!["0.png".into(), "zz.png".into(), "yy.png".into()], &["Edema"], vec![0.1, 0.2, 0.3]);
    match evaluate(&r, &m) {
        Err(Error::MissingIds(ids)) => assert_eq!(ids, vec!["zz.png", "yy.png"]),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn no_finding_variants_recorded() {
    let m = manifest(&["Edema", "No Finding", "Edema", "No Finding"]);
    let ids: Vec<String> = (0..4).map(|i| format!("{i}.png")).collect();
    let r = result(ids, &["Edema", "No Finding"], vec![0.9, 0.9, 0.1, 0.2, 0.8, 0.8, 0.2, 0.1]);
    let rep = evaluate(&r, &m).unwrap();
    assert_eq!(rep.metadata.macro_without_no_finding, Some(1.0));
    assert_eq!(rep.metadata.macro_with_no_finding, rep.macro_auc);
    assert_eq!(rep.auc("No Finding"), Some(0.0));
}

fn report(vals: &[(&str, f64)]) -> EvalReport {
    EvalReport::from_rows(
        "nih",
        vals.iter()
            .map(|(p, a)| AucRow {
                pathology: p.to_string(),
                auc: Some(*a),
                positives: 1,
                negatives: 1,
            })
            .collect(),
        vec![],
    )
}

#[test]
fn single_report_single_column() {
    let t = compare(&[report(&[("Edema", 0.8)])], &["run".into()]).unwrap();
    assert_eq!(t.columns.len(), 1);
    assert!(t.rows.iter().all(|r| r.values.len() == 1));
    let text = t.render();
    assert!(text.lines().any(|l| l.starts_with("Average AUC")));
}

#[test]
fn larger_value_highlighted() {
    let a = report(&[("Edema", 0.8), ("Mass", 0.6)]);
    let b = report(&[("Edema", 0.8), ("Mass", 0.7)]);
    let t = compare(&[a, b], &["a".into(), "b".into()]).unwrap();
    let text = t.render();
    let mass = text.lines().find(|l| l.starts_with("Mass")).unwrap();
    assert!(mass.contains("0.700*") && !mass.contains("0.600*"));
    let last_body = text.lines().rfind(|l| !l.starts_with('-')).unwrap();
    assert!(last_body.starts_with("Average AUC"));
}

#[test]
fn mismatched_profiles_rejected() {
    let mut b = report(&[("Edema", 0.8)]);
    b.profile = "chexpert".into();
    assert!(compare(&[report(&[("Edema", 0.8)]), b], &["a".into(), "b".into()]).is_err());
}

#[test]
fn nih_reference_renders_in_order_with_printed_macros() {
    let t = ReferenceTable::builtin("nih-zero-shot").unwrap();
    let reports = t.to_reports().unwrap();
    let table = compare(&reports, &t.columns).unwrap();
    let labels: Vec<&str> = table.rows.iter().map(|r| r.label.as_str()).collect();
    assert_eq!(labels, PathologySet::nih().names().iter().map(String::as_str).collect::<Vec<_>>());
    let macros: Vec<Option<f64>> = table.summary.as_ref().unwrap().values.clone();
    assert_eq!(macros, vec![Some(0.677), Some(0.556), Some(0.720), Some(0.742)]);
    let text = table.render();
    let avg = text.lines().find(|l| l.starts_with("Average AUC")).unwrap();
    assert!(avg.contains("0.677") && avg.contains("0.556") && avg.contains("0.720") && avg.contains("0.742*"));
    for r in &reports {
        r.validate().unwrap();
    }
}

#[test]
fn other_references_load() {
    for name in REFERENCE_NAMES {
        let t = ReferenceTable::builtin(name).unwrap();
        assert!(!t.to_table().render().is_empty());
    }
    let loss = ReferenceTable::builtin("loss-configs").unwrap();
    assert_eq!(loss.rows.len(), 4);
    let chex = ReferenceTable::builtin("chexpert-zero-shot").unwrap();
    let names: Vec<&str> = chex.rows.iter().map(|r| r.label.as_str()).collect();
    assert_eq!(names, crate::domain::CHEXPERT_PATHOLOGIES.to_vec());
}

#[test]
fn report_json_roundtrip() {
    let r = report(&[("Edema", 0.8), ("Mass", 0.6)]);
    let back: EvalReport = serde_json::from_str(&r.to_json().unwrap()).unwrap();
    assert_eq!(back, r);
}
